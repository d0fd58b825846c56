#pragma once

#include <compare>
#include <string>
#include <vector>

#include "nmpsa/workload.hpp"

namespace nmpsa {

enum class Dataflow { OS, IS };

std::string to_string(Dataflow df);

/// Physical PE fabric of one core, plus the multi-core organization around it.
struct ArrayConfig {
  count_t phys_rows = 64;
  count_t phys_cols = 64;
  count_t granularity = 8;
  double freq_hz = 8.0e8;
  count_t cores_per_pu = 4;
  count_t num_pus = 16;
  bool reconfigurable = true;

  count_t pes() const { return phys_rows * phys_cols; }
  void validate() const;
};

struct LogicalShape {
  count_t rows = 0;
  count_t cols = 0;
  count_t strips = 1;

  count_t pes() const { return rows * cols; }
  std::string str() const { return std::to_string(rows) + "x" + std::to_string(cols); }
  auto operator<=>(const LogicalShape&) const = default;
};

std::vector<LogicalShape> logical_shapes(const ArrayConfig& cfg);
LogicalShape physical_shape(const ArrayConfig& cfg);

/// Smallest legal logical row count covering m; falls back to the physical
/// shape when m exceeds every legal row count.
LogicalShape select_logical_shape(count_t m, const ArrayConfig& cfg);

struct PhysCoord {
  count_t row = 0;
  count_t col = 0;
  bool operator==(const PhysCoord&) const = default;
};

enum class Direction { LeftToRight, RightToLeft };

struct Strip {
  count_t first_row = 0;  // inclusive
  count_t last_row = 0;   // exclusive
  Direction dir = Direction::LeftToRight;
};

/// Vertical link joining logical row `logical_row` of strip `from_strip` to the
/// same logical row of the next strip, at physical column `edge_col`.
struct TurnLink {
  count_t from_strip = 0;
  count_t logical_row = 0;
  count_t edge_col = 0;
  PhysCoord from;
  PhysCoord to;
};

struct MappingPlan {
  ArrayConfig array;
  LogicalShape logical;
  Dataflow dataflow = Dataflow::OS;
  std::vector<Strip> strips;
  std::vector<TurnLink> turn_links;
  count_t left_ports = 1;
  count_t right_ports = 0;

  /// Physical PE that hosts logical PE (r, c).
  PhysCoord to_physical(count_t r, count_t c) const;
};

MappingPlan snake_map(const ArrayConfig& cfg, const LogicalShape& shape, Dataflow df);

}  // namespace nmpsa
