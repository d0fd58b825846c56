#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "nmpsa/array_model.hpp"

namespace nmpsa {

/// Dense row-major integer matrix used by the emulator and its oracle.
struct Matrix {
  count_t rows = 0;
  count_t cols = 0;
  std::vector<std::int64_t> data;

  Matrix() = default;
  Matrix(count_t r, count_t c) : rows(r), cols(c), data(static_cast<std::size_t>(r * c), 0) {}

  std::int64_t& operator()(count_t r, count_t c) { return data[static_cast<std::size_t>(r * cols + c)]; }
  std::int64_t operator()(count_t r, count_t c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
  bool operator==(const Matrix&) const = default;

  static Matrix random(count_t r, count_t c, std::mt19937_64& rng, std::int64_t lo = -8, std::int64_t hi = 8);
};

/// Plain triple-loop product; the correctness oracle for emulate().
Matrix reference_matmul(const Matrix& a, const Matrix& b);

struct EmulationResult {
  Matrix c;
  count_t cycles = 0;
  count_t preload_cycles = 0;
  count_t macs_performed = 0;  // non-bubble MACs
  count_t turn_hops = 0;       // operand or partial-sum transfers over turn links
};

struct EmulatorOptions {
  bool inject_fault = false;  // corrupts one output element (test hook)
};

/// Cycle-by-cycle, PE-by-PE emulation of a single tile on the serpentine fabric.
/// Throws std::invalid_argument when the tile exceeds the logical array.
EmulationResult emulate(const MappingPlan& plan, const Matrix& a, const Matrix& b,
                        const EmulatorOptions& opts = {});

/// Correctness grid: every legal shape of each physical size, both dataflows,
/// `trials` random single-tile GEMMs per configuration.
struct CheckGrid {
  std::vector<count_t> phys_sizes{4, 8};
  count_t granularity = 2;
  count_t trials = 100;
  std::uint64_t seed = 0x5eed;
  bool inject_fault = false;
};

struct CheckCase {
  count_t phys = 0;
  LogicalShape shape;
  Dataflow dataflow = Dataflow::OS;
  count_t m = 0, n = 0, k = 0;
  bool output_ok = false;
  bool cycles_ok = false;
  count_t emulated_cycles = 0;
  count_t analytic_cycles = 0;
};

struct CheckSummary {
  count_t cases = 0;
  count_t output_failures = 0;
  count_t cycle_failures = 0;
  std::vector<CheckCase> failures;  // first few counterexamples, in case order
  bool all_passed() const { return output_failures == 0 && cycle_failures == 0; }
};

CheckSummary run_emulation_grid(const CheckGrid& grid);         // OpenMP across cases
CheckSummary run_emulation_grid_serial(const CheckGrid& grid);  // reference path

}  // namespace nmpsa
