#include "nmpsa/array_model.hpp"

#include <algorithm>

namespace nmpsa {

std::string to_string(Dataflow df) { return df == Dataflow::OS ? "OS" : "IS"; }

void ArrayConfig::validate() const {
  if (phys_rows < 1 || phys_cols < 1) throw ConfigError("array dimensions must be >= 1");
  if (granularity < 1 || phys_rows % granularity != 0)
    throw ConfigError("granularity must divide phys_rows");
  if (freq_hz <= 0) throw ConfigError("frequency must be positive");
  if (cores_per_pu < 1 || num_pus < 1) throw ConfigError("core and PU counts must be >= 1");
}

LogicalShape physical_shape(const ArrayConfig& cfg) { return {cfg.phys_rows, cfg.phys_cols, 1}; }

std::vector<LogicalShape> logical_shapes(const ArrayConfig& cfg) {
  cfg.validate();
  if (!cfg.reconfigurable) return {physical_shape(cfg)};
  std::vector<LogicalShape> out;
  for (count_t rows = cfg.granularity; rows <= cfg.phys_rows; rows += cfg.granularity) {
    if (cfg.phys_rows % rows != 0) continue;
    const count_t strips = cfg.phys_rows / rows;
    out.push_back({rows, cfg.phys_cols * strips, strips});
  }
  return out;
}

LogicalShape select_logical_shape(count_t m, const ArrayConfig& cfg) {
  const auto shapes = logical_shapes(cfg);
  const count_t want = std::min(std::max<count_t>(m, 1), cfg.phys_rows);
  for (const auto& s : shapes)
    if (s.rows >= want) return s;
  return physical_shape(cfg);
}

PhysCoord MappingPlan::to_physical(count_t r, count_t c) const {
  const count_t s = c / array.phys_cols;
  const count_t off = c % array.phys_cols;
  const count_t col = (s % 2 == 0) ? off : array.phys_cols - 1 - off;
  return {s * logical.rows + r, col};
}

MappingPlan snake_map(const ArrayConfig& cfg, const LogicalShape& shape, Dataflow df) {
  const auto legal = logical_shapes(cfg);
  if (std::find(legal.begin(), legal.end(), shape) == legal.end())
    throw ConfigError("logical shape " + shape.str() + " is not legal for this array");

  MappingPlan plan;
  plan.array = cfg;
  plan.logical = shape;
  plan.dataflow = df;
  const count_t g = shape.strips;
  for (count_t s = 0; s < g; ++s) {
    plan.strips.push_back({s * shape.rows, (s + 1) * shape.rows,
                           s % 2 == 0 ? Direction::LeftToRight : Direction::RightToLeft});
  }
  // Even strips end on the right edge, odd strips on the left edge.
  for (count_t s = 0; s + 1 < g; ++s) {
    const count_t edge = (s % 2 == 0) ? cfg.phys_cols - 1 : 0;
    for (count_t r = 0; r < shape.rows; ++r) {
      plan.turn_links.push_back(
          {s, r, edge, {s * shape.rows + r, edge}, {(s + 1) * shape.rows + r, edge}});
    }
  }
  plan.left_ports = (g + 1) / 2;
  plan.right_ports = g / 2;
  return plan;
}

}  // namespace nmpsa
