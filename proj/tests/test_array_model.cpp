#include <doctest.h>

#include <random>
#include <set>

#include "nmpsa/emulator.hpp"
#include "nmpsa/perf_model.hpp"

using namespace nmpsa;

namespace {
ArrayConfig array(count_t phys, count_t g, bool reconf = true) {
  ArrayConfig a;
  a.phys_rows = a.phys_cols = phys;
  a.granularity = g;
  a.reconfigurable = reconf;
  return a;
}

std::vector<std::string> names(const std::vector<LogicalShape>& shapes) {
  std::vector<std::string> out;
  for (const auto& s : shapes) out.push_back(s.str());
  return out;
}
}  // namespace

TEST_CASE("legal logical shapes") {
  CHECK(names(logical_shapes(array(64, 8))) == std::vector<std::string>{"8x512", "16x256", "32x128", "64x64"});
  CHECK(names(logical_shapes(array(4, 2))) == std::vector<std::string>{"2x8", "4x4"});
  CHECK(names(logical_shapes(array(48, 48, false))) == std::vector<std::string>{"48x48"});
}

TEST_CASE("logical shape selection by batch rows") {
  const ArrayConfig a = array(64, 8);
  CHECK(select_logical_shape(8, a).str() == "8x512");
  CHECK(select_logical_shape(1, a).str() == "8x512");
  CHECK(select_logical_shape(64, a).str() == "64x64");
  CHECK(select_logical_shape(20, a).str() == "32x128");
  CHECK(select_logical_shape(500, a).str() == "64x64");
}

TEST_CASE("invalid array configurations") {
  CHECK_THROWS_AS(array(64, 7).validate(), ConfigError);
  CHECK_THROWS_AS(array(0, 1).validate(), ConfigError);
}

TEST_CASE("serpentine mapping of 8x512 on 64x64") {
  const MappingPlan p = snake_map(array(64, 8), {8, 512, 8}, Dataflow::OS);
  CHECK(p.strips.size() == 8);
  CHECK(p.left_ports == 4);
  CHECK(p.right_ports == 4);
  CHECK(p.turn_links.size() == 7 * 8);
}

TEST_CASE("physical shape is a single strip") {
  const MappingPlan p = snake_map(array(64, 8), {64, 64, 1}, Dataflow::IS);
  CHECK(p.strips.size() == 1);
  CHECK(p.turn_links.empty());
  CHECK(p.left_ports == 1);
}

TEST_CASE("odd strips run right to left") {
  const MappingPlan p = snake_map(array(4, 2), {2, 8, 2}, Dataflow::OS);
  const PhysCoord c = p.to_physical(1, 5);
  CHECK(c.col == 2);
  CHECK(c.row == 3);
  CHECK(p.to_physical(0, 0) == PhysCoord{0, 0});
}

TEST_CASE("emulator matches the matmul oracle and the timing model") {
  std::mt19937_64 rng(7);
  SUBCASE("IS on 2x8 logical") {
    const MappingPlan p = snake_map(array(4, 2), {2, 8, 2}, Dataflow::IS);
    const Matrix a = Matrix::random(2, 8, rng), b = Matrix::random(8, 3, rng);
    const EmulationResult r = emulate(p, a, b);
    CHECK(r.c == reference_matmul(a, b));
    CHECK(r.cycles == 16);
  }
  SUBCASE("OS on 4x4 logical") {
    const MappingPlan p = snake_map(array(4, 2), {4, 4, 1}, Dataflow::OS);
    const Matrix a = Matrix::random(4, 5, rng), b = Matrix::random(5, 4, rng);
    const EmulationResult r = emulate(p, a, b);
    CHECK(r.c == reference_matmul(a, b));
    CHECK(r.cycles == 16);
  }
  SUBCASE("zero operands") {
    const MappingPlan p = snake_map(array(8, 2), {2, 32, 4}, Dataflow::OS);
    const Matrix a(2, 6), b(6, 20);
    const EmulationResult r = emulate(p, a, b);
    CHECK(r.c == Matrix(2, 20));
    CHECK(r.cycles == 6 + 2 + 32 - 1 + 8);
  }
}

TEST_CASE("emulator rejects operands that do not fit one tile") {
  const MappingPlan p = snake_map(array(4, 2), {2, 8, 2}, Dataflow::OS);
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(emulate(p, Matrix::random(3, 4, rng), Matrix::random(4, 4, rng)), std::invalid_argument);
}

TEST_CASE("fault hook is caught by the grid") {
  CheckGrid g;
  g.trials = 3;
  g.inject_fault = true;
  const CheckSummary s = run_emulation_grid(g);
  CHECK(s.output_failures == s.cases);
  CHECK_FALSE(s.failures.empty());
}
