#include "nmpsa/emulator.hpp"

#include <stdexcept>
#include <string>

#include "nmpsa/perf_model.hpp"

namespace nmpsa {

Matrix Matrix::random(count_t r, count_t c, std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  Matrix m(r, c);
  std::uniform_int_distribution<std::int64_t> dist(lo, hi);
  for (auto& v : m.data) v = dist(rng);
  return m;
}

Matrix reference_matmul(const Matrix& a, const Matrix& b) {
  if (a.cols != b.rows) throw std::invalid_argument("inner dimensions differ");
  Matrix c(a.rows, b.cols);
  for (count_t i = 0; i < a.rows; ++i)
    for (count_t j = 0; j < b.cols; ++j) {
      std::int64_t acc = 0;
      for (count_t k = 0; k < a.cols; ++k) acc += a(i, k) * b(k, j);
      c(i, j) = acc;
    }
  return c;
}

namespace {

// A value travelling through the fabric. Padding enters as a valid bubble of
// zero so the pipeline drains over the full logical extent.
struct Reg {
  std::int64_t v = 0;
  bool valid = false;
  bool real = false;  // false for padding bubbles
};

class Fabric {
 public:
  explicit Fabric(const MappingPlan& plan) : plan_(plan), R_(plan.logical.rows), C_(plan.logical.cols) {
    const count_t P = plan.array.phys_rows, Q = plan.array.phys_cols;
    if (R_ * C_ != P * Q) throw std::logic_error("logical shape does not cover the physical fabric");
    phys_.resize(static_cast<std::size_t>(R_ * C_));
    for (count_t r = 0; r < R_; ++r)
      for (count_t c = 0; c < C_; ++c) {
        const PhysCoord p = plan.to_physical(r, c);
        if (p.row < 0 || p.row >= P || p.col < 0 || p.col >= Q)
          throw std::logic_error("mapping leaves the physical fabric");
        phys_[idx(r, c)] = p.row * Q + p.col;
      }
    // Every logical hop must be a physical neighbour or a listed turn link.
    east_is_turn_.assign(static_cast<std::size_t>(R_ * C_), false);
    for (count_t r = 0; r < R_; ++r)
      for (count_t c = 0; c + 1 < C_; ++c) {
        const PhysCoord a = plan.to_physical(r, c), b = plan.to_physical(r, c + 1);
        if (a.row == b.row && (a.col - b.col == 1 || b.col - a.col == 1)) continue;
        if (!is_turn_link(a, b))
          throw std::logic_error("east hop from logical (" + std::to_string(r) + "," + std::to_string(c) +
                                 ") is not a physical link");
        east_is_turn_[idx(r, c)] = true;
      }
    for (count_t r = 0; r + 1 < R_; ++r)
      for (count_t c = 0; c < C_; ++c) {
        const PhysCoord a = plan.to_physical(r, c), b = plan.to_physical(r + 1, c);
        if (!(a.col == b.col && b.row - a.row == 1)) throw std::logic_error("south hop is not a physical link");
      }
  }

  count_t idx(count_t r, count_t c) const { return r * C_ + c; }
  count_t phys(count_t r, count_t c) const { return phys_[static_cast<std::size_t>(idx(r, c))]; }
  bool east_turn(count_t r, count_t c) const { return east_is_turn_[static_cast<std::size_t>(idx(r, c))]; }
  count_t rows() const { return R_; }
  count_t cols() const { return C_; }

 private:
  bool is_turn_link(const PhysCoord& a, const PhysCoord& b) const {
    for (const auto& t : plan_.turn_links)
      if (t.from == a && t.to == b) return true;
    return false;
  }

  const MappingPlan& plan_;
  count_t R_, C_;
  std::vector<count_t> phys_;
  std::vector<bool> east_is_turn_;
};

using Grid = std::vector<Reg>;  // indexed by physical PE

// Physical column shift chains load one value per PE over phys_rows cycles.
// value_at(prow, pcol) gives what each physical PE must hold afterwards.
template <typename F>
std::vector<std::int64_t> column_preload(const ArrayConfig& a, F value_at) {
  const count_t P = a.phys_rows, Q = a.phys_cols;
  std::vector<std::int64_t> reg(static_cast<std::size_t>(P * Q), 0);
  for (count_t t = 0; t < P; ++t) {
    for (count_t pr = P - 1; pr > 0; --pr)
      for (count_t pc = 0; pc < Q; ++pc)
        reg[static_cast<std::size_t>(pr * Q + pc)] = reg[static_cast<std::size_t>((pr - 1) * Q + pc)];
    for (count_t pc = 0; pc < Q; ++pc) reg[static_cast<std::size_t>(pc)] = value_at(P - 1 - t, pc);
  }
  return reg;
}

}  // namespace

EmulationResult emulate(const MappingPlan& plan, const Matrix& a, const Matrix& b, const EmulatorOptions& opts) {
  if (a.cols != b.rows) throw std::invalid_argument("inner dimensions differ");
  const Fabric f(plan);
  const count_t R = f.rows(), C = f.cols();
  const count_t M = a.rows, K = a.cols, N = b.cols;
  const bool os = plan.dataflow == Dataflow::OS;
  const count_t spatial = os ? N : K;
  const count_t T = os ? K : N;
  if (M > R || spatial > C || M < 1 || spatial < 1 || T < 1)
    throw std::invalid_argument("tile exceeds the logical array");

  const ArrayConfig& arr = plan.array;
  const count_t Q = arr.phys_cols;
  const auto npe = static_cast<std::size_t>(arr.pes());

  // Map physical PE back to logical coordinates for the preload chains.
  std::vector<count_t> lrow(npe), lcol(npe);
  for (count_t r = 0; r < R; ++r)
    for (count_t c = 0; c < C; ++c) {
      lrow[static_cast<std::size_t>(f.phys(r, c))] = r;
      lcol[static_cast<std::size_t>(f.phys(r, c))] = c;
    }

  EmulationResult res;
  res.c = Matrix(M, N);
  res.preload_cycles = arr.phys_rows;

  // OS clears accumulators through the chains; IS loads the stationary inputs.
  std::vector<std::int64_t> stat = column_preload(arr, [&](count_t pr, count_t pc) -> std::int64_t {
    if (os) return 0;
    const auto p = static_cast<std::size_t>(pr * Q + pc);
    const count_t r = lrow[p], c = lcol[p];
    return (r < M && c < K) ? a(r, c) : 0;
  });

  Grid west(npe), north(npe);  // operands held in each PE this cycle
  Grid psum(npe);              // IS partial sums travelling east
  count_t cycle = 0;
  const count_t last_inject = T - 1 + std::max(R, C) - 1;

  for (;; ++cycle) {
    // Shift east (west operand or partial sum) and south (north operand).
    Grid& east_flow = os ? west : psum;
    for (count_t r = 0; r < R; ++r) {
      const Reg out = east_flow[static_cast<std::size_t>(f.phys(r, C - 1))];
      if (!os && out.valid && out.real) {
        const count_t n = cycle - 1 - r - (C - 1);
        res.c(r, n) = out.v;
      }
      for (count_t c = C - 1; c > 0; --c) {
        const Reg& src = east_flow[static_cast<std::size_t>(f.phys(r, c - 1))];
        if (src.valid && f.east_turn(r, c - 1)) ++res.turn_hops;
        east_flow[static_cast<std::size_t>(f.phys(r, c))] = src;
      }
      east_flow[static_cast<std::size_t>(f.phys(r, 0))] = Reg{};
    }
    for (count_t c = 0; c < C; ++c) {
      for (count_t r = R - 1; r > 0; --r)
        north[static_cast<std::size_t>(f.phys(r, c))] = north[static_cast<std::size_t>(f.phys(r - 1, c))];
      north[static_cast<std::size_t>(f.phys(0, c))] = Reg{};
    }

    // Inject skewed operands at the west and north edges.
    for (count_t r = 0; r < R; ++r) {
      const count_t t = cycle - r;
      if (t < 0 || t >= T) continue;
      Reg& dst = (os ? west : psum)[static_cast<std::size_t>(f.phys(r, 0))];
      if (os)
        dst = r < M ? Reg{a(r, t), true, true} : Reg{0, true, false};
      else
        dst = r < M ? Reg{0, true, true} : Reg{0, true, false};
    }
    for (count_t c = 0; c < C; ++c) {
      const count_t t = cycle - c;
      if (t < 0 || t >= T) continue;
      Reg& dst = north[static_cast<std::size_t>(f.phys(0, c))];
      if (os)
        dst = c < N ? Reg{b(t, c), true, true} : Reg{0, true, false};
      else
        dst = c < K ? Reg{b(c, t), true, true} : Reg{0, true, false};
    }

    // MAC.
    bool busy = false;
    for (count_t r = 0; r < R; ++r)
      for (count_t c = 0; c < C; ++c) {
        const auto p = static_cast<std::size_t>(f.phys(r, c));
        const Reg& nb = north[p];
        if (os) {
          const Reg& wa = west[p];
          busy = busy || wa.valid || nb.valid;
          if (wa.valid && nb.valid) {
            stat[p] += wa.v * nb.v;
            if (wa.real && nb.real) ++res.macs_performed;
          }
        } else {
          Reg& ps = psum[p];
          busy = busy || ps.valid || nb.valid;
          if (ps.valid && nb.valid) {
            ps.v += stat[p] * nb.v;
            if (ps.real && nb.real && c < K) ++res.macs_performed;
          }
        }
      }
    if (!busy && cycle > last_inject) break;
  }
  // The final cycle drained the fabric and doubles as the writeback cycle.
  res.cycles = res.preload_cycles + cycle + 1;

  if (os)
    for (count_t r = 0; r < M; ++r)
      for (count_t c = 0; c < N; ++c) res.c(r, c) = stat[static_cast<std::size_t>(f.phys(r, c))];
  if (opts.inject_fault && M > 0 && N > 0) res.c(0, 0) += 1;
  return res;
}

namespace {

struct CaseSpec {
  count_t phys;
  LogicalShape shape;
  Dataflow df;
  count_t trial;
};

std::vector<CaseSpec> enumerate_cases(const CheckGrid& grid) {
  std::vector<CaseSpec> out;
  for (count_t p : grid.phys_sizes) {
    ArrayConfig cfg;
    cfg.phys_rows = cfg.phys_cols = p;
    cfg.granularity = grid.granularity;
    for (const auto& s : logical_shapes(cfg))
      for (Dataflow df : {Dataflow::OS, Dataflow::IS})
        for (count_t t = 0; t < grid.trials; ++t) out.push_back({p, s, df, t});
  }
  return out;
}

CheckCase run_case(const CheckGrid& grid, const CaseSpec& cs, std::size_t index) {
  ArrayConfig cfg;
  cfg.phys_rows = cfg.phys_cols = cs.phys;
  cfg.granularity = grid.granularity;
  // Seeded per case so the parallel and serial grids see identical inputs.
  std::mt19937_64 rng(grid.seed + 0x9e3779b97f4a7c15ULL * (index + 1));
  auto pick = [&](count_t lo, count_t hi) { return std::uniform_int_distribution<count_t>(lo, hi)(rng); };
  const count_t m = pick(1, cs.shape.rows);
  const count_t spatial = pick(1, cs.shape.cols);
  const count_t temporal = pick(1, 2 * cs.shape.rows + 4);
  const bool os = cs.df == Dataflow::OS;
  const count_t n = os ? spatial : temporal;
  const count_t k = os ? temporal : spatial;

  const Matrix a = Matrix::random(m, k, rng);
  const Matrix b = Matrix::random(k, n, rng);
  const MappingPlan plan = snake_map(cfg, cs.shape, cs.df);
  const EmulationResult r = emulate(plan, a, b, {grid.inject_fault});

  GemmOp op{m, n, k, "check", 0, Nonlinear::None, 1, 2};
  CheckCase c;
  c.phys = cs.phys;
  c.shape = cs.shape;
  c.dataflow = cs.df;
  c.m = m;
  c.n = n;
  c.k = k;
  c.output_ok = r.c == reference_matmul(a, b);
  c.emulated_cycles = r.cycles;
  c.analytic_cycles = array_cycles(tile_gemm(op, cs.shape, cs.df, cs.phys));
  c.cycles_ok = c.emulated_cycles == c.analytic_cycles;
  return c;
}

CheckSummary summarize(const std::vector<CheckCase>& results) {
  constexpr std::size_t kMaxCounterexamples = 8;
  CheckSummary s;
  s.cases = static_cast<count_t>(results.size());
  for (const auto& c : results) {
    if (!c.output_ok) ++s.output_failures;
    if (!c.cycles_ok) ++s.cycle_failures;
    if ((!c.output_ok || !c.cycles_ok) && s.failures.size() < kMaxCounterexamples) s.failures.push_back(c);
  }
  return s;
}

}  // namespace

CheckSummary run_emulation_grid(const CheckGrid& grid) {
  const auto cases = enumerate_cases(grid);
  std::vector<CheckCase> results(cases.size());
  const auto n = static_cast<std::int64_t>(cases.size());
#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t i = 0; i < n; ++i)
    results[static_cast<std::size_t>(i)] =
        run_case(grid, cases[static_cast<std::size_t>(i)], static_cast<std::size_t>(i));
  return summarize(results);
}

CheckSummary run_emulation_grid_serial(const CheckGrid& grid) {
  const auto cases = enumerate_cases(grid);
  std::vector<CheckCase> results;
  results.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) results.push_back(run_case(grid, cases[i], i));
  return summarize(results);
}

}  // namespace nmpsa
