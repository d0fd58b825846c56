#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nmpsa/array_model.hpp"
#include "nmpsa/energy.hpp"
#include "nmpsa/perf_model.hpp"

namespace nmpsa {

enum class Engine { Systolic, MacTree, RooflineOnly };

/// One NMP stack: PUs, cores, memory, vector units and energy rates.
struct System {
  std::string name = "default";
  Engine engine = Engine::Systolic;
  ArrayConfig array;
  MemorySystem mem;
  MacTreeParams mac_tree;
  count_t vector_lanes_per_core = 64;
  count_t noc_links = 24;  // links of the 4x4 mesh; the 1x16 chain reuses 15 of them
  // Set only for presets known solely by their roofline.
  std::optional<double> peak_flops_override;
  EnergyModel energy;

  double freq_hz() const { return engine == Engine::MacTree ? mac_tree.freq_hz : array.freq_hz; }
  count_t num_pus() const { return engine == Engine::MacTree ? mac_tree.num_pus : array.num_pus; }
  double peak_flops() const;
  /// Vector elements per cycle available to one PU.
  double pu_vector_throughput() const;

  void validate() const;
  /// Recompute energy rates after any structural override.
  void calibrate_energy();
};

System make_system(const std::string& preset);
std::vector<std::string> system_preset_names();

std::string to_string(Engine e);

}  // namespace nmpsa
