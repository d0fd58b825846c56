#include "nmpsa/system.hpp"

namespace nmpsa {

std::string to_string(Engine e) {
  switch (e) {
    case Engine::Systolic: return "systolic";
    case Engine::MacTree: return "mac-tree";
    case Engine::RooflineOnly: return "roofline-only";
  }
  return "?";
}

double System::peak_flops() const {
  if (peak_flops_override) return *peak_flops_override;
  if (engine == Engine::MacTree)
    return static_cast<double>(mac_tree.num_pus * mac_tree.macs_per_cycle) * 2.0 * mac_tree.freq_hz;
  return static_cast<double>(array.num_pus * array.cores_per_pu * array.pes()) * 2.0 * array.freq_hz;
}

double System::pu_vector_throughput() const {
  // The MAC-Tree PU is given the same vector width as a four-core PU.
  const count_t cores = engine == Engine::MacTree ? 4 : array.cores_per_pu;
  return static_cast<double>(vector_lanes_per_core * cores);
}

void System::validate() const {
  mem.validate();
  if (vector_lanes_per_core < 1) throw ConfigError("vector lanes must be >= 1");
  if (engine == Engine::Systolic) array.validate();
  if (engine == Engine::MacTree && (mac_tree.macs_per_cycle < 1 || mac_tree.freq_hz <= 0 || mac_tree.num_pus < 1))
    throw ConfigError("MAC-Tree parameters must be positive");
  if (peak_flops_override && *peak_flops_override <= 0) throw ConfigError("peak FLOP/s must be positive");
}

void System::calibrate_energy() {
  if (engine == Engine::MacTree) {
    // Same per-activity rates as the default stack: the comparison is about time.
    System ref = make_system("default");
    energy = ref.energy;
    return;
  }
  energy = EnergyModel::calibrate(static_cast<double>(array.num_pus), static_cast<double>(array.cores_per_pu),
                                  static_cast<double>(array.pes()), array.freq_hz,
                                  static_cast<double>(vector_lanes_per_core), static_cast<double>(noc_links),
                                  mem.noc_link_bw, PowerCalibration{}, energy.per_dram_byte);
}

std::vector<std::string> system_preset_names() {
  return {"default", "fixed-48x48", "fixed-8x288", "mac-tree", "stratum", "duplex"};
}

System make_system(const std::string& preset) {
  System s;
  s.name = preset;
  if (preset == "default") {
  } else if (preset == "fixed-48x48" || preset == "fixed-8x288") {
    // Fixed-shape comparators at 1 GHz; both dataflows stay available.
    const bool square = preset == "fixed-48x48";
    s.array.phys_rows = square ? 48 : 8;
    s.array.phys_cols = square ? 48 : 288;
    s.array.granularity = s.array.phys_rows;
    s.array.reconfigurable = false;
    s.array.freq_hz = 1.0e9;
  } else if (preset == "mac-tree" || preset == "stratum") {
    s.engine = Engine::MacTree;
  } else if (preset == "duplex") {
    // Known here only through its compute-to-bandwidth ratio of 8 FLOP/B.
    s.engine = Engine::RooflineOnly;
    s.peak_flops_override = 8.0 * s.mem.total_dram_bw;
  } else {
    throw ConfigError("unknown system preset '" + preset + "'");
  }
  if (s.engine == Engine::MacTree) {
    s.name = "mac-tree";
  }
  if (s.engine != Engine::RooflineOnly) s.calibrate_energy();
  return s;
}

}  // namespace nmpsa
