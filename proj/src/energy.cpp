#include "nmpsa/energy.hpp"

#include <stdexcept>

namespace nmpsa {

EnergyModel EnergyModel::calibrate(double num_pus, double cores_per_pu, double pes_per_core, double freq_hz,
                                   double vector_lanes_per_core, double noc_links, double noc_link_bw,
                                   const PowerCalibration& power, double dram_j_per_byte) {
  const double cores = num_pus * cores_per_pu;
  if (cores <= 0 || pes_per_core <= 0 || freq_hz <= 0 || vector_lanes_per_core <= 0 || noc_links <= 0 ||
      noc_link_bw <= 0)
    throw std::invalid_argument("energy calibration needs positive peak rates");
  EnergyModel m;
  m.per_mac = power.matrix_w / (cores * pes_per_core * freq_hz);
  m.per_vector_elem = power.vector_w / (cores * vector_lanes_per_core * freq_hz);
  m.per_core_cycle = power.control_w / (cores * freq_hz);
  m.per_noc_byte = power.noc_w / (noc_links * noc_link_bw);
  m.per_dram_byte = dram_j_per_byte;
  return m;
}

EnergyBreakdown EnergyModel::energy(const ActivityCounts& a) const {
  if (a.macs < 0 || a.vector_elems < 0 || a.core_active_cycles < 0 || a.noc_bytes < 0 || a.dram_bytes < 0)
    throw std::invalid_argument("activity counts must be non-negative");
  return {a.macs * per_mac, a.vector_elems * per_vector_elem, a.core_active_cycles * per_core_cycle,
          a.noc_bytes * per_noc_byte, a.dram_bytes * per_dram_byte};
}

}  // namespace nmpsa
