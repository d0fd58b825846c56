#pragma once

#include <cstdint>

namespace nmpsa {

struct EnergyBreakdown {
  double matrix = 0;
  double vector = 0;
  double control = 0;
  double noc = 0;
  double dram = 0;

  double logic() const { return matrix + vector + control + noc; }
  double total() const { return logic() + dram; }
  EnergyBreakdown& operator+=(const EnergyBreakdown& o) {
    matrix += o.matrix;
    vector += o.vector;
    control += o.control;
    noc += o.noc;
    dram += o.dram;
    return *this;
  }
};

struct ActivityCounts {
  double macs = 0;
  double vector_elems = 0;
  double core_active_cycles = 0;
  double noc_bytes = 0;
  double dram_bytes = 0;
};

/// Peak logic-die power split used for calibration, in watts.
struct PowerCalibration {
  double matrix_w = 38.5;
  double vector_w = 14.2;
  double control_w = 4.4;
  double noc_w = 4.8;
  double total_w() const { return matrix_w + vector_w + control_w + noc_w; }
};

/// Per-activity energy rates (joules per unit).
struct EnergyModel {
  double per_mac = 0;
  double per_vector_elem = 0;
  double per_core_cycle = 0;
  double per_noc_byte = 0;
  double per_dram_byte = 4.0e-12;

  /// Rates such that every component running at peak rate dissipates its
  /// calibrated power. Peak rates: all PEs busy, all vector lanes busy, all
  /// cores clocked, every inter-PU link saturated.
  static EnergyModel calibrate(double num_pus, double cores_per_pu, double pes_per_core, double freq_hz,
                               double vector_lanes_per_core, double noc_links, double noc_link_bw,
                               const PowerCalibration& power = {}, double dram_j_per_byte = 4.0e-12);

  EnergyBreakdown energy(const ActivityCounts& a) const;
};

}  // namespace nmpsa
