#include "nmpsa/report.hpp"

#include <stdexcept>

namespace nmpsa {

void Table::add_row(std::vector<nlohmann::json> cells) {
  if (cells.size() != columns_.size()) throw std::invalid_argument("row width does not match the header");
  rows_.push_back(std::move(cells));
}

const nlohmann::json& Table::at(std::size_t row, const std::string& column) const {
  for (std::size_t c = 0; c < columns_.size(); ++c)
    if (columns_[c] == column) return rows_.at(row).at(c);
  throw std::out_of_range("no column '" + column + "'");
}

namespace {
std::string csv_cell(const nlohmann::json& v) {
  if (!v.is_string()) return v.dump();
  const auto& s = v.get_ref<const std::string&>();
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch;
  }
  return q + "\"";
}
}  // namespace

void Table::write_csv(std::ostream& os) const {
  for (std::size_t c = 0; c < columns_.size(); ++c) os << (c ? "," : "") << columns_[c];
  os << '\n';
  for (const auto& row : rows_) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << csv_cell(row[c]);
    os << '\n';
  }
}

nlohmann::json Table::to_json() const {
  auto out = nlohmann::json::array();
  for (const auto& row : rows_) {
    nlohmann::json obj = nlohmann::json::object();
    for (std::size_t c = 0; c < row.size(); ++c) obj[columns_[c]] = row[c];
    out.push_back(std::move(obj));
  }
  return out;
}

nlohmann::json to_json(const System& s) {
  nlohmann::json j = {
      {"name", s.name},
      {"engine", to_string(s.engine)},
      {"total_dram_bw", s.mem.total_dram_bw},
      {"noc_link_bw", s.mem.noc_link_bw},
      {"weight_buf_bytes", s.mem.weight_buf_bytes},
      {"act_buf_bytes", s.mem.act_buf_bytes},
      {"double_buffered", s.mem.double_buffered},
      {"writeback_shares_bandwidth", s.mem.writeback_shares_bandwidth},
      {"vector_lanes_per_core", s.vector_lanes_per_core},
      {"peak_flops", s.peak_flops()},
      {"dram_j_per_byte", s.energy.per_dram_byte},
  };
  if (s.engine == Engine::MacTree) {
    j["mac_tree"] = {{"macs_per_cycle", s.mac_tree.macs_per_cycle},
                     {"freq_hz", s.mac_tree.freq_hz},
                     {"align", s.mac_tree.align},
                     {"unaligned_utilization", s.mac_tree.unaligned_utilization},
                     {"num_pus", s.mac_tree.num_pus}};
  } else if (s.engine == Engine::Systolic) {
    j["array"] = {{"phys_rows", s.array.phys_rows},       {"phys_cols", s.array.phys_cols},
                  {"granularity", s.array.granularity},   {"freq_hz", s.array.freq_hz},
                  {"cores_per_pu", s.array.cores_per_pu}, {"num_pus", s.array.num_pus},
                  {"reconfigurable", s.array.reconfigurable}};
  }
  return j;
}

nlohmann::json to_json(const EnergyBreakdown& e) {
  return {{"matrix", e.matrix}, {"vector", e.vector}, {"control", e.control},
          {"noc", e.noc},       {"dram", e.dram},     {"total", e.total()}};
}

nlohmann::json to_json(const CostReport& r) {
  return {{"total_cycles", r.total_cycles},
          {"array_cycles", r.array_cycles},
          {"stall_cycles", r.stall_cycles},
          {"collective_cycles", r.collective_cycles},
          {"reconfig_cycles", r.reconfig_cycles},
          {"vector_cycles", r.vector_cycles},
          {"overlap_cycles", r.overlap_cycles},
          {"seconds", r.seconds},
          {"utilization", r.utilization},
          {"macs", r.macs},
          {"dram_bytes", r.dram_bytes},
          {"noc_bytes", r.noc_bytes},
          {"energy_j", to_json(r.energy)}};
}

}  // namespace nmpsa
