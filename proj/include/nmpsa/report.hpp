#pragma once

#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nmpsa/scheduler.hpp"

namespace nmpsa {

/// Column-ordered table whose cells are JSON values, so the CSV and JSON
/// renderings carry identical numbers.
class Table {
 public:
  explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

  void add_row(std::vector<nlohmann::json> cells);
  const std::vector<std::string>& columns() const { return columns_; }
  std::size_t size() const { return rows_.size(); }
  const nlohmann::json& at(std::size_t row, const std::string& column) const;

  void write_csv(std::ostream& os) const;
  nlohmann::json to_json() const;  // array of objects

 private:
  std::vector<std::string> columns_;
  std::vector<std::vector<nlohmann::json>> rows_;
};

nlohmann::json to_json(const System& sys);
nlohmann::json to_json(const CostReport& r);
nlohmann::json to_json(const EnergyBreakdown& e);

}  // namespace nmpsa
