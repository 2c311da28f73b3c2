#pragma once

#include <filesystem>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace pathdens::cli {

// Shortest round-trip formatting, identical across runs.
std::string num(double x);

// Collects CSV rows in memory; write() emits a "# scenario_hash=... seed=..." header
// comment, the column names and the rows.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> columns) : columns_(std::move(columns)) {}
  void add(const std::vector<double>& row);
  std::size_t rows() const { return rows_.size(); }
  void write(const std::filesystem::path& file, const std::string& command, const Scenario& s) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> rows_;
};

// {"command", "scenario_hash", "seed", "results"} with sorted keys.
void write_summary(const std::filesystem::path& file, const std::string& command, const Scenario& s,
                   const nlohmann::json& results);

nlohmann::json to_json(const Eigen::MatrixXd& m);
nlohmann::json to_json(const Eigen::VectorXd& v);

}  // namespace pathdens::cli
