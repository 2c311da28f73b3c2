#include "output.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace pathdens::cli {

std::string num(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return fmt::format("{}", x);
}

void CsvTable::add(const std::vector<double>& row) {
  if (row.size() != columns_.size()) throw std::logic_error("csv row width differs from the header");
  std::string line;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) line += ',';
    line += num(row[i]);
  }
  rows_.push_back(std::move(line));
}

void CsvTable::write(const std::filesystem::path& file, const std::string& command, const Scenario& s) const {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << "# pathdens " << command << " scenario_hash=" << s.hash << " seed=" << s.config.seed << '\n';
  for (std::size_t i = 0; i < columns_.size(); ++i) out << (i ? "," : "") << columns_[i];
  out << '\n';
  for (const auto& r : rows_) out << r << '\n';
}

void write_summary(const std::filesystem::path& file, const std::string& command, const Scenario& s,
                   const nlohmann::json& results) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["scenario_hash"] = s.hash;
  doc["seed"] = s.config.seed;
  doc["results"] = results;
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << doc.dump(2) << '\n';
}

nlohmann::json to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace pathdens::cli
