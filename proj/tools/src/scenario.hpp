#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <optional>
#include <stdexcept>
#include <string>

#include "pathdens/coeffs.hpp"
#include "pathdens/families.hpp"
#include "pathdens/timegrid.hpp"

namespace pathdens::cli {

using json = nlohmann::json;

// Invalid scenario content; the message starts with the offending key.
class ScenarioError : public std::invalid_argument {
 public:
  ScenarioError(const std::string& key, const std::string& what)
      : std::invalid_argument(key + ": " + what), key_(key) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

struct Scenario {
  json raw;
  std::string hash;  // FNV-1a 64 of the canonical (sorted, compact) dump, hex
  std::string family;
  std::optional<CoefficientField> field;  // absent for a delay-only scenario
  std::optional<DelayDynamics> delay;
  MeasureSpec measure;
  Config config;
  Eigen::VectorXd x0;
  json options = json::object();

  int n() const;
};

std::string fnv1a_hex(const std::string& bytes);

// Parses, validates the config against the measure and builds the field.
Scenario parse_scenario(const json& raw);
Scenario load_scenario(const std::filesystem::path& file);

// Typed accessors for command options; ScenarioError names "options.<key>".
double option_double(const Scenario& s, const std::string& key, double fallback);
std::size_t option_size(const Scenario& s, const std::string& key, std::size_t fallback);
std::string option_string(const Scenario& s, const std::string& key, const std::string& fallback);
std::vector<double> option_doubles(const Scenario& s, const std::string& key, std::vector<double> fallback);

}  // namespace pathdens::cli
