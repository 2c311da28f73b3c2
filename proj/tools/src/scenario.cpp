#include "scenario.hpp"

#include <fmt/format.h>

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <set>

namespace pathdens::cli {

namespace {

void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw ScenarioError(where, "expected an object");
  for (const auto& [key, value] : obj.items())
    if (!allowed.count(key)) throw ScenarioError(where.empty() ? key : where + "." + key, "unknown key");
}

std::string join(const std::string& where, const std::string& key) { return where.empty() ? key : where + "." + key; }

double number(const json& obj, const std::string& where, const std::string& key, std::optional<double> fallback) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ScenarioError(join(where, key), "missing");
  }
  const json& v = obj.at(key);
  if (!v.is_number()) throw ScenarioError(join(where, key), "expected a number");
  return v.get<double>();
}

std::int64_t integer(const json& obj, const std::string& where, const std::string& key,
                     std::optional<std::int64_t> fallback) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ScenarioError(join(where, key), "missing");
  }
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ScenarioError(join(where, key), "expected an integer");
  return v.get<std::int64_t>();
}

std::string text(const json& obj, const std::string& where, const std::string& key, std::optional<std::string> fallback) {
  if (!obj.contains(key)) {
    if (fallback) return *fallback;
    throw ScenarioError(join(where, key), "missing");
  }
  const json& v = obj.at(key);
  if (!v.is_string()) throw ScenarioError(join(where, key), "expected a string");
  return v.get<std::string>();
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) throw ScenarioError(where, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) throw ScenarioError(where, "expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

Eigen::VectorXd vector(const json& v, const std::string& where) {
  const auto xs = numbers(v, where);
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

Eigen::MatrixXd matrix(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) throw ScenarioError(where, "expected a non-empty array of rows");
  const std::size_t rows = v.size();
  std::size_t cols = 0;
  Eigen::MatrixXd out;
  for (std::size_t i = 0; i < rows; ++i) {
    const auto row = numbers(v[i], fmt::format("{}[{}]", where, i));
    if (i == 0) {
      cols = row.size();
      out.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    } else if (row.size() != cols) {
      throw ScenarioError(where, "rows have different lengths");
    }
    for (std::size_t j = 0; j < cols; ++j) out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
  }
  return out;
}

std::vector<Eigen::MatrixXd> matrices(const json& v, const std::string& where) {
  if (!v.is_array()) throw ScenarioError(where, "expected an array of matrices");
  std::vector<Eigen::MatrixXd> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(matrix(v[i], fmt::format("{}[{}]", where, i)));
  return out;
}

Nonlinearity nonlinearity(const json& obj, const std::string& where) {
  const std::string name = text(obj, where, "phi", std::string("identity"));
  try {
    return parse_nonlinearity(name);
  } catch (const std::exception&) {
    throw ScenarioError(join(where, "phi"), "unknown nonlinearity '" + name + "'");
  }
}

int dimension(const json& obj, const std::string& where) {
  const auto n = integer(obj, where, "n", 1);
  if (n < 1 || n > 64) throw ScenarioError(join(where, "n"), "must lie in [1, 64]");
  return static_cast<int>(n);
}

DelayDynamics parse_delay(const json& obj) {
  const std::string w = "delay";
  check_keys(obj, w, {"delays", "drift", "diffusion", "offset"});
  if (!obj.contains("delays")) throw ScenarioError("delay.delays", "missing");
  if (!obj.contains("drift")) throw ScenarioError("delay.drift", "missing");
  if (!obj.contains("offset")) throw ScenarioError("delay.offset", "missing");
  auto delays = numbers(obj.at("delays"), "delay.delays");
  auto drift = matrices(obj.at("drift"), "delay.drift");
  std::vector<Eigen::MatrixXd> diffusion;
  if (obj.contains("diffusion")) diffusion = matrices(obj.at("diffusion"), "delay.diffusion");
  const Eigen::MatrixXd offset = matrix(obj.at("offset"), "delay.offset");
  try {
    return linear_delay_dynamics(std::move(delays), std::move(drift), std::move(diffusion), offset);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("delay", e.what());
  }
}

using Builder = std::function<CoefficientField(const json&, const std::string&)>;

const std::map<std::string, std::pair<std::set<std::string>, Builder>>& registry() {
  static const std::map<std::string, std::pair<std::set<std::string>, Builder>> table = {
      {"intro_example",
       {{"switch_time"},
        [](const json& o, const std::string& w) { return intro_example(number(o, w, "switch_time", 1.0)); }}},
      {"linear",
       {{"drift", "slopes", "offsets", "drift_offset"},
        [](const json& o, const std::string& w) {
          if (!o.contains("drift")) throw ScenarioError(join(w, "drift"), "missing");
          if (!o.contains("offsets")) throw ScenarioError(join(w, "offsets"), "missing");
          const Eigen::MatrixXd A = matrix(o.at("drift"), join(w, "drift"));
          const auto S = o.contains("slopes") ? matrices(o.at("slopes"), join(w, "slopes")) : std::vector<Eigen::MatrixXd>{};
          const Eigen::MatrixXd C = matrix(o.at("offsets"), join(w, "offsets"));
          const Eigen::VectorXd c0 =
              o.contains("drift_offset") ? vector(o.at("drift_offset"), join(w, "drift_offset")) : Eigen::VectorXd();
          return linear_field(A, S, C, c0);
        }}},
      {"geometric",
       {{"mu", "vol"},
        [](const json& o, const std::string& w) {
          return geometric_field(number(o, w, "mu", 0.0), number(o, w, "vol", 1.0));
        }}},
      {"additive",
       {{"drift"},
        [](const json& o, const std::string& w) {
          if (!o.contains("drift")) throw ScenarioError(join(w, "drift"), "missing");
          return additive_field(matrix(o.at("drift"), join(w, "drift")));
        }}},
      {"constant",
       {{"drift", "sigma"},
        [](const json& o, const std::string& w) {
          if (!o.contains("drift")) throw ScenarioError(join(w, "drift"), "missing");
          if (!o.contains("sigma")) throw ScenarioError(join(w, "sigma"), "missing");
          return constant_field(vector(o.at("drift"), join(w, "drift")), matrix(o.at("sigma"), join(w, "sigma")));
        }}},
      {"integral_coefficient",
       {{"n", "kappa", "coupling", "phi", "vol"},
        [](const json& o, const std::string& w) {
          return integral_coefficient(dimension(o, w), number(o, w, "kappa", 1.0), number(o, w, "coupling", 0.5),
                                      nonlinearity(o, w), number(o, w, "vol", 1.0));
        }}},
      {"continuous_delay",
       {{"n", "kappa", "coupling", "phi", "vol"},
        [](const json& o, const std::string& w) {
          return continuous_delay(dimension(o, w), number(o, w, "kappa", 1.0), number(o, w, "coupling", 0.5),
                                  nonlinearity(o, w), number(o, w, "vol", 1.0));
        }}},
      {"discrete_points",
       {{"n", "times", "kappa", "coupling", "phi", "vol"},
        [](const json& o, const std::string& w) {
          if (!o.contains("times")) throw ScenarioError(join(w, "times"), "missing");
          return discrete_points(dimension(o, w), numbers(o.at("times"), join(w, "times")),
                                 number(o, w, "kappa", 1.0), number(o, w, "coupling", 0.5), nonlinearity(o, w),
                                 number(o, w, "vol", 1.0));
        }}},
      {"hormander_3d",
       {{"a_min", "a_max", "switch_time", "frozen_a"},
        [](const json& o, const std::string& w) {
          Hormander3DParams p;
          p.a_min = number(o, w, "a_min", p.a_min);
          p.a_max = number(o, w, "a_max", p.a_max);
          p.switch_time = number(o, w, "switch_time", p.switch_time);
          if (o.contains("frozen_a")) p.frozen_a = number(o, w, "frozen_a", std::nullopt);
          return hormander_example_3d(p);
        }}},
      {"degenerate_pair", {{}, [](const json&, const std::string&) { return degenerate_pair(); }}},
  };
  return table;
}

}  // namespace

int Scenario::n() const { return field ? field->n : (delay ? delay->n : static_cast<int>(x0.size())); }

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

Scenario parse_scenario(const json& raw) {
  check_keys(raw, "", {"name", "family", "delay", "measure", "config", "x0", "options"});
  Scenario s;
  s.raw = raw;
  s.hash = fnv1a_hex(raw.dump());

  if (raw.contains("delay")) s.delay = parse_delay(raw.at("delay"));
  if (raw.contains("family")) {
    const json& fam = raw.at("family");
    if (!fam.is_object()) throw ScenarioError("family", "expected an object");
    s.family = text(fam, "family", "name", std::nullopt);
    if (s.family == "discrete_delay") {
      check_keys(fam, "family", {"name"});
      if (!s.delay) throw ScenarioError("delay", "missing (required by family discrete_delay)");
      s.field = discrete_delay(*s.delay);
    } else {
      const auto& table = registry();
      const auto it = table.find(s.family);
      if (it == table.end()) throw ScenarioError("family.name", "unknown family '" + s.family + "'");
      std::set<std::string> allowed = it->second.first;
      allowed.insert("name");
      check_keys(fam, "family", allowed);
      try {
        s.field = it->second.second(fam, "family");
      } catch (const ScenarioError&) {
        throw;
      } catch (const std::invalid_argument& e) {
        throw ScenarioError("family", e.what());
      }
    }
  } else if (s.delay) {
    s.family = "discrete_delay";
    s.field = discrete_delay(*s.delay);
  } else {
    throw ScenarioError("family", "missing");
  }

  if (raw.contains("measure")) {
    const json& m = raw.at("measure");
    check_keys(m, "measure", {"horizon", "atoms"});
    s.measure.horizon = number(m, "measure", "horizon", 1.0);
    if (m.contains("atoms")) {
      const json& atoms = m.at("atoms");
      if (!atoms.is_array()) throw ScenarioError("measure.atoms", "expected an array");
      for (std::size_t i = 0; i < atoms.size(); ++i) {
        const std::string w = fmt::format("measure.atoms[{}]", i);
        check_keys(atoms[i], w, {"time", "weight"});
        s.measure.atoms.push_back({number(atoms[i], w, "time", std::nullopt), number(atoms[i], w, "weight", std::nullopt)});
      }
    }
  }
  s.measure.validate();

  s.config.tau = s.measure.horizon;
  if (raw.contains("config")) {
    const json& c = raw.at("config");
    check_keys(c, "config", {"p", "tau", "tau0", "steps", "seed"});
    s.config.p = number(c, "config", "p", s.config.p);
    s.config.tau = number(c, "config", "tau", s.config.tau);
    s.config.tau0 = number(c, "config", "tau0", s.config.tau0);
    const auto steps = integer(c, "config", "steps", static_cast<std::int64_t>(s.config.steps));
    if (steps < 1) throw ScenarioError("config.steps", "must be positive");
    s.config.steps = static_cast<std::size_t>(steps);
    const auto seed = integer(c, "config", "seed", 0);
    if (seed < 0) throw ScenarioError("config.seed", "must be nonnegative");
    s.config.seed = static_cast<std::uint64_t>(seed);
  }
  s.config.validate(s.measure);

  if (!raw.contains("x0")) throw ScenarioError("x0", "missing");
  s.x0 = vector(raw.at("x0"), "x0");
  if (s.x0.size() != s.n()) throw ScenarioError("x0", fmt::format("expected {} entries", s.n()));

  if (raw.contains("options")) {
    if (!raw.at("options").is_object()) throw ScenarioError("options", "expected an object");
    s.options = raw.at("options");
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ScenarioError("scenario", "cannot open " + file.string());
  json raw;
  try {
    raw = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ScenarioError("scenario", e.what());
  }
  return parse_scenario(raw);
}

double option_double(const Scenario& s, const std::string& key, double fallback) {
  return number(s.options, "options", key, fallback);
}

std::size_t option_size(const Scenario& s, const std::string& key, std::size_t fallback) {
  const auto v = integer(s.options, "options", key, static_cast<std::int64_t>(fallback));
  if (v < 0) throw ScenarioError("options." + key, "must be nonnegative");
  return static_cast<std::size_t>(v);
}

std::string option_string(const Scenario& s, const std::string& key, const std::string& fallback) {
  return text(s.options, "options", key, fallback);
}

std::vector<double> option_doubles(const Scenario& s, const std::string& key, std::vector<double> fallback) {
  if (!s.options.contains(key)) return fallback;
  return numbers(s.options.at(key), "options." + key);
}

}  // namespace pathdens::cli
