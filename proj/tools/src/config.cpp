#include "fedpt_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "fedpt/errors.hpp"

namespace fedpt::cli {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string where(const std::string& key, int line) {
  return line > 0 ? "'" + key + "' (line " + std::to_string(line) + ")"
                  : "'" + key + "' (override)";
}

class Reader {
 public:
  explicit Reader(const ConfigEntries& e) : entries_(e) {
    for (const auto& [k, v] : e.entries) unused_.insert(k);
  }

  const ConfigEntries::Entry* find(const std::string& key) {
    auto it = entries_.entries.find(key);
    if (it == entries_.entries.end()) return nullptr;
    unused_.erase(key);
    return &it->second;
  }

  void real(const std::string& key, double& out) {
    if (const auto* e = find(key)) out = parse_real(key, *e);
  }

  void count(const std::string& key, std::size_t& out) {
    if (const auto* e = find(key)) out = static_cast<std::size_t>(parse_u64(key, *e));
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (const auto* e = find(key)) out = parse_u64(key, *e);
  }

  void flag(const std::string& key, bool& out) {
    const auto* e = find(key);
    if (!e) return;
    std::string v = e->value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
      out = true;
    } else if (v == "false" || v == "0" || v == "no" || v == "off") {
      out = false;
    } else {
      throw ConfigError("invalid boolean for " + where(key, e->line) + ": '" + e->value + "'",
                        key, e->line);
    }
  }

  static double parse_real(const std::string& key, const ConfigEntries::Entry& e) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(e.value, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos == 0 || pos != e.value.size() || !std::isfinite(v)) {
      throw ConfigError("invalid number for " + where(key, e.line) + ": '" + e.value + "'", key,
                        e.line);
    }
    return v;
  }

  static std::uint64_t parse_u64(const std::string& key, const ConfigEntries::Entry& e) {
    std::uint64_t v = 0;
    const char* first = e.value.data();
    const char* last = first + e.value.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last || e.value.empty()) {
      throw ConfigError("invalid nonnegative integer for " + where(key, e.line) + ": '" +
                            e.value + "'",
                        key, e.line);
    }
    return v;
  }

  void reject_unused() const {
    if (unused_.empty()) return;
    const auto& key = *unused_.begin();
    const int line = entries_.entries.at(key).line;
    throw ConfigError("unknown key " + where(key, line), key, line);
  }

 private:
  const ConfigEntries& entries_;
  std::set<std::string> unused_;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

const std::vector<std::string>& known_keys() {
  static const std::vector<std::string> keys = {
      "algorithm",     "objective",     "n",
      "S",             "Y",             "K",
      "T_max",         "eta_l",         "eta_g",
      "beta1",         "beta2",         "eps",
      "alpha_weight",  "sigma",         "seed",
      "trials",        "threads",       "diagnostics",
      "d",             "heterogeneity", "mu",
      "L_target",      "classes",       "samples_per_class",
      "dirichlet_alpha", "batch_size",  "feature_noise", "noise_decay", "class_separation", "nuisance_scale",
      "l2_reg",        "clip_norm",     "grad_probe_radius",
      "grad_probes",   "target_metric", "target_value",
      "target_relative", "target_window"};
  return keys;
}

ConfigEntries parse_entries(const std::string& text, const std::filesystem::path& source) {
  ConfigEntries out;
  out.source = source;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string content = trim(raw);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line) + ": expected 'key = value'", {}, line);
    }
    const std::string key = trim(std::string_view(content).substr(0, eq));
    const std::string value = trim(std::string_view(content).substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key", {}, line);
    if (out.entries.count(key)) {
      throw ConfigError("duplicate key " + where(key, line), key, line);
    }
    out.entries[key] = {value, line};
  }
  return out;
}

ConfigEntries read_entries(const std::filesystem::path& path) {
  return parse_entries(read_file(path), path);
}

void apply_overrides(ConfigEntries& entries, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("override '" + o + "' is not of the form key=value");
    }
    const std::string key = trim(std::string_view(o).substr(0, eq));
    if (key.empty()) throw ConfigError("override '" + o + "' has an empty key");
    entries.entries[key] = {trim(std::string_view(o).substr(eq + 1)), 0};
  }
}

ExperimentConfig to_experiment_config(const ConfigEntries& entries) {
  ExperimentConfig c;
  Reader r(entries);

  if (const auto* e = r.find("algorithm")) {
    try {
      c.algorithm = algorithm_from_string(e->value);
    } catch (const ConfigError&) {
      throw ConfigError("unknown algorithm for " + where("algorithm", e->line) + ": '" +
                            e->value + "'",
                        "algorithm", e->line);
    }
  }
  if (const auto* e = r.find("objective")) {
    if (e->value == "quadratic") {
      c.suite.kind = SuiteKind::Quadratic;
    } else if (e->value == "logistic") {
      c.suite.kind = SuiteKind::Logistic;
    } else if (e->value == "two_client") {
      c.suite.kind = SuiteKind::TwoClient;
      c.n = 2;
      c.S = 2;
      c.Y = 2;
      c.suite.d = 1;
    } else {
      throw ConfigError("unknown objective for " + where("objective", e->line) + ": '" +
                            e->value + "'",
                        "objective", e->line);
    }
  }
  r.count("n", c.n);
  r.count("S", c.S);
  r.count("Y", c.Y);
  r.count("K", c.K);
  r.count("T_max", c.T_max);
  if (const auto* e = r.find("eta_l")) c.eta_l = Reader::parse_real("eta_l", *e);
  r.real("eta_g", c.eta_g);
  r.real("beta1", c.beta1);
  r.real("beta2", c.beta2);
  r.real("eps", c.eps);
  r.real("alpha_weight", c.alpha_weight);
  r.real("sigma", c.sigma);
  r.u64("seed", c.master_seed);
  r.count("trials", c.trials);
  r.count("threads", c.threads);
  r.flag("diagnostics", c.diagnostics);
  r.count("d", c.suite.d);
  r.real("heterogeneity", c.suite.heterogeneity);
  r.real("mu", c.suite.mu);
  r.real("L_target", c.suite.L_target);
  r.count("classes", c.suite.classes);
  r.count("samples_per_class", c.suite.samples_per_class);
  r.real("dirichlet_alpha", c.suite.dirichlet_alpha);
  r.count("batch_size", c.suite.batch_size);
  r.real("feature_noise", c.suite.feature_noise);
  r.real("noise_decay", c.suite.noise_decay);
  r.real("class_separation", c.suite.class_separation);
  r.real("nuisance_scale", c.suite.nuisance_scale);
  r.real("l2_reg", c.suite.l2_reg);
  r.real("clip_norm", c.suite.clip_norm);
  r.real("grad_probe_radius", c.suite.grad_probe_radius);
  r.count("grad_probes", c.suite.grad_probes);
  if (const auto* e = r.find("target_metric")) {
    if (e->value == "none") {
      c.target.metric = TargetMetric::None;
    } else if (e->value == "loss") {
      c.target.metric = TargetMetric::Loss;
    } else if (e->value == "accuracy") {
      c.target.metric = TargetMetric::Accuracy;
    } else if (e->value == "grad_norm_sq") {
      c.target.metric = TargetMetric::GradNorm;
    } else {
      throw ConfigError("unknown target metric for " + where("target_metric", e->line) + ": '" +
                            e->value + "'",
                        "target_metric", e->line);
    }
  }
  r.real("target_value", c.target.threshold);
  r.flag("target_relative", c.target.relative);
  r.count("target_window", c.target.window);
  r.reject_unused();

  try {
    c.validate();
  } catch (const ConfigError& err) {
    int line = 0;
    if (auto it = entries.entries.find(err.key()); it != entries.entries.end()) {
      line = it->second.line;
    }
    std::string msg = err.what();
    if (!err.key().empty()) msg = "constraint violated for " + where(err.key(), line) + ": " + msg;
    throw ConfigError(msg, err.key(), line);
  }
  return c;
}

ExperimentConfig parse_config(const std::filesystem::path& path,
                              const std::vector<std::string>& overrides) {
  auto entries = read_entries(path);
  apply_overrides(entries, overrides);
  return to_experiment_config(entries);
}

ExperimentConfig parse_config_text(const std::string& text,
                                   const std::vector<std::string>& overrides) {
  auto entries = parse_entries(text);
  apply_overrides(entries, overrides);
  return to_experiment_config(entries);
}

SweepSpec parse_sweep(const std::filesystem::path& path,
                      const std::vector<std::string>& overrides) {
  auto sweep_entries = read_entries(path);
  apply_overrides(sweep_entries, overrides);
  auto take = [&](const std::string& key) -> ConfigEntries::Entry {
    auto it = sweep_entries.entries.find(key);
    if (it == sweep_entries.entries.end()) {
      throw ConfigError("sweep file is missing '" + key + "'", key);
    }
    auto e = it->second;
    sweep_entries.entries.erase(it);
    return e;
  };
  const auto base_entry = take("base");
  const auto axis_entry = take("axis");
  const auto values_entry = take("values");

  std::filesystem::path base_path = base_entry.value;
  if (base_path.is_relative()) base_path = path.parent_path() / base_path;
  auto base = read_entries(base_path);
  for (const auto& [k, v] : sweep_entries.entries) base.entries[k] = v;

  SweepSpec spec;
  spec.base = to_experiment_config(base);
  try {
    spec.axis = sweep_axis_from_string(axis_entry.value);
  } catch (const ConfigError&) {
    throw ConfigError("unknown sweep axis for " + where("axis", axis_entry.line) + ": '" +
                          axis_entry.value + "'",
                      "axis", axis_entry.line);
  }
  std::stringstream ss(values_entry.value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto t = trim(item);
    if (t.empty()) continue;
    spec.values.push_back(Reader::parse_real("values", {t, values_entry.line}));
  }
  if (spec.values.empty()) {
    throw ConfigError("sweep needs at least one value", "values", values_entry.line);
  }
  for (double v : spec.values) (void)with_axis_value(spec.base, spec.axis, v);
  return spec;
}

}  // namespace fedpt::cli
