#include "fedpt_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fedpt/diagnostics.hpp"
#include "fedpt/errors.hpp"
#include "fedpt/harness.hpp"
#include "fedpt/probe.hpp"
#include "fedpt_cli/config.hpp"

#if defined(__unix__) || defined(__APPLE__)
#include <unistd.h>
#endif

namespace fedpt::cli {

namespace fs = std::filesystem;
using nlohmann::json;

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  long pid = 0;
#if defined(__unix__) || defined(__APPLE__)
  pid = static_cast<long>(::getpid());
#endif
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(pid);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename '" + tmp.string() + "' to '" + path.string() + "': " +
                  ec.message());
  }
}

namespace {

struct CommonOptions {
  std::string config;
  std::string out_dir = ".";
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

void add_common(CLI::App* cmd, CommonOptions& o, bool config_required) {
  auto* opt = cmd->add_option("-c,--config", o.config, "config file");
  if (config_required) opt->required();
  cmd->add_option("-o,--out", o.out_dir, "output directory")->capture_default_str();
  cmd->add_option("--set", o.overrides, "override, key=value (repeatable)");
  cmd->add_option("--seed", o.seed, "master seed");
  cmd->add_option("--threads", o.threads, "worker threads per round");
}

std::vector<std::string> merged_overrides(const CommonOptions& o) {
  auto ov = o.overrides;
  if (o.seed) ov.push_back("seed=" + std::to_string(*o.seed));
  if (o.threads) ov.push_back("threads=" + std::to_string(*o.threads));
  return ov;
}

std::string to_text(const json& j) { return j.dump(2) + "\n"; }

int cmd_run(const CommonOptions& o, std::ostream& out) {
  const auto config = parse_config(o.config, merged_overrides(o));
  const auto result = run_experiment(config);

  std::vector<MetricsRow> all;
  for (const auto& t : result.trials) all.insert(all.end(), t.rows.begin(), t.rows.end());
  std::ostringstream csv;
  write_metrics_csv(csv, all);
  const fs::path dir = o.out_dir;
  write_file_atomic(dir / "metrics.csv", csv.str());
  const auto summary = experiment_summary(result);
  write_file_atomic(dir / "summary.json", to_text(summary));

  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const auto& t = result.trials[i];
    const auto& last = t.rows.back();
    out << "trial " << i << ": rounds=" << t.rows.size() << " loss=" << std::setprecision(6)
        << last.loss << " grad_norm_sq=" << last.grad_norm_sq;
    if (config.suite.kind == SuiteKind::Logistic) out << " accuracy=" << last.accuracy;
    if (config.target.metric != TargetMetric::None) {
      out << " rounds_to_target=";
      if (t.rounds_to_target) {
        out << *t.rounds_to_target;
      } else {
        out << "none";
      }
    }
    out << "\n";
  }
  out << "wrote " << (dir / "metrics.csv").string() << " and " << (dir / "summary.json").string()
      << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonOptions& o, const std::optional<std::string>& axis,
              const std::vector<double>& values, std::ostream& out) {
  const auto overrides = merged_overrides(o);
  SweepSpec spec;
  auto entries = read_entries(o.config);
  if (entries.entries.count("base")) {
    spec = parse_sweep(o.config, overrides);
  } else {
    spec.base = parse_config(o.config, overrides);
  }
  if (axis) spec.axis = sweep_axis_from_string(*axis);
  if (!values.empty()) spec.values = values;
  if (spec.values.empty()) throw ConfigError("sweep needs --values or a values key", "values");

  const auto rows = sweep(spec.base, spec.axis, spec.values);
  std::ostringstream csv;
  write_sweep_csv(csv, rows, spec.axis);
  const fs::path dir = o.out_dir;
  write_file_atomic(dir / "sweep.csv", csv.str());
  write_file_atomic(dir / "sweep_summary.json",
                    to_text(sweep_summary(spec.base, spec.axis, rows)));
  out << csv.str();
  return kExitOk;
}

struct ProbeOptions {
  std::size_t rounds = 100;
  std::optional<std::size_t> K;
  std::optional<double> eta_l;
  std::optional<double> eta_g;
  std::vector<double> alpha_weights = {0.0, 0.25, 0.5, 1.0};
};

int cmd_probe(const CommonOptions& o, const ProbeOptions& p, std::ostream& out) {
  ExperimentConfig config;
  config.algorithm = AlgorithmKind::FAdamGT;
  config.suite.kind = SuiteKind::TwoClient;
  config.n = config.S = config.Y = 2;
  config.suite.d = 1;
  if (!o.config.empty()) {
    config = parse_config(o.config, merged_overrides(o));
  } else if (!o.overrides.empty() || o.seed) {
    auto ov = merged_overrides(o);
    ov.insert(ov.begin(), "objective=two_client");
    config = parse_config_text("", ov);
  }
  const auto suite = build_suite(config, 0);

  ProbeSettings base;
  base.rounds = p.rounds;
  base.K = p.K.value_or(config.K);
  base.eta_l = p.eta_l.value_or(config.eta_l.value_or(1e-3));
  base.eta_g = p.eta_g.value_or(config.eta_g);
  base.adam = AdamHyper{config.beta1, config.beta2, config.eps};
  if (base.rounds < 1) throw ConfigError("probe needs at least one round", "rounds");
  if (base.K < 1) throw ConfigError("K must be at least 1", "K");
  if (!(base.eta_l > 0.0)) throw ConfigError("eta_l must be positive", "eta_l");
  if (!(base.eta_g > 0.0)) throw ConfigError("eta_g must be positive", "eta_g");

  json report;
  report["settings"] = {{"rounds", base.rounds},
                        {"K", base.K},
                        {"eta_l", base.eta_l},
                        {"eta_g", base.eta_g},
                        {"beta1", base.adam.beta1},
                        {"beta2", base.adam.beta2},
                        {"eps", base.adam.eps},
                        {"dimension", suite.dimension},
                        {"clients", suite.num_clients()}};
  json results = json::array();
  auto record = [&](AlgorithmKind kind, std::optional<double> alpha) {
    ProbeSettings s = base;
    if (alpha) s.alpha_weight = *alpha;
    const auto r = fixed_point_probe(kind, suite, s);
    json row = {{"algorithm", to_string(kind)},
                {"global_drift", r.global_drift},
                {"local_drift", r.local_drift},
                {"max_drift", r.max_drift}};
    if (alpha) row["alpha_weight"] = *alpha;
    results.push_back(row);
    out << std::left << std::setw(10) << to_string(kind);
    if (alpha) {
      out << " alpha=" << std::setw(5) << *alpha;
    } else {
      out << "           ";
    }
    out << std::scientific << std::setprecision(3) << " global_drift=" << r.global_drift
        << " local_drift=" << r.local_drift << " max_drift=" << r.max_drift << "\n"
        << std::defaultfloat;
  };
  for (AlgorithmKind kind : kAllAlgorithms) {
    if (kind == AlgorithmKind::FedLada) {
      for (double a : p.alpha_weights) {
        if (!(a >= 0.0 && a <= 1.0)) {
          throw ConfigError("alpha weights must lie in [0, 1]", "alpha_weight");
        }
        record(kind, a);
      }
    } else {
      record(kind, std::nullopt);
    }
  }
  report["results"] = results;
  write_file_atomic(fs::path(o.out_dir) / "probe.json", to_text(report));
  return kExitOk;
}

struct BudgetOptions {
  std::optional<double> G, L, K, T, S, beta1, eps;
};

int cmd_budget(const CommonOptions& o, const BudgetOptions& b, std::ostream& out) {
  double G = 0, L = 0, K = 3, T = 500, S = 10, beta1 = 0.9, eps = 1e-8;
  if (!o.config.empty()) {
    const auto config = parse_config(o.config, merged_overrides(o));
    K = static_cast<double>(config.K);
    T = static_cast<double>(config.T_max);
    S = static_cast<double>(config.S);
    beta1 = config.beta1;
    eps = config.eps;
    if (!b.G || !b.L) {
      const auto suite = build_suite(config, 0);
      G = suite.grad_bound_estimate;
      L = suite.smoothness_bound;
    }
  }
  if (b.G) G = *b.G;
  if (b.L) L = *b.L;
  if (b.K) K = *b.K;
  if (b.T) T = *b.T;
  if (b.S) S = *b.S;
  if (b.beta1) beta1 = *b.beta1;
  if (b.eps) eps = *b.eps;
  if (o.config.empty() && (!b.G || !b.L)) {
    throw ConfigError("budget needs --G and --L, or a config to estimate them from", "G");
  }
  StepSizeBudget budget;
  try {
    budget = step_size_budget(G, L, K, T, S, beta1, eps);
  } catch (const DomainError& e) {
    throw ConfigError(e.what());
  }
  const json j = {{"inputs",
                   {{"G", G}, {"L", L}, {"K", K}, {"T", T}, {"S", S}, {"beta1", beta1},
                    {"eps", eps}}},
                  {"combined_cap", budget.combined_cap},
                  {"local_cap_gt", budget.local_cap_gt},
                  {"local_cap_et", budget.local_cap_et}};
  write_file_atomic(fs::path(o.out_dir) / "budget.json", to_text(j));
  out << std::setprecision(6) << "G=" << G << " L=" << L << " K=" << K << " T=" << T
      << " S=" << S << " beta1=" << beta1 << " eps=" << eps << "\n"
      << std::scientific << "eta_l*eta_g cap: " << budget.combined_cap << "\n"
      << "eta_l cap (gradient tracking): " << budget.local_cap_gt << "\n"
      << "eta_l cap (estimate tracking): " << budget.local_cap_et << "\n"
      << std::defaultfloat;
  return kExitOk;
}

void report_config_error(std::ostream& err, const ConfigError& e) {
  err << "fedpt: error[config]";
  if (!e.key().empty()) err << " key=" << e.key();
  if (e.line() > 0) err << " line=" << e.line();
  err << ": " << e.what() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Federated adaptive optimization experiments", "fedpt"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "fedpt 0.1.0");

  CommonOptions run_opts, sweep_opts, probe_opts, budget_opts;
  auto* run = app.add_subcommand("run", "run one experiment (all trials)");
  add_common(run, run_opts, true);

  auto* sw = app.add_subcommand("sweep", "sweep one axis and report rounds to target");
  add_common(sw, sweep_opts, true);
  std::optional<std::string> axis;
  std::vector<double> values;
  sw->add_option("--axis", axis, "dirichlet_alpha, K, Y or heterogeneity");
  sw->add_option("--values", values, "axis values")->delimiter(',');

  auto* probe = app.add_subcommand("probe", "fixed-point drift of every algorithm");
  add_common(probe, probe_opts, false);
  ProbeOptions popt;
  probe->add_option("--rounds", popt.rounds)->capture_default_str();
  probe->add_option("--K", popt.K);
  probe->add_option("--eta-l", popt.eta_l);
  probe->add_option("--eta-g", popt.eta_g);
  probe->add_option("--alpha-weights", popt.alpha_weights, "FedLADA weights")
      ->delimiter(',');

  auto* budget = app.add_subcommand("budget", "step-size caps of the convergence theory");
  add_common(budget, budget_opts, false);
  BudgetOptions bopt;
  budget->add_option("--G", bopt.G);
  budget->add_option("--L", bopt.L);
  budget->add_option("--K", bopt.K);
  budget->add_option("--T", bopt.T);
  budget->add_option("--S", bopt.S);
  budget->add_option("--beta1", bopt.beta1);
  budget->add_option("--eps", bopt.eps);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << "fedpt 0.1.0\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "fedpt: error[usage]: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    if (*run) return cmd_run(run_opts, out);
    if (*sw) return cmd_sweep(sweep_opts, axis, values, out);
    if (*probe) return cmd_probe(probe_opts, popt, out);
    if (*budget) return cmd_budget(budget_opts, bopt, out);
  } catch (const ConfigError& e) {
    report_config_error(err, e);
    return kExitConfig;
  } catch (const IoError& e) {
    err << "fedpt: error[io]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "fedpt: error[runtime]: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace fedpt::cli
