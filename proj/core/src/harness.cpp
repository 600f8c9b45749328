#include "fedpt/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "fedpt/errors.hpp"

namespace fedpt {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double metric_of(const MetricsRow& row, TargetMetric metric) {
  switch (metric) {
    case TargetMetric::Loss: return row.loss;
    case TargetMetric::Accuracy: return row.accuracy;
    case TargetMetric::GradNorm: return row.grad_norm_sq;
    case TargetMetric::None: break;
  }
  return kNaN;
}

bool meets(double value, TargetMetric metric, double threshold) {
  if (std::isnan(value)) return false;
  return metric == TargetMetric::Accuracy ? value >= threshold : value <= threshold;
}

std::string fmt(double x) {
  if (std::isnan(x)) return {};
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double mean_of(const std::vector<double>& xs) {
  if (xs.empty()) return kNaN;
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double sd_of(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean_of(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

std::string to_string(SuiteKind k) {
  switch (k) {
    case SuiteKind::Quadratic: return "quadratic";
    case SuiteKind::Logistic: return "logistic";
    case SuiteKind::TwoClient: return "two_client";
  }
  return "?";
}

std::string to_string(TargetMetric m) {
  switch (m) {
    case TargetMetric::None: return "none";
    case TargetMetric::Loss: return "loss";
    case TargetMetric::Accuracy: return "accuracy";
    case TargetMetric::GradNorm: return "grad_norm_sq";
  }
  return "?";
}

}  // namespace

double ExperimentConfig::effective_eta_l() const {
  if (eta_l) return *eta_l;
  return uses_adam(algorithm) ? 1e-3 : 0.1;
}

void ExperimentConfig::validate() const {
  if (n < 1) throw ConfigError("n must be at least 1", "n");
  if (S < 1) throw ConfigError("S must be at least 1", "S");
  if (S > n) throw ConfigError("S (" + std::to_string(S) + ") must not exceed n (" +
                               std::to_string(n) + ")", "S");
  if (Y > S) throw ConfigError("Y (" + std::to_string(Y) + ") must not exceed S (" +
                               std::to_string(S) + ")", "Y");
  if (K < 1) throw ConfigError("K must be at least 1", "K");
  if (T_max < 1) throw ConfigError("T_max must be at least 1", "T_max");
  if (trials < 1) throw ConfigError("trials must be at least 1", "trials");
  if (threads < 1) throw ConfigError("threads must be at least 1", "threads");
  if (!(effective_eta_l() > 0.0)) throw ConfigError("eta_l must be positive", "eta_l");
  if (!(eta_g > 0.0)) throw ConfigError("eta_g must be positive", "eta_g");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in [0, 1)", "beta1");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in [0, 1)", "beta2");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive", "eps");
  if (!(alpha_weight >= 0.0 && alpha_weight <= 1.0)) {
    throw ConfigError("alpha_weight must lie in [0, 1]", "alpha_weight");
  }
  if (!(sigma >= 0.0)) throw ConfigError("sigma must be nonnegative", "sigma");
  if (target.window < 1) throw ConfigError("target_window must be at least 1", "target_window");
  switch (suite.kind) {
    case SuiteKind::TwoClient:
      if (n != 2) throw ConfigError("objective two_client requires n = 2", "n");
      break;
    case SuiteKind::Quadratic:
      if (suite.d < 1) throw ConfigError("d must be at least 1", "d");
      if (!(suite.mu > 0.0)) throw ConfigError("mu must be positive", "mu");
      if (suite.mu > suite.L_target) throw ConfigError("mu must not exceed L_target", "mu");
      if (!(suite.heterogeneity >= 0.0)) {
        throw ConfigError("heterogeneity must be nonnegative", "heterogeneity");
      }
      break;
    case SuiteKind::Logistic:
      if (suite.classes < 2) throw ConfigError("classes must be at least 2", "classes");
      if (suite.samples_per_class < 1) {
        throw ConfigError("samples_per_class must be at least 1", "samples_per_class");
      }
      if (!(suite.dirichlet_alpha > 0.0)) {
        throw ConfigError("dirichlet_alpha must be positive", "dirichlet_alpha");
      }
      if (suite.batch_size < 1) throw ConfigError("batch_size must be at least 1", "batch_size");
      if (suite.classes * suite.samples_per_class < n) {
        throw ConfigError("dataset has fewer samples than clients", "samples_per_class");
      }
      break;
  }
  if (target.metric == TargetMetric::Accuracy && suite.kind != SuiteKind::Logistic) {
    throw ConfigError("accuracy targets need the logistic objective", "target_metric");
  }
}

ProblemSuite build_suite(const ExperimentConfig& config, std::size_t trial) {
  const std::uint64_t seed =
      trial == 0 ? config.master_seed
                 : derive_seed({config.master_seed, static_cast<std::uint64_t>(StreamTag::kTrial),
                                static_cast<std::uint64_t>(trial)});
  const auto& sc = config.suite;
  ProblemSuite suite;
  switch (sc.kind) {
    case SuiteKind::TwoClient:
      suite = make_two_client_quadratic();
      break;
    case SuiteKind::Quadratic:
      suite = make_quadratic_suite(QuadraticSuiteSpec{config.n, sc.d, sc.heterogeneity, sc.mu,
                                                      sc.L_target, config.sigma, seed});
      break;
    case SuiteKind::Logistic: {
      LogisticSuiteSpec spec;
      spec.n = config.n;
      spec.d = sc.d;
      spec.samples_per_class = sc.samples_per_class;
      spec.partition = PartitionSpec{sc.dirichlet_alpha, sc.classes, seed};
      spec.batch_size = sc.batch_size;
      spec.feature_noise = sc.feature_noise;
      spec.noise_decay = sc.noise_decay;
      spec.class_separation = sc.class_separation;
      spec.nuisance_scale = sc.nuisance_scale;
      spec.l2_reg = sc.l2_reg;
      spec.seed = seed;
      suite = make_dirichlet_logistic_suite(spec);
      break;
    }
  }
  Rng probe_rng = make_stream(seed, StreamTag::kProbe, trial, 0, 0, 0);
  suite.grad_bound_estimate = estimate_grad_bound(suite, sc.grad_probe_radius, sc.grad_probes,
                                                  probe_rng);
  suite.clip_norm = sc.clip_norm;
  return suite;
}

double central_reference_accuracy(const ProblemSuite& suite, std::size_t iterations) {
  ParamVector x = ParamVector::zeros(suite.dimension);
  const double step = 1.0 / suite.smoothness_bound;
  double best = suite.accuracy(x);
  for (std::size_t it = 1; it <= iterations; ++it) {
    x.axpy(-step, full_gradient(suite, x));
    if (it % 10 == 0 || it == iterations) best = std::max(best, suite.accuracy(x));
  }
  return best;
}

double resolve_threshold(const Target& target, const ProblemSuite& suite) {
  if (target.relative && target.metric == TargetMetric::Accuracy) {
    return target.threshold * central_reference_accuracy(suite);
  }
  return target.threshold;
}

double median(std::vector<double> xs) {
  if (xs.empty()) return kNaN;
  std::sort(xs.begin(), xs.end());
  const auto m = xs.size() / 2;
  return xs.size() % 2 == 1 ? xs[m] : 0.5 * (xs[m - 1] + xs[m]);
}

double smoothed_metric(const std::vector<MetricsRow>& rows, std::size_t index, TargetMetric metric,
                       std::size_t window) {
  const std::size_t w = std::max<std::size_t>(window, 1);
  const std::size_t back = (w - 1) / 2;
  const std::size_t first = index >= back ? index - back : 0;
  const std::size_t last = std::min(rows.size() - 1, index + w / 2);
  std::vector<double> vals;
  for (std::size_t i = first; i <= last; ++i) vals.push_back(metric_of(rows[i], metric));
  return median(std::move(vals));
}

std::optional<std::size_t> rounds_to_target(const std::vector<MetricsRow>& rows,
                                            TargetMetric metric, double threshold,
                                            std::size_t window) {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (meets(smoothed_metric(rows, i, metric, window), metric, threshold)) return rows[i].round;
  }
  return std::nullopt;
}

std::vector<MetricsRow> run_trial(const ExperimentConfig& config, const ProblemSuite& suite,
                                  std::size_t trial, std::optional<double> threshold,
                                  CommLedger* ledger_out) {
  config.validate();
  if (suite.num_clients() != config.n) throw ConfigError("suite size does not match n", "n");
  const AlgorithmKind kind = config.algorithm;
  ServerState server = ServerState::initial(config.n, ParamVector::zeros(suite.dimension));
  CommLedger ledger(config.n);

  RoundHyper hyper;
  hyper.S = config.S;
  hyper.Y = config.Y;
  hyper.eta_g = config.eta_g;
  hyper.threads = config.threads;
  hyper.master_seed = config.master_seed;
  hyper.trial = trial;
  hyper.local.K = config.K;
  hyper.local.eta_l = config.effective_eta_l();
  hyper.local.adam = AdamHyper{config.beta1, config.beta2, config.eps};
  hyper.local.alpha_weight = config.alpha_weight;
  hyper.local.record_trace = config.diagnostics;

  const double f_gap = std::max(0.0, suite.loss(server.x) - suite.optimal_loss_lower_bound());
  std::vector<std::vector<ParamVector>> snapshots;
  if (config.diagnostics) {
    snapshots.assign(config.n,
                     std::vector<ParamVector>(config.K, ParamVector::zeros(suite.dimension)));
  }
  std::vector<double> ck;
  for (std::size_t k = 1; k <= config.K; ++k) ck.push_back(moment_weight_sum(k, config.beta1));

  std::vector<MetricsRow> rows;
  for (std::size_t t = 1; t <= config.T_max; ++t) {
    const RoundOutcome outcome = run_round(server, suite, kind, hyper);
    charge_communication(ledger, outcome.plan, kind);

    MetricsRow row;
    row.trial = trial;
    row.round = t;
    row.loss = suite.loss(server.x);
    row.grad_norm_sq = squared_norm(full_gradient(suite, server.x));
    row.accuracy = suite.accuracy(server.x);
    row.comm_down_cum = ledger.population_mean_down();
    row.comm_up_cum = ledger.population_mean_up();
    row.comm_down_cum_participant = ledger.participant_mean_down();
    row.comm_up_cum_participant = ledger.participant_mean_up();

    if (config.diagnostics) {
      DriftReport drift{kNaN, kNaN, kNaN, squared_norm(full_gradient(suite, outcome.x_start)), ck};
      if (uses_tracking(kind)) {
        drift.gamma = measure_gamma(snapshots, suite, outcome.x_start);
        for (const auto& r : outcome.results) {
          if (!outcome.plan.is_tracker(r.client)) continue;
          auto& snap = snapshots[r.client];
          for (std::size_t k = 0; k < config.K; ++k) {
            snap[k] = kind == AlgorithmKind::FAdamET
                          ? r.trace->directions[k]
                          : suite.clients[r.client].gradient(r.trace->iterates[k]);
          }
        }
      }
      std::vector<ClientTrajectory> traj;
      traj.reserve(outcome.results.size());
      for (const auto& r : outcome.results) traj.push_back({r.client, r.trace->iterates});
      if (kind == AlgorithmKind::FAdamET) {
        drift.calE = measure_calE(suite, traj, outcome.x_start, config.beta1);
      } else {
        drift.xi = measure_xi(suite, traj, outcome.x_start, config.beta1);
      }
      row.drift = std::move(drift);
      const auto K = static_cast<double>(config.K);
      const auto S = static_cast<double>(config.S);
      const auto Y = static_cast<double>(config.Y);
      const auto n = static_cast<double>(config.n);
      const auto T = static_cast<double>(t);
      row.rate_et = theoretical_rate(RateKind::EstimateTracking, f_gap, K, S, T, Y, n);
      row.rate_gt = theoretical_rate(RateKind::GradientTracking, f_gap, K, S, T, Y, n);
      row.has_rates = true;
    }
    rows.push_back(std::move(row));

    // The newest round whose centered window is complete; earlier rounds were
    // already checked with the same windows.
    const std::size_t ahead = std::max<std::size_t>(config.target.window, 1) / 2;
    if (threshold && config.target.metric != TargetMetric::None && rows.size() > ahead &&
        meets(smoothed_metric(rows, rows.size() - 1 - ahead, config.target.metric,
                              config.target.window),
              config.target.metric, *threshold)) {
      break;
    }
  }
  if (ledger_out) *ledger_out = std::move(ledger);
  return rows;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  result.config = config;
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    const ProblemSuite suite = build_suite(config, trial);
    TrialResult tr;
    std::optional<double> threshold;
    if (config.target.metric != TargetMetric::None) {
      threshold = resolve_threshold(config.target, suite);
      tr.threshold = *threshold;
    }
    CommLedger ledger;
    tr.rows = run_trial(config, suite, trial, threshold, &ledger);
    tr.ledger_audit_ok = ledger.audit();
    if (threshold) {
      tr.rounds_to_target =
          rounds_to_target(tr.rows, config.target.metric, *threshold, config.target.window);
      if (tr.rounds_to_target) {
        const auto& r = tr.rows[*tr.rounds_to_target - 1];
        tr.comm_to_target = r.comm_down_cum + r.comm_up_cum;
      }
    }
    result.trials.push_back(std::move(tr));
  }
  return result;
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "dirichlet_alpha") return SweepAxis::DirichletAlpha;
  if (name == "K") return SweepAxis::K;
  if (name == "Y") return SweepAxis::Y;
  if (name == "heterogeneity") return SweepAxis::Heterogeneity;
  throw ConfigError("unknown sweep axis '" + name + "'", "axis");
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::DirichletAlpha: return "dirichlet_alpha";
    case SweepAxis::K: return "K";
    case SweepAxis::Y: return "Y";
    case SweepAxis::Heterogeneity: return "heterogeneity";
  }
  return "?";
}

ExperimentConfig with_axis_value(ExperimentConfig base, SweepAxis axis, double value) {
  auto as_count = [&](const char* key) {
    if (!(value >= 0.0) || value != std::floor(value)) {
      throw ConfigError(std::string("sweep value for ") + key + " must be a whole number", key);
    }
    return static_cast<std::size_t>(value);
  };
  switch (axis) {
    case SweepAxis::DirichletAlpha:
      if (base.suite.kind != SuiteKind::Logistic) {
        throw ConfigError("dirichlet_alpha sweeps need the logistic objective", "axis");
      }
      base.suite.dirichlet_alpha = value;
      break;
    case SweepAxis::K: base.K = as_count("K"); break;
    case SweepAxis::Y: base.Y = as_count("Y"); break;
    case SweepAxis::Heterogeneity:
      if (base.suite.kind != SuiteKind::Quadratic) {
        throw ConfigError("heterogeneity sweeps need the quadratic objective", "axis");
      }
      base.suite.heterogeneity = value;
      break;
  }
  base.validate();
  return base;
}

std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis,
                            const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value", "values");
  std::vector<SweepRow> out;
  for (double v : values) {
    const auto cfg = with_axis_value(base, axis, v);
    const auto res = run_experiment(cfg);
    SweepRow row;
    row.value = v;
    row.trials = res.trials.size();
    std::vector<double> rounds, comm;
    for (const auto& t : res.trials) {
      if (t.rounds_to_target) {
        ++row.reached;
        rounds.push_back(static_cast<double>(*t.rounds_to_target));
        comm.push_back(t.comm_to_target);
      } else {
        rounds.push_back(static_cast<double>(cfg.T_max + 1));
        const auto& last = t.rows.back();
        comm.push_back(last.comm_down_cum + last.comm_up_cum);
      }
    }
    row.rounds_mean = mean_of(rounds);
    row.rounds_sd = sd_of(rounds);
    row.rounds_median = median(rounds);
    row.comm_mean = mean_of(comm);
    row.comm_sd = sd_of(comm);
    out.push_back(row);
  }
  return out;
}

const char* const kMetricsCsvHeader =
    "trial,round,loss,grad_norm_sq,accuracy,comm_down_cum,comm_up_cum,gamma,xi,cal_e,rate_et,"
    "rate_gt,comm_down_cum_participant,comm_up_cum_participant";

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << kMetricsCsvHeader << '\n';
  for (const auto& r : rows) {
    const double gamma = r.drift ? r.drift->gamma : kNaN;
    const double xi = r.drift ? r.drift->xi : kNaN;
    const double cal_e = r.drift ? r.drift->calE : kNaN;
    os << r.trial << ',' << r.round << ',' << fmt(r.loss) << ',' << fmt(r.grad_norm_sq) << ','
       << fmt(r.accuracy) << ',' << fmt(r.comm_down_cum) << ',' << fmt(r.comm_up_cum) << ','
       << fmt(gamma) << ',' << fmt(xi) << ',' << fmt(cal_e) << ','
       << (r.has_rates ? fmt(r.rate_et) : "") << ',' << (r.has_rates ? fmt(r.rate_gt) : "")
       << ',' << fmt(r.comm_down_cum_participant) << ',' << fmt(r.comm_up_cum_participant)
       << '\n';
  }
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, SweepAxis axis) {
  os << to_string(axis)
     << ",trials,reached,rounds_mean,rounds_sd,rounds_median,comm_mean,comm_sd\n";
  for (const auto& r : rows) {
    os << fmt(r.value) << ',' << r.trials << ',' << r.reached << ',' << fmt(r.rounds_mean) << ','
       << fmt(r.rounds_sd) << ',' << fmt(r.rounds_median) << ',' << fmt(r.comm_mean) << ','
       << fmt(r.comm_sd) << '\n';
  }
}

nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["algorithm"] = std::string(to_string(c.algorithm));
  j["objective"] = to_string(c.suite.kind);
  j["n"] = c.n;
  j["S"] = c.S;
  j["Y"] = c.Y;
  j["K"] = c.K;
  j["T_max"] = c.T_max;
  j["eta_l"] = c.effective_eta_l();
  j["eta_g"] = c.eta_g;
  j["beta1"] = c.beta1;
  j["beta2"] = c.beta2;
  j["eps"] = c.eps;
  j["alpha_weight"] = c.alpha_weight;
  j["sigma"] = c.sigma;
  j["seed"] = c.master_seed;
  j["trials"] = c.trials;
  j["threads"] = c.threads;
  j["diagnostics"] = c.diagnostics;
  j["d"] = c.suite.d;
  j["heterogeneity"] = c.suite.heterogeneity;
  j["mu"] = c.suite.mu;
  j["L_target"] = c.suite.L_target;
  j["classes"] = c.suite.classes;
  j["samples_per_class"] = c.suite.samples_per_class;
  j["dirichlet_alpha"] = c.suite.dirichlet_alpha;
  j["batch_size"] = c.suite.batch_size;
  j["feature_noise"] = c.suite.feature_noise;
  j["noise_decay"] = c.suite.noise_decay;
  j["class_separation"] = c.suite.class_separation;
  j["nuisance_scale"] = c.suite.nuisance_scale;
  j["l2_reg"] = c.suite.l2_reg;
  j["clip_norm"] = c.suite.clip_norm;
  j["target_metric"] = to_string(c.target.metric);
  j["target_value"] = c.target.threshold;
  j["target_relative"] = c.target.relative;
  j["target_window"] = c.target.window;
  return j;
}

nlohmann::json experiment_summary(const ExperimentResult& result) {
  nlohmann::json j;
  j["config"] = config_to_json(result.config);
  nlohmann::json trials = nlohmann::json::array();
  std::vector<double> rounds, comm;
  for (std::size_t i = 0; i < result.trials.size(); ++i) {
    const auto& t = result.trials[i];
    const auto& last = t.rows.back();
    nlohmann::json tj;
    tj["trial"] = i;
    tj["rounds_run"] = t.rows.size();
    tj["threshold"] = t.threshold;
    tj["rounds_to_target"] =
        t.rounds_to_target ? nlohmann::json(*t.rounds_to_target) : nlohmann::json(nullptr);
    tj["comm_to_target"] = t.rounds_to_target ? nlohmann::json(t.comm_to_target)
                                              : nlohmann::json(nullptr);
    tj["final_loss"] = last.loss;
    tj["final_grad_norm_sq"] = last.grad_norm_sq;
    tj["final_accuracy"] = std::isnan(last.accuracy) ? nlohmann::json(nullptr)
                                                     : nlohmann::json(last.accuracy);
    tj["comm_per_client"] = last.comm_down_cum + last.comm_up_cum;
    tj["comm_per_participant"] = last.comm_down_cum_participant + last.comm_up_cum_participant;
    tj["ledger_audit_ok"] = t.ledger_audit_ok;
    trials.push_back(std::move(tj));
    if (t.rounds_to_target) {
      rounds.push_back(static_cast<double>(*t.rounds_to_target));
      comm.push_back(t.comm_to_target);
    }
  }
  j["trials"] = std::move(trials);
  auto num_or_null = [](double x) {
    return std::isnan(x) ? nlohmann::json(nullptr) : nlohmann::json(x);
  };
  j["reached"] = rounds.size();
  j["rounds_to_target_mean"] = num_or_null(mean_of(rounds));
  j["rounds_to_target_sd"] = rounds.empty() ? nlohmann::json(nullptr) : nlohmann::json(sd_of(rounds));
  j["rounds_to_target_median"] = num_or_null(median(rounds));
  j["comm_to_target_mean"] = num_or_null(mean_of(comm));
  j["comm_to_target_sd"] = comm.empty() ? nlohmann::json(nullptr) : nlohmann::json(sd_of(comm));
  return j;
}

nlohmann::json sweep_summary(const ExperimentConfig& base, SweepAxis axis,
                             const std::vector<SweepRow>& rows) {
  nlohmann::json j;
  j["base"] = config_to_json(base);
  j["axis"] = to_string(axis);
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    arr.push_back({{"value", r.value},
                   {"trials", r.trials},
                   {"reached", r.reached},
                   {"rounds_mean", r.rounds_mean},
                   {"rounds_sd", r.rounds_sd},
                   {"rounds_median", r.rounds_median},
                   {"comm_mean", r.comm_mean},
                   {"comm_sd", r.comm_sd}});
  }
  j["rows"] = std::move(arr);
  return j;
}

}  // namespace fedpt
