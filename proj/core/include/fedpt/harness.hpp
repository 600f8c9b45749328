#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedpt/algorithm_kind.hpp"
#include "fedpt/comm.hpp"
#include "fedpt/diagnostics.hpp"
#include "fedpt/fed_algorithms.hpp"
#include "fedpt/objectives.hpp"

namespace fedpt {

enum class SuiteKind { Quadratic, Logistic, TwoClient };

struct SuiteConfig {
  SuiteKind kind = SuiteKind::Quadratic;
  // quadratic
  std::size_t d = 10;
  double heterogeneity = 1.0;
  double mu = 0.1;
  double L_target = 1.0;
  // logistic
  std::size_t classes = 5;
  std::size_t samples_per_class = 200;
  double dirichlet_alpha = 0.1;
  std::size_t batch_size = 8;
  double feature_noise = 0.5;
  double class_separation = 1.0;
  double nuisance_scale = 0.0;
  double noise_decay = 0.0;
  double l2_reg = 1e-4;
  // both
  double clip_norm = 0.0;
  double grad_probe_radius = 1.0;
  std::size_t grad_probes = 8;
};

enum class TargetMetric { None, Loss, Accuracy, GradNorm };

/// loss <= threshold, grad_norm_sq <= threshold or accuracy >= threshold, judged on
/// the median over a centered window of `window` rounds. With `relative` an accuracy threshold is a
/// fraction of the accuracy reached by centralized full-batch descent on the suite.
struct Target {
  TargetMetric metric = TargetMetric::None;
  double threshold = 0.0;
  bool relative = false;
  std::size_t window = 3;
};

struct ExperimentConfig {
  AlgorithmKind algorithm = AlgorithmKind::FAdamGT;
  SuiteConfig suite;
  std::size_t n = 100;
  std::size_t S = 10;
  std::size_t Y = 5;
  std::size_t K = 3;
  std::size_t T_max = 500;
  /// Unset: 1e-3 for Adam-based methods, 0.1 for SGD-based ones.
  std::optional<double> eta_l;
  double eta_g = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
  double alpha_weight = 0.5;
  double sigma = 0.0;
  Target target;
  std::uint64_t master_seed = 0;
  bool diagnostics = false;
  std::size_t trials = 1;
  std::size_t threads = 1;

  double effective_eta_l() const;
  /// Throws ConfigError naming the offending key.
  void validate() const;
};

struct MetricsRow {
  std::size_t trial = 0;
  std::size_t round = 0;
  double loss = 0.0;
  double grad_norm_sq = 0.0;
  double accuracy = 0.0;
  /// Cumulative units averaged over all n clients.
  double comm_down_cum = 0.0;
  double comm_up_cum = 0.0;
  /// Cumulative sum of per-round units divided by that round's participants.
  double comm_down_cum_participant = 0.0;
  double comm_up_cum_participant = 0.0;
  std::optional<DriftReport> drift;
  double rate_et = 0.0;
  double rate_gt = 0.0;
  bool has_rates = false;
};

/// Builds the suite for one trial; trial 0 uses the master seed directly.
ProblemSuite build_suite(const ExperimentConfig& config, std::size_t trial);

/// Best training accuracy of full-batch gradient descent (step 1/L) on f from the origin.
double central_reference_accuracy(const ProblemSuite& suite, std::size_t iterations = 3000);

/// Absolute threshold for `target` on `suite`.
double resolve_threshold(const Target& target, const ProblemSuite& suite);

/// Median of the metric over the window of `window` rounds centered on `index`
/// (one extra round ahead for even windows), truncated at the ends of `rows`.
double smoothed_metric(const std::vector<MetricsRow>& rows, std::size_t index, TargetMetric metric,
                       std::size_t window);

/// Runs one trial on `suite`. Stops after the first round whose smoothed metric
/// meets `threshold` (when the target is set) or after T_max rounds.
std::vector<MetricsRow> run_trial(const ExperimentConfig& config, const ProblemSuite& suite,
                                  std::size_t trial, std::optional<double> threshold,
                                  CommLedger* ledger_out = nullptr);

struct TrialResult {
  std::vector<MetricsRow> rows;
  std::optional<std::size_t> rounds_to_target;
  double threshold = 0.0;
  double comm_to_target = 0.0;  // population-mean cumulative down + up at the target round
  bool ledger_audit_ok = true;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<TrialResult> trials;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// First (1-based) round whose smoothed metric meets the absolute threshold.
std::optional<std::size_t> rounds_to_target(const std::vector<MetricsRow>& rows,
                                            TargetMetric metric, double threshold,
                                            std::size_t window = 3);

enum class SweepAxis { DirichletAlpha, K, Y, Heterogeneity };

SweepAxis sweep_axis_from_string(const std::string& name);
std::string to_string(SweepAxis axis);

struct SweepRow {
  double value = 0.0;
  std::size_t trials = 0;
  std::size_t reached = 0;
  /// Unreached trials count as T_max + 1.
  double rounds_mean = 0.0;
  double rounds_sd = 0.0;
  double rounds_median = 0.0;
  double comm_mean = 0.0;
  double comm_sd = 0.0;
};

ExperimentConfig with_axis_value(ExperimentConfig base, SweepAxis axis, double value);

std::vector<SweepRow> sweep(const ExperimentConfig& base, SweepAxis axis,
                            const std::vector<double>& values);

/// Median of `xs` (mean of the middle pair for even sizes).
double median(std::vector<double> xs);

/// Column order of the metrics CSV.
extern const char* const kMetricsCsvHeader;
void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, SweepAxis axis);

nlohmann::json config_to_json(const ExperimentConfig& config);
nlohmann::json experiment_summary(const ExperimentResult& result);
nlohmann::json sweep_summary(const ExperimentConfig& base, SweepAxis axis,
                             const std::vector<SweepRow>& rows);

}  // namespace fedpt
