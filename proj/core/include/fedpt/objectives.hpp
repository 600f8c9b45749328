#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedpt/paramvec.hpp"
#include "fedpt/seeding.hpp"

namespace fedpt {

enum class ObjectiveKind { Quadratic, Logistic };

std::string to_string(ObjectiveKind kind);

/// f(x) = 1/2 (x - b)^T A (x - b) with A symmetric positive definite.
struct QuadraticData {
  Eigen::MatrixXd curvature;
  ParamVector center;
};

/// Mean logistic loss over a shard plus l2_reg/2 ||x||^2. Labels are 0/1;
/// `source_class` keeps the generating class of each row.
struct LogisticData {
  Eigen::MatrixXd features;  // rows = samples
  std::vector<int> labels;
  std::vector<int> source_class;
  double l2_reg = 0.0;
};

/// One client's local loss f_i with exact gradient oracle.
class ClientObjective {
 public:
  /// Validates symmetry and that the smallest eigenvalue is at least `min_eigenvalue` > 0.
  static ClientObjective quadratic(Eigen::MatrixXd curvature, ParamVector center,
                                   double min_eigenvalue);
  static ClientObjective logistic(Eigen::MatrixXd features, std::vector<int> labels,
                                  std::vector<int> source_class, double l2_reg);

  ObjectiveKind kind() const noexcept;
  std::size_t dimension() const noexcept { return dim_; }
  /// Number of samples (1 for quadratics).
  std::size_t samples() const noexcept;

  double loss(const ParamVector& x) const;
  ParamVector gradient(const ParamVector& x) const;
  /// Gradient of the loss restricted to the given rows (mean over them) plus the l2 term.
  ParamVector minibatch_gradient(const ParamVector& x, const std::vector<std::size_t>& rows) const;
  /// Lipschitz constant of the gradient: exact for quadratics, 0.25 max ||a||^2 + l2 for logistic.
  double lipschitz() const noexcept { return lipschitz_; }

  const QuadraticData* as_quadratic() const noexcept { return std::get_if<QuadraticData>(&data_); }
  const LogisticData* as_logistic() const noexcept { return std::get_if<LogisticData>(&data_); }

 private:
  ClientObjective(std::variant<QuadraticData, LogisticData> data, std::size_t dim, double lipschitz)
      : data_(std::move(data)), dim_(dim), lipschitz_(lipschitz) {}

  std::variant<QuadraticData, LogisticData> data_;
  std::size_t dim_;
  double lipschitz_;
};

/// A set of n client objectives sharing dimension d, plus the constants the
/// step-size budget needs (L, G, sigma) and the noise model.
struct ProblemSuite {
  ObjectiveKind kind = ObjectiveKind::Quadratic;
  std::vector<ClientObjective> clients;
  std::size_t dimension = 0;
  double smoothness_bound = 0.0;
  double grad_bound_estimate = 0.0;
  /// Quadratics: total standard deviation of additive gradient noise.
  /// Logistic: minibatch noise standard deviation measured at the origin.
  double noise_sigma = 0.0;
  std::size_t batch_size = 1;
  /// Stochastic gradients are clipped to this norm when > 0.
  double clip_norm = 0.0;
  /// Closed-form global minimizer (quadratics only).
  std::optional<ParamVector> minimizer;
  std::uint64_t seed = 0;
  nlohmann::json generator = nlohmann::json::object();

  std::size_t num_clients() const noexcept { return clients.size(); }

  /// f(x) = (1/n) sum_i f_i(x).
  double loss(const ParamVector& x) const;
  /// Fraction of all pooled samples classified correctly; NaN for quadratic suites.
  double accuracy(const ParamVector& x) const;
  /// Minimum of f if known in closed form, else a valid lower bound (0 for logistic).
  double optimal_loss_lower_bound() const;
};

struct QuadraticSuiteSpec {
  std::size_t n = 10;
  std::size_t d = 10;
  double heterogeneity = 1.0;
  double mu = 0.1;
  double L_target = 1.0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

struct PartitionSpec {
  double dirichlet_alpha = 0.1;
  std::size_t classes = 5;
  std::uint64_t seed = 0;
};

struct LogisticSuiteSpec {
  std::size_t n = 100;
  std::size_t d = 50;
  std::size_t samples_per_class = 200;
  PartitionSpec partition;
  std::size_t batch_size = 8;
  double feature_noise = 0.5;
  /// Norm of each class mean.
  double class_separation = 1.0;
  /// Sd of a noise component shared along one direction that leans 45 degrees into the
  /// even-minus-odd class contrast. Zero disables it.
  double nuisance_scale = 0.0;
  /// Noise standard deviation of coordinate j (1-based) is feature_noise * j^(-decay/2).
  double noise_decay = 0.0;
  double l2_reg = 1e-4;
  std::uint64_t seed = 0;
};

/// Random SPD curvature shared by all clients, centers b_i = heterogeneity * u_i
/// with u_i standard normal. Records the closed-form minimizer.
ProblemSuite make_quadratic_suite(const QuadraticSuiteSpec& spec);

/// Builds a quadratic suite from explicit (A_i, b_i) pairs.
ProblemSuite make_quadratic_suite(std::vector<QuadraticData> clients, double noise_sigma,
                                  double min_eigenvalue = 1e-12);

/// f_1 = 1/2 (x-1)^2, f_2 = 1/2 (x+1)^2. Minimizer 0, local gradients -1 and +1 there.
ProblemSuite make_two_client_quadratic();

/// Class-conditional Gaussian dataset split across clients by per-class Dirichlet draws.
ProblemSuite make_dirichlet_logistic_suite(const LogisticSuiteSpec& spec);

/// Assigns each sample (by class label) to a client: for every class a proportion
/// vector is drawn from Dirichlet(alpha, ..., alpha) over n clients and the class's
/// samples are cut at the cumulative proportions. Draws are repeated while some
/// client is empty; after `max_redraws` empty clients take one sample from the
/// largest shard. Returned shards list sample indices in ascending order.
std::vector<std::vector<std::size_t>> dirichlet_partition(const std::vector<int>& sample_class,
                                                          std::size_t classes, std::size_t n,
                                                          double alpha, Rng& rng,
                                                          int max_redraws = 100);

/// (1/n) sum_i grad f_i(x), summed in ascending client order.
ParamVector full_gradient(const ProblemSuite& suite, const ParamVector& x);

/// Unbiased estimate of grad f_i(x): additive Gaussian noise with variance
/// sigma^2/d per coordinate for quadratics, a with-replacement minibatch for logistic.
ParamVector stochastic_gradient(const ProblemSuite& suite, std::size_t client,
                                const ParamVector& x, Rng& rng);

/// 1.5 x the largest stochastic gradient norm seen over clients at the origin and at
/// `probes` points on the sphere of radius `probe_radius`.
double estimate_grad_bound(const ProblemSuite& suite, double probe_radius, std::size_t probes,
                           Rng& rng);

nlohmann::json suite_to_json(const ProblemSuite& suite);
ProblemSuite suite_from_json(const nlohmann::json& j);

}  // namespace fedpt
