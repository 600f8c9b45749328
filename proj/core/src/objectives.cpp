#include "fedpt/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fedpt/errors.hpp"

namespace fedpt {

namespace {

Eigen::Map<const Eigen::VectorXd> as_eigen(const ParamVector& v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

ParamVector from_eigen(const Eigen::VectorXd& v) {
  return ParamVector(std::vector<double>(v.data(), v.data() + v.size()));
}

void require_dim(const ProblemSuite& suite, const ParamVector& x, const char* where) {
  if (x.size() != suite.dimension) {
    throw DimensionError(std::string(where) + ": expected dimension " +
                         std::to_string(suite.dimension) + ", got " + std::to_string(x.size()));
  }
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

ParamVector clip(ParamVector g, double max_norm) {
  if (max_norm <= 0.0) return g;
  const double nrm = norm(g);
  if (nrm > max_norm) g *= max_norm / nrm;
  return g;
}

Eigen::MatrixXd random_spd(std::size_t d, double mu, double L, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(mu, L);
  Eigen::MatrixXd g(d, d);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) g(r, c) = normal(rng);
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd eig(d);
  for (std::size_t i = 0; i < d; ++i) eig(i) = unif(rng);
  eig(0) = L;
  if (d > 1) eig(1) = mu;
  Eigen::MatrixXd a = q * eig.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

std::vector<Eigen::VectorXd> separated_unit_means(std::size_t classes, std::size_t d, Rng& rng) {
  // Pairwise angles of at least 45 degrees.
  const double max_cos = std::cos(M_PI / 4.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<Eigen::VectorXd> means;
  int attempts = 0;
  while (means.size() < classes) {
    if (++attempts > 100000) throw ConfigError("cannot place class means with 45 degree separation");
    Eigen::VectorXd u(d);
    for (std::size_t j = 0; j < d; ++j) u(j) = normal(rng);
    u.normalize();
    bool ok = std::all_of(means.begin(), means.end(),
                          [&](const Eigen::VectorXd& m) { return m.dot(u) <= max_cos; });
    if (ok) means.push_back(u);
  }
  return means;
}

}  // namespace

std::string to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::Quadratic ? "quadratic" : "logistic";
}

ClientObjective ClientObjective::quadratic(Eigen::MatrixXd curvature, ParamVector center,
                                           double min_eigenvalue) {
  const auto d = center.size();
  if (d == 0) throw ConfigError("quadratic objective: empty center");
  if (static_cast<std::size_t>(curvature.rows()) != d ||
      static_cast<std::size_t>(curvature.cols()) != d) {
    throw DimensionError("quadratic objective: curvature must be d x d");
  }
  if (!curvature.isApprox(curvature.transpose(), 1e-12)) {
    throw ConfigError("quadratic objective: curvature is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(curvature, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(min_eigenvalue > 0.0) || lo < min_eigenvalue * (1.0 - 1e-9)) {
    throw ConfigError("quadratic objective: smallest eigenvalue " + std::to_string(lo) +
                      " below required " + std::to_string(min_eigenvalue));
  }
  return ClientObjective(QuadraticData{std::move(curvature), std::move(center)}, d, hi);
}

ClientObjective ClientObjective::logistic(Eigen::MatrixXd features, std::vector<int> labels,
                                          std::vector<int> source_class, double l2_reg) {
  if (features.rows() < 1) throw ConfigError("logistic objective: shard must hold a sample");
  if (static_cast<Eigen::Index>(labels.size()) != features.rows()) {
    throw DimensionError("logistic objective: label count does not match feature rows");
  }
  if (source_class.empty()) source_class.assign(labels.size(), -1);
  if (!(l2_reg >= 0.0)) throw ConfigError("logistic objective: l2_reg must be nonnegative");
  for (int y : labels) {
    if (y != 0 && y != 1) throw ConfigError("logistic objective: labels must be 0 or 1");
  }
  const double max_row_sq = features.rowwise().squaredNorm().maxCoeff();
  const auto d = static_cast<std::size_t>(features.cols());
  const double lip = 0.25 * max_row_sq + l2_reg;
  return ClientObjective(
      LogisticData{std::move(features), std::move(labels), std::move(source_class), l2_reg}, d,
      lip);
}

ObjectiveKind ClientObjective::kind() const noexcept {
  return std::holds_alternative<QuadraticData>(data_) ? ObjectiveKind::Quadratic
                                                      : ObjectiveKind::Logistic;
}

std::size_t ClientObjective::samples() const noexcept {
  if (const auto* lg = as_logistic()) return static_cast<std::size_t>(lg->features.rows());
  return 1;
}

double ClientObjective::loss(const ParamVector& x) const {
  if (x.size() != dim_) throw DimensionError("ClientObjective::loss: dimension mismatch");
  if (const auto* q = as_quadratic()) {
    const Eigen::VectorXd r = as_eigen(x) - as_eigen(q->center);
    return 0.5 * r.dot(q->curvature * r);
  }
  const auto& lg = std::get<LogisticData>(data_);
  const Eigen::VectorXd z = lg.features * as_eigen(x);
  double s = 0.0;
  for (Eigen::Index j = 0; j < z.size(); ++j) s += softplus(z(j)) - lg.labels[j] * z(j);
  return s / static_cast<double>(z.size()) + 0.5 * lg.l2_reg * squared_norm(x);
}

ParamVector ClientObjective::gradient(const ParamVector& x) const {
  if (x.size() != dim_) throw DimensionError("ClientObjective::gradient: dimension mismatch");
  if (const auto* q = as_quadratic()) {
    return from_eigen(q->curvature * (as_eigen(x) - as_eigen(q->center)));
  }
  const auto& lg = std::get<LogisticData>(data_);
  std::vector<std::size_t> rows(static_cast<std::size_t>(lg.features.rows()));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return minibatch_gradient(x, rows);
}

ParamVector ClientObjective::minibatch_gradient(const ParamVector& x,
                                                const std::vector<std::size_t>& rows) const {
  if (x.size() != dim_) throw DimensionError("minibatch_gradient: dimension mismatch");
  const auto* lg = as_logistic();
  if (lg == nullptr) return gradient(x);
  if (rows.empty()) throw ConfigError("minibatch_gradient: empty batch");
  const auto xe = as_eigen(x);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim_));
  for (std::size_t r : rows) {
    const auto row = lg->features.row(static_cast<Eigen::Index>(r));
    const double z = row.dot(xe);
    g += (sigmoid(z) - lg->labels[r]) * row.transpose();
  }
  g /= static_cast<double>(rows.size());
  g += lg->l2_reg * xe;
  return from_eigen(g);
}

double ProblemSuite::loss(const ParamVector& x) const {
  require_dim(*this, x, "ProblemSuite::loss");
  long double s = 0.0L;
  for (const auto& c : clients) s += c.loss(x);
  return static_cast<double>(s / static_cast<long double>(clients.size()));
}

double ProblemSuite::accuracy(const ParamVector& x) const {
  require_dim(*this, x, "ProblemSuite::accuracy");
  if (kind != ObjectiveKind::Logistic) return std::numeric_limits<double>::quiet_NaN();
  std::size_t correct = 0, total = 0;
  const auto xe = as_eigen(x);
  for (const auto& c : clients) {
    const auto& lg = *c.as_logistic();
    const Eigen::VectorXd z = lg.features * xe;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      const int pred = z(j) > 0.0 ? 1 : 0;
      correct += pred == lg.labels[j] ? 1 : 0;
      ++total;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(total);
}

double ProblemSuite::optimal_loss_lower_bound() const {
  if (minimizer) return loss(*minimizer);
  return 0.0;
}

ProblemSuite make_quadratic_suite(std::vector<QuadraticData> data, double noise_sigma,
                                  double min_eigenvalue) {
  if (data.empty()) throw ConfigError("quadratic suite needs at least one client", "n");
  if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be nonnegative", "sigma");
  ProblemSuite suite;
  suite.kind = ObjectiveKind::Quadratic;
  suite.dimension = data.front().center.size();
  suite.noise_sigma = noise_sigma;
  const auto d = static_cast<Eigen::Index>(suite.dimension);
  Eigen::MatrixXd a_sum = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd ab_sum = Eigen::VectorXd::Zero(d);
  for (auto& q : data) {
    if (q.center.size() != suite.dimension) {
      throw DimensionError("quadratic suite: clients must share dimension");
    }
    a_sum += q.curvature;
    ab_sum += q.curvature * as_eigen(q.center);
    suite.clients.push_back(
        ClientObjective::quadratic(std::move(q.curvature), std::move(q.center), min_eigenvalue));
    suite.smoothness_bound = std::max(suite.smoothness_bound, suite.clients.back().lipschitz());
  }
  suite.minimizer = from_eigen(a_sum.ldlt().solve(ab_sum));
  return suite;
}

ProblemSuite make_quadratic_suite(const QuadraticSuiteSpec& spec) {
  if (spec.n < 1 || spec.d < 1) throw ConfigError("n and d must be at least 1", "n");
  if (!(spec.mu > 0.0)) throw ConfigError("mu must be positive", "mu");
  if (spec.mu > spec.L_target) throw ConfigError("mu must not exceed L_target", "mu");
  if (!(spec.heterogeneity >= 0.0)) {
    throw ConfigError("heterogeneity must be nonnegative", "heterogeneity");
  }
  Rng rng = make_stream(spec.seed, StreamTag::kSuite, 0, 0, 0, 0);
  const Eigen::MatrixXd curvature = random_spd(spec.d, spec.mu, spec.L_target, rng);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<QuadraticData> data;
  data.reserve(spec.n);
  for (std::size_t i = 0; i < spec.n; ++i) {
    ParamVector b(spec.d);
    for (auto& bj : b) bj = spec.heterogeneity * normal(rng);
    data.push_back({curvature, std::move(b)});
  }
  auto suite = make_quadratic_suite(std::move(data), spec.noise_sigma, spec.mu);
  suite.seed = spec.seed;
  suite.generator = {{"generator", "quadratic"},      {"n", spec.n},
                     {"d", spec.d},                   {"heterogeneity", spec.heterogeneity},
                     {"mu", spec.mu},                 {"L_target", spec.L_target},
                     {"noise_sigma", spec.noise_sigma}, {"seed", spec.seed}};
  return suite;
}

ProblemSuite make_two_client_quadratic() {
  std::vector<QuadraticData> data;
  data.push_back({Eigen::MatrixXd::Identity(1, 1), ParamVector{1.0}});
  data.push_back({Eigen::MatrixXd::Identity(1, 1), ParamVector{-1.0}});
  auto suite = make_quadratic_suite(std::move(data), 0.0, 1.0);
  suite.generator = {{"generator", "two_client"}};
  return suite;
}

std::vector<std::vector<std::size_t>> dirichlet_partition(const std::vector<int>& sample_class,
                                                          std::size_t classes, std::size_t n,
                                                          double alpha, Rng& rng,
                                                          int max_redraws) {
  if (!(alpha > 0.0)) throw ConfigError("dirichlet_alpha must be positive", "dirichlet_alpha");
  if (n < 1) throw ConfigError("partition needs at least one client", "n");
  if (sample_class.size() < n) {
    throw ConfigError("fewer samples than clients; cannot give every client a sample", "n");
  }
  std::vector<std::vector<std::size_t>> by_class(classes);
  for (std::size_t s = 0; s < sample_class.size(); ++s) {
    const int c = sample_class[s];
    if (c < 0 || static_cast<std::size_t>(c) >= classes) {
      throw ConfigError("sample class out of range", "classes");
    }
    by_class[static_cast<std::size_t>(c)].push_back(s);
  }

  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<std::vector<std::size_t>> shards;
  for (int attempt = 0; attempt <= max_redraws; ++attempt) {
    shards.assign(n, {});
    for (std::size_t c = 0; c < classes; ++c) {
      auto idx = by_class[c];
      std::shuffle(idx.begin(), idx.end(), rng);
      std::vector<double> p(n);
      double total = 0.0;
      for (auto& pi : p) total += (pi = gamma(rng));
      if (!(total > 0.0)) {
        // All gamma draws underflowed; fall back to a point mass on one client.
        std::fill(p.begin(), p.end(), 0.0);
        p[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)] = 1.0;
        total = 1.0;
      }
      double cum = 0.0;
      std::size_t start = 0;
      for (std::size_t i = 0; i < n; ++i) {
        cum += p[i] / total;
        std::size_t stop = i + 1 == n ? idx.size()
                                      : std::min(idx.size(), static_cast<std::size_t>(std::llround(
                                                                 cum * static_cast<double>(idx.size()))));
        stop = std::max(stop, start);
        for (std::size_t k = start; k < stop; ++k) shards[i].push_back(idx[k]);
        start = stop;
      }
    }
    const bool all_nonempty =
        std::none_of(shards.begin(), shards.end(), [](const auto& s) { return s.empty(); });
    if (all_nonempty) break;
    if (attempt == max_redraws) {
      for (auto& shard : shards) {
        if (!shard.empty()) continue;
        auto largest = std::max_element(shards.begin(), shards.end(),
                                        [](const auto& a, const auto& b) { return a.size() < b.size(); });
        shard.push_back(largest->back());
        largest->pop_back();
      }
    }
  }
  for (auto& s : shards) std::sort(s.begin(), s.end());
  return shards;
}

ProblemSuite make_dirichlet_logistic_suite(const LogisticSuiteSpec& spec) {
  const auto& part = spec.partition;
  if (part.classes < 2) throw ConfigError("classes must be at least 2", "classes");
  if (spec.samples_per_class < 1) {
    throw ConfigError("samples_per_class must be at least 1", "samples_per_class");
  }
  if (!(part.dirichlet_alpha > 0.0)) {
    throw ConfigError("dirichlet_alpha must be positive", "dirichlet_alpha");
  }
  if (spec.n < 1 || spec.d < 1) throw ConfigError("n and d must be at least 1", "n");
  if (spec.batch_size < 1) throw ConfigError("batch_size must be at least 1", "batch_size");
  if (!(spec.l2_reg >= 0.0)) throw ConfigError("l2_reg must be nonnegative", "l2_reg");
  if (!(spec.feature_noise >= 0.0)) {
    throw ConfigError("feature_noise must be nonnegative", "feature_noise");
  }
  if (!(spec.noise_decay >= 0.0)) throw ConfigError("noise_decay must be nonnegative", "noise_decay");
  if (!(spec.class_separation > 0.0)) {
    throw ConfigError("class_separation must be positive", "class_separation");
  }
  if (!(spec.nuisance_scale >= 0.0)) {
    throw ConfigError("nuisance_scale must be nonnegative", "nuisance_scale");
  }

  Rng rng = make_stream(spec.seed, StreamTag::kSuite, 0, 0, 0, 0);
  const auto means = separated_unit_means(part.classes, spec.d, rng);
  const std::size_t total = part.classes * spec.samples_per_class;
  Eigen::MatrixXd data(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(spec.d));
  std::vector<int> sample_class(total);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> noise_sd(spec.d);
  for (std::size_t j = 0; j < spec.d; ++j) {
    noise_sd[j] = spec.feature_noise * std::pow(static_cast<double>(j + 1), -0.5 * spec.noise_decay);
  }
  // Own stream so that suites without the nuisance keep their exact draws.
  Eigen::VectorXd nuisance_dir = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.d));
  Rng nuisance_rng = make_stream(spec.seed, StreamTag::kSuite, 2, 0, 0, 0);
  if (spec.nuisance_scale > 0.0) {
    Eigen::VectorXd contrast = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.d));
    for (std::size_t c = 0; c < part.classes; ++c) contrast += (c % 2 == 0 ? 1.0 : -1.0) * means[c];
    Eigen::VectorXd r(static_cast<Eigen::Index>(spec.d));
    for (auto& v : r) v = normal(nuisance_rng);
    r -= r.dot(contrast) / contrast.squaredNorm() * contrast;
    nuisance_dir = contrast.normalized() + r.normalized();
    nuisance_dir.normalize();
  }
  for (std::size_t c = 0, row = 0; c < part.classes; ++c) {
    for (std::size_t s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (std::size_t j = 0; j < spec.d; ++j) {
        data(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(j)) =
            spec.class_separation * means[c](static_cast<Eigen::Index>(j)) + noise_sd[j] * normal(rng);
      }
      if (spec.nuisance_scale > 0.0) {
        data.row(static_cast<Eigen::Index>(row)) +=
            spec.nuisance_scale * normal(nuisance_rng) * nuisance_dir.transpose();
      }
      sample_class[row] = static_cast<int>(c);
    }
  }

  Rng part_rng = make_stream(part.seed, StreamTag::kSuite, 1, 0, 0, 0);
  const auto shards =
      dirichlet_partition(sample_class, part.classes, spec.n, part.dirichlet_alpha, part_rng);

  ProblemSuite suite;
  suite.kind = ObjectiveKind::Logistic;
  suite.dimension = spec.d;
  suite.batch_size = spec.batch_size;
  suite.seed = spec.seed;
  double worst_var = 0.0;
  for (const auto& shard : shards) {
    Eigen::MatrixXd f(static_cast<Eigen::Index>(shard.size()), static_cast<Eigen::Index>(spec.d));
    std::vector<int> labels, cls;
    for (std::size_t r = 0; r < shard.size(); ++r) {
      f.row(static_cast<Eigen::Index>(r)) = data.row(static_cast<Eigen::Index>(shard[r]));
      cls.push_back(sample_class[shard[r]]);
      labels.push_back(sample_class[shard[r]] % 2);
    }
    // Per-sample gradients at the origin are (1/2 - y) a; their covariance trace
    // over the batch size is the minibatch noise variance there.
    Eigen::VectorXd mean_g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.d));
    double mean_sq = 0.0;
    for (std::size_t r = 0; r < shard.size(); ++r) {
      const Eigen::VectorXd g = (0.5 - labels[r]) * f.row(static_cast<Eigen::Index>(r)).transpose();
      mean_g += g;
      mean_sq += g.squaredNorm();
    }
    mean_g /= static_cast<double>(shard.size());
    mean_sq /= static_cast<double>(shard.size());
    worst_var = std::max(worst_var, (mean_sq - mean_g.squaredNorm()) /
                                        static_cast<double>(spec.batch_size));
    suite.clients.push_back(
        ClientObjective::logistic(std::move(f), std::move(labels), std::move(cls), spec.l2_reg));
    suite.smoothness_bound = std::max(suite.smoothness_bound, suite.clients.back().lipschitz());
  }
  suite.noise_sigma = std::sqrt(std::max(worst_var, 0.0));
  suite.generator = {{"generator", "dirichlet_logistic"},
                     {"n", spec.n},
                     {"d", spec.d},
                     {"classes", part.classes},
                     {"samples_per_class", spec.samples_per_class},
                     {"dirichlet_alpha", part.dirichlet_alpha},
                     {"partition_seed", part.seed},
                     {"batch_size", spec.batch_size},
                     {"feature_noise", spec.feature_noise},
                     {"noise_decay", spec.noise_decay},
                     {"class_separation", spec.class_separation},
                     {"nuisance_scale", spec.nuisance_scale},
                     {"l2_reg", spec.l2_reg},
                     {"seed", spec.seed}};
  return suite;
}

ParamVector full_gradient(const ProblemSuite& suite, const ParamVector& x) {
  require_dim(suite, x, "full_gradient");
  std::vector<ParamVector> grads;
  grads.reserve(suite.clients.size());
  for (const auto& c : suite.clients) grads.push_back(c.gradient(x));
  return ordered_mean(grads);
}

ParamVector stochastic_gradient(const ProblemSuite& suite, std::size_t client,
                                const ParamVector& x, Rng& rng) {
  require_dim(suite, x, "stochastic_gradient");
  if (client >= suite.clients.size()) {
    throw ConfigError("stochastic_gradient: client index out of range");
  }
  const auto& obj = suite.clients[client];
  if (obj.kind() == ObjectiveKind::Quadratic) {
    ParamVector g = obj.gradient(x);
    if (suite.noise_sigma > 0.0) {
      std::normal_distribution<double> noise(
          0.0, suite.noise_sigma / std::sqrt(static_cast<double>(suite.dimension)));
      for (auto& gj : g) gj += noise(rng);
    }
    return clip(std::move(g), suite.clip_norm);
  }
  std::uniform_int_distribution<std::size_t> pick(0, obj.samples() - 1);
  std::vector<std::size_t> rows(suite.batch_size);
  for (auto& r : rows) r = pick(rng);
  return clip(obj.minibatch_gradient(x, rows), suite.clip_norm);
}

double estimate_grad_bound(const ProblemSuite& suite, double probe_radius, std::size_t probes,
                           Rng& rng) {
  if (probes < 1) throw ConfigError("estimate_grad_bound: probes must be at least 1");
  if (!(probe_radius >= 0.0)) throw ConfigError("estimate_grad_bound: negative radius");
  std::vector<ParamVector> points{ParamVector::zeros(suite.dimension)};
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t p = 0; p < probes; ++p) {
    ParamVector u(suite.dimension);
    for (auto& uj : u) uj = normal(rng);
    const double nu = norm(u);
    if (nu == 0.0) continue;
    u *= probe_radius / nu;
    points.push_back(std::move(u));
  }
  double best = 0.0;
  for (const auto& x : points) {
    for (std::size_t i = 0; i < suite.num_clients(); ++i) {
      best = std::max(best, norm(stochastic_gradient(suite, i, x, rng)));
    }
  }
  return 1.5 * best;
}

nlohmann::json suite_to_json(const ProblemSuite& suite) {
  using nlohmann::json;
  json j;
  j["format"] = "fedpt-suite/1";
  j["kind"] = to_string(suite.kind);
  j["dimension"] = suite.dimension;
  j["clients"] = suite.num_clients();
  j["smoothness_bound"] = suite.smoothness_bound;
  j["grad_bound_estimate"] = suite.grad_bound_estimate;
  j["noise_sigma"] = suite.noise_sigma;
  j["batch_size"] = suite.batch_size;
  j["clip_norm"] = suite.clip_norm;
  j["seed"] = suite.seed;
  j["generator"] = suite.generator;
  j["minimizer"] = suite.minimizer ? json(suite.minimizer->values()) : json(nullptr);
  json data = json::array();
  for (const auto& c : suite.clients) {
    if (const auto* q = c.as_quadratic()) {
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> a = q->curvature;
      data.push_back({{"curvature", std::vector<double>(a.data(), a.data() + a.size())},
                      {"center", q->center.values()}});
    } else {
      const auto& lg = *c.as_logistic();
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> f = lg.features;
      data.push_back({{"rows", f.rows()},
                      {"features", std::vector<double>(f.data(), f.data() + f.size())},
                      {"labels", lg.labels},
                      {"source_class", lg.source_class},
                      {"l2_reg", lg.l2_reg}});
    }
  }
  j["client_data"] = std::move(data);
  return j;
}

ProblemSuite suite_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "fedpt-suite/1") throw ConfigError("unknown suite format");
  ProblemSuite suite;
  const auto kind = j.at("kind").get<std::string>();
  suite.dimension = j.at("dimension").get<std::size_t>();
  const auto d = static_cast<Eigen::Index>(suite.dimension);
  if (kind == "quadratic") {
    suite.kind = ObjectiveKind::Quadratic;
    for (const auto& c : j.at("client_data")) {
      auto a = c.at("curvature").get<std::vector<double>>();
      if (a.size() != suite.dimension * suite.dimension) {
        throw DimensionError("suite json: curvature size mismatch");
      }
      Eigen::MatrixXd m = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.data(), d, d);
      suite.clients.push_back(ClientObjective::quadratic(
          std::move(m), ParamVector(c.at("center").get<std::vector<double>>()),
          std::numeric_limits<double>::min()));
    }
  } else if (kind == "logistic") {
    suite.kind = ObjectiveKind::Logistic;
    for (const auto& c : j.at("client_data")) {
      auto f = c.at("features").get<std::vector<double>>();
      const auto rows = c.at("rows").get<Eigen::Index>();
      if (static_cast<Eigen::Index>(f.size()) != rows * d) {
        throw DimensionError("suite json: feature size mismatch");
      }
      Eigen::MatrixXd m = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(f.data(), rows, d);
      suite.clients.push_back(ClientObjective::logistic(
          std::move(m), c.at("labels").get<std::vector<int>>(),
          c.value("source_class", std::vector<int>{}), c.at("l2_reg").get<double>()));
    }
  } else {
    throw ConfigError("suite json: unknown kind '" + kind + "'", "kind");
  }
  for (const auto& c : suite.clients) {
    if (c.dimension() != suite.dimension) throw DimensionError("suite json: client dimension");
  }
  suite.smoothness_bound = j.at("smoothness_bound").get<double>();
  suite.grad_bound_estimate = j.value("grad_bound_estimate", 0.0);
  suite.noise_sigma = j.value("noise_sigma", 0.0);
  suite.batch_size = j.value("batch_size", std::size_t{1});
  suite.clip_norm = j.value("clip_norm", 0.0);
  suite.seed = j.value("seed", std::uint64_t{0});
  suite.generator = j.value("generator", nlohmann::json::object());
  if (!j.at("minimizer").is_null()) {
    suite.minimizer = ParamVector(j.at("minimizer").get<std::vector<double>>());
  }
  return suite;
}

}  // namespace fedpt
