#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "fedpt/diagnostics.hpp"
#include "fedpt/errors.hpp"
#include "fedpt/fed_algorithms.hpp"
#include "fedpt/probe.hpp"
#include "oracles.hpp"

using fedpt::AlgorithmKind;
using fedpt::ClientTrajectory;
using fedpt::ParamVector;

namespace {

fedpt::ProblemSuite quadratic(std::size_t n, std::size_t d, std::uint64_t seed,
                              double sigma = 0.0) {
  fedpt::QuadraticSuiteSpec spec;
  spec.n = n;
  spec.d = d;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  return fedpt::make_quadratic_suite(spec);
}

ParamVector random_vector(std::mt19937_64& rng, std::size_t d) {
  std::normal_distribution<double> n01;
  ParamVector v(d);
  for (auto& x : v) x = n01(rng);
  return v;
}

}  // namespace

TEST(StepSizeBudget, HandComputedExample) {
  const auto b = fedpt::step_size_budget(1, 1, 3, 100, 10, 0.9, 1e-8);
  EXPECT_LE(oracle::relative_error(b.combined_cap, 1.0 / 1200.0), 1e-12);
  EXPECT_LE(oracle::relative_error(b.local_cap_gt, 1.0 / 12000.0), 1e-12);
  const double q = 0.09;
  const double et = std::sqrt(1 + 1e-8 + q) * std::sqrt(1 + 1e-8) / (12 * std::sqrt(2.0) * q * 3);
  EXPECT_LE(oracle::relative_error(b.local_cap_et, std::min(et, 1.0 / 12000.0)), 1e-12);
  const double terms[] = {q / (24 * (1 + 1e-8)), 1.0 / 24, 1.0 / 1200, std::sqrt(0.1)};
  EXPECT_NEAR(terms[0], 3.75e-3, 1e-10);
  EXPECT_EQ(b.combined_cap, *std::min_element(std::begin(terms), std::end(terms)));
}

TEST(StepSizeBudget, RejectsNonpositiveInputs) {
  EXPECT_THROW(fedpt::step_size_budget(0, 1, 3, 100, 10, 0.9, 1e-8), fedpt::DomainError);
  EXPECT_THROW(fedpt::step_size_budget(1, -1, 3, 100, 10, 0.9, 1e-8), fedpt::DomainError);
  EXPECT_THROW(fedpt::step_size_budget(1, 1, 3, 100, 10, 1.0, 1e-8), fedpt::DomainError);
  EXPECT_THROW(fedpt::step_size_budget(1, 1, 3, 100, 10, 0.9, 0.0), fedpt::DomainError);
}

TEST(StepSizeBudget, CapsNonincreasingInTKL) {
  const double Ts[] = {10, 50, 100, 500, 2000};
  const double Ks[] = {1, 2, 3, 5, 10};
  const double Ls[] = {0.1, 0.5, 1, 2, 10};
  auto caps = [](double T, double K, double L) {
    const auto b = fedpt::step_size_budget(1.0, L, K, T, 10, 0.9, 1e-8);
    return std::array<double, 3>{b.combined_cap, b.local_cap_gt, b.local_cap_et};
  };
  for (double T : Ts)
    for (double K : Ks)
      for (double L : Ls) {
        const auto here = caps(T, K, L);
        for (std::size_t c = 0; c < 3; ++c) {
          EXPECT_LE(caps(T * 2, K, L)[c], here[c]);
          EXPECT_LE(caps(T, K + 1, L)[c], here[c]);
          EXPECT_LE(caps(T, K, L * 2)[c], here[c]);
        }
      }
}

TEST(MomentWeights, ClosedForms) {
  EXPECT_DOUBLE_EQ(fedpt::moment_weight(1, 1, 0.9), 0.1);
  EXPECT_NEAR(fedpt::moment_weight(3, 1, 0.9), 0.1 * 0.81, 1e-16);
  EXPECT_THROW(fedpt::moment_weight(2, 3, 0.9), fedpt::DomainError);
  for (double b1 : {0.5, 0.9, 0.99}) {
    for (std::size_t k = 1; k <= 100; ++k) {
      double sum = 0.0;
      for (std::size_t kp = 1; kp <= k; ++kp) sum += fedpt::moment_weight(k, kp, b1);
      EXPECT_NEAR(fedpt::moment_weight_sum(k, b1), sum, 1e-12);
      EXPECT_NEAR(fedpt::moment_weight_sum(k, b1), 1.0 - std::pow(b1, double(k)), 1e-12);
    }
  }
}

TEST(MomentWeights, BoundsThatHold) {
  for (double b1 : {0.5, 0.9, 0.99}) {
    for (std::size_t k = 1; k <= 100; ++k) {
      const double ck = fedpt::moment_weight_sum(k, b1);
      // 1 - b1^k rounds to 1.0 once b1^k drops below half an ulp of 1.
      if (std::pow(b1, double(k)) > std::numeric_limits<double>::epsilon() / 2) {
        EXPECT_LT(ck, 1.0);
      } else {
        EXPECT_LE(ck, 1.0);
      }
      if (k >= 2) {
        EXPECT_GE(ck, (1.0 - b1) * b1);
      }
    }
  }
}

// 1 - b1^k <= b1 exactly when k <= log(1 - b1) / log(b1).
TEST(MomentWeights, UpperBoundBeta1HoldsOnlyForShortIntervals) {
  for (double b1 : {0.5, 0.9, 0.99}) {
    const double k_max = std::log(1.0 - b1) / std::log(b1);
    for (std::size_t k = 1; k <= 100; ++k) {
      const bool below = fedpt::moment_weight_sum(k, b1) <= b1;
      EXPECT_EQ(below, double(k) <= k_max) << "beta1=" << b1 << " k=" << k;
    }
  }
}

TEST(MeasureXi, ZeroWithoutLocalMovement) {
  const auto suite = quadratic(3, 2, 1);
  const ParamVector x{0.4, -0.1};
  std::vector<ClientTrajectory> traj;
  for (std::size_t i = 0; i < 3; ++i) traj.push_back({i, std::vector<ParamVector>(4, x)});
  EXPECT_NEAR(fedpt::measure_xi(suite, traj, x, 0.9), 0.0, 1e-30);
  EXPECT_NEAR(fedpt::measure_calE(suite, traj, x, 0.9), 0.0, 1e-30);
  std::vector<ClientTrajectory> k1{{0, {x}}};
  EXPECT_EQ(fedpt::measure_xi(suite, k1, x, 0.9), 0.0);
}

TEST(MeasureXi, MatchesDirectEvaluation) {
  const auto suite = quadratic(2, 2, 3);
  std::mt19937_64 rng(5);
  const ParamVector x = random_vector(rng, 2);
  std::vector<ClientTrajectory> traj;
  for (std::size_t i = 0; i < 2; ++i) {
    std::vector<ParamVector> it{x};
    for (int k = 1; k < 3; ++k) it.push_back(x + 0.1 * random_vector(rng, 2));
    traj.push_back({i, it});
  }
  double expected = 0.0;
  const double b1 = 0.9;
  for (const auto& c : traj) {
    const auto& f = suite.clients[c.client];
    for (std::size_t k = 1; k <= 3; ++k) {
      ParamVector acc(2);
      for (std::size_t kp = 1; kp <= k; ++kp) {
        acc.axpy((1 - b1) * std::pow(b1, double(k - kp)), f.gradient(c.iterates[kp - 1]));
      }
      acc.axpy(-(1 - std::pow(b1, double(k))), f.gradient(x));
      expected += fedpt::squared_norm(acc);
    }
  }
  expected /= 2.0;
  EXPECT_LE(oracle::relative_error(fedpt::measure_xi(suite, traj, x, b1), expected), 1e-12);
}

TEST(MeasureCalE, EqualsXiAndIsNonnegative) {
  const auto suite = quadratic(4, 3, 6);
  std::mt19937_64 rng(8);
  for (int t = 0; t < 20; ++t) {
    const ParamVector x = random_vector(rng, 3);
    std::vector<ClientTrajectory> traj;
    for (std::size_t i = 0; i < 4; ++i) {
      std::vector<ParamVector> it;
      for (int k = 0; k < 3; ++k) it.push_back(random_vector(rng, 3));
      traj.push_back({i, it});
    }
    const double e = fedpt::measure_calE(suite, traj, x, 0.9);
    EXPECT_GE(e, 0.0);
    EXPECT_EQ(e, fedpt::measure_xi(suite, traj, x, 0.9));
  }
}

TEST(MeasureXi, WithinLocalDeviationBoundOnNoiselessRun) {
  const auto suite = quadratic(5, 3, 2);
  auto server = fedpt::ServerState::initial(5, ParamVector(3, 2.0));
  fedpt::RoundHyper h;
  h.S = 5;
  h.Y = 5;
  h.local.K = 4;
  h.local.eta_l = 1e-3;
  h.local.record_trace = true;
  const double eps = h.local.adam.eps, L = suite.smoothness_bound, K = 4, eta = 1e-3;
  std::vector<double> xis;
  double G = 0.0;
  for (int t = 0; t < 30; ++t) {
    const auto out = fedpt::run_round(server, suite, AlgorithmKind::FAdamGT, h);
    std::vector<ClientTrajectory> traj;
    for (const auto& r : out.results) {
      traj.push_back({r.client, r.trace->iterates});
      for (const auto& x : r.trace->iterates) {
        G = std::max(G, fedpt::norm(suite.clients[r.client].gradient(x)));
      }
    }
    xis.push_back(fedpt::measure_xi(suite, traj, out.x_start, h.local.adam.beta1));
  }
  const double C = G * G * (1 + eps) / eps;
  for (double xi : xis) EXPECT_LE(xi, 4 * K * K * K * L * L * eta * eta * C);
}

TEST(MeasureGamma, Examples) {
  const auto suite = quadratic(3, 2, 4);
  const ParamVector x{0.2, 0.3};
  std::vector<std::vector<ParamVector>> exact, zeros;
  double expected = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto g = suite.clients[i].gradient(x);
    exact.push_back(std::vector<ParamVector>(3, g));
    zeros.push_back(std::vector<ParamVector>(3, ParamVector::zeros(2)));
    expected += fedpt::squared_norm(g);
  }
  EXPECT_EQ(fedpt::measure_gamma(exact, suite, x), 0.0);
  EXPECT_LE(oracle::relative_error(fedpt::measure_gamma(zeros, suite, x), expected / 3.0), 1e-14);
  EXPECT_THROW(fedpt::measure_gamma(std::span(zeros).first(2), suite, x), fedpt::DimensionError);
}

TEST(MeasureGamma, InvariantUnderClientRelabeling) {
  std::vector<fedpt::QuadraticData> data;
  std::mt19937_64 rng(12);
  for (int i = 0; i < 4; ++i) data.push_back({Eigen::MatrixXd::Identity(2, 2), random_vector(rng, 2)});
  std::vector<std::vector<ParamVector>> snaps;
  for (int i = 0; i < 4; ++i) snaps.push_back({random_vector(rng, 2), random_vector(rng, 2)});
  const auto suite = fedpt::make_quadratic_suite(data, 0.0);
  const ParamVector x{0.5, 0.5};
  const double before = fedpt::measure_gamma(snaps, suite, x);

  std::vector<std::size_t> perm{2, 0, 3, 1};
  std::vector<fedpt::QuadraticData> pdata;
  std::vector<std::vector<ParamVector>> psnaps;
  for (auto p : perm) {
    pdata.push_back(data[p]);
    psnaps.push_back(snaps[p]);
  }
  const auto psuite = fedpt::make_quadratic_suite(pdata, 0.0);
  EXPECT_NEAR(fedpt::measure_gamma(psnaps, psuite, x), before, 1e-14 * before);
}

TEST(TheoreticalRate, Examples) {
  using fedpt::RateKind;
  EXPECT_DOUBLE_EQ(fedpt::theoretical_rate(RateKind::GradientTracking, 1, 1, 1, 1, 5, 10), 3.0);
  const double et = fedpt::theoretical_rate(RateKind::EstimateTracking, 2.5, 3, 10, 50, 5, 100);
  const double gt = fedpt::theoretical_rate(RateKind::GradientTracking, 2.5, 3, 10, 50, 5, 100);
  EXPECT_NEAR(et - gt, 5.0 * 9.0 / (100.0 * 50.0), 1e-15);
  for (auto kind : {RateKind::EstimateTracking, RateKind::GradientTracking}) {
    double prev = INFINITY;
    for (double T = 2; T <= 2000; T *= 1.5) {
      const double r = fedpt::theoretical_rate(kind, 3.0, 3, 10, T, 5, 100);
      EXPECT_LT(r, prev);
      prev = r;
    }
  }
}

TEST(FixedPointProbe, TwoClientSuite) {
  const auto suite = fedpt::make_two_client_quadratic();
  fedpt::ProbeSettings s;
  s.rounds = 100;
  EXPECT_LE(fedpt::fixed_point_probe(AlgorithmKind::FAdamGT, suite, s).max_drift, 1e-9);
  EXPECT_LE(fedpt::fixed_point_probe(AlgorithmKind::Scaffold, suite, s).max_drift, 1e-9);
  for (double a : {0.25, 0.5, 1.0}) {
    s.alpha_weight = a;
    EXPECT_GT(fedpt::fixed_point_probe(AlgorithmKind::FedLada, suite, s).max_drift, 1e-6) << a;
  }
  s.alpha_weight = 0.0;
  EXPECT_LE(fedpt::fixed_point_probe(AlgorithmKind::FedLada, suite, s).max_drift, 1e-9);

  s.rounds = 1;
  const auto la = fedpt::fixed_point_probe(AlgorithmKind::LocalAdam, suite, s);
  EXPECT_GE(la.max_drift, 5e-4);
  // Both clients move by the same amount in opposite directions.
  EXPECT_EQ(la.global_drift, 0.0);
}

// With three clients the normalized Adam steps no longer cancel, so the global
// model itself leaves the optimum after one round.
TEST(FixedPointProbe, LocalAdamGlobalModelDriftsOnAsymmetricSuite) {
  std::vector<fedpt::QuadraticData> data;
  for (double b : {1.0, -0.5, -0.5}) data.push_back({Eigen::MatrixXd::Identity(1, 1), ParamVector{b}});
  const auto suite = fedpt::make_quadratic_suite(data, 0.0);
  ASSERT_NEAR((*suite.minimizer)[0], 0.0, 1e-15);
  fedpt::ProbeSettings s;
  s.rounds = 1;
  s.eta_l = 1e-3;
  s.eta_g = 1.0;
  EXPECT_GE(fedpt::fixed_point_probe(AlgorithmKind::LocalAdam, suite, s).global_drift,
            0.5 * s.eta_l * s.eta_g);
  s.rounds = 100;
  EXPECT_LE(fedpt::fixed_point_probe(AlgorithmKind::FAdamGT, suite, s).max_drift, 1e-9);
}

TEST(FixedPointProbe, RejectsUnsuitableSuites) {
  fedpt::LogisticSuiteSpec spec;
  spec.n = 3;
  spec.d = 2;
  spec.samples_per_class = 5;
  spec.partition.classes = 2;
  const auto logistic = fedpt::make_dirichlet_logistic_suite(spec);
  EXPECT_THROW(fedpt::fixed_point_probe(AlgorithmKind::FAdamGT, logistic, {}), fedpt::ConfigError);
  EXPECT_THROW(fedpt::fixed_point_probe(AlgorithmKind::FAdamGT, quadratic(2, 2, 1, 0.5), {}),
               fedpt::ConfigError);
}
