#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "fedpt/errors.hpp"
#include "fedpt/fed_algorithms.hpp"
#include "oracles.hpp"

using fedpt::AlgorithmKind;
using fedpt::CorrectionMode;
using fedpt::LocalResult;
using fedpt::ParamVector;
using fedpt::RoundPlan;
using fedpt::ServerState;
using fedpt::TrackingPair;

namespace {

fedpt::ProblemSuite one_client_shifted() {
  std::vector<fedpt::QuadraticData> d;
  d.push_back({Eigen::MatrixXd::Identity(1, 1), ParamVector{1.0}});
  return fedpt::make_quadratic_suite(d, 0.0);
}

fedpt::ProblemSuite quadratic(std::size_t n, std::size_t d, double het, double sigma,
                              std::uint64_t seed) {
  fedpt::QuadraticSuiteSpec spec;
  spec.n = n;
  spec.d = d;
  spec.heterogeneity = het;
  spec.noise_sigma = sigma;
  spec.seed = seed;
  return fedpt::make_quadratic_suite(spec);
}

fedpt::ProblemSuite logistic(std::uint64_t seed) {
  fedpt::LogisticSuiteSpec spec;
  spec.n = 12;
  spec.d = 8;
  spec.samples_per_class = 40;
  spec.partition.classes = 3;
  spec.partition.dirichlet_alpha = 0.3;
  spec.batch_size = 4;
  spec.seed = seed;
  return fedpt::make_dirichlet_logistic_suite(spec);
}

RoundPlan full_plan(std::size_t n) {
  RoundPlan p;
  for (std::size_t i = 0; i < n; ++i) p.participants.push_back(i);
  p.trackers = p.participants;
  return p;
}

LocalResult bare_result(std::size_t client, ParamVector delta) {
  LocalResult r;
  r.client = client;
  r.v_final = ParamVector::zeros(delta.size());
  r.v_hat_final = ParamVector::zeros(delta.size());
  r.model_delta = std::move(delta);
  return r;
}

ParamVector mean_of(const std::vector<ParamVector>& vs) { return fedpt::ordered_mean(vs); }

}  // namespace

TEST(SampleRound, TenOfHundredWithFiveTrackers) {
  fedpt::Rng rng(1);
  for (int t = 0; t < 100; ++t) {
    const auto plan = fedpt::sample_round(100, 10, 5, rng);
    ASSERT_EQ(plan.participants.size(), 10u);
    ASSERT_EQ(plan.trackers.size(), 5u);
    EXPECT_TRUE(std::is_sorted(plan.participants.begin(), plan.participants.end()));
    EXPECT_EQ(std::adjacent_find(plan.participants.begin(), plan.participants.end()),
              plan.participants.end());
    EXPECT_TRUE(std::includes(plan.participants.begin(), plan.participants.end(),
                              plan.trackers.begin(), plan.trackers.end()));
  }
}

TEST(SampleRound, FullParticipation) {
  fedpt::Rng rng(2);
  const auto plan = fedpt::sample_round(5, 5, 5, rng);
  EXPECT_EQ(plan.participants, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  EXPECT_EQ(plan.trackers, plan.participants);
}

TEST(SampleRound, Errors) {
  fedpt::Rng rng(3);
  EXPECT_THROW(fedpt::sample_round(100, 10, 11, rng), fedpt::ConfigError);
  EXPECT_THROW(fedpt::sample_round(5, 6, 1, rng), fedpt::ConfigError);
  EXPECT_THROW(fedpt::sample_round(5, 0, 0, rng), fedpt::ConfigError);
  EXPECT_NO_THROW(fedpt::sample_round(5, 2, 0, rng));
}

TEST(SampleRound, InclusionFrequencyIsUniform) {
  const std::size_t n = 100, S = 10, Y = 5, draws = 10000;
  fedpt::Rng rng(2718);
  std::vector<double> in_s(n, 0.0), in_y(n, 0.0);
  for (std::size_t t = 0; t < draws; ++t) {
    const auto plan = fedpt::sample_round(n, S, Y, rng);
    for (auto i : plan.participants) in_s[i] += 1.0;
    for (auto i : plan.trackers) in_y[i] += 1.0;
  }
  const double ps = double(S) / n, py = double(Y) / n;
  const double sd_s = std::sqrt(ps * (1 - ps) / draws), sd_y = std::sqrt(py * (1 - py) / draws);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_NEAR(in_s[i] / draws, ps, 3 * sd_s) << "client " << i;
    EXPECT_NEAR(in_y[i] / draws, py, 3 * sd_y) << "client " << i;
  }
}

TEST(LocalInterval, HandComputedSingleStep) {
  const auto suite = one_client_shifted();
  fedpt::LocalSettings s;
  s.K = 1;
  s.eta_l = 1e-3;
  const ParamVector zero{0.0};
  const auto r = fedpt::run_local_interval(suite, 0, zero, TrackingPair{zero, zero}, zero, zero, s,
                                           CorrectionMode::None, false, {});
  oracle::ScalarAdam ref;
  const double delta = ref.step(-1.0);
  EXPECT_DOUBLE_EQ(r.model_delta[0], -s.eta_l * delta);
  EXPECT_NEAR(r.model_delta[0], s.eta_l, 1e-10);
  EXPECT_NEAR(r.v_final[0], 0.01, 1e-15);
  EXPECT_DOUBLE_EQ(r.grad_mean[0], -1.0);
  EXPECT_FALSE(r.tracking_update.has_value());
}

TEST(LocalInterval, MatchesScalarOracleOverSeveralSteps) {
  const auto suite = one_client_shifted();
  fedpt::LocalSettings s;
  s.K = 7;
  s.eta_l = 0.05;
  const ParamVector x0{-0.4}, v{0.02}, vh{0.03}, zero{0.0};
  const auto r = fedpt::run_local_interval(suite, 0, x0, TrackingPair{zero, zero}, v, vh, s,
                                           CorrectionMode::None, false, {});
  oracle::ScalarAdam ref;
  ref.v = 0.02;
  ref.v_hat = 0.03;
  double x = -0.4;
  for (int k = 0; k < 7; ++k) x -= 0.05 * ref.step(x - 1.0);
  EXPECT_DOUBLE_EQ(r.model_delta[0], x - -0.4);
  EXPECT_DOUBLE_EQ(r.v_final[0], ref.v);
  EXPECT_DOUBLE_EQ(r.v_hat_final[0], ref.v_hat);
}

TEST(LocalInterval, GradientTrackingAtOptimumDoesNotMove) {
  const auto suite = fedpt::make_two_client_quadratic();
  fedpt::LocalSettings s;
  s.K = 5;
  const ParamVector x_star{0.0}, y{0.0};
  for (std::size_t i = 0; i < 2; ++i) {
    const ParamVector yi = suite.clients[i].gradient(x_star);
    const auto r = fedpt::run_local_interval(suite, i, x_star, TrackingPair{y, yi}, y, y, s,
                                             CorrectionMode::GradientTracking, true, {});
    EXPECT_EQ(r.model_delta, (ParamVector{0.0}));
    ASSERT_TRUE(r.tracking_update.has_value());
    EXPECT_EQ(*r.tracking_update, ParamVector{0.0});
  }
}

TEST(LocalInterval, EstimateTrackingIdentity) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n01;
  const auto suite = quadratic(5, 4, 1.0, 0.5, 3);
  for (int trial = 0; trial < 30; ++trial) {
    ParamVector x0(4), y(4), yi(4), v(4);
    for (std::size_t j = 0; j < 4; ++j) {
      x0[j] = n01(rng);
      y[j] = n01(rng);
      yi[j] = n01(rng);
      v[j] = std::abs(n01(rng));
    }
    fedpt::LocalSettings s;
    s.K = 1 + trial % 6;
    s.eta_l = 1e-3 * (1 + trial % 4);
    s.record_trace = true;
    const fedpt::StepStreams streams{5, 0, std::uint64_t(trial), 2};
    const auto r = fedpt::run_local_interval(suite, 2, x0, TrackingPair{y, yi}, v, v, s,
                                             CorrectionMode::EstimateTracking, true, streams);
    ASSERT_TRUE(r.tracking_update && r.trace);
    ASSERT_EQ(r.trace->directions.size(), s.K);
    const auto mean_delta = mean_of(r.trace->directions);
    const auto y_next = yi + *r.tracking_update;
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(y_next[j], mean_delta[j], 1e-12 * std::max(1.0, std::abs(mean_delta[j])));
    }
  }
}

TEST(LocalInterval, GradientTrackingUpdateIsMeanRawGradient) {
  const auto suite = quadratic(3, 3, 1.0, 0.2, 8);
  const ParamVector x0{0.1, 0.2, 0.3}, y{0.5, 0, 0}, yi{0, 0.5, 0}, zero(3);
  fedpt::LocalSettings s;
  s.K = 4;
  const auto r = fedpt::run_local_interval(suite, 1, x0, TrackingPair{y, yi}, zero, zero, s,
                                           CorrectionMode::GradientTracking, true, {1, 0, 1, 1});
  ASSERT_TRUE(r.tracking_update);
  EXPECT_LE(fedpt::max_abs_diff(yi + *r.tracking_update, r.grad_mean), 1e-15);
}

TEST(AggregateModels, Examples) {
  auto server = ServerState::initial(2, ParamVector{0.5});
  RoundPlan plan{{0, 1}, {}};
  fedpt::aggregate_models(server, plan, {bare_result(0, {1.0}), bare_result(1, {-1.0})}, 1.0);
  EXPECT_EQ(server.x, (ParamVector{0.5}));

  auto single = ServerState::initial(3, ParamVector{1.0});
  fedpt::aggregate_models(single, RoundPlan{{2}, {}}, {bare_result(2, {2.0})}, 0.5);
  EXPECT_EQ(single.x, (ParamVector{2.0}));
}

TEST(AggregateModels, MissingOrExtraResultIsProtocolError) {
  auto server = ServerState::initial(3, ParamVector{0.0});
  RoundPlan plan{{0, 2}, {}};
  EXPECT_THROW(fedpt::aggregate_models(server, plan, {bare_result(0, {1.0})}, 1.0),
               fedpt::ProtocolError);
  EXPECT_THROW(
      fedpt::aggregate_models(server, plan, {bare_result(0, {1.0}), bare_result(1, {1.0})}, 1.0),
      fedpt::ProtocolError);
}

TEST(AggregateModels, StoresMoments) {
  auto server = ServerState::initial(2, ParamVector{0.0});
  auto r = bare_result(1, {0.0});
  r.v_final = ParamVector{0.25};
  r.v_hat_final = ParamVector{0.5};
  fedpt::aggregate_models(server, RoundPlan{{1}, {}}, {r}, 1.0);
  EXPECT_EQ(server.v_client[1], ParamVector{0.25});
  EXPECT_EQ(server.v_hat_client[1], ParamVector{0.5});
  EXPECT_EQ(server.v_client[0], ParamVector{0.0});
}

TEST(AggregateModels, OneStepFullParticipationAveragesAdamDirections) {
  const auto suite = quadratic(4, 3, 1.0, 0.0, 21);
  auto server = ServerState::initial(4, ParamVector{0.3, -0.2, 0.1});
  fedpt::RoundHyper h;
  h.S = h.Y = 4;
  h.local.K = 1;
  h.local.eta_l = 0.01;
  const ParamVector x = server.x;
  fedpt::run_round_with_plan(server, suite, AlgorithmKind::LocalAdam, h, full_plan(4));
  for (std::size_t j = 0; j < 3; ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      oracle::ScalarAdam ref;
      acc += ref.step(suite.clients[i].gradient(x)[j]);
    }
    EXPECT_NEAR(server.x[j], x[j] - 0.01 * acc / 4.0, 1e-16);
  }
}

TEST(AggregateModels, PermutedResultOrderIsBitIdentical) {
  const auto suite = logistic(3);
  ServerState base = ServerState::initial(suite.num_clients(), ParamVector::zeros(suite.dimension));
  fedpt::RoundHyper h;
  h.S = 6;
  h.Y = 3;
  fedpt::Rng rng(4);
  const auto plan = fedpt::sample_round(suite.num_clients(), 6, 3, rng);
  ServerState a = base;
  auto out = fedpt::run_round_with_plan(a, suite, AlgorithmKind::FAdamGT, h, plan);

  ServerState b = base;
  auto shuffled = out.results;
  std::mt19937_64 perm(9);
  std::shuffle(shuffled.begin(), shuffled.end(), perm);
  std::reverse(shuffled.begin(), shuffled.end());
  fedpt::aggregate_models(b, plan, shuffled, h.eta_g);
  fedpt::aggregate_tracking(b, plan, shuffled, suite.num_clients());
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.y, b.y);
  EXPECT_EQ(a.y_client, b.y_client);
  EXPECT_EQ(a.v_client, b.v_client);
}

TEST(AggregateTracking, NoTrackersLeavesYUnchanged) {
  auto server = ServerState::initial(2, ParamVector{0.0});
  server.y = ParamVector{0.3};
  fedpt::aggregate_tracking(server, RoundPlan{{0, 1}, {}},
                            {bare_result(0, {1.0}), bare_result(1, {1.0})}, 2);
  EXPECT_EQ(server.y, ParamVector{0.3});
}

TEST(AggregateTracking, ScalesByPopulation) {
  auto server = ServerState::initial(4, ParamVector{0.0});
  auto r0 = bare_result(0, {0.0});
  auto r3 = bare_result(3, {0.0});
  r0.tracking_update = ParamVector{2.0};
  r3.tracking_update = ParamVector{6.0};
  fedpt::aggregate_tracking(server, RoundPlan{{0, 3}, {0, 3}}, {r0, r3}, 4);
  EXPECT_EQ(server.y, ParamVector{2.0});
  EXPECT_EQ(server.y_client[0], ParamVector{2.0});
  EXPECT_EQ(server.y_client[3], ParamVector{6.0});
  EXPECT_EQ(server.y_client[1], ParamVector{0.0});
}

TEST(AggregateTracking, ProtocolErrors) {
  auto server = ServerState::initial(2, ParamVector{0.0});
  auto r0 = bare_result(0, {0.0});
  r0.tracking_update = ParamVector{1.0};
  EXPECT_THROW(fedpt::aggregate_tracking(server, RoundPlan{{0}, {}}, {r0}, 2),
               fedpt::ProtocolError);
  EXPECT_THROW(fedpt::aggregate_tracking(server, RoundPlan{{0}, {0}}, {bare_result(0, {0.0})}, 2),
               fedpt::ProtocolError);
}

TEST(AggregateTracking, FirstGradientTrackingRoundGivesMeanGradient) {
  const auto suite = quadratic(5, 3, 1.0, 0.3, 4);
  auto server = ServerState::initial(5, ParamVector{0.2, 0.1, -0.3});
  fedpt::RoundHyper h;
  h.S = h.Y = 5;
  h.master_seed = 6;
  const auto out = fedpt::run_round_with_plan(server, suite, AlgorithmKind::FAdamGT, h, full_plan(5));
  std::vector<ParamVector> means;
  for (const auto& r : out.results) means.push_back(r.grad_mean);
  EXPECT_LE(fedpt::max_abs_diff(server.y, mean_of(means)), 1e-15);
}

TEST(AggregateTracking, FullParticipationPreservesOffsetFromClientMean) {
  for (auto kind : {AlgorithmKind::FAdamGT, AlgorithmKind::FAdamET}) {
    const auto suite = quadratic(4, 2, 1.0, 0.1, 5);
    auto server = ServerState::initial(4, ParamVector{0.0, 0.0});
    server.y = ParamVector{0.7, -0.4};
    const auto offset = server.y - mean_of(server.y_client);
    fedpt::RoundHyper h;
    h.S = h.Y = 4;
    for (int t = 0; t < 10; ++t) {
      fedpt::run_round_with_plan(server, suite, kind, h, full_plan(4));
      EXPECT_LE(fedpt::max_abs_diff(server.y - mean_of(server.y_client), offset), 1e-12);
    }
  }
}

TEST(RunRound, TrackingMeanInvariantUnderFullParticipation) {
  for (auto kind : {AlgorithmKind::FAdamGT, AlgorithmKind::FAdamET}) {
    const auto suite = logistic(11);
    const std::size_t n = suite.num_clients();
    auto server = ServerState::initial(n, ParamVector::zeros(suite.dimension));
    fedpt::RoundHyper h;
    h.S = h.Y = n;
    h.local.eta_l = 0.01;
    for (int t = 0; t < 100; ++t) {
      fedpt::run_round(server, suite, kind, h);
      const auto mean = mean_of(server.y_client);
      const double scale = std::max(1e-300, fedpt::norm(mean));
      EXPECT_LE(fedpt::norm(server.y - mean) / scale, 1e-12) << to_string(kind) << " round " << t;
    }
  }
}

TEST(RunRound, HomogeneousGradientTrackingEqualsLocalAdam) {
  const auto suite = quadratic(6, 4, 0.0, 0.0, 13);
  auto gt = ServerState::initial(6, ParamVector(4, 1.0));
  auto la = gt;
  fedpt::RoundHyper h;
  h.S = h.Y = 6;
  h.local.eta_l = 0.01;
  for (int t = 0; t < 200; ++t) {
    fedpt::run_round(gt, suite, AlgorithmKind::FAdamGT, h);
    fedpt::run_round(la, suite, AlgorithmKind::LocalAdam, h);
    ASSERT_EQ(gt.x, la.x) << "round " << t;
  }
}

TEST(RunRound, FedAvgSingleStepIsCentralizedGradientStep) {
  const auto suite = quadratic(5, 3, 1.0, 0.0, 2);
  auto server = ServerState::initial(5, ParamVector{1.0, -1.0, 0.5});
  fedpt::RoundHyper h;
  h.S = 5;
  h.Y = 0;
  h.local.K = 1;
  h.local.eta_l = 0.1;
  for (int t = 0; t < 5; ++t) {
    const ParamVector x = server.x;
    fedpt::run_round(server, suite, AlgorithmKind::FedAvg, h);
    const auto expected = x - 0.1 * fedpt::full_gradient(suite, x);
    EXPECT_LE(fedpt::max_abs_diff(server.x, expected), 1e-15);
  }
}

TEST(RunRound, ScaffoldRefreshesEveryParticipantsControlVariate) {
  const auto suite = quadratic(6, 2, 1.0, 0.0, 4);
  auto server = ServerState::initial(6, ParamVector{0.0, 0.0});
  fedpt::RoundHyper h;
  h.S = 3;
  h.Y = 1;
  const auto out = fedpt::run_round(server, suite, AlgorithmKind::Scaffold, h);
  for (std::size_t i = 0; i < 6; ++i) {
    const bool participated = std::binary_search(out.plan.participants.begin(),
                                                 out.plan.participants.end(), i);
    EXPECT_EQ(server.y_client[i] != ParamVector::zeros(2), participated) << i;
  }
}

TEST(RunRound, DeterministicAcrossThreadCounts) {
  const auto suite = logistic(17);
  for (auto kind : fedpt::kAllAlgorithms) {
    fedpt::RoundHyper h;
    h.S = 8;
    h.Y = 4;
    h.master_seed = 42;
    auto one = ServerState::initial(suite.num_clients(), ParamVector::zeros(suite.dimension));
    auto four = one;
    for (int t = 0; t < 15; ++t) {
      h.threads = 1;
      fedpt::run_round(one, suite, kind, h);
      h.threads = 4;
      fedpt::run_round(four, suite, kind, h);
    }
    EXPECT_EQ(one.x, four.x) << to_string(kind);
    EXPECT_EQ(one.y, four.y) << to_string(kind);
    EXPECT_EQ(one.g_alpha, four.g_alpha) << to_string(kind);
  }
}

TEST(RunRound, DifferentSeedsDiffer) {
  const auto suite = logistic(17);
  fedpt::RoundHyper h;
  h.S = 8;
  h.Y = 4;
  auto a = ServerState::initial(suite.num_clients(), ParamVector::zeros(suite.dimension));
  auto b = a;
  h.master_seed = 1;
  fedpt::run_round(a, suite, AlgorithmKind::FAdamGT, h);
  h.master_seed = 2;
  fedpt::run_round(b, suite, AlgorithmKind::FAdamGT, h);
  EXPECT_NE(a.x, b.x);
}

TEST(RunRound, AdvancesRoundCounterAndChecksShapes) {
  const auto suite = quadratic(3, 2, 1.0, 0.0, 1);
  auto server = ServerState::initial(3, ParamVector{0.0, 0.0});
  fedpt::RoundHyper h;
  h.S = 2;
  h.Y = 1;
  fedpt::run_round(server, suite, AlgorithmKind::FAdamET, h);
  EXPECT_EQ(server.round, 2u);
  auto wrong = ServerState::initial(3, ParamVector{0.0});
  EXPECT_THROW(fedpt::run_round(wrong, suite, AlgorithmKind::FAdamET, h), fedpt::DimensionError);
}
