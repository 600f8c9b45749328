#include "fedpt/fed_algorithms.hpp"

#include <algorithm>
#include <future>
#include <numeric>

#include "fedpt/errors.hpp"

namespace fedpt {

ServerState ServerState::initial(std::size_t n, ParamVector x0) {
  const auto d = x0.size();
  ServerState s;
  s.x = std::move(x0);
  s.y = ParamVector::zeros(d);
  s.y_client.assign(n, ParamVector::zeros(d));
  s.v_client.assign(n, ParamVector::zeros(d));
  s.v_hat_client.assign(n, ParamVector::zeros(d));
  s.g_alpha = ParamVector::zeros(d);
  return s;
}

bool RoundPlan::is_tracker(std::size_t client) const {
  return std::binary_search(trackers.begin(), trackers.end(), client);
}

RoundPlan sample_round(std::size_t n, std::size_t S, std::size_t Y, Rng& rng) {
  if (S < 1) throw ConfigError("S must be at least 1", "S");
  if (S > n) throw ConfigError("S must not exceed n", "S");
  if (Y > S) throw ConfigError("Y must not exceed S", "Y");
  // Partial Fisher-Yates.
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < S; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(S));
  for (std::size_t i = 0; i < Y; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, S - 1);
    std::swap(chosen[i], chosen[pick(rng)]);
  }
  RoundPlan plan;
  plan.participants = chosen;
  plan.trackers.assign(chosen.begin(), chosen.begin() + static_cast<std::ptrdiff_t>(Y));
  std::sort(plan.participants.begin(), plan.participants.end());
  std::sort(plan.trackers.begin(), plan.trackers.end());
  return plan;
}

namespace {

void check_settings(const LocalSettings& s) {
  if (s.K < 1) throw ConfigError("K must be at least 1", "K");
  if (!(s.eta_l > 0.0)) throw ConfigError("eta_l must be positive", "eta_l");
}

ParamVector mean_of(const std::vector<ParamVector>& vs) { return ordered_mean(vs); }

}  // namespace

LocalResult run_local_interval(const ProblemSuite& suite, std::size_t client,
                               const ParamVector& x0, const TrackingPair& tracking,
                               const ParamVector& carried_v, const ParamVector& carried_v_hat,
                               const LocalSettings& settings, CorrectionMode mode,
                               bool is_tracker, const StepStreams& streams) {
  check_settings(settings);
  AdamState state = AdamState::start_interval(carried_v, carried_v_hat, settings.adam);
  LocalResult out;
  out.client = client;
  out.steps = settings.K;
  if (settings.record_trace) out.trace.emplace();

  ParamVector x = x0;
  std::vector<ParamVector> grads;
  grads.reserve(settings.K);
  for (std::size_t k = 0; k < settings.K; ++k) {
    if (out.trace) out.trace->iterates.push_back(x);
    Rng rng = streams.for_step(k);
    grads.push_back(stochastic_gradient(suite, client, x, rng));
    const ParamVector g_hat = correct_gradient(grads.back(), tracking, mode);
    ParamVector delta = state.step(g_hat);
    x = apply_local_update(x, delta, tracking, mode, settings.eta_l);
    if (out.trace) out.trace->directions.push_back(std::move(delta));
  }

  out.model_delta = x - x0;
  out.grad_mean = mean_of(grads);
  out.v_final = std::move(state.v);
  out.v_hat_final = std::move(state.v_hat);

  if (is_tracker && mode != CorrectionMode::None) {
    ParamVector y_new(x0.size());
    if (mode == CorrectionMode::EstimateTracking) {
      const double scale = 1.0 / (static_cast<double>(settings.K) * settings.eta_l);
      for (std::size_t j = 0; j < y_new.size(); ++j) {
        y_new[j] = tracking.y_local[j] - tracking.y_global[j] + scale * (x0[j] - x[j]);
      }
    } else {
      y_new = out.grad_mean;
    }
    out.tracking_update = y_new - tracking.y_local;
  }
  return out;
}

LocalResult run_local_sgd_interval(const ProblemSuite& suite, std::size_t client,
                                   const ParamVector& x0, const std::optional<ControlPair>& control,
                                   const LocalSettings& settings, bool is_tracker,
                                   const StepStreams& streams) {
  check_settings(settings);
  LocalResult out;
  out.client = client;
  out.steps = settings.K;
  if (settings.record_trace) out.trace.emplace();

  ParamVector x = x0;
  std::vector<ParamVector> grads;
  grads.reserve(settings.K);
  for (std::size_t k = 0; k < settings.K; ++k) {
    if (out.trace) out.trace->iterates.push_back(x);
    Rng rng = streams.for_step(k);
    grads.push_back(stochastic_gradient(suite, client, x, rng));
    ParamVector next = sgd_step(x, grads.back(), control, settings.eta_l);
    if (out.trace) out.trace->directions.push_back((1.0 / settings.eta_l) * (x - next));
    x = std::move(next);
  }
  out.model_delta = x - x0;
  out.grad_mean = mean_of(grads);
  out.v_final = ParamVector::zeros(x0.size());
  out.v_hat_final = ParamVector::zeros(x0.size());

  if (control && is_tracker) {
    // Option II: c_i+ = c_i - c + (x - x_i) / (K eta_l)
    const double scale = 1.0 / (static_cast<double>(settings.K) * settings.eta_l);
    ParamVector c_new(x0.size());
    for (std::size_t j = 0; j < c_new.size(); ++j) {
      c_new[j] = control->c_local[j] - control->c_global[j] + scale * (x0[j] - x[j]);
    }
    out.tracking_update = c_new - control->c_local;
  }
  return out;
}

LocalResult run_local_fedlada_interval(const ProblemSuite& suite, std::size_t client,
                                       const ParamVector& x0, const ParamVector& g_alpha,
                                       const ParamVector& carried_v,
                                       const ParamVector& carried_v_hat,
                                       const LocalSettings& settings, const StepStreams& streams) {
  check_settings(settings);
  AdamState state = AdamState::start_interval(carried_v, carried_v_hat, settings.adam);
  LocalResult out;
  out.client = client;
  out.steps = settings.K;
  if (settings.record_trace) out.trace.emplace();

  ParamVector x = x0;
  std::vector<ParamVector> grads;
  grads.reserve(settings.K);
  for (std::size_t k = 0; k < settings.K; ++k) {
    if (out.trace) out.trace->iterates.push_back(x);
    Rng rng = streams.for_step(k);
    grads.push_back(stochastic_gradient(suite, client, x, rng));
    const ParamVector delta = state.step(grads.back());
    ParamVector dir = fedlada_direction(delta, g_alpha, settings.alpha_weight);
    x.axpy(-settings.eta_l, dir);
    if (out.trace) out.trace->directions.push_back(std::move(dir));
  }
  out.model_delta = x - x0;
  out.grad_mean = mean_of(grads);
  out.v_final = std::move(state.v);
  out.v_hat_final = std::move(state.v_hat);
  return out;
}

namespace {

/// Results sorted by client index; throws unless they cover the participants exactly.
std::vector<const LocalResult*> keyed_by_participants(const RoundPlan& plan,
                                                      const std::vector<LocalResult>& results) {
  if (results.size() != plan.participants.size()) {
    throw ProtocolError("aggregate: expected " + std::to_string(plan.participants.size()) +
                        " participant results, got " + std::to_string(results.size()));
  }
  std::vector<const LocalResult*> sorted;
  sorted.reserve(results.size());
  for (const auto& r : results) sorted.push_back(&r);
  std::sort(sorted.begin(), sorted.end(),
            [](const LocalResult* a, const LocalResult* b) { return a->client < b->client; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i]->client != plan.participants[i]) {
      throw ProtocolError("aggregate: result for client " + std::to_string(sorted[i]->client) +
                          " does not match participant " + std::to_string(plan.participants[i]));
    }
  }
  return sorted;
}

}  // namespace

void aggregate_models(ServerState& server, const RoundPlan& plan,
                      const std::vector<LocalResult>& results, double eta_g) {
  const auto sorted = keyed_by_participants(plan, results);
  std::vector<const ParamVector*> deltas;
  deltas.reserve(sorted.size());
  for (const auto* r : sorted) deltas.push_back(&r->model_delta);
  const ParamVector mean =
      ordered_sum_divided(deltas, server.x.size(), static_cast<double>(results.size()));
  server.x.axpy(eta_g, mean);
  for (const auto& r : results) {
    server.v_client.at(r.client) = r.v_final;
    server.v_hat_client.at(r.client) = r.v_hat_final;
  }
}

void aggregate_tracking(ServerState& server, const RoundPlan& plan,
                        const std::vector<LocalResult>& results, std::size_t n) {
  const auto sorted = keyed_by_participants(plan, results);
  for (std::size_t t : plan.trackers) {
    if (!std::binary_search(plan.participants.begin(), plan.participants.end(), t)) {
      throw ProtocolError("aggregate_tracking: tracker " + std::to_string(t) +
                          " is not a participant");
    }
  }
  std::vector<const ParamVector*> updates;
  for (const auto* rp : sorted) {
    const auto& r = *rp;
    const bool tracker = plan.is_tracker(r.client);
    if (r.tracking_update && !tracker) {
      throw ProtocolError("aggregate_tracking: update from non-tracker client " +
                          std::to_string(r.client));
    }
    if (!r.tracking_update && tracker) {
      throw ProtocolError("aggregate_tracking: missing update from tracker client " +
                          std::to_string(r.client));
    }
    if (r.tracking_update) updates.push_back(&*r.tracking_update);
  }
  if (updates.empty()) return;
  server.y += ordered_sum_divided(updates, server.y.size(), static_cast<double>(n));
  for (const auto& r : results) {
    if (r.tracking_update) server.y_client.at(r.client) += *r.tracking_update;
  }
}

RoundOutcome run_round(ServerState& server, const ProblemSuite& suite, AlgorithmKind kind,
                       const RoundHyper& hyper) {
  Rng rng = make_stream(hyper.master_seed, StreamTag::kSampling, hyper.trial, server.round, 0, 0);
  const RoundPlan plan = sample_round(suite.num_clients(), hyper.S, hyper.Y, rng);
  return run_round_with_plan(server, suite, kind, hyper, plan);
}

RoundOutcome run_round_with_plan(ServerState& server, const ProblemSuite& suite,
                                 AlgorithmKind kind, const RoundHyper& hyper,
                                 const RoundPlan& plan) {
  const std::size_t n = suite.num_clients();
  if (server.num_clients() != n || server.x.size() != suite.dimension) {
    throw DimensionError("run_round: server state does not match suite");
  }
  if (!(hyper.eta_g > 0.0)) throw ConfigError("eta_g must be positive", "eta_g");

  // Which clients refresh y_i / c_i this round.
  RoundPlan agg_plan{plan.participants, {}};
  if (uses_tracking(kind)) agg_plan.trackers = plan.trackers;
  if (kind == AlgorithmKind::Scaffold) agg_plan.trackers = plan.participants;

  RoundOutcome outcome;
  outcome.plan = plan;
  outcome.x_start = server.x;
  outcome.results.resize(plan.participants.size());

  auto run_one = [&](std::size_t idx) {
    const std::size_t i = plan.participants[idx];
    const StepStreams streams{hyper.master_seed, hyper.trial, server.round, i};
    const bool tracker = agg_plan.is_tracker(i);
    switch (kind) {
      case AlgorithmKind::FedAvg:
        return run_local_sgd_interval(suite, i, server.x, std::nullopt, hyper.local, false,
                                      streams);
      case AlgorithmKind::Scaffold:
        return run_local_sgd_interval(suite, i, server.x,
                                      ControlPair{server.y, server.y_client[i]}, hyper.local,
                                      tracker, streams);
      case AlgorithmKind::FedLada:
        return run_local_fedlada_interval(suite, i, server.x, server.g_alpha, server.v_client[i],
                                          server.v_hat_client[i], hyper.local, streams);
      case AlgorithmKind::LocalAdam:
      case AlgorithmKind::FAdamET:
      case AlgorithmKind::FAdamGT:
        return run_local_interval(suite, i, server.x, TrackingPair{server.y, server.y_client[i]},
                                  server.v_client[i], server.v_hat_client[i], hyper.local,
                                  correction_mode(kind), tracker, streams);
    }
    throw ConfigError("run_round: unsupported algorithm");
  };

  const std::size_t count = plan.participants.size();
  const std::size_t workers = std::max<std::size_t>(1, std::min(hyper.threads, count));
  if (workers == 1) {
    for (std::size_t idx = 0; idx < count; ++idx) outcome.results[idx] = run_one(idx);
  } else {
    std::vector<std::future<void>> futures;
    futures.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      futures.push_back(std::async(std::launch::async, [&, w] {
        for (std::size_t idx = w; idx < count; idx += workers) outcome.results[idx] = run_one(idx);
      }));
    }
    for (auto& f : futures) f.get();
  }

  aggregate_models(server, plan, outcome.results, hyper.eta_g);
  aggregate_tracking(server, agg_plan, outcome.results, n);
  if (kind == AlgorithmKind::FedLada) {
    std::vector<const ParamVector*> deltas;
    for (const auto& r : outcome.results) deltas.push_back(&r.model_delta);
    const double denom =
        -static_cast<double>(count) * static_cast<double>(hyper.local.K) * hyper.local.eta_l;
    server.g_alpha = ordered_sum_divided(deltas, server.x.size(), denom);
  }
  ++server.round;
  return outcome;
}

}  // namespace fedpt
