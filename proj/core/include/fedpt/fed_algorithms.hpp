#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "fedpt/algorithm_kind.hpp"
#include "fedpt/local_optim.hpp"
#include "fedpt/objectives.hpp"
#include "fedpt/paramvec.hpp"
#include "fedpt/seeding.hpp"

namespace fedpt {

/// Global model, tracking terms and the per-client state the simulation keeps on
/// the clients' behalf. For SCAFFOLD, y and y_client hold the control variates c, c_i.
struct ServerState {
  ParamVector x;
  ParamVector y;
  std::vector<ParamVector> y_client;
  std::vector<ParamVector> v_client;
  std::vector<ParamVector> v_hat_client;
  /// FedLADA server-side average direction.
  ParamVector g_alpha;
  std::size_t round = 1;

  /// Zero tracking terms and moments; x = x0.
  static ServerState initial(std::size_t n, ParamVector x0);
  std::size_t num_clients() const noexcept { return y_client.size(); }
};

/// Participants S^t and tracking subset Y^t, both in ascending client order.
struct RoundPlan {
  std::vector<std::size_t> participants;
  std::vector<std::size_t> trackers;

  bool is_tracker(std::size_t client) const;
};

/// Uniform without replacement: S of n clients, then Y of those S.
/// Throws ConfigError unless Y <= S <= n and S >= 1.
RoundPlan sample_round(std::size_t n, std::size_t S, std::size_t Y, Rng& rng);

/// Per-step random streams for one client in one round.
struct StepStreams {
  std::uint64_t master_seed = 0;
  std::uint64_t trial = 0;
  std::uint64_t round = 0;
  std::uint64_t client = 0;

  Rng for_step(std::uint64_t step) const {
    return make_stream(master_seed, StreamTag::kClientStep, trial, round, client, step);
  }
};

struct LocalSettings {
  std::size_t K = 3;
  double eta_l = 1e-3;
  AdamHyper adam;
  double alpha_weight = 0.5;
  bool record_trace = false;
};

/// Iterates x_i^{(t,k)} and directions Delta_i^{(t,k)} for k = 1..K.
struct LocalTrace {
  std::vector<ParamVector> iterates;
  std::vector<ParamVector> directions;
};

struct LocalResult {
  std::size_t client = 0;
  /// x_i^{(t,K+1)} - x^{(t)}
  ParamVector model_delta;
  /// y_i^{(t+1)} - y_i^{(t)}; present iff the client tracked this round.
  std::optional<ParamVector> tracking_update;
  ParamVector v_final;
  ParamVector v_hat_final;
  /// (1/K) sum_k g_i^{(t,k)}
  ParamVector grad_mean;
  std::size_t steps = 0;
  std::optional<LocalTrace> trace;
};

/// K local Adam steps with the correction `mode` (None, ET or GT). m starts at 0,
/// v and v_hat start from the carried moments.
LocalResult run_local_interval(const ProblemSuite& suite, std::size_t client,
                               const ParamVector& x0, const TrackingPair& tracking,
                               const ParamVector& carried_v, const ParamVector& carried_v_hat,
                               const LocalSettings& settings, CorrectionMode mode,
                               bool is_tracker, const StepStreams& streams);

/// K local SGD steps, SCAFFOLD-corrected when `control` is set. With control and
/// is_tracker the result carries the option-II control-variate update.
LocalResult run_local_sgd_interval(const ProblemSuite& suite, std::size_t client,
                                   const ParamVector& x0, const std::optional<ControlPair>& control,
                                   const LocalSettings& settings, bool is_tracker,
                                   const StepStreams& streams);

/// K local steps along alpha * Adam direction + (1 - alpha) * g_alpha.
LocalResult run_local_fedlada_interval(const ProblemSuite& suite, std::size_t client,
                                       const ParamVector& x0, const ParamVector& g_alpha,
                                       const ParamVector& carried_v,
                                       const ParamVector& carried_v_hat,
                                       const LocalSettings& settings, const StepStreams& streams);

/// x += eta_g * (1/S) sum model_delta over participants in ascending order and
/// stores each participant's final moments. Throws ProtocolError when the results
/// are not keyed exactly by the participants.
void aggregate_models(ServerState& server, const RoundPlan& plan,
                      const std::vector<LocalResult>& results, double eta_g);

/// y += (1/n) sum of tracking updates over the tracking subset; y_i += update.
/// Throws ProtocolError on an update from a non-tracker or a missing one.
void aggregate_tracking(ServerState& server, const RoundPlan& plan,
                        const std::vector<LocalResult>& results, std::size_t n);

struct RoundHyper {
  std::size_t S = 10;
  std::size_t Y = 5;
  LocalSettings local;
  double eta_g = 1.0;
  std::size_t threads = 1;
  std::uint64_t master_seed = 0;
  std::uint64_t trial = 0;
};

struct RoundOutcome {
  RoundPlan plan;
  /// Sorted by client index.
  std::vector<LocalResult> results;
  /// x^{(t)} at the start of the round.
  ParamVector x_start;
};

/// One full round: sample, broadcast, local intervals (in parallel when
/// threads > 1), fixed-order aggregation. Advances server.round.
RoundOutcome run_round(ServerState& server, const ProblemSuite& suite, AlgorithmKind kind,
                       const RoundHyper& hyper);

/// As run_round but with a caller-supplied plan (used by probes and tests).
RoundOutcome run_round_with_plan(ServerState& server, const ProblemSuite& suite,
                                 AlgorithmKind kind, const RoundHyper& hyper,
                                 const RoundPlan& plan);

}  // namespace fedpt
