#include "fedpt/probe.hpp"

#include <algorithm>
#include <numeric>

#include "fedpt/errors.hpp"

namespace fedpt {

ProbeResult fixed_point_probe(AlgorithmKind kind, const ProblemSuite& suite,
                              const ProbeSettings& settings) {
  if (suite.kind != ObjectiveKind::Quadratic || !suite.minimizer) {
    throw ConfigError("fixed_point_probe needs a quadratic suite with a known minimizer",
                      "objective");
  }
  if (suite.noise_sigma != 0.0) throw ConfigError("fixed_point_probe needs sigma = 0", "sigma");

  const std::size_t n = suite.num_clients();
  const ParamVector& x_star = *suite.minimizer;
  ServerState server = ServerState::initial(n, x_star);
  for (std::size_t i = 0; i < n; ++i) server.y_client[i] = suite.clients[i].gradient(x_star);
  server.y = ordered_mean(server.y_client);
  const ParamVector v_star = hadamard(server.y, server.y);
  server.v_client.assign(n, v_star);
  server.v_hat_client.assign(n, v_star);
  server.g_alpha = adam_direction(server.y, v_star, settings.adam.eps);

  RoundHyper hyper;
  hyper.S = n;
  hyper.Y = n;
  hyper.eta_g = settings.eta_g;
  hyper.local.K = settings.K;
  hyper.local.eta_l = settings.eta_l;
  hyper.local.adam = settings.adam;
  hyper.local.alpha_weight = settings.alpha_weight;
  hyper.local.record_trace = true;

  RoundPlan plan;
  plan.participants.resize(n);
  std::iota(plan.participants.begin(), plan.participants.end(), std::size_t{0});
  plan.trackers = plan.participants;

  ProbeResult out;
  for (std::size_t t = 0; t < settings.rounds; ++t) {
    const auto outcome = run_round_with_plan(server, suite, kind, hyper, plan);
    for (const auto& r : outcome.results) {
      for (const auto& x : r.trace->iterates) {
        out.local_drift = std::max(out.local_drift, norm(x - x_star));
      }
      out.local_drift = std::max(out.local_drift, norm(outcome.x_start + r.model_delta - x_star));
    }
    out.global_drift = std::max(out.global_drift, norm(server.x - x_star));
  }
  out.max_drift = std::max(out.global_drift, out.local_drift);
  return out;
}

}  // namespace fedpt
