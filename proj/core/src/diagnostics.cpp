#include "fedpt/diagnostics.hpp"

#include <cmath>

#include "fedpt/errors.hpp"

namespace fedpt {

StepSizeBudget step_size_budget(double G, double L, double K, double T, double S, double beta1,
                                double eps) {
  if (!(G > 0.0 && L > 0.0 && K > 0.0 && T > 0.0 && S > 0.0 && eps > 0.0)) {
    throw DomainError("step_size_budget: inputs must be positive");
  }
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw DomainError("step_size_budget: beta1 must be in (0,1)");
  const double b = (1.0 - beta1) * beta1;
  StepSizeBudget out{};
  out.combined_cap = std::min({b / (8.0 * K * L * (G + eps)), 1.0 / (8.0 * K * L),
                               1.0 / (12.0 * T * L), std::sqrt(S / T)});
  out.local_cap_gt = 1.0 / (12.0 * std::pow(T, 1.5) * L);
  const double et_term =
      std::sqrt(G + eps + b) * std::sqrt(G + eps) / (12.0 * std::sqrt(2.0) * b * K * L);
  out.local_cap_et = std::min(et_term, out.local_cap_gt);
  out.G = G;
  out.L = L;
  out.K = K;
  out.T = T;
  out.S = S;
  out.beta1 = beta1;
  out.eps = eps;
  return out;
}

double moment_weight(std::size_t k, std::size_t k_prime, double beta1) {
  if (k_prime < 1 || k_prime > k) throw DomainError("moment_weight: need 1 <= k' <= k");
  return (1.0 - beta1) * std::pow(beta1, static_cast<double>(k - k_prime));
}

double moment_weight_sum(std::size_t k, double beta1) {
  double s = 0.0;
  for (std::size_t kp = 1; kp <= k; ++kp) s += moment_weight(k, kp, beta1);
  return s;
}

double measure_xi(const ProblemSuite& suite, std::span<const ClientTrajectory> trajectory,
                  const ParamVector& x_ref, double beta1) {
  if (trajectory.empty()) return 0.0;
  double total = 0.0;
  for (const auto& client : trajectory) {
    const auto& obj = suite.clients.at(client.client);
    const ParamVector g_ref = obj.gradient(x_ref);
    std::vector<ParamVector> grads;
    grads.reserve(client.iterates.size());
    for (const auto& x : client.iterates) grads.push_back(obj.gradient(x));
    for (std::size_t k = 1; k <= grads.size(); ++k) {
      ParamVector acc = ParamVector::zeros(x_ref.size());
      for (std::size_t kp = 1; kp <= k; ++kp) acc.axpy(moment_weight(k, kp, beta1), grads[kp - 1]);
      acc.axpy(-moment_weight_sum(k, beta1), g_ref);
      total += squared_norm(acc);
    }
  }
  return total / static_cast<double>(trajectory.size());
}

double measure_calE(const ProblemSuite& suite, std::span<const ClientTrajectory> trajectory,
                    const ParamVector& x_ref, double beta1) {
  return measure_xi(suite, trajectory, x_ref, beta1);
}

double measure_gamma(std::span<const std::vector<ParamVector>> snapshots,
                     const ProblemSuite& suite, const ParamVector& x_ref) {
  if (snapshots.size() != suite.num_clients()) {
    throw DimensionError("measure_gamma: need one snapshot stream per client");
  }
  double total = 0.0;
  std::size_t K = 0;
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const ParamVector g_ref = suite.clients[i].gradient(x_ref);
    if (i == 0) K = snapshots[i].size();
    if (snapshots[i].size() != K || K == 0) {
      throw DimensionError("measure_gamma: snapshot streams must share a nonzero length");
    }
    for (const auto& a : snapshots[i]) total += squared_norm(a - g_ref);
  }
  return total / (static_cast<double>(snapshots.size()) * static_cast<double>(K));
}

double theoretical_rate(RateKind kind, double f_gap, double K, double S, double T, double Y,
                        double n) {
  if (!(K > 0.0 && S > 0.0 && T > 0.0 && n > 0.0) || f_gap < 0.0 || Y < 0.0) {
    throw DomainError("theoretical_rate: inputs must be positive");
  }
  double r = f_gap / (K * std::sqrt(S * T)) + K / T + K * K / (T * T * T);
  if (kind == RateKind::EstimateTracking) r += Y * K * K / (n * T);
  return r;
}

}  // namespace fedpt
