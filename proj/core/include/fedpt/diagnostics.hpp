#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fedpt/objectives.hpp"
#include "fedpt/paramvec.hpp"

namespace fedpt {

/// Step-size caps for the federated Adam methods.
///   combined_cap  bounds eta_g * eta_l:
///       min((1-b1) b1 / (8 K L (G+eps)), 1/(8 K L), 1/(12 T L), sqrt(S/T))
///   local_cap_gt  bounds eta_l for FAdamGT: 1 / (12 T^{3/2} L)
///   local_cap_et  bounds eta_l for FAdamET:
///       min(sqrt(G+eps+(1-b1) b1) sqrt(G+eps) / (12 sqrt(2) (1-b1) b1 K L), local_cap_gt)
struct StepSizeBudget {
  double combined_cap = 0.0;
  double local_cap_gt = 0.0;
  double local_cap_et = 0.0;
  double G = 0.0, L = 0.0, K = 0.0, T = 0.0, S = 0.0, beta1 = 0.0, eps = 0.0;
};

/// Throws DomainError on a nonpositive input or beta1 outside (0, 1).
StepSizeBudget step_size_budget(double G, double L, double K, double T, double S, double beta1,
                                double eps);

/// Moving-average weight of g^{(k')} inside m^{(k)}: (1-b1) b1^{k-k'}, 1 <= k' <= k.
double moment_weight(std::size_t k, std::size_t k_prime, double beta1);
/// Sum of moment_weight over k' = 1..k.
double moment_weight_sum(std::size_t k, double beta1);

/// Iterates x_i^{(t,k)}, k = 1..K, of one client in one round.
struct ClientTrajectory {
  std::size_t client = 0;
  std::vector<ParamVector> iterates;
};

/// Local deviation
///   (1/m) sum_i sum_k || sum_{k'<=k} c^{(k,k')} grad f_i(x_i^{(t,k')}) - c^k grad f_i(x^{(t)}) ||^2
/// with exact gradients, averaged over the m measured clients.
double measure_xi(const ProblemSuite& suite, std::span<const ClientTrajectory> trajectory,
                  const ParamVector& x_ref, double beta1);

/// Local update deviation for estimate tracking. The expected moment accumulates
/// exact local gradients along the iterate stream (no tracking difference inside
/// the moment), so on the same trajectory it equals measure_xi.
double measure_calE(const ProblemSuite& suite, std::span<const ClientTrajectory> trajectory,
                    const ParamVector& x_ref, double beta1);

/// Tracking drift (1/(nK)) sum_i sum_k || alpha_i^k - grad f_i(x_ref) ||^2 where
/// snapshots[i] holds client i's K recorded vectors (all zero if never tracked).
double measure_gamma(std::span<const std::vector<ParamVector>> snapshots,
                     const ProblemSuite& suite, const ParamVector& x_ref);

enum class RateKind { EstimateTracking, GradientTracking };

/// Sum of the convergence-rate terms with unit constants:
///   f_gap / (K sqrt(S T)) + K/T + [ET only] Y K^2 / (n T) + K^2 / T^3.
/// A shape comparator across (K, T, S, Y, n), not a certified bound.
double theoretical_rate(RateKind kind, double f_gap, double K, double S, double T, double Y,
                        double n);

/// Per-round drift measurements. Unset entries are NaN.
struct DriftReport {
  double gamma;
  double xi;
  double calE;
  double grad_norm_sq;
  std::vector<double> ck_weights;  // c^k for k = 1..K
};

}  // namespace fedpt
