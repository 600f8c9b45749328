#pragma once

#include <cstddef>

#include "fedpt/algorithm_kind.hpp"
#include "fedpt/fed_algorithms.hpp"
#include "fedpt/objectives.hpp"

namespace fedpt {

struct ProbeSettings {
  std::size_t rounds = 100;
  std::size_t K = 3;
  double eta_l = 1e-3;
  double eta_g = 1.0;
  AdamHyper adam;
  double alpha_weight = 0.5;
};

struct ProbeResult {
  /// max_t ||x^{(t)} - x*||
  double global_drift = 0.0;
  /// max over rounds, participants and local steps of ||x_i^{(t,k)} - x*||
  double local_drift = 0.0;
  /// max of the two
  double max_drift = 0.0;
};

/// Starts a noiseless quadratic suite at its minimizer with ideal correction terms
/// (y_i = c_i = grad f_i(x*), y = c = grad f(x*), v_i = grad f(x*) squared, g_alpha at its
/// ideal value) and runs full-participation rounds, recording how far global and local
/// iterates move away from x*. Throws ConfigError for suites without a closed-form
/// minimizer or with gradient noise.
ProbeResult fixed_point_probe(AlgorithmKind kind, const ProblemSuite& suite,
                              const ProbeSettings& settings);

}  // namespace fedpt
