#pragma once

#include <optional>

#include "fedpt/paramvec.hpp"

namespace fedpt {

/// Where the tracking correction y - y_i enters a local Adam step.
enum class CorrectionMode {
  None,               // plain local Adam
  EstimateTracking,   // added to the adaptive direction (FAdamET)
  GradientTracking,   // added to the raw gradient before the moments (FAdamGT)
};

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

/// Per-client Adam/AMSGrad moments. No bias correction is applied.
struct AdamState {
  ParamVector m;
  ParamVector v;
  ParamVector v_hat;
  AdamHyper hyper;

  /// m = 0, v and v_hat seeded from a carried second moment.
  static AdamState start_interval(const ParamVector& carried_v, const ParamVector& carried_v_hat,
                                  const AdamHyper& hyper);

  /// One moment update with (corrected) gradient g_hat; returns the direction
  /// m' / (sqrt(v_hat') + eps).
  ParamVector step(const ParamVector& g_hat);
};

/// Server tracking term y and this client's tracking term y_i.
struct TrackingPair {
  const ParamVector& y_global;
  const ParamVector& y_local;
};

/// g + y - y_i under GradientTracking, g otherwise.
ParamVector correct_gradient(const ParamVector& g, const TrackingPair& tracking,
                             CorrectionMode mode);

/// x - eta_l (delta + y - y_i) under EstimateTracking, x - eta_l delta otherwise.
ParamVector apply_local_update(const ParamVector& x, const ParamVector& delta,
                               const TrackingPair& tracking, CorrectionMode mode, double eta_l);

/// SCAFFOLD control variates (c, c_i).
struct ControlPair {
  const ParamVector& c_global;
  const ParamVector& c_local;
};

/// x - eta_l g, or x - eta_l (g - c_i + c) with control variates.
ParamVector sgd_step(const ParamVector& x, const ParamVector& g,
                     const std::optional<ControlPair>& control, double eta_l);

/// alpha * delta_local + (1 - alpha) * g_alpha.
ParamVector fedlada_direction(const ParamVector& delta_local, const ParamVector& g_alpha,
                              double alpha_weight);

}  // namespace fedpt
