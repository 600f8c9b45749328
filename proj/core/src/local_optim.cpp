#include "fedpt/local_optim.hpp"

#include <cmath>

#include "fedpt/errors.hpp"

namespace fedpt {

AdamState AdamState::start_interval(const ParamVector& carried_v, const ParamVector& carried_v_hat,
                                    const AdamHyper& hyper) {
  require_same_size(carried_v, carried_v_hat, "AdamState::start_interval");
  if (!(hyper.beta1 >= 0.0 && hyper.beta1 < 1.0) || !(hyper.beta2 >= 0.0 && hyper.beta2 < 1.0)) {
    throw ConfigError("beta1 and beta2 must lie in [0, 1)", "beta1");
  }
  if (!(hyper.eps > 0.0)) throw ConfigError("eps must be positive", "eps");
  return AdamState{ParamVector::zeros(carried_v.size()), carried_v, carried_v_hat, hyper};
}

ParamVector AdamState::step(const ParamVector& g_hat) {
  require_same_size(m, g_hat, "AdamState::step");
  require_same_size(v, g_hat, "AdamState::step");
  require_same_size(v_hat, g_hat, "AdamState::step");
  const double b1 = hyper.beta1;
  const double b2 = hyper.beta2;
  for (std::size_t j = 0; j < g_hat.size(); ++j) {
    m[j] = b1 * m[j] + (1.0 - b1) * g_hat[j];
    v[j] = b2 * v[j] + (1.0 - b2) * (g_hat[j] * g_hat[j]);
  }
  v_hat = elementwise_max(v_hat, v);
  return adam_direction(m, v_hat, hyper.eps);
}

ParamVector correct_gradient(const ParamVector& g, const TrackingPair& tracking,
                             CorrectionMode mode) {
  require_same_size(g, tracking.y_global, "correct_gradient");
  require_same_size(g, tracking.y_local, "correct_gradient");
  if (mode != CorrectionMode::GradientTracking) return g;
  ParamVector out(g.size());
  for (std::size_t j = 0; j < g.size(); ++j) {
    out[j] = g[j] + (tracking.y_global[j] - tracking.y_local[j]);
  }
  return out;
}

ParamVector apply_local_update(const ParamVector& x, const ParamVector& delta,
                               const TrackingPair& tracking, CorrectionMode mode, double eta_l) {
  require_same_size(x, delta, "apply_local_update");
  require_same_size(x, tracking.y_global, "apply_local_update");
  require_same_size(x, tracking.y_local, "apply_local_update");
  if (!(eta_l > 0.0)) throw ConfigError("eta_l must be positive", "eta_l");
  ParamVector out(x.size());
  if (mode == CorrectionMode::EstimateTracking) {
    for (std::size_t j = 0; j < x.size(); ++j) {
      out[j] = x[j] - eta_l * (delta[j] + tracking.y_global[j] - tracking.y_local[j]);
    }
  } else {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] - eta_l * delta[j];
  }
  return out;
}

ParamVector sgd_step(const ParamVector& x, const ParamVector& g,
                     const std::optional<ControlPair>& control, double eta_l) {
  require_same_size(x, g, "sgd_step");
  ParamVector out(x.size());
  if (!control) {
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = x[j] - eta_l * g[j];
    return out;
  }
  require_same_size(x, control->c_global, "sgd_step");
  require_same_size(x, control->c_local, "sgd_step");
  for (std::size_t j = 0; j < x.size(); ++j) {
    out[j] = x[j] - eta_l * (g[j] - control->c_local[j] + control->c_global[j]);
  }
  return out;
}

ParamVector fedlada_direction(const ParamVector& delta_local, const ParamVector& g_alpha,
                              double alpha_weight) {
  require_same_size(delta_local, g_alpha, "fedlada_direction");
  if (!(alpha_weight >= 0.0 && alpha_weight <= 1.0)) {
    throw ConfigError("alpha_weight must lie in [0, 1]", "alpha_weight");
  }
  ParamVector out(delta_local.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    out[j] = alpha_weight * delta_local[j] + (1.0 - alpha_weight) * g_alpha[j];
  }
  return out;
}

}  // namespace fedpt
