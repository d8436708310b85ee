#include "ifthen/optim.hpp"

#include <cmath>
#include <span>

#include "ifthen/common.hpp"

namespace ifthen {

double global_grad_norm(const std::vector<Tensor>& params) {
  double sq = 0.0;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double v : p.grad()) sq += v * v;
  }
  return std::sqrt(sq);
}

void clip_global_norm(const std::vector<Tensor>& params, double max_norm) {
  if (max_norm <= 0.0) {
    throw ValidationError("clip_global_norm: max_norm must be positive, got " +
                          std::to_string(max_norm));
  }
  const double norm = global_grad_norm(params);
  if (norm <= max_norm) return;
  const double factor = max_norm / norm;
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double& v : p.node()->grad) v *= factor;
  }
}

void adam_step(const std::vector<Tensor>& params, AdamState& state, const AdamConfig& config) {
  if (state.m.empty() && !params.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) {
    throw ValidationError("adam_step: state tracks " + std::to_string(state.m.size()) +
                          " parameters but " + std::to_string(params.size()) + " were given");
  }

  // Validate everything before mutating anything, so a throw leaves the
  // parameters and moments exactly as they were.
  for (const Tensor& p : params) {
    if (!p.has_grad()) continue;
    for (double v : p.grad()) {
      if (!std::isfinite(v)) throw NonFiniteGradient(p.name());
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    // Missing gradients count as zero so frozen parameters still decay their
    // moments consistently with the global step count.
    const bool has_g = params[i].has_grad();
    std::span<const double> g = has_g ? params[i].grad() : std::span<const double>{};
    Tensor p = params[i];  // handles share the node, so a copy can mutate it
    std::span<double> value = p.value_mut();
    std::vector<double>& m = state.m[i];
    std::vector<double>& v = state.v[i];
    for (std::size_t j = 0; j < value.size(); ++j) {
      const double gj = has_g ? g[j] : 0.0;
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * gj;
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * gj * gj;
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      value[j] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace ifthen
