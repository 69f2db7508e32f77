#include "coordsr/adam.hpp"

#include <cmath>

#include "coordsr/errors.hpp"

namespace coordsr {

AdamState AdamState::for_params(const std::vector<Tensor*>& params) {
  AdamState s;
  for (const Tensor* p : params) {
    s.m.push_back(Tensor::zeros(p->shape()));
    s.v.push_back(Tensor::zeros(p->shape()));
  }
  return s;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamOptions& opt, const std::vector<std::string>& names) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    throw ConfigError("adam_step: parameter, gradient and state counts differ");
  }
  if (state.step < 0) throw ConfigError("adam_step: negative step counter");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& s = params[i]->shape();
    if (grads[i]->shape() != s || state.m[i].shape() != s || state.v[i].shape() != s) {
      throw ConfigError("adam_step: shape mismatch for parameter " + std::to_string(i));
    }
    const auto g = grads[i]->data();
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (!std::isfinite(g[j])) {
        const std::string who = i < names.size() ? names[i] : "#" + std::to_string(i);
        throw NumericError("non-finite gradient in parameter " + who + " at element " +
                           std::to_string(j) + "; step skipped");
      }
    }
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(static_cast<double>(opt.beta1), t);
  const double bc2 = 1.0 - std::pow(static_cast<double>(opt.beta2), t);
  const float step_size = static_cast<float>(opt.lr / bc1);
  const float inv_sqrt_bc2 = static_cast<float>(1.0 / std::sqrt(bc2));

  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i]->data();
    const auto g = grads[i]->data();
    auto m = state.m[i].data();
    auto v = state.v[i].data();
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = opt.beta1 * m[j] + (1.0f - opt.beta1) * g[j];
      v[j] = opt.beta2 * v[j] + (1.0f - opt.beta2) * g[j] * g[j];
      p[j] -= step_size * m[j] / (std::sqrt(v[j]) * inv_sqrt_bc2 + opt.eps);
    }
  }
}

}  // namespace coordsr
