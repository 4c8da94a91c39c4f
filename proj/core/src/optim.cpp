#include "pixelreg/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "pixelreg/errors.hpp"

namespace pixelreg::opt {

AdamState init_adam(const net::ParamSet& params) {
  AdamState st;
  st.m.resize(params.tensors.size());
  st.v.resize(params.tensors.size());
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    st.m[i].assign(params.tensors[i].numel(), 0.0);
    st.v[i].assign(params.tensors[i].numel(), 0.0);
  }
  return st;
}

void adam_step(net::ParamSet& params, const net::GradSet& grads, AdamState& state, double lr) {
  if (grads.g.size() != params.tensors.size() || state.m.size() != params.tensors.size())
    throw std::invalid_argument("adam_step: tensor count mismatch");
  for (std::size_t i = 0; i < params.tensors.size(); ++i)
    if (grads.g[i].size() != params.tensors[i].numel() ||
        state.m[i].size() != params.tensors[i].numel())
      throw std::invalid_argument("adam_step: shape mismatch at tensor " +
                                  params.tensors[i].name);

  for (std::size_t i = 0; i < grads.g.size(); ++i)
    for (double g : grads.g[i])
      if (!std::isfinite(g))
        throw NumericError("adam_step: non-finite gradient in tensor " + params.tensors[i].name);

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& theta = params.tensors[i].data;
    auto& m = state.m[i];
    auto& v = state.v[i];
    const auto& g = grads.g[i];
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      theta[j] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace pixelreg::opt
