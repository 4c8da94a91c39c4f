#pragma once

#include <vector>

#include "pixelreg/segnet.hpp"

namespace pixelreg::opt {

// Adam moments aligned index-for-index with ParamSet::tensors.
struct AdamState {
  std::vector<std::vector<double>> m, v;
  long long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState init_adam(const net::ParamSet& params);

// Standard bias-corrected update: params -= lr * m_hat / (sqrt(v_hat) + eps).
// Throws NumericError on non-finite gradients and invalid_argument on shape
// mismatch.
void adam_step(net::ParamSet& params, const net::GradSet& grads, AdamState& state, double lr);

}  // namespace pixelreg::opt
