#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coordsr/tensor.hpp"

namespace coordsr {

struct AdamOptions {
  float lr = 1e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

/// First/second moment estimates per parameter plus the shared step count.
struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  std::int64_t step = 0;

  static AdamState for_params(const std::vector<Tensor*>& params);
};

/// One bias-corrected Adam update, in place. Throws NumericError naming
/// the first offending parameter when a gradient is non-finite; in that
/// case neither the parameters nor the state are modified.
void adam_step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads,
               AdamState& state, const AdamOptions& opt,
               const std::vector<std::string>& names = {});

}  // namespace coordsr
