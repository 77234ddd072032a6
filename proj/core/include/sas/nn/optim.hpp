#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "sas/nn/tape.hpp"

namespace sas::nn {

struct AdamWConfig {
  double learning_rate = 5e-4;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  AdamWConfig config;
  std::int64_t step = 0;
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;
};

/// Rescales all gradients so their joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
double clip_global_norm(GradMap& grads, double max_norm);

/// Decoupled weight decay followed by the bias-corrected Adam update.
/// Parameters without a gradient entry are left untouched. Missing moment
/// buffers are created as zeros.
void adamw_step(ParameterSet& params, const GradMap& grads, OptimizerState& state);

}  // namespace sas::nn
