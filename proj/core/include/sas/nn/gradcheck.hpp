#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "sas/nn/tape.hpp"

namespace sas::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "name[r,c]" of the worst entry
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares tape gradients with central differences on `samples` randomly
/// chosen entries of every trainable parameter. The relative error is
/// |a - n| / max(|a|, |n|, floor).
GradCheckResult check_gradients(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                                std::size_t samples, std::uint64_t seed, double eps = 1e-6,
                                double floor = 1e-6);

}  // namespace sas::nn
