#include "sas/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sas/rng.hpp"

namespace sas::nn {

GradCheckResult check_gradients(ParameterSet& params, const std::function<Var(Tape&)>& loss,
                                std::size_t samples, std::uint64_t seed, double eps, double floor) {
  GradMap analytic;
  {
    Tape t;
    Var l = loss(t);
    t.backward(l);
    analytic = t.gradients(params);
  }
  auto eval = [&] {
    Tape t;
    return loss(t).scalar();
  };
  Rng rng(seed);
  GradCheckResult res;
  params.for_each([&](Parameter& p) {
    if (!p.trainable) return;
    const Matrix& g = analytic.at(p.name);
    const auto n = static_cast<std::size_t>(p.value.size());
    for (std::size_t s = 0; s < std::min(samples, n); ++s) {
      const auto i = static_cast<Index>(rng.index(n));
      const double saved = p.value.data()[i];
      p.value.data()[i] = saved + eps;
      const double up = eval();
      p.value.data()[i] = saved - eps;
      const double down = eval();
      p.value.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = g.data()[i];
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++res.checked;
      if (err > res.max_rel_error) {
        res.max_rel_error = err;
        res.worst_analytic = a;
        res.worst_numeric = numeric;
        res.worst = p.name + "[" + std::to_string(i / p.value.cols()) + "," +
                    std::to_string(i % p.value.cols()) + "]";
      }
    }
  });
  return res;
}

}  // namespace sas::nn
