#include "sas/nn/optim.hpp"

#include <cmath>

#include "sas/errors.hpp"

namespace sas::nn {

double clip_global_norm(GradMap& grads, double max_norm) {
  double sq = 0.0;
  for (const auto& [name, g] : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [name, g] : grads) g *= s;
  }
  return norm;
}

void adamw_step(ParameterSet& params, const GradMap& grads, OptimizerState& state) {
  const auto& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.step));
  params.for_each([&](Parameter& p) {
    if (!p.trainable) return;
    auto git = grads.find(p.name);
    if (git == grads.end()) return;
    const Matrix& g = git->second;
    if (g.rows() != p.value.rows() || g.cols() != p.value.cols()) {
      throw ShapeError("gradient for '" + p.name + "' has the wrong shape");
    }
    auto [mit, m_new] = state.first_moment.try_emplace(p.name, Matrix::Zero(g.rows(), g.cols()));
    auto [vit, v_new] = state.second_moment.try_emplace(p.name, Matrix::Zero(g.rows(), g.cols()));
    Matrix& m = mit->second;
    Matrix& v = vit->second;
    p.value *= 1.0 - c.learning_rate * c.weight_decay;
    m = c.beta1 * m + (1.0 - c.beta1) * g;
    v = c.beta2 * v + (1.0 - c.beta2) * g.cwiseProduct(g);
    p.value.array() -=
        c.learning_rate * (m.array() / bc1) / ((v.array() / bc2).sqrt() + c.epsilon);
  });
}

}  // namespace sas::nn
