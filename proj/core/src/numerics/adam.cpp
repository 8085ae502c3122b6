#include "genad/numerics/adam.hpp"

#include <cmath>

#include "genad/errors.hpp"

namespace genad::numerics {

void adam_step(AdamState& state, ParameterSet& params, const ParameterSet& grads) {
  for (const auto& [name, g] : grads) {
    auto it = params.find(name);
    if (it == params.end()) throw ContractError("adam_step: gradient for unknown parameter '" + name + "'");
    if (!it->second.same_shape(g)) {
      throw ShapeError("adam_step: gradient for '" + name + "' has shape " + shape_string(g.shape()) +
                       ", parameter has " + shape_string(it->second.shape()));
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (const auto& [name, g] : grads) {
    Tensor& p = params.at(name);
    Tensor& m = state.m.try_emplace(name, p.shape()).first->second;
    Tensor& v = state.v.try_emplace(name, p.shape()).first->second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
  }
}

}  // namespace genad::numerics
