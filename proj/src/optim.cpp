#include "so3ae/optim.hpp"

#include <cmath>

#include "so3ae/errors.hpp"

namespace so3ae {

void adam_step(ParamStore& params, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  const Eigen::Index n = Eigen::Index(params.size());
  if (state.m.size() != n || state.v.size() != n)
    fail(ErrorKind::Shape, "adam_step: state sized " +
                               std::to_string(state.m.size()) + " for " +
                               std::to_string(n) + " parameters");
  ++state.step;
  const Eigen::Map<Eigen::VectorXd> g = params.grads();
  state.m = beta1 * state.m + (1.0 - beta1) * g;
  state.v = beta2 * state.v + (1.0 - beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(beta2, double(state.step));
  params.values() -=
      (lr / bc1) *
      (state.m.array() / ((state.v.array() / bc2).sqrt() + eps)).matrix();
}

}  // namespace so3ae
