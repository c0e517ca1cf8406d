#pragma once

#include <Eigen/Dense>

#include "so3ae/tape.hpp"

namespace so3ae {

// Adam with bias correction. Moment buffers are sized to the parameter store
// on first use and serialized with checkpoints so training can resume.
struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  long long step = 0;

  static AdamState init(std::size_t n) {
    return {Eigen::VectorXd::Zero(Eigen::Index(n)),
            Eigen::VectorXd::Zero(Eigen::Index(n)), 0};
  }
};

void adam_step(ParamStore& params, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

}  // namespace so3ae
