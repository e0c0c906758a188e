#pragma once

#include "vtf/nn/network.hpp"

#include <cmath>
#include <stdexcept>

namespace vtf::nn {

class TrainingError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamConfig config;
  std::vector<Mat<Scalar>> m;
  std::vector<Mat<Scalar>> v;
  long step = 0;

  static AdamState init(const Network<Scalar>& net, AdamConfig cfg) {
    if (!(cfg.lr > 0)) throw std::invalid_argument("AdamState: learning rate must be positive");
    AdamState s;
    s.config = cfg;
    s.m = zero_gradients(net);
    s.v = zero_gradients(net);
    return s;
  }
};

/// One bias-corrected Adam update in place. Gradients are validated before any
/// parameter changes, so a non-finite gradient leaves the network untouched.
template <typename Scalar>
void adam_step(Network<Scalar>& net, const Gradients<Scalar>& grads, AdamState<Scalar>& state) {
  const auto names = net.parameter_names();
  if (grads.size() != names.size() || state.m.size() != names.size())
    throw ShapeError("adam_step: gradient/state count does not match the network");
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!grads[i].allFinite()) throw TrainingError("adam_step: non-finite gradient in " + names[i]);
    if (grads[i].rows() != state.m[i].rows() || grads[i].cols() != state.m[i].cols())
      throw ShapeError("adam_step: gradient shape mismatch in " + names[i]);
  }
  const AdamConfig& c = state.config;
  ++state.step;
  const double bc1 = 1.0 - std::pow(c.beta1, double(state.step));
  const double bc2 = 1.0 - std::pow(c.beta2, double(state.step));
  const Scalar b1 = Scalar(c.beta1), b2 = Scalar(c.beta2);
  const Scalar step_size = Scalar(c.lr / bc1);
  const Scalar inv_sqrt_bc2 = Scalar(1.0 / std::sqrt(bc2));
  const Scalar eps = Scalar(c.eps);

  auto params = net.mutable_parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = grads[i].array();
    state.m[i].array() = b1 * state.m[i].array() + (Scalar(1) - b1) * g;
    state.v[i].array() = b2 * state.v[i].array() + (Scalar(1) - b2) * g.square();
    params[i]->array() -= step_size * state.m[i].array() / (state.v[i].array().sqrt() * inv_sqrt_bc2 + eps);
  }
}

}  // namespace vtf::nn
