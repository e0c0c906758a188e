#pragma once

#include "vtf/nn/network.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace vtf::nn {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  Eigen::Index worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  Eigen::Index checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-6;
  /// Entries checked per parameter block; 0 checks every entry.
  Eigen::Index max_per_block = 0;
  std::uint64_t seed = 7;
};

/// Compares backward() against central differences of the MSE loss.
///
/// Error per entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-12);
/// the report carries the worst entry.
inline GradCheckReport grad_check(Network<double> net, const std::vector<Tensor<double>>& inputs,
                                  const Mat<double>& target, const GradCheckOptions& opt = {}) {
  if (!(opt.eps >= 1e-7 && opt.eps <= 1e-3))
    throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3], got " + std::to_string(opt.eps));

  auto fwd = forward(net, inputs);
  auto [loss, dloss] = mse_loss(fwd.output, target);
  (void)loss;
  const Gradients<double> analytic = backward(net, fwd.cache, dloss);
  const auto names = net.parameter_names();

  auto loss_at = [&]() { return mse_loss(predict(net, inputs), target).first; };

  GradCheckReport report;
  std::mt19937_64 rng(opt.seed);
  auto params = net.mutable_parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    Mat<double>& block = *params[p];
    std::vector<Eigen::Index> indices(std::size_t(block.size()));
    for (Eigen::Index i = 0; i < block.size(); ++i) indices[std::size_t(i)] = i;
    if (opt.max_per_block > 0 && block.size() > opt.max_per_block) {
      std::shuffle(indices.begin(), indices.end(), rng);
      indices.resize(std::size_t(opt.max_per_block));
      std::sort(indices.begin(), indices.end());
    }
    for (Eigen::Index idx : indices) {
      double& w = block.data()[idx];
      const double saved = w;
      w = saved + opt.eps;
      const double up = loss_at();
      w = saved - opt.eps;
      const double down = loss_at();
      w = saved;
      const double numeric = (up - down) / (2.0 * opt.eps);
      const double a = analytic[p].data()[idx];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-12});
      const double err = std::abs(a - numeric) / denom;
      ++report.checked;
      if (err > report.max_relative_error || report.worst_index < 0) {
        report.max_relative_error = std::max(err, report.max_relative_error);
        if (err >= report.max_relative_error) {
          report.worst_parameter = names[p];
          report.worst_index = idx;
          report.worst_analytic = a;
          report.worst_numeric = numeric;
        }
      }
    }
  }
  return report;
}

inline GradCheckReport grad_check(const Network<double>& net, const Tensor<double>& input, const Mat<double>& target,
                                  const GradCheckOptions& opt = {}) {
  return grad_check(net, std::vector<Tensor<double>>{input}, target, opt);
}

}  // namespace vtf::nn
