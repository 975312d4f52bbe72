// SPDX-License-Identifier: Apache-2.0
#include "hecto/optim.hpp"

#include <cmath>

#include "hecto/error.hpp"

namespace hecto {

void AdamWConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ParameterError("learning rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("adam betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ParameterError("adam eps must be > 0");
  if (!(weight_decay >= 0.0)) throw ParameterError("weight decay must be >= 0");
}

AdamW::AdamW(std::vector<Parameter> params, const AdamWConfig& config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  for (const auto& p : params_) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void AdamW::step() {
  for (const auto& p : params_) {
    if (!p.value.requires_grad()) continue;
    auto g = p.value.grad();
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in " + p.name + "[" + std::to_string(i) + "]");
      }
    }
  }
  ++step_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = config_.learning_rate, wd = config_.weight_decay, eps = config_.eps;
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor value = params_[k].value;
    if (!value.requires_grad()) continue;
    auto theta = value.data();
    auto g = value.grad();
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + eps) + wd * theta[i]);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) {
    Tensor t = p.value;
    t.zero_grad();
  }
}

}  // namespace hecto
