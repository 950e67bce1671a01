#include "soel/optimizer.hpp"

#include <cmath>

#include "soel/error.hpp"

namespace soel::pretrain {

std::string to_string(OptimizerKind kind) { return kind == OptimizerKind::Adam ? "adam" : "nadam"; }

OptimizerKind optimizer_from_string(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "nadam") return OptimizerKind::Nadam;
  throw Error(Errc::InvalidConfig, "optimizer must be 'adam' or 'nadam', got '" + name + "'");
}

AdaptiveMoment::AdaptiveMoment(OptimizerConfig config, std::size_t n_params)
    : cfg_(config), m_(n_params, 0.0), v_(n_params, 0.0) {}

void AdaptiveMoment::step(std::span<double> params, std::span<const double> grad) {
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double bias1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double bias1_next = 1.0 - std::pow(b1, static_cast<double>(t_ + 1));
  const double bias2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = cfg_.kind == OptimizerKind::Nadam
                             ? b1 * m_[i] / bias1_next + (1.0 - b1) * g / bias1
                             : m_[i] / bias1;
    const double v_hat = v_[i] / bias2;
    params[i] -= cfg_.learning_rate * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
  }
}

}  // namespace soel::pretrain
