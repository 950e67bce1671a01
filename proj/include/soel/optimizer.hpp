#pragma once

#include <span>
#include <string>
#include <vector>

namespace soel::pretrain {

enum class OptimizerKind { Adam, Nadam };

std::string to_string(OptimizerKind kind);
OptimizerKind optimizer_from_string(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Nadam;
  double learning_rate = 0.003;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment optimizer over a flat parameter vector. Nadam uses the
/// Nesterov-corrected first moment
///   m_hat = beta1 * m / (1 - beta1^(t+1)) + (1 - beta1) * g / (1 - beta1^t).
class AdaptiveMoment {
 public:
  AdaptiveMoment(OptimizerConfig config, std::size_t n_params);

  void step(std::span<double> params, std::span<const double> grad);
  long steps() const { return t_; }

 private:
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace soel::pretrain
