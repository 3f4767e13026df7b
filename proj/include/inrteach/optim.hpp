#pragma once

#include <cstddef>
#include <optional>

#include "inrteach/linalg.hpp"
#include "inrteach/nn.hpp"

namespace inrteach {

/// theta <- theta - lr * grad.
template <class Scalar>
void sgd_step(Eigen::Ref<Vector<Scalar>> theta, const Vector<Scalar>& grad, double lr);

template <class Scalar>
void sgd_step(Mlp<Scalar>& mlp, const Vector<Scalar>& grad, double lr) {
  sgd_step<Scalar>(mlp.theta(), grad, lr);
}

/// Bias-corrected Adam with fixed (0.9, 0.999, 1e-8) moments.
template <class Scalar>
class Adam {
 public:
  Adam(std::size_t param_count, double lr);

  double lr() const noexcept { return lr_; }
  void set_lr(double lr);
  std::size_t step_count() const noexcept { return step_count_; }
  const Vector<Scalar>& first_moment() const noexcept { return m_; }
  const Vector<Scalar>& second_moment() const noexcept { return v_; }

  void step(Eigen::Ref<Vector<Scalar>> theta, const Vector<Scalar>& grad);
  void step(Mlp<Scalar>& mlp, const Vector<Scalar>& grad) { step(mlp.theta(), grad); }

  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

 private:
  double lr_;
  Vector<Scalar> m_;
  Vector<Scalar> v_;
  std::size_t step_count_ = 0;
};

/// lr_min + (lr_start - lr_min) (1 + cos(pi step / total_steps)) / 2.
struct CosineLr {
  double lr_start = 1e-3;
  double lr_min = 1e-6;
  std::size_t total_steps = 1;

  void validate() const;
  double at(std::size_t step) const;
};

double cosine_lr(const CosineLr& sched, std::size_t step);

enum class OptimizerKind { Sgd, Adam };

/// Optimizer choice plus optional cosine annealing of its learning rate.
struct OptimConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double lr = 1e-3;
  std::optional<double> cosine_lr_min;

  void validate() const;
};

/// Owns whichever optimizer state OptimConfig asks for.
template <class Scalar>
class Optimizer {
 public:
  Optimizer(const OptimConfig& config, std::size_t param_count, std::size_t total_steps);

  /// Applies one update for training step `step` and returns the lr used.
  double step(Eigen::Ref<Vector<Scalar>> theta, const Vector<Scalar>& grad, std::size_t step);

  double lr_at(std::size_t step) const;

 private:
  OptimConfig config_;
  std::optional<CosineLr> schedule_;
  std::optional<Adam<Scalar>> adam_;
};

extern template class Adam<float>;
extern template class Adam<double>;
extern template class Optimizer<float>;
extern template class Optimizer<double>;

}  // namespace inrteach
