#include "inrteach/optim.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace inrteach {

template <class Scalar>
void sgd_step(Eigen::Ref<Vector<Scalar>> theta, const Vector<Scalar>& grad, double lr) {
  if (theta.size() != grad.size()) throw std::invalid_argument("sgd_step: gradient length mismatch");
  if (!(lr > 0.0)) throw std::invalid_argument("sgd_step: lr must be positive");
  theta.noalias() -= static_cast<Scalar>(lr) * grad;
}

template void sgd_step<float>(Eigen::Ref<Vector<float>>, const Vector<float>&, double);
template void sgd_step<double>(Eigen::Ref<Vector<double>>, const Vector<double>&, double);

template <class Scalar>
Adam<Scalar>::Adam(std::size_t param_count, double lr)
    : lr_(lr),
      m_(Vector<Scalar>::Zero(static_cast<Eigen::Index>(param_count))),
      v_(Vector<Scalar>::Zero(static_cast<Eigen::Index>(param_count))) {
  set_lr(lr);
}

template <class Scalar>
void Adam<Scalar>::set_lr(double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("Adam: lr must be positive");
  lr_ = lr;
}

template <class Scalar>
void Adam<Scalar>::step(Eigen::Ref<Vector<Scalar>> theta, const Vector<Scalar>& grad) {
  if (theta.size() != m_.size() || grad.size() != m_.size())
    throw std::invalid_argument("Adam::step: length mismatch");
  ++step_count_;
  const auto b1 = static_cast<Scalar>(beta1);
  const auto b2 = static_cast<Scalar>(beta2);
  m_ = b1 * m_ + (Scalar(1) - b1) * grad;
  v_ = b2 * v_ + (Scalar(1) - b2) * grad.cwiseAbs2();
  const double t = static_cast<double>(step_count_);
  const auto m_corr = static_cast<Scalar>(1.0 / (1.0 - std::pow(beta1, t)));
  const auto v_corr = static_cast<Scalar>(1.0 / (1.0 - std::pow(beta2, t)));
  theta.array() -= static_cast<Scalar>(lr_) * (m_.array() * m_corr) /
                   ((v_.array() * v_corr).sqrt() + static_cast<Scalar>(eps));
}

template class Adam<float>;
template class Adam<double>;

void CosineLr::validate() const {
  if (!(lr_start > 0.0) || lr_min < 0.0 || lr_min > lr_start)
    throw std::invalid_argument("CosineLr: need 0 <= lr_min <= lr_start, lr_start > 0");
  if (total_steps < 1) throw std::invalid_argument("CosineLr: total_steps must be >= 1");
}

double CosineLr::at(std::size_t step) const {
  if (step > total_steps)
    throw std::invalid_argument("cosine_lr: step " + std::to_string(step) + " beyond " +
                                std::to_string(total_steps));
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return lr_min + 0.5 * (lr_start - lr_min) * (1.0 + std::cos(phase));
}

double cosine_lr(const CosineLr& sched, std::size_t step) { return sched.at(step); }

void OptimConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("OptimConfig: lr must be positive");
  if (cosine_lr_min && (*cosine_lr_min < 0.0 || *cosine_lr_min > lr))
    throw std::invalid_argument("OptimConfig: cosine lr_min must lie in [0, lr]");
}

template <class Scalar>
Optimizer<Scalar>::Optimizer(const OptimConfig& config, std::size_t param_count,
                             std::size_t total_steps)
    : config_(config) {
  config_.validate();
  if (config_.cosine_lr_min) {
    schedule_ = CosineLr{config_.lr, *config_.cosine_lr_min, std::max<std::size_t>(total_steps, 1)};
    schedule_->validate();
  }
  if (config_.kind == OptimizerKind::Adam) adam_.emplace(param_count, config_.lr);
}

template <class Scalar>
double Optimizer<Scalar>::lr_at(std::size_t step) const {
  return schedule_ ? schedule_->at(std::min(step, schedule_->total_steps)) : config_.lr;
}

template <class Scalar>
double Optimizer<Scalar>::step(Eigen::Ref<Vector<Scalar>> theta, const Vector<Scalar>& grad,
                               std::size_t step) {
  const double lr = lr_at(step);
  if (adam_) {
    // cosine annealing can reach exactly zero when lr_min = 0
    if (lr <= 0.0) return lr;
    adam_->set_lr(lr);
    adam_->step(theta, grad);
  } else if (lr > 0.0) {
    sgd_step<Scalar>(theta, grad, lr);
  }
  return lr;
}

template class Optimizer<float>;
template class Optimizer<double>;

}  // namespace inrteach
