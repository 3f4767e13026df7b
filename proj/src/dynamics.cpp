#include "inrteach/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <map>
#include <ostream>
#include <stdexcept>

namespace inrteach {

void DensityFunction::validate() const {
  if (coords.cols() != values.size())
    throw std::invalid_argument("DensityFunction: coords and values differ in count");
  if (!values.allFinite()) throw std::invalid_argument("DensityFunction: non-finite value");
}

DensityFunction fgd_step(const DensityFunction& f, const VectorXd& targets, const KernelMatrix& kernel,
                         double lr) {
  f.validate();
  if (targets.size() != f.values.size() || kernel.k.rows() != f.values.size())
    throw std::invalid_argument("fgd_step: dimension mismatch");
  DensityFunction next = f;
  next.values -= lr * (kernel.kbar * (f.values - targets));
  return next;
}

KernelExpansion::KernelExpansion(CanonicalKernel k, MatrixXd c)
    : kernel(k), centers(std::move(c)), weights(VectorXd::Zero(centers.cols())) {}

double KernelExpansion::operator()(const Eigen::Ref<const VectorXd>& x) const {
  if (x.size() != centers.rows()) throw std::invalid_argument("KernelExpansion: dimension mismatch");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < centers.cols(); ++i) sum += weights(i) * kernel(centers.col(i), x);
  return sum;
}

VectorXd KernelExpansion::evaluate(const MatrixXd& points) const {
  VectorXd out(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) out(j) = (*this)(points.col(j));
  return out;
}

void KernelExpansion::step(const VectorXd& residual, double lr) {
  if (residual.size() != weights.size()) throw std::invalid_argument("KernelExpansion: dimension mismatch");
  weights -= (lr / static_cast<double>(weights.size())) * residual;
}

VectorXd closed_form_residual(const KernelMatrix& kernel, const VectorXd& r0, double lr, double t) {
  if (!r0.allFinite()) throw std::invalid_argument("closed_form_residual: non-finite r0");
  if (r0.size() != kernel.kbar.rows()) throw std::invalid_argument("closed_form_residual: dimension mismatch");
  const auto& eig = kernel.eig;
  const VectorXd decay = (-lr * t * eig.eigenvalues.array()).exp().matrix();
  return eig.eigenvectors * decay.asDiagonal() * (eig.eigenvectors.transpose() * r0);
}

double single_input_closed_form(double k_xx, double f0, double fstar, double lr, double t) {
  if (!(k_xx > 0.0)) throw std::invalid_argument("single_input_closed_form: k_xx must be > 0");
  return fstar - std::exp(-lr * k_xx * t) * (fstar - f0);
}

void ResidualTrajectory::write_csv(std::ostream& out, double lr) const {
  out << "step,component_index,projection,predicted_projection\n" << std::setprecision(17);
  if (projections.empty()) return;
  const VectorXd& p0 = projections.front();
  for (std::size_t s = 0; s < projections.size(); ++s) {
    const double dt = times[s] - times.front();
    for (Eigen::Index i = 0; i < p0.size(); ++i)
      out << times[s] << ',' << i << ',' << projections[s](i) << ','
          << p0(i) * std::exp(-lr * eigenvalues(i) * dt) << '\n';
  }
}

ResidualTrajectory spectral_track(const KernelMatrix& kernel, const std::vector<VectorXd>& residual_history,
                                  std::vector<double> times) {
  if (residual_history.empty()) throw std::invalid_argument("spectral_track: empty residual history");
  if (times.empty()) {
    times.resize(residual_history.size());
    for (std::size_t s = 0; s < times.size(); ++s) times[s] = static_cast<double>(s);
  }
  if (times.size() != residual_history.size())
    throw std::invalid_argument("spectral_track: times and history differ in length");

  ResidualTrajectory traj;
  traj.times = std::move(times);
  traj.residual_vectors = residual_history;
  traj.eigenvalues = kernel.eig.eigenvalues;
  traj.projections.reserve(residual_history.size());
  for (const auto& r : residual_history) traj.projections.push_back(kernel.eig.project(r));

  const std::size_t n = kernel.size();
  const std::size_t skip = residual_history.size() / 10;
  traj.decay_rates = VectorXd::Constant(static_cast<Eigen::Index>(n), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < n; ++i) {
    double st = 0, sy = 0, stt = 0, sty = 0;
    std::size_t count = 0;
    for (std::size_t s = skip; s < traj.projections.size(); ++s) {
      const double p = std::abs(traj.projections[s](static_cast<Eigen::Index>(i)));
      if (p <= 1e-10) continue;
      const double t = traj.times[s], y = std::log(p);
      st += t;
      sy += y;
      stt += t * t;
      sty += t * y;
      ++count;
    }
    if (count < 2) continue;
    const double c = static_cast<double>(count);
    const double denom = c * stt - st * st;
    if (denom <= 0.0) continue;
    traj.decay_rates(static_cast<Eigen::Index>(i)) = -(c * sty - st * sy) / denom;
  }
  return traj;
}

double square_loss(const VectorXd& residual) {
  return 0.5 * residual.squaredNorm() / static_cast<double>(residual.size());
}

LossReductionReport loss_reduction_monitor(const std::vector<VectorXd>& residual_history, double lr,
                                           double zeta, double tol, LossKind loss) {
  if (loss != LossKind::Square) throw std::domain_error("loss_reduction_monitor: only the square loss is supported");
  if (!(lr > 0.0) || !(zeta > 0.0)) throw std::invalid_argument("loss_reduction_monitor: lr and zeta must be > 0");
  LossReductionReport report;
  report.precondition_ok = lr <= 1.0 / (2.0 * zeta);
  for (std::size_t s = 0; s + 1 < residual_history.size(); ++s) {
    const VectorXd& r = residual_history[s];
    LossReductionStep step;
    step.loss_before = square_loss(r);
    step.loss_after = square_loss(residual_history[s + 1]);
    step.bound = 0.5 * lr * zeta * r.mean() * r.mean();
    step.satisfied = report.precondition_ok && step.loss_before - step.loss_after >= step.bound - tol;
    if (report.precondition_ok && !step.satisfied) ++report.violations;
    report.per_step.push_back(step);
  }
  return report;
}

void PgdFgdConfig::validate() const {
  arch.validate();
  if (arch.out_dim != 1) throw std::invalid_argument("pgd_fgd_compare: scalar output required");
  if (steps < 10) throw std::invalid_argument("pgd_fgd_compare: need at least 10 steps");
  if (log_every == 0) throw std::invalid_argument("pgd_fgd_compare: log_every must be >= 1");
  if (lr && !(*lr > 0.0)) throw std::invalid_argument("pgd_fgd_compare: lr must be > 0");
  if (!(ntk_checkpoint >= 0.0 && ntk_checkpoint <= 1.0))
    throw std::invalid_argument("pgd_fgd_compare: ntk_checkpoint must lie in [0, 1]");
}

double PgdFgdResult::max_matched_gap(double max_mse) const {
  double worst = 0.0;
  for (std::size_t i = 0; i < matched_gap.size(); ++i)
    if (pgd_loss[i] <= max_mse) worst = std::max(worst, matched_gap[i]);
  return worst;
}

PgdFgdResult pgd_fgd_compare(const PgdFgdConfig& config, const MatrixXd& coords, const VectorXd& targets) {
  config.validate();
  if (static_cast<std::size_t>(coords.rows()) != config.arch.in_dim || coords.cols() != targets.size())
    throw std::invalid_argument("pgd_fgd_compare: data does not match the architecture");

  const std::size_t total = config.steps;
  const double n = static_cast<double>(targets.size());
  const MatrixXd y = targets.transpose();
  Mlp<double> mlp = Mlp<double>::init(config.arch, config.seed);

  PgdFgdResult result;
  const MatrixXd k_initial = ntk_gram(mlp, coords);
  result.lr = config.lr ? *config.lr : 0.9 / (sym_eig(k_initial / n).eigenvalues(0));

  const std::size_t early = total / 10;
  const std::size_t late = total - total / 10;
  const auto frozen_at = static_cast<std::size_t>(std::llround(config.ntk_checkpoint * static_cast<double>(total)));
  std::map<std::size_t, VectorXd> checkpoints;
  for (std::size_t s : {std::size_t{0}, early, late, total, frozen_at}) checkpoints[s];

  std::vector<VectorXd> pgd_outputs;
  VectorXd grad;
  VectorXd f0;
  for (std::size_t step = 0; step <= total; ++step) {
    if (auto it = checkpoints.find(step); it != checkpoints.end()) it->second = mlp.theta();
    const bool logged = step % config.log_every == 0 || step == total;
    if (!logged && step == total) break;
    if (step < total) {
      const VectorXd out = mlp.fit_gradient(coords, y, grad).row(0).transpose();
      if (step == 0) f0 = out;
      if (logged) {
        result.logged_steps.push_back(step);
        result.pgd_loss.push_back((out - targets).squaredNorm() / n);
        pgd_outputs.push_back(out);
      }
      sgd_step(mlp, grad, result.lr);
    } else {
      const VectorXd out = mlp.forward(coords).row(0).transpose();
      result.logged_steps.push_back(step);
      result.pgd_loss.push_back((out - targets).squaredNorm() / n);
      pgd_outputs.push_back(out);
    }
  }
  result.pgd_final = pgd_outputs.back();

  const auto kernel_at = [&](std::size_t step) {
    return Mlp<double>(config.arch, checkpoints.at(step), mlp.fourier_basis(), config.seed);
  };
  const MatrixXd k_early = ntk_gram(kernel_at(early), coords);
  const MatrixXd k_late = ntk_gram(kernel_at(late), coords);
  const MatrixXd k_final = ntk_gram(kernel_at(total), coords);
  result.drift_early = kernel_drift(k_initial, k_early);
  result.drift_late = kernel_drift(k_late, k_final);

  const KernelMatrix frozen = KernelMatrix::from_gram(
      frozen_at == total ? k_final : frozen_at == 0 ? k_initial : ntk_gram(kernel_at(frozen_at), coords));

  std::vector<VectorXd> fgd_outputs;
  DensityFunction f{coords, f0};
  std::size_t logged_index = 0;
  for (std::size_t step = 0; step <= total && logged_index < result.logged_steps.size(); ++step) {
    if (step == result.logged_steps[logged_index]) {
      fgd_outputs.push_back(f.values);
      result.fgd_loss.push_back((f.values - targets).squaredNorm() / n);
      result.gap.push_back((f.values - pgd_outputs[logged_index]).cwiseAbs().maxCoeff());
      ++logged_index;
    }
    if (step < total) f = fgd_step(f, targets, frozen, result.lr);
  }
  result.fgd_final = fgd_outputs.back();

  for (std::size_t a = 0; a < pgd_outputs.size(); ++a) {
    std::size_t best = 0;
    for (std::size_t b = 1; b < fgd_outputs.size(); ++b)
      if (std::abs(result.fgd_loss[b] - result.pgd_loss[a]) < std::abs(result.fgd_loss[best] - result.pgd_loss[a]))
        best = b;
    result.matched_gap.push_back((pgd_outputs[a] - fgd_outputs[best]).cwiseAbs().maxCoeff());
  }
  return result;
}

}  // namespace inrteach
