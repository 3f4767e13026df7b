#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "inrteach/kernels.hpp"
#include "inrteach/linalg.hpp"
#include "inrteach/nn.hpp"
#include "inrteach/optim.hpp"

namespace inrteach {

/// A nonparametric learner stored as its values on a fixed set of points.
struct DensityFunction {
  MatrixXd coords;  // dim x N
  VectorXd values;  // N

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
  void validate() const;
};

/// One functional gradient step evaluated on the dense points:
/// values <- values - (lr / N) K (values - targets).
DensityFunction fgd_step(const DensityFunction& f, const VectorXd& targets, const KernelMatrix& kernel,
                         double lr);

/// Off-grid form of an FGD learner: f(x) = base(x) + sum_i weights_i K(c_i, x),
/// where base is the initial function (zero here).
struct KernelExpansion {
  CanonicalKernel kernel;
  MatrixXd centers;  // dim x N
  VectorXd weights;  // N

  KernelExpansion(CanonicalKernel kernel, MatrixXd centers);

  double operator()(const Eigen::Ref<const VectorXd>& x) const;
  VectorXd evaluate(const MatrixXd& points) const;
  /// Applies the FGD update for the residual on the centers.
  void step(const VectorXd& residual, double lr);
};

/// r(t) = exp(-lr Kbar t) r0.
VectorXd closed_form_residual(const KernelMatrix& kernel, const VectorXd& r0, double lr, double t);

/// f_t(x) = f* - exp(-lr k_xx t) (f* - f0) for training on one input.
double single_input_closed_form(double k_xx, double f0, double fstar, double lr, double t);

struct ResidualTrajectory {
  std::vector<double> times;
  std::vector<VectorXd> residual_vectors;
  std::vector<VectorXd> projections;  // V^T r at each time
  VectorXd eigenvalues;                // of Kbar, descending
  /// Fitted exponential decay rate per component; NaN where too few points
  /// stay above the fitting floor.
  VectorXd decay_rates;

  /// Columns: step,component_index,projection,predicted_projection, the
  /// prediction being p_i(t0) exp(-lr lambda_i (t - t0)).
  void write_csv(std::ostream& out, double lr) const;
};

/// Projects a residual history onto the kernel eigenvectors and fits decay
/// rates by least squares on log|p_i(t)|, skipping the first 10% of samples
/// and any sample with |p_i| <= 1e-10. Times default to 0, 1, 2, ...
ResidualTrajectory spectral_track(const KernelMatrix& kernel, const std::vector<VectorXd>& residual_history,
                                  std::vector<double> times = {});

struct LossReductionStep {
  double loss_before = 0.0;
  double loss_after = 0.0;
  double bound = 0.0;  // required decrease (lr zeta / 2) (mean residual)^2
  bool satisfied = true;
};

struct LossReductionReport {
  std::vector<LossReductionStep> per_step;
  bool precondition_ok = true;  // lr <= 1 / (2 xi zeta), xi = 1
  std::size_t violations = 0;

  bool all_satisfied() const { return precondition_ok && violations == 0; }
};

enum class LossKind { Square, Other };

/// Checks every consecutive pair of a residual history against the sufficient
/// decrease bound of the square loss L = (1/N) sum r_i^2 / 2. Violations are
/// recorded, never thrown. When the step-size precondition fails the bound is
/// not asserted and every step is marked unsatisfied.
LossReductionReport loss_reduction_monitor(const std::vector<VectorXd>& residual_history, double lr,
                                           double zeta, double tol = 1e-9, LossKind loss = LossKind::Square);

double square_loss(const VectorXd& residual);

struct PgdFgdConfig {
  MlpArch arch;
  std::uint64_t seed = 0;
  std::size_t steps = 2000;
  /// Learning rate shared by both learners. Unset: 0.9 / lambda_max of the
  /// initial normalized NTK.
  std::optional<double> lr;
  std::size_t log_every = 10;
  /// Position of the frozen NTK used for FGD, as a fraction of training.
  double ntk_checkpoint = 1.0;

  void validate() const;
};

struct PgdFgdResult {
  double lr = 0.0;
  std::vector<std::size_t> logged_steps;
  std::vector<double> pgd_loss;  // MSE
  std::vector<double> fgd_loss;  // MSE
  std::vector<double> gap;       // max_i |f_PGD - f_FGD| at the same step
  /// Max pointwise gap at each logged PGD step against the logged FGD state
  /// whose loss is closest.
  std::vector<double> matched_gap;
  VectorXd pgd_final;
  VectorXd fgd_final;
  double drift_early = 0.0;  // NTK drift over the first 10% of steps
  double drift_late = 0.0;   // NTK drift over the last 10% of steps

  double final_pgd_mse() const { return pgd_loss.back(); }
  double final_fgd_mse() const { return fgd_loss.back(); }
  /// Largest matched gap over the logged PGD states whose MSE is at most
  /// `max_mse`.
  double max_matched_gap(double max_mse = std::numeric_limits<double>::infinity()) const;
};

/// Trains an MLP by full-batch gradient descent on the mean half square
/// loss and, separately, a DensityFunction by FGD under the network's
/// empirical NTK frozen at the configured checkpoint, both from the network's
/// initial outputs and with the same learning rate.
PgdFgdResult pgd_fgd_compare(const PgdFgdConfig& config, const MatrixXd& coords, const VectorXd& targets);

}  // namespace inrteach
