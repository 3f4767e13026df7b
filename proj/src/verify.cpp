#include "inrteach/verify.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include <Eigen/QR>

#include "inrteach/dynamics.hpp"
#include "inrteach/signals.hpp"
#include "inrteach/teaching.hpp"

namespace inrteach {

namespace {

constexpr std::array<std::pair<Suite, const char*>, 7> kSuiteNames{{
    {Suite::Gradients, "gradients"},
    {Suite::OdeClosedForm, "ode-closed-form"},
    {Suite::Spectral, "spectral"},
    {Suite::NtkDrift, "ntk-drift"},
    {Suite::PgdFgd, "pgd-fgd"},
    {Suite::LossBound, "loss-bound"},
    {Suite::TopkOracle, "topk-oracle"},
}};

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(4);
  out << std::scientific << v;
  return out.str();
}

PropertyResult check(std::string name, bool passed, std::string detail) {
  return {std::move(name), passed, std::move(detail)};
}

double half_square_loss(const Mlp<double>& mlp, const MatrixXd& coords, const MatrixXd& targets) {
  return 0.5 * (mlp.forward(coords) - targets).squaredNorm() / static_cast<double>(coords.cols());
}

MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = rng.uniform(-1.0, 1.0);
  return m;
}

KernelMatrix figure_kernel() {
  MatrixXd k(2, 2);
  k << 1.0, 0.5, 0.5, 1.0;
  return KernelMatrix::from_gram(k);
}

std::vector<PropertyResult> gradients_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  Rng rng(seed);
  const std::array<std::pair<const char*, MlpArch>, 2> archs{{
      {"siren", MlpArch::siren(2, 1, 32, 4)},
      {"ffn", MlpArch::ffn(2, 1, 32, 4, 16, 2.0)},
  }};
  for (const auto& [name, arch] : archs) {
    const auto mlp = Mlp<double>::init(arch, seed + 1);
    const MatrixXd coords = uniform_matrix(2, 8, rng);
    const MatrixXd targets = uniform_matrix(1, 8, rng);
    const GradientCheck g = check_gradients(mlp, coords, targets, 20, rng);
    out.push_back(check(std::string("backward matches central differences (") + name + ")",
                        g.max_rel_error <= 1e-6,
                        "max relative error " + fmt(g.max_rel_error) + " over " + std::to_string(g.checked) +
                            " parameters"));
  }
  return out;
}

std::vector<PropertyResult> ode_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  Rng rng(seed);
  double worst = 0.0;
  bool monotone = true;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.index(10);
    const auto kernel = KernelMatrix::from_gram(random_psd(n, 0.0, 1.0, rng) * static_cast<double>(n));
    VectorXd r0(static_cast<Eigen::Index>(n));
    for (auto& v : r0) v = rng.normal();
    const VectorXd closed = closed_form_residual(kernel, r0, 1.0, 1.0);
    const VectorXd euler = euler_residual(kernel, r0, 1.0, 1.0, 1e-4);
    worst = std::max(worst, (closed - euler).norm() / closed.norm());
    double prev = r0.norm();
    for (double t : {0.25, 0.5, 1.0, 2.0, 4.0}) {
      const double now = closed_form_residual(kernel, r0, 1.0, t).norm();
      monotone = monotone && now <= prev * (1.0 + 1e-12);
      prev = now;
    }
  }
  out.push_back(check("closed form matches explicit Euler (20 kernels)", worst <= 1e-4,
                      "max relative error " + fmt(worst)));
  out.push_back(check("residual norm is non-increasing in t", monotone, ""));

  MatrixXd k1(1, 1);
  k1 << 0.7;
  const auto single = KernelMatrix::from_gram(k1);
  const double f0 = 0.3, fstar = -0.4, lr = 0.5, t = 1.7;
  VectorXd r0(1);
  r0 << f0 - fstar;
  const double via_matrix = fstar + closed_form_residual(single, r0, lr, t)(0);
  const double direct = single_input_closed_form(0.7, f0, fstar, lr, t);
  out.push_back(check("single-input solution equals the N=1 closed form", std::abs(via_matrix - direct) <= 1e-12,
                      "difference " + fmt(std::abs(via_matrix - direct))));
  const auto fig = figure_kernel();
  VectorXd r(2);
  r << 1.0, 0.5;
  out.push_back(check("closed form at t=0 is the identity",
                      (closed_form_residual(fig, r, 1.0, 0.0) - r).cwiseAbs().maxCoeff() <= 1e-15, ""));
  return out;
}

std::vector<PropertyResult> spectral_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  const auto fig = figure_kernel();
  const double h = std::numbers::sqrt2 / 2.0;
  const auto& eig = fig.eig;
  const double val_err = std::max(std::abs(eig.eigenvalues(0) - 0.75), std::abs(eig.eigenvalues(1) - 0.25));
  out.push_back(check("eigenvalues of the two-point kernel are (0.75, 0.25)", val_err <= 1e-12, fmt(val_err)));
  MatrixXd expected(2, 2);
  expected << h, -h, h, h;
  const double vec_err = (eig.eigenvectors - expected).cwiseAbs().maxCoeff();
  out.push_back(check("eigenvectors are (sqrt2/2, sqrt2/2) and (-sqrt2/2, sqrt2/2)", vec_err <= 1e-12, fmt(vec_err)));
  VectorXd r(2);
  r << 1.0, 0.5;
  const VectorXd p = eig.project(r);
  const double proj_err = std::max(std::abs(p(0) - 3.0 * std::numbers::sqrt2 / 4.0),
                                   std::abs(p(1) + std::numbers::sqrt2 / 4.0));
  out.push_back(check("projections of (1, 0.5) are (3 sqrt2/4, -sqrt2/4)", proj_err <= 1e-12, fmt(proj_err)));

  Rng rng(seed);
  const std::size_t n = 6;
  const auto kernel = KernelMatrix::from_gram(random_psd(n, 0.05, 1.0, rng) * static_cast<double>(n));
  VectorXd r0(static_cast<Eigen::Index>(n));
  for (auto& v : r0) v = rng.normal();
  const double lr = 0.5;
  std::vector<VectorXd> history;
  for (int t = 0; t <= 100; ++t) history.push_back(closed_form_residual(kernel, r0, lr, t));
  const auto traj = spectral_track(kernel, history);
  double rate_err = 0.0, law_err = 0.0;
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    const double want = lr * kernel.eig.eigenvalues(i);
    rate_err = std::max(rate_err, std::abs(traj.decay_rates(i) - want) / want);
    for (std::size_t t = 0; t < history.size(); ++t) {
      const double predicted = std::exp(-want * static_cast<double>(t)) * traj.projections[0](i);
      law_err = std::max(law_err, std::abs(traj.projections[t](i) - predicted));
    }
  }
  out.push_back(check("fitted decay rates equal lr * lambda_i on closed-form history", rate_err <= 0.02,
                      "max relative error " + fmt(rate_err)));
  out.push_back(check("projections follow exp(-lr lambda_i t) exactly", law_err <= 1e-12, fmt(law_err)));
  return out;
}

PgdFgdResult small_pgd_fgd(std::uint64_t seed) {
  const Signal sine = synth_sine(64, -std::numbers::pi, std::numbers::pi);
  PgdFgdConfig config;
  config.arch = MlpArch::ffn(1, 1, 256, 3, 32, 2.0);
  config.seed = seed;
  config.steps = 600;
  config.log_every = 10;
  return pgd_fgd_compare(config, sine.coords, sine.values.row(0).transpose());
}

std::vector<PropertyResult> ntk_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  const auto r = small_pgd_fgd(seed);
  out.push_back(check("NTK drift over the last 10% is below the first 10%", r.drift_late < r.drift_early,
                      "early " + fmt(r.drift_early) + ", late " + fmt(r.drift_late)));
  const auto mlp = Mlp<double>::init(MlpArch::ffn(1, 1, 32, 3, 8, 2.0), seed);
  const MatrixXd coords = synth_sine(16, -1.0, 1.0).coords;
  const auto k = empirical_ntk(mlp, coords);
  out.push_back(check("empirical NTK is exactly symmetric", k.k == k.k.transpose(), ""));
  out.push_back(check("empirical NTK drift of a checkpoint with itself is 0",
                      ntk_drift(mlp, mlp, coords) == 0.0, ""));
  return out;
}

std::vector<PropertyResult> pgd_fgd_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  const auto r = small_pgd_fgd(seed);
  out.push_back(check("gap is 0 at step 0", r.gap.front() == 0.0, fmt(r.gap.front())));
  out.push_back(check("both learners reduce the training loss",
                      r.final_pgd_mse() < r.pgd_loss.front() && r.final_fgd_mse() < r.fgd_loss.front(),
                      "PGD " + fmt(r.final_pgd_mse()) + ", FGD " + fmt(r.final_fgd_mse())));
  out.push_back(check("PGD closely follows FGD at matched loss below MSE 1e-3", r.max_matched_gap(1e-3) <= 0.05,
                      "max gap " + fmt(r.max_matched_gap(1e-3))));
  return out;
}

std::vector<VectorXd> fgd_history(const KernelMatrix& kernel, const VectorXd& f0, const VectorXd& target,
                                  double lr, std::size_t steps) {
  DensityFunction f{MatrixXd::Zero(1, f0.size()), f0};
  std::vector<VectorXd> history{f.values - target};
  for (std::size_t s = 0; s < steps; ++s) {
    f = fgd_step(f, target, kernel, lr);
    history.push_back(f.values - target);
  }
  return history;
}

std::vector<PropertyResult> loss_bound_suite(std::uint64_t) {
  std::vector<PropertyResult> out;
  const auto fig = figure_kernel();
  VectorXd f0(2), target(2);
  f0 << 1.0, 0.5;
  target << 0.0, 0.0;
  const double zeta = fig.zeta();
  for (double lr : {1.0 / (4.0 * zeta), 0.01}) {
    const auto report = loss_reduction_monitor(fgd_history(fig, f0, target, lr, 200), lr, zeta);
    out.push_back(check("every FGD step meets the sufficient decrease bound (lr " + fmt(lr) + ")",
                        report.all_satisfied(), std::to_string(report.violations) + " violations"));
  }
  const double big = 1.0 / zeta;
  const auto gated = loss_reduction_monitor(fgd_history(fig, f0, target, big, 5), big, zeta);
  out.push_back(check("lr above 1/(2 zeta) is flagged as violating the precondition", !gated.precondition_ok, ""));
  return out;
}

std::vector<PropertyResult> topk_suite(std::uint64_t seed) {
  std::vector<PropertyResult> out;
  Rng rng(seed);
  std::size_t mismatches = 0, cases = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.index(12);
    std::vector<double> r(n);
    for (auto& v : r) v = std::abs(rng.normal());
    for (std::size_t k = 1; k <= n; ++k) {
      double best = -1.0;
      std::uint32_t best_mask = 0;
      for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<std::size_t>(std::popcount(mask)) != k) continue;
        double sq = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          if (mask >> i & 1u) sq += r[i] * r[i];
        if (sq > best) {
          best = sq;
          best_mask = mask;
        }
      }
      std::uint32_t got = 0;
      for (std::size_t i : select_topk(r, k)) got |= 1u << i;
      mismatches += got != best_mask;
      ++cases;
    }
  }
  out.push_back(check("top-k equals the exhaustive argmax of the selected L2 norm", mismatches == 0,
                      std::to_string(mismatches) + " of " + std::to_string(cases) + " cases differ"));
  return out;
}

}  // namespace

const char* to_string(Suite suite) {
  for (const auto& [s, name] : kSuiteNames)
    if (s == suite) return name;
  return "unknown";
}

std::optional<Suite> parse_suite(const std::string& name) {
  for (const auto& [s, text] : kSuiteNames)
    if (name == text) return s;
  return std::nullopt;
}

std::vector<Suite> all_suites() {
  std::vector<Suite> out;
  for (const auto& entry : kSuiteNames) out.push_back(entry.first);
  return out;
}

std::vector<PropertyResult> run_suite(Suite suite, std::uint64_t seed) {
  switch (suite) {
    case Suite::Gradients: return gradients_suite(seed);
    case Suite::OdeClosedForm: return ode_suite(seed);
    case Suite::Spectral: return spectral_suite(seed);
    case Suite::NtkDrift: return ntk_suite(seed);
    case Suite::PgdFgd: return pgd_fgd_suite(seed);
    case Suite::LossBound: return loss_bound_suite(seed);
    case Suite::TopkOracle: return topk_suite(seed);
  }
  return {};
}

GradientCheck check_gradients(const Mlp<double>& mlp, const MatrixXd& coords, const MatrixXd& targets,
                              std::size_t per_layer, Rng& rng, double floor) {
  VectorXd grad;
  mlp.fit_gradient(coords, targets, grad);
  Mlp<double> probe = mlp;
  GradientCheck result;
  const MlpArch& arch = mlp.arch();
  for (std::size_t l = 0; l < arch.depth; ++l) {
    const std::size_t weights = arch.fan_out(l) * arch.fan_in(l);
    const std::size_t total = weights + arch.fan_out(l);
    for (std::size_t s = 0; s < std::min(per_layer, total); ++s) {
      const std::size_t pick = rng.index(total);
      const auto idx = static_cast<Eigen::Index>(pick < weights ? mlp.weight_offset(l) + pick
                                                                 : mlp.bias_offset(l) + (pick - weights));
      const double base = mlp.theta()(idx);
      const double h = 1e-6 * std::max(1.0, std::abs(base));
      probe.theta()(idx) = base + h;
      const double up = half_square_loss(probe, coords, targets);
      probe.theta()(idx) = base - h;
      const double down = half_square_loss(probe, coords, targets);
      probe.theta()(idx) = base;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(numeric), std::abs(grad(idx)), floor});
      result.max_rel_error = std::max(result.max_rel_error, std::abs(numeric - grad(idx)) / denom);
      ++result.checked;
    }
  }
  return result;
}

MatrixXd random_psd(std::size_t n, double lo, double hi, Rng& rng) {
  const auto size = static_cast<Eigen::Index>(n);
  MatrixXd g(size, size);
  for (auto& v : g.reshaped()) v = rng.normal();
  const MatrixXd q = Eigen::HouseholderQR<MatrixXd>(g).householderQ();
  VectorXd u(size);
  for (auto& v : u) v = lo == hi ? lo : rng.uniform(lo, hi);
  MatrixXd a = q * u.asDiagonal() * q.transpose();
  return (a + a.transpose()) / 2.0;
}

VectorXd euler_residual(const KernelMatrix& kernel, const VectorXd& r0, double lr, double t, double h) {
  const auto steps = static_cast<std::size_t>(std::llround(t / h));
  VectorXd r = r0;
  for (std::size_t s = 0; s < steps; ++s) r -= h * lr * (kernel.kbar * r);
  return r;
}

}  // namespace inrteach
