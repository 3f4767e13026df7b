#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "inrteach/kernels.hpp"
#include "inrteach/nn.hpp"
#include "inrteach/rng.hpp"

namespace inrteach {

enum class Suite { Gradients, OdeClosedForm, Spectral, NtkDrift, PgdFgd, LossBound, TopkOracle };

const char* to_string(Suite suite);
std::optional<Suite> parse_suite(const std::string& name);
std::vector<Suite> all_suites();

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Runs one property suite with the given seed.
std::vector<PropertyResult> run_suite(Suite suite, std::uint64_t seed = 0);

struct GradientCheck {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Compares backward() against central differences of the mean half square
/// loss on (coords, targets) for `per_layer` parameters drawn from each layer.
/// The relative error of a pair (a, b) is |a - b| / max(|a|, |b|, floor).
GradientCheck check_gradients(const Mlp<double>& mlp, const MatrixXd& coords, const MatrixXd& targets,
                              std::size_t per_layer, Rng& rng, double floor = 1e-8);

/// Random symmetric PSD matrix Q diag(u) Q^T with u ~ U(lo, hi) and Q a
/// random orthogonal matrix.
MatrixXd random_psd(std::size_t n, double lo, double hi, Rng& rng);

/// r(t) of dr/dt = -lr Kbar r integrated by explicit Euler with step h.
VectorXd euler_residual(const KernelMatrix& kernel, const VectorXd& r0, double lr, double t, double h);

}  // namespace inrteach
