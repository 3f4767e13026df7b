#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "inrteach/linalg.hpp"
#include "inrteach/nn.hpp"
#include "inrteach/optim.hpp"

namespace inrteach {

struct Signal;

/// All N teaching examples plus their residual norms as of the last refresh.
template <class Scalar>
struct TeachingSet {
  Matrix<Scalar> coords;   // in_dim x N
  Matrix<Scalar> targets;  // out_dim x N
  VectorXd residual_norms;  // |f(x_i) - f*(x_i)|_2 over output channels
  std::size_t last_refresh_step = 0;

  TeachingSet() = default;
  TeachingSet(Matrix<Scalar> coords, Matrix<Scalar> targets);

  static TeachingSet from_signal(const Signal& signal);

  std::size_t size() const { return static_cast<std::size_t>(coords.cols()); }
  /// L2 norm of the full residual vector over all examples and channels.
  double residual_norm() const { return residual_norms.norm(); }
};

/// Sampling ratio over training.
struct RatioSchedule {
  enum class Kind { Constant, StepIncremental, Cosine, ReverseCosine };

  Kind kind = Kind::Constant;
  double start = 1.0;  // Constant: the ratio
  double end = 1.0;    // Cosine family: the far end of the ramp
  double step = 0.0;   // StepIncremental: added per stage
  std::size_t stages = 1;

  static RatioSchedule constant(double ratio);
  static RatioSchedule step_incremental(double start, double step, std::size_t stages);
  /// start at `start`, finish at `end`.
  static RatioSchedule cosine(double start, double end);
  /// Time-mirrored cosine: starts at `end`, finishes at `start`.
  static RatioSchedule reverse_cosine(double start, double end);

  void validate() const;
  double at(std::size_t step, std::size_t total_steps) const;
};

/// Number of steps between selection refreshes.
struct IntervalSchedule {
  enum class Kind { Dense, Incremental, Decremental };

  Kind kind = Kind::Dense;
  std::size_t start = 1;
  std::size_t end = 1;
  std::size_t stages = 1;

  static IntervalSchedule dense();
  /// Stage s of `stages` uses max(start, round(end * s / (stages - 1))):
  /// (1, 90, 10) gives 1, 10, 20, ..., 90.
  static IntervalSchedule incremental(std::size_t start, std::size_t end, std::size_t stages);
  /// Mirror of incremental: decremental(90, 1, 10) gives 90, 80, ..., 10, 1.
  static IntervalSchedule decremental(std::size_t start, std::size_t end, std::size_t stages);

  void validate() const;
  std::size_t at(std::size_t step, std::size_t total_steps) const;
};

/// Stage index of `step` when total_steps is split into `stages` equal
/// stages, the remainder going to the last one.
std::size_t stage_of(std::size_t step, std::size_t total_steps, std::size_t stages);

double ratio_at(const RatioSchedule& sched, std::size_t step, std::size_t total_steps);
std::size_t interval_at(const IntervalSchedule& sched, std::size_t step, std::size_t total_steps);

/// Uniform is the random-subset control; Greedy is the INT selector.
enum class SelectionRule { Greedy, Uniform };

struct IntConfig {
  bool enabled = true;  // false: plain full-batch training, no selection inference
  RatioSchedule ratio;
  IntervalSchedule interval;
  std::optional<std::size_t> minibatch_size;
  SelectionRule rule = SelectionRule::Greedy;

  static IntConfig full_batch();
  /// Step-wise increments of both ratio (20% + 8% per stage) and interval
  /// (1 -> 90) over 10 stages.
  static IntConfig step_incremental();

  void validate(std::size_t n) const;
};

/// ceil(ratio * n), clamped to [1, n].
std::size_t select_count(double ratio, std::size_t n);

/// Indices of the k largest residual norms, ties to the lower index,
/// returned in ascending index order.
std::vector<std::size_t> select_topk(std::span<const double> residual_norms, std::size_t k);

template <class Scalar>
std::vector<std::size_t> select_topk(const TeachingSet<Scalar>& ts, std::size_t k) {
  return select_topk(std::span<const double>(ts.residual_norms.data(), ts.size()), k);
}

/// Recomputes every residual norm with forward passes and stamps `step`.
template <class Scalar>
void refresh_residuals(TeachingSet<Scalar>& ts, const Mlp<Scalar>& mlp, std::size_t step = 0);

/// Recomputes only the listed examples.
template <class Scalar>
void refresh_residuals(TeachingSet<Scalar>& ts, const Mlp<Scalar>& mlp,
                       std::span<const std::size_t> indices, std::size_t step);

struct RunRow {
  std::size_t step = 0;
  double wall_ms = 0.0;
  double loss = 0.0;  // MSE over the examples used at this step
  std::size_t k_selected = 0;
  double lr = 0.0;
  bool refresh = false;
};

struct RunLog {
  std::vector<RunRow> rows;
  std::size_t optimizer_steps = 0;
  std::size_t example_gradients = 0;   // sum over steps of examples back-propagated
  std::size_t example_inferences = 0;  // forward passes spent on selection
  std::size_t refreshes = 0;
  bool stopped_early = false;  // residual norm fell below eps
  double wall_ms = 0.0;

  /// Columns: step,wall_ms,loss,k_selected,lr,refresh_flag.
  void write_csv(std::ostream& out, bool include_wall_time = true) const;
};

struct TrainHooks {
  /// Called at each refresh with the selected indices; its run time is
  /// excluded from wall_ms.
  std::function<void(std::size_t step, std::span<const std::size_t> selection)> on_selection;
};

/// Greedy example selection training loop.
///
/// At step t a refresh happens when no selection exists yet or
/// t - last_refresh >= interval_at(t): all residuals are recomputed, training
/// stops if their L2 norm is below eps, and the ceil(ratio_at(t) N) largest
/// are selected. Between refreshes the selection is reused. Each step takes
/// one optimizer update on the mean square loss of the selected examples.
///
/// With minibatch_size set, every step first draws the next minibatch of an
/// epoch-wise shuffled order; refresh steps recompute residuals for that
/// minibatch only, and the top-k (k from the ratio times the minibatch size)
/// is chosen inside it from the stored norms.
template <class Scalar>
RunLog int_train(Mlp<Scalar>& mlp, TeachingSet<Scalar>& ts, const IntConfig& config,
                 const OptimConfig& optim, std::size_t total_steps, double eps, std::uint64_t seed,
                 const TrainHooks& hooks = {});

// Text forms used by the CLI and run manifests:
//   ratio:    "0.2" | "constant:0.2" | "step:0.2,0.08,10" | "cosine:0.2,1.0" | "rcosine:0.2,1.0"
//   interval: "dense" | "inc:1,90,10" | "dec:90,1,10"
RatioSchedule parse_ratio(const std::string& text);
IntervalSchedule parse_interval(const std::string& text);
std::string to_string(const RatioSchedule& sched);
std::string to_string(const IntervalSchedule& sched);

extern template struct TeachingSet<float>;
extern template struct TeachingSet<double>;

}  // namespace inrteach
