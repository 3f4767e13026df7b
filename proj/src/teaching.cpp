#include "inrteach/teaching.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "inrteach/rng.hpp"
#include "inrteach/signals.hpp"

namespace inrteach {

template <class Scalar>
TeachingSet<Scalar>::TeachingSet(Matrix<Scalar> c, Matrix<Scalar> t)
    : coords(std::move(c)), targets(std::move(t)) {
  if (coords.cols() != targets.cols())
    throw std::invalid_argument("TeachingSet: coords and targets differ in count");
  residual_norms = VectorXd::Constant(coords.cols(), std::numeric_limits<double>::infinity());
}

template <class Scalar>
TeachingSet<Scalar> TeachingSet<Scalar>::from_signal(const Signal& signal) {
  return TeachingSet(signal.coords.cast<Scalar>(), signal.values.cast<Scalar>());
}

template struct TeachingSet<float>;
template struct TeachingSet<double>;

// --- schedules -------------------------------------------------------------

std::size_t stage_of(std::size_t step, std::size_t total_steps, std::size_t stages) {
  if (stages == 0) throw std::invalid_argument("stage_of: need at least one stage");
  const std::size_t length = std::max<std::size_t>(1, total_steps / stages);
  return std::min(step / length, stages - 1);
}

namespace {

void check_step(std::size_t step, std::size_t total_steps, const char* what) {
  if (step >= total_steps)
    throw std::invalid_argument(std::string(what) + ": step " + std::to_string(step) +
                                " outside [0, " + std::to_string(total_steps) + ")");
}

double cosine_ramp(double from, double to, std::size_t step, std::size_t total_steps) {
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return to + (from - to) * 0.5 * (1.0 + std::cos(phase));
}

bool valid_ratio(double r) { return r > 0.0 && r <= 1.0; }

}  // namespace

RatioSchedule RatioSchedule::constant(double ratio) {
  RatioSchedule s{Kind::Constant, ratio, ratio, 0.0, 1};
  s.validate();
  return s;
}

RatioSchedule RatioSchedule::step_incremental(double start, double step, std::size_t stages) {
  RatioSchedule s{Kind::StepIncremental, start, start + step * static_cast<double>(stages - 1), step, stages};
  s.validate();
  return s;
}

RatioSchedule RatioSchedule::cosine(double start, double end) {
  RatioSchedule s{Kind::Cosine, start, end, 0.0, 1};
  s.validate();
  return s;
}

RatioSchedule RatioSchedule::reverse_cosine(double start, double end) {
  RatioSchedule s{Kind::ReverseCosine, start, end, 0.0, 1};
  s.validate();
  return s;
}

void RatioSchedule::validate() const {
  if (stages == 0) throw std::invalid_argument("RatioSchedule: need at least one stage");
  switch (kind) {
    case Kind::Constant:
      if (!valid_ratio(start)) throw std::invalid_argument("RatioSchedule: ratio must lie in (0, 1]");
      break;
    case Kind::StepIncremental: {
      const double last = start + step * static_cast<double>(stages - 1);
      if (!valid_ratio(start) || !valid_ratio(last) || step < 0.0)
        throw std::invalid_argument("RatioSchedule: step ratios must stay within (0, 1]");
      break;
    }
    case Kind::Cosine:
    case Kind::ReverseCosine:
      if (!valid_ratio(start) || !valid_ratio(end))
        throw std::invalid_argument("RatioSchedule: cosine endpoints must lie in (0, 1]");
      break;
  }
}

double RatioSchedule::at(std::size_t t, std::size_t total_steps) const {
  check_step(t, total_steps, "ratio_at");
  switch (kind) {
    case Kind::Constant: return start;
    case Kind::StepIncremental:
      return std::min(1.0, start + step * static_cast<double>(stage_of(t, total_steps, stages)));
    case Kind::Cosine: return cosine_ramp(start, end, t, total_steps);
    case Kind::ReverseCosine: return cosine_ramp(start, end, total_steps - t, total_steps);
  }
  return start;
}

IntervalSchedule IntervalSchedule::dense() { return {Kind::Dense, 1, 1, 1}; }

IntervalSchedule IntervalSchedule::incremental(std::size_t start, std::size_t end, std::size_t stages) {
  IntervalSchedule s{Kind::Incremental, start, end, stages};
  s.validate();
  return s;
}

IntervalSchedule IntervalSchedule::decremental(std::size_t start, std::size_t end, std::size_t stages) {
  IntervalSchedule s{Kind::Decremental, start, end, stages};
  s.validate();
  return s;
}

void IntervalSchedule::validate() const {
  if (stages == 0) throw std::invalid_argument("IntervalSchedule: need at least one stage");
  if (start < 1 || end < 1) throw std::invalid_argument("IntervalSchedule: intervals must be >= 1");
  if (kind == Kind::Incremental && start > end)
    throw std::invalid_argument("IntervalSchedule: incremental needs start <= end");
  if (kind == Kind::Decremental && start < end)
    throw std::invalid_argument("IntervalSchedule: decremental needs start >= end");
}

namespace {

std::size_t rising_interval(std::size_t low, std::size_t high, std::size_t stage, std::size_t stages) {
  if (stages == 1) return low;
  const double level = std::round(static_cast<double>(high) * static_cast<double>(stage) /
                                  static_cast<double>(stages - 1));
  return std::clamp(static_cast<std::size_t>(level), low, high);
}

}  // namespace

std::size_t IntervalSchedule::at(std::size_t t, std::size_t total_steps) const {
  check_step(t, total_steps, "interval_at");
  if (kind == Kind::Dense) return 1;
  const std::size_t stage = stage_of(t, total_steps, stages);
  if (kind == Kind::Incremental) return rising_interval(start, end, stage, stages);
  return rising_interval(end, start, stages - 1 - stage, stages);
}

double ratio_at(const RatioSchedule& sched, std::size_t step, std::size_t total_steps) {
  return sched.at(step, total_steps);
}

std::size_t interval_at(const IntervalSchedule& sched, std::size_t step, std::size_t total_steps) {
  return sched.at(step, total_steps);
}

IntConfig IntConfig::full_batch() {
  IntConfig c;
  c.enabled = false;
  return c;
}

IntConfig IntConfig::step_incremental() {
  IntConfig c;
  c.ratio = RatioSchedule::step_incremental(0.2, 0.08, 10);
  c.interval = IntervalSchedule::incremental(1, 90, 10);
  return c;
}

void IntConfig::validate(std::size_t n) const {
  ratio.validate();
  interval.validate();
  if (minibatch_size && (*minibatch_size == 0 || *minibatch_size > n))
    throw std::invalid_argument("IntConfig: minibatch_size must lie in [1, N]");
}

// --- selection -------------------------------------------------------------

std::size_t select_count(double ratio, std::size_t n) {
  const auto k = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  return std::clamp<std::size_t>(k, 1, n);
}

std::vector<std::size_t> select_topk(std::span<const double> residual_norms, std::size_t k) {
  const std::size_t n = residual_norms.size();
  if (k < 1 || k > n)
    throw std::invalid_argument("select_topk: k=" + std::to_string(k) + " outside [1, " +
                                std::to_string(n) + "]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const auto larger = [&](std::size_t a, std::size_t b) {
    return residual_norms[a] > residual_norms[b] || (residual_norms[a] == residual_norms[b] && a < b);
  };
  if (k < n) std::nth_element(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k - 1), idx.end(), larger);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

template <class Scalar>
void refresh_residuals(TeachingSet<Scalar>& ts, const Mlp<Scalar>& mlp, std::size_t step) {
  constexpr Eigen::Index chunk = 8192;
  const Eigen::Index n = ts.coords.cols();
  if (ts.residual_norms.size() != n) ts.residual_norms.resize(n);
  for (Eigen::Index begin = 0; begin < n; begin += chunk) {
    const Eigen::Index len = std::min(chunk, n - begin);
    const Matrix<Scalar> out = mlp.forward(ts.coords.middleCols(begin, len));
    ts.residual_norms.segment(begin, len) =
        (out - ts.targets.middleCols(begin, len)).colwise().norm().transpose().template cast<double>();
  }
  ts.last_refresh_step = step;
}

template <class Scalar>
void refresh_residuals(TeachingSet<Scalar>& ts, const Mlp<Scalar>& mlp,
                       std::span<const std::size_t> indices, std::size_t step) {
  if (indices.empty()) return;
  const std::vector<std::size_t> idx(indices.begin(), indices.end());
  const Matrix<Scalar> out = mlp.forward(ts.coords(Eigen::all, idx));
  const Matrix<Scalar> err = out - ts.targets(Eigen::all, idx);
  for (std::size_t j = 0; j < idx.size(); ++j)
    ts.residual_norms(static_cast<Eigen::Index>(idx[j])) =
        static_cast<double>(err.col(static_cast<Eigen::Index>(j)).norm());
  ts.last_refresh_step = step;
}

template void refresh_residuals(TeachingSet<float>&, const Mlp<float>&, std::size_t);
template void refresh_residuals(TeachingSet<double>&, const Mlp<double>&, std::size_t);
template void refresh_residuals(TeachingSet<float>&, const Mlp<float>&, std::span<const std::size_t>, std::size_t);
template void refresh_residuals(TeachingSet<double>&, const Mlp<double>&, std::span<const std::size_t>, std::size_t);

void RunLog::write_csv(std::ostream& out, bool include_wall_time) const {
  out << "step,wall_ms,loss,k_selected,lr,refresh_flag\n" << std::setprecision(17);
  for (const auto& r : rows)
    out << r.step << ',' << (include_wall_time ? r.wall_ms : 0.0) << ',' << r.loss << ',' << r.k_selected
        << ',' << r.lr << ',' << (r.refresh ? 1 : 0) << '\n';
}

namespace {

std::vector<std::size_t> uniform_subset(Rng& rng, std::span<const std::size_t> pool, std::size_t k) {
  std::vector<std::size_t> items(pool.begin(), pool.end());
  for (std::size_t i = 0; i < k; ++i) std::swap(items[i], items[i + rng.index(items.size() - i)]);
  items.resize(k);
  std::sort(items.begin(), items.end());
  return items;
}

class WallClock {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count() -
           excluded_ms_;
  }
  template <class F>
  void excluding(F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    excluded_ms_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  double excluded_ms_ = 0.0;
};

}  // namespace

template <class Scalar>
RunLog int_train(Mlp<Scalar>& mlp, TeachingSet<Scalar>& ts, const IntConfig& config,
                 const OptimConfig& optim, std::size_t total_steps, double eps, std::uint64_t seed,
                 const TrainHooks& hooks) {
  const std::size_t n = ts.size();
  if (n == 0) throw std::invalid_argument("int_train: empty teaching set");
  if (static_cast<std::size_t>(ts.coords.rows()) != mlp.arch().in_dim ||
      static_cast<std::size_t>(ts.targets.rows()) != mlp.arch().out_dim)
    throw std::invalid_argument("int_train: teaching set does not match the network shape");
  if (eps < 0.0) throw std::invalid_argument("int_train: eps must be non-negative");
  config.validate(n);

  Optimizer<Scalar> optimizer(optim, mlp.param_count(), total_steps);
  Rng rng(seed);
  RunLog log;
  WallClock clock;

  std::vector<std::size_t> everything(n);
  std::iota(everything.begin(), everything.end(), std::size_t{0});
  std::vector<std::size_t> selection;
  std::vector<std::size_t> minibatch;
  std::vector<std::size_t> order = everything;
  std::size_t cursor = n;
  bool have_selection = false;
  std::size_t last_refresh = 0;
  const bool batched = config.enabled && config.minibatch_size.has_value();

  const auto notify = [&](std::size_t step) {
    if (hooks.on_selection) clock.excluding([&] { hooks.on_selection(step, selection); });
  };

  if (batched) {
    refresh_residuals(ts, mlp, 0);
    log.example_inferences += n;
    ++log.refreshes;
    if (ts.residual_norm() < eps) log.stopped_early = true;
  }

  Matrix<Scalar> x;
  Matrix<Scalar> y;
  Vector<Scalar> grad;
  for (std::size_t step = 0; step < total_steps && !log.stopped_early; ++step) {
    bool refreshed = false;
    const std::vector<std::size_t>* batch = &everything;

    if (config.enabled && !batched) {
      if (!have_selection || step - last_refresh >= config.interval.at(step, total_steps)) {
        refresh_residuals(ts, mlp, step);
        log.example_inferences += n;
        ++log.refreshes;
        refreshed = true;
        if (ts.residual_norm() < eps) {
          log.stopped_early = true;
          break;
        }
        const std::size_t k = select_count(config.ratio.at(step, total_steps), n);
        selection = config.rule == SelectionRule::Greedy ? select_topk(ts, k) : uniform_subset(rng, everything, k);
        last_refresh = step;
        have_selection = true;
        notify(step);
      }
      batch = &selection;
    } else if (batched) {
      if (cursor >= n) {
        rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t take = std::min(*config.minibatch_size, n - cursor);
      minibatch.assign(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                       order.begin() + static_cast<std::ptrdiff_t>(cursor + take));
      cursor += take;
      if (step - last_refresh >= config.interval.at(step, total_steps)) {
        refresh_residuals(ts, mlp, minibatch, step);
        log.example_inferences += minibatch.size();
        ++log.refreshes;
        refreshed = true;
        last_refresh = step;
        if (ts.residual_norm() < eps) {
          log.stopped_early = true;
          break;
        }
      }
      const std::size_t k = select_count(config.ratio.at(step, total_steps), minibatch.size());
      if (config.rule == SelectionRule::Greedy) {
        std::vector<double> norms(minibatch.size());
        for (std::size_t j = 0; j < minibatch.size(); ++j)
          norms[j] = ts.residual_norms(static_cast<Eigen::Index>(minibatch[j]));
        const auto local = select_topk(norms, k);
        selection.resize(local.size());
        for (std::size_t j = 0; j < local.size(); ++j) selection[j] = minibatch[local[j]];
        std::sort(selection.begin(), selection.end());
      } else {
        selection = uniform_subset(rng, minibatch, k);
      }
      if (refreshed) notify(step);
      batch = &selection;
    }

    Matrix<Scalar> out;
    if (batch == &everything) {
      out = mlp.fit_gradient(ts.coords, ts.targets, grad);
    } else {
      x = ts.coords(Eigen::all, *batch);
      y = ts.targets(Eigen::all, *batch);
      out = mlp.fit_gradient(x, y, grad);
    }
    const Matrix<Scalar>& target = batch == &everything ? ts.targets : y;
    const double sq = static_cast<double>((out - target).squaredNorm());
    if (!config.enabled && std::sqrt(sq) < eps) {
      log.stopped_early = true;
      break;
    }

    const double lr = optimizer.step(mlp.theta(), grad, step);
    ++log.optimizer_steps;
    log.example_gradients += batch->size();
    log.rows.push_back(RunRow{step, clock.elapsed_ms(),
                              sq / static_cast<double>(batch->size() * mlp.arch().out_dim), batch->size(),
                              lr, refreshed});
  }
  log.wall_ms = clock.elapsed_ms();
  return log;
}

template RunLog int_train(Mlp<float>&, TeachingSet<float>&, const IntConfig&, const OptimConfig&,
                          std::size_t, double, std::uint64_t, const TrainHooks&);
template RunLog int_train(Mlp<double>&, TeachingSet<double>&, const IntConfig&, const OptimConfig&,
                          std::size_t, double, std::uint64_t, const TrainHooks&);

// --- text forms ------------------------------------------------------------

namespace {

std::vector<double> parse_numbers(const std::string& body, const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(body);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::invalid_argument("cannot parse number '" + item + "' in '" + text + "'");
    }
  }
  return out;
}

std::size_t as_count(double v, const std::string& text) {
  if (v < 0.0 || v != std::floor(v)) throw std::invalid_argument("expected a whole number in '" + text + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

RatioSchedule parse_ratio(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = colon == std::string::npos ? "constant" : text.substr(0, colon);
  const std::string body = colon == std::string::npos ? text : text.substr(colon + 1);
  const auto v = parse_numbers(body, text);
  if (kind == "constant" && v.size() == 1) return RatioSchedule::constant(v[0]);
  if (kind == "step" && v.size() == 3) return RatioSchedule::step_incremental(v[0], v[1], as_count(v[2], text));
  if (kind == "cosine" && v.size() == 2) return RatioSchedule::cosine(v[0], v[1]);
  if (kind == "rcosine" && v.size() == 2) return RatioSchedule::reverse_cosine(v[0], v[1]);
  throw std::invalid_argument("unrecognised ratio schedule '" + text + "'");
}

IntervalSchedule parse_interval(const std::string& text) {
  if (text == "dense") return IntervalSchedule::dense();
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("unrecognised interval schedule '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const auto v = parse_numbers(text.substr(colon + 1), text);
  if (v.size() == 3) {
    const auto a = as_count(v[0], text), b = as_count(v[1], text), s = as_count(v[2], text);
    if (kind == "inc") return IntervalSchedule::incremental(a, b, s);
    if (kind == "dec") return IntervalSchedule::decremental(a, b, s);
  }
  throw std::invalid_argument("unrecognised interval schedule '" + text + "'");
}

std::string to_string(const RatioSchedule& s) {
  std::ostringstream out;
  out << std::setprecision(15);
  switch (s.kind) {
    case RatioSchedule::Kind::Constant: out << "constant:" << s.start; break;
    case RatioSchedule::Kind::StepIncremental: out << "step:" << s.start << ',' << s.step << ',' << s.stages; break;
    case RatioSchedule::Kind::Cosine: out << "cosine:" << s.start << ',' << s.end; break;
    case RatioSchedule::Kind::ReverseCosine: out << "rcosine:" << s.start << ',' << s.end; break;
  }
  return out.str();
}

std::string to_string(const IntervalSchedule& s) {
  switch (s.kind) {
    case IntervalSchedule::Kind::Dense: return "dense";
    case IntervalSchedule::Kind::Incremental:
      return "inc:" + std::to_string(s.start) + "," + std::to_string(s.end) + "," + std::to_string(s.stages);
    case IntervalSchedule::Kind::Decremental:
      return "dec:" + std::to_string(s.start) + "," + std::to_string(s.end) + "," + std::to_string(s.stages);
  }
  return "dense";
}

}  // namespace inrteach
