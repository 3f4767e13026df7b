#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "inrteach/linalg.hpp"

namespace inrteach {

enum class ActivationKind { Sine, Relu };

struct Activation {
  ActivationKind kind = ActivationKind::Sine;
  double omega0 = 30.0;  // only meaningful for Sine

  static Activation sine(double omega0 = 30.0) { return {ActivationKind::Sine, omega0}; }
  static Activation relu() { return {ActivationKind::Relu, 0.0}; }

  bool operator==(const Activation&) const = default;
};

/// Random Fourier feature encoding x -> (cos(2 pi B x), sin(2 pi B x)) with
/// B drawn i.i.d. N(0, sigma^2) once at init.
struct FourierFeatures {
  std::size_t num_features = 0;
  double sigma = 1.0;

  bool operator==(const FourierFeatures&) const = default;
};

/// Shape of a fully-connected coordinate network. `depth` counts linear
/// layers: depth 2 is input -> hidden -> output. Every layer but the last is
/// followed by the activation.
struct MlpArch {
  std::size_t in_dim = 2;
  std::size_t out_dim = 1;
  std::size_t hidden_width = 256;
  std::size_t depth = 6;
  Activation activation;
  std::optional<FourierFeatures> encoding;

  static MlpArch siren(std::size_t in_dim, std::size_t out_dim, std::size_t width,
                       std::size_t depth, double omega0 = 30.0);
  static MlpArch ffn(std::size_t in_dim, std::size_t out_dim, std::size_t width,
                     std::size_t depth, std::size_t num_features, double sigma);

  /// Throws std::invalid_argument when any invariant is violated.
  void validate() const;

  /// Width of the vector fed to the first linear layer.
  std::size_t input_features() const;
  std::size_t fan_in(std::size_t layer) const;
  std::size_t fan_out(std::size_t layer) const;
  std::size_t param_count() const;

  bool operator==(const MlpArch&) const = default;
};

void to_json(nlohmann::json& j, const MlpArch& arch);
void from_json(const nlohmann::json& j, MlpArch& arch);

/// Coordinate MLP with a flat parameter vector theta.
///
/// Layout of theta: the weight matrices of every layer in order (each
/// column-major, fan_out x fan_in), followed by the bias vectors of every
/// layer in order. Coordinates and outputs are batched column-wise:
/// forward maps an in_dim x B matrix to an out_dim x B matrix.
template <class Scalar>
class Mlp {
 public:
  using Mat = Matrix<Scalar>;
  using Vec = Vector<Scalar>;

  static Mlp init(const MlpArch& arch, std::uint64_t seed);

  Mlp(MlpArch arch, Vec theta, Mat fourier_basis, std::uint64_t seed);

  const MlpArch& arch() const noexcept { return arch_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t param_count() const noexcept { return static_cast<std::size_t>(theta_.size()); }
  const Vec& theta() const noexcept { return theta_; }
  Vec& theta() noexcept { return theta_; }
  const Mat& fourier_basis() const noexcept { return basis_; }

  std::size_t weight_offset(std::size_t layer) const { return weight_offsets_.at(layer); }
  std::size_t bias_offset(std::size_t layer) const { return bias_offsets_.at(layer); }
  Eigen::Map<const Mat> weight(std::size_t layer) const;
  Eigen::Map<const Vec> bias(std::size_t layer) const;

  Mat forward(const Mat& coords) const;

  /// (1/B) sum_i dl_df_i . df(x_i)/dtheta for a batch of B coordinates.
  Vec backward(const Mat& coords, const Mat& dl_df) const;

  /// Forward and backward in one pass: returns outputs, and the averaged
  /// parameter gradient of the mean loss whose per-example output gradient is
  /// (outputs - targets), i.e. mean of 1/2 |f(x_i) - y_i|^2.
  Mat fit_gradient(const Mat& coords, const Mat& targets, Vec& grad) const;

  /// df(x)/dtheta for a single coordinate, one column per output channel.
  Mat per_example_jacobian(const Vec& coord) const;

  /// Jacobians of a scalar-output network for every coordinate: m x B.
  Mat batch_jacobian(const Mat& coords) const;

  template <class Other>
  Mlp<Other> cast() const {
    return Mlp<Other>(arch_, theta_.template cast<Other>(), basis_.template cast<Other>(), seed_);
  }

 private:
  struct Trace {
    std::vector<Mat> inputs;  // input to each linear layer
    std::vector<Mat> pre;     // activation argument of each hidden layer
  };

  Mat encode(const Mat& coords) const;
  Mat run(const Mat& coords, Trace* trace) const;
  void accumulate(const Trace& trace, Mat delta, Scalar* grad) const;
  void check_coords(const Mat& coords, const char* what) const;

  MlpArch arch_;
  Vec theta_;
  Mat basis_;
  std::uint64_t seed_ = 0;
  std::vector<std::size_t> weight_offsets_;
  std::vector<std::size_t> bias_offsets_;
};

extern template class Mlp<float>;
extern template class Mlp<double>;

/// `.inrw` weight files: one line of JSON {arch, param_count, seed, format},
/// a newline, then param_count little-endian IEEE-754 float64 values.
template <class Scalar>
std::string encode_weights(const Mlp<Scalar>& mlp);
template <class Scalar>
Mlp<Scalar> decode_weights(const std::string& bytes);

template <class Scalar>
void save_weights(const Mlp<Scalar>& mlp, const std::filesystem::path& path);
template <class Scalar>
Mlp<Scalar> load_weights(const std::filesystem::path& path);

}  // namespace inrteach
