#include "inrteach/nn.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "inrteach/rng.hpp"

namespace inrteach {

MlpArch MlpArch::siren(std::size_t in_dim, std::size_t out_dim, std::size_t width,
                       std::size_t depth, double omega0) {
  MlpArch arch;
  arch.in_dim = in_dim;
  arch.out_dim = out_dim;
  arch.hidden_width = width;
  arch.depth = depth;
  arch.activation = Activation::sine(omega0);
  return arch;
}

MlpArch MlpArch::ffn(std::size_t in_dim, std::size_t out_dim, std::size_t width,
                     std::size_t depth, std::size_t num_features, double sigma) {
  MlpArch arch;
  arch.in_dim = in_dim;
  arch.out_dim = out_dim;
  arch.hidden_width = width;
  arch.depth = depth;
  arch.activation = Activation::relu();
  arch.encoding = FourierFeatures{num_features, sigma};
  return arch;
}

void MlpArch::validate() const {
  if (in_dim == 0 || out_dim == 0) throw std::invalid_argument("MlpArch: dimensions must be positive");
  if (depth < 2) throw std::invalid_argument("MlpArch: depth must be at least 2");
  if (hidden_width < 1) throw std::invalid_argument("MlpArch: hidden_width must be at least 1");
  if (activation.kind == ActivationKind::Sine && !(activation.omega0 > 0.0))
    throw std::invalid_argument("MlpArch: sine activation requires omega0 > 0");
  if (encoding) {
    if (encoding->num_features == 0)
      throw std::invalid_argument("MlpArch: Fourier encoding needs at least one feature");
    if (!(encoding->sigma > 0.0)) throw std::invalid_argument("MlpArch: Fourier sigma must be > 0");
  }
}

std::size_t MlpArch::input_features() const {
  return encoding ? 2 * encoding->num_features : in_dim;
}

std::size_t MlpArch::fan_in(std::size_t layer) const {
  return layer == 0 ? input_features() : hidden_width;
}

std::size_t MlpArch::fan_out(std::size_t layer) const {
  return layer + 1 == depth ? out_dim : hidden_width;
}

std::size_t MlpArch::param_count() const {
  std::size_t total = 0;
  for (std::size_t l = 0; l < depth; ++l) total += fan_out(l) * (fan_in(l) + 1);
  return total;
}

void to_json(nlohmann::json& j, const MlpArch& arch) {
  j = nlohmann::json{{"in_dim", arch.in_dim},
                     {"out_dim", arch.out_dim},
                     {"hidden_width", arch.hidden_width},
                     {"depth", arch.depth}};
  if (arch.activation.kind == ActivationKind::Sine)
    j["activation"] = {{"kind", "sine"}, {"omega0", arch.activation.omega0}};
  else
    j["activation"] = {{"kind", "relu"}};
  if (arch.encoding)
    j["encoding"] = {{"kind", "fourier"},
                     {"num_features", arch.encoding->num_features},
                     {"sigma", arch.encoding->sigma}};
  else
    j["encoding"] = nullptr;
}

void from_json(const nlohmann::json& j, MlpArch& arch) {
  arch.in_dim = j.at("in_dim").get<std::size_t>();
  arch.out_dim = j.at("out_dim").get<std::size_t>();
  arch.hidden_width = j.at("hidden_width").get<std::size_t>();
  arch.depth = j.at("depth").get<std::size_t>();
  const auto& act = j.at("activation");
  const auto kind = act.at("kind").get<std::string>();
  if (kind == "sine")
    arch.activation = Activation::sine(act.at("omega0").get<double>());
  else if (kind == "relu")
    arch.activation = Activation::relu();
  else
    throw std::invalid_argument("MlpArch: unknown activation '" + kind + "'");
  const auto& enc = j.at("encoding");
  if (enc.is_null())
    arch.encoding.reset();
  else
    arch.encoding = FourierFeatures{enc.at("num_features").get<std::size_t>(),
                                    enc.at("sigma").get<double>()};
  arch.validate();
}

template <class Scalar>
Mlp<Scalar> Mlp<Scalar>::init(const MlpArch& arch, std::uint64_t seed) {
  arch.validate();
  Rng rng(seed);

  Mat basis;
  if (arch.encoding) {
    basis.resize(static_cast<Eigen::Index>(arch.encoding->num_features),
                 static_cast<Eigen::Index>(arch.in_dim));
    for (Eigen::Index c = 0; c < basis.cols(); ++c)
      for (Eigen::Index r = 0; r < basis.rows(); ++r)
        basis(r, c) = static_cast<Scalar>(rng.normal() * arch.encoding->sigma);
  }

  Vec theta = Vec::Zero(static_cast<Eigen::Index>(arch.param_count()));
  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch.depth; ++l) {
    const double fan_in = static_cast<double>(arch.fan_in(l));
    double bound = std::sqrt(6.0 / fan_in);
    if (arch.activation.kind == ActivationKind::Sine) {
      // SIREN: the first layer of a raw-coordinate network spans +-1/fan_in so
      // that omega0 sets its frequency; later layers are scaled down by omega0.
      bound = (l == 0 && !arch.encoding) ? 1.0 / fan_in : bound / arch.activation.omega0;
    }
    const std::size_t count = arch.fan_out(l) * arch.fan_in(l);
    for (std::size_t i = 0; i < count; ++i)
      theta(static_cast<Eigen::Index>(offset + i)) = static_cast<Scalar>(rng.uniform(-bound, bound));
    offset += count;
  }
  return Mlp(arch, std::move(theta), std::move(basis), seed);
}

template <class Scalar>
Mlp<Scalar>::Mlp(MlpArch arch, Vec theta, Mat fourier_basis, std::uint64_t seed)
    : arch_(std::move(arch)), theta_(std::move(theta)), basis_(std::move(fourier_basis)), seed_(seed) {
  arch_.validate();
  if (static_cast<std::size_t>(theta_.size()) != arch_.param_count())
    throw std::invalid_argument("Mlp: parameter count does not match architecture");
  if (arch_.encoding &&
      (static_cast<std::size_t>(basis_.rows()) != arch_.encoding->num_features ||
       static_cast<std::size_t>(basis_.cols()) != arch_.in_dim))
    throw std::invalid_argument("Mlp: Fourier basis shape does not match architecture");
  if (!theta_.allFinite()) throw std::invalid_argument("Mlp: non-finite parameter");

  std::size_t offset = 0;
  for (std::size_t l = 0; l < arch_.depth; ++l) {
    weight_offsets_.push_back(offset);
    offset += arch_.fan_out(l) * arch_.fan_in(l);
  }
  for (std::size_t l = 0; l < arch_.depth; ++l) {
    bias_offsets_.push_back(offset);
    offset += arch_.fan_out(l);
  }
}

template <class Scalar>
Eigen::Map<const typename Mlp<Scalar>::Mat> Mlp<Scalar>::weight(std::size_t layer) const {
  return {theta_.data() + weight_offsets_.at(layer), static_cast<Eigen::Index>(arch_.fan_out(layer)),
          static_cast<Eigen::Index>(arch_.fan_in(layer))};
}

template <class Scalar>
Eigen::Map<const typename Mlp<Scalar>::Vec> Mlp<Scalar>::bias(std::size_t layer) const {
  return {theta_.data() + bias_offsets_.at(layer), static_cast<Eigen::Index>(arch_.fan_out(layer))};
}

template <class Scalar>
void Mlp<Scalar>::check_coords(const Mat& coords, const char* what) const {
  if (static_cast<std::size_t>(coords.rows()) != arch_.in_dim)
    throw std::invalid_argument(std::string(what) + ": coordinate dimension mismatch");
  if (!coords.allFinite()) throw std::invalid_argument(std::string(what) + ": non-finite coordinate");
}

template <class Scalar>
typename Mlp<Scalar>::Mat Mlp<Scalar>::encode(const Mat& coords) const {
  if (!arch_.encoding) return coords;
  const Mat phase = (Scalar(2 * std::numbers::pi) * basis_) * coords;
  const Eigen::Index f = phase.rows();
  Mat out(2 * f, coords.cols());
  out.topRows(f) = phase.array().cos();
  out.bottomRows(f) = phase.array().sin();
  return out;
}

template <class Scalar>
typename Mlp<Scalar>::Mat Mlp<Scalar>::run(const Mat& coords, Trace* trace) const {
  const std::size_t layers = arch_.depth;
  const bool sine = arch_.activation.kind == ActivationKind::Sine;
  const Scalar omega = static_cast<Scalar>(arch_.activation.omega0);
  if (trace) {
    trace->inputs.clear();
    trace->pre.clear();
    trace->inputs.reserve(layers);
    trace->pre.reserve(layers - 1);
  }

  Mat a = encode(coords);
  for (std::size_t l = 0;; ++l) {
    Mat z = weight(l) * a;
    z.colwise() += bias(l);
    if (trace) trace->inputs.push_back(std::move(a));
    if (l + 1 == layers) return z;
    if (sine) {
      z *= omega;
      a = z.array().sin();
    } else {
      a = z.cwiseMax(Scalar(0));
    }
    if (trace) trace->pre.push_back(std::move(z));
  }
}

template <class Scalar>
void Mlp<Scalar>::accumulate(const Trace& trace, Mat delta, Scalar* grad) const {
  const bool sine = arch_.activation.kind == ActivationKind::Sine;
  const Scalar omega = static_cast<Scalar>(arch_.activation.omega0);
  for (std::size_t l = arch_.depth; l-- > 0;) {
    const auto rows = static_cast<Eigen::Index>(arch_.fan_out(l));
    const auto cols = static_cast<Eigen::Index>(arch_.fan_in(l));
    Eigen::Map<Mat> grad_w(grad + weight_offsets_[l], rows, cols);
    Eigen::Map<Vec> grad_b(grad + bias_offsets_[l], rows);
    grad_w.noalias() += delta * trace.inputs[l].transpose();
    grad_b.noalias() += delta.rowwise().sum();
    if (l == 0) break;

    Mat back = weight(l).transpose() * delta;
    const Mat& z = trace.pre[l - 1];
    if (sine)
      delta = back.array() * (omega * z.array().cos());
    else
      delta = back.array() * (z.array() > Scalar(0)).template cast<Scalar>();
  }
}

template <class Scalar>
typename Mlp<Scalar>::Mat Mlp<Scalar>::forward(const Mat& coords) const {
  check_coords(coords, "Mlp::forward");
  return run(coords, nullptr);
}

template <class Scalar>
typename Mlp<Scalar>::Vec Mlp<Scalar>::backward(const Mat& coords, const Mat& dl_df) const {
  check_coords(coords, "Mlp::backward");
  if (dl_df.cols() != coords.cols() || static_cast<std::size_t>(dl_df.rows()) != arch_.out_dim)
    throw std::invalid_argument("Mlp::backward: dl_df shape mismatch");
  Vec grad = Vec::Zero(theta_.size());
  if (coords.cols() == 0) return grad;
  Trace trace;
  run(coords, &trace);
  accumulate(trace, dl_df / static_cast<Scalar>(coords.cols()), grad.data());
  return grad;
}

template <class Scalar>
typename Mlp<Scalar>::Mat Mlp<Scalar>::fit_gradient(const Mat& coords, const Mat& targets,
                                                   Vec& grad) const {
  check_coords(coords, "Mlp::fit_gradient");
  if (targets.cols() != coords.cols() || static_cast<std::size_t>(targets.rows()) != arch_.out_dim)
    throw std::invalid_argument("Mlp::fit_gradient: target shape mismatch");
  grad.setZero(theta_.size());
  Trace trace;
  Mat out = run(coords, &trace);
  if (coords.cols() > 0)
    accumulate(trace, (out - targets) / static_cast<Scalar>(coords.cols()), grad.data());
  return out;
}

template <class Scalar>
typename Mlp<Scalar>::Mat Mlp<Scalar>::per_example_jacobian(const Vec& coord) const {
  const Mat x = coord;
  check_coords(x, "Mlp::per_example_jacobian");
  Trace trace;
  run(x, &trace);
  const auto outs = static_cast<Eigen::Index>(arch_.out_dim);
  Mat jac = Mat::Zero(theta_.size(), outs);
  for (Eigen::Index c = 0; c < outs; ++c) {
    Mat seed = Mat::Zero(outs, 1);
    seed(c, 0) = Scalar(1);
    accumulate(trace, seed, jac.col(c).data());
  }
  return jac;
}

template <class Scalar>
typename Mlp<Scalar>::Mat Mlp<Scalar>::batch_jacobian(const Mat& coords) const {
  check_coords(coords, "Mlp::batch_jacobian");
  if (arch_.out_dim != 1)
    throw std::domain_error("Mlp::batch_jacobian: only scalar-output networks are supported");
  Trace trace;
  run(coords, &trace);
  Mat jac = Mat::Zero(theta_.size(), coords.cols());
  Trace single;
  single.inputs.resize(trace.inputs.size());
  single.pre.resize(trace.pre.size());
  const Mat one = Mat::Ones(1, 1);
  for (Eigen::Index i = 0; i < coords.cols(); ++i) {
    for (std::size_t l = 0; l < trace.inputs.size(); ++l) single.inputs[l] = trace.inputs[l].col(i);
    for (std::size_t l = 0; l < trace.pre.size(); ++l) single.pre[l] = trace.pre[l].col(i);
    accumulate(single, one, jac.col(i).data());
  }
  return jac;
}

template class Mlp<float>;
template class Mlp<double>;

namespace {

constexpr const char* kWeightsFormat = "inrw-1";

void append_f64_le(std::string& out, double value) {
  auto bits = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<char>(bits & 0xffu));
    bits >>= 8;
  }
}

double read_f64_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | p[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

template <class Scalar>
std::string encode_weights(const Mlp<Scalar>& mlp) {
  const nlohmann::json header{{"format", kWeightsFormat},
                              {"arch", mlp.arch()},
                              {"param_count", mlp.param_count()},
                              {"seed", mlp.seed()}};
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + 8 * mlp.param_count());
  for (Eigen::Index i = 0; i < mlp.theta().size(); ++i)
    append_f64_le(out, static_cast<double>(mlp.theta()(i)));
  return out;
}

template <class Scalar>
Mlp<Scalar> decode_weights(const std::string& bytes) {
  const auto newline = bytes.find('\n');
  if (newline == std::string::npos) throw std::runtime_error("inrw: missing header terminator");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(0, newline));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("inrw: malformed header: ") + e.what());
  }
  if (header.value("format", "") != kWeightsFormat) throw std::runtime_error("inrw: unknown format");
  const MlpArch arch = header.at("arch").get<MlpArch>();
  const auto count = header.at("param_count").get<std::size_t>();
  const auto seed = header.at("seed").get<std::uint64_t>();
  if (count != arch.param_count()) throw std::runtime_error("inrw: param_count disagrees with arch");
  const std::size_t payload = bytes.size() - newline - 1;
  if (payload != 8 * count)
    throw std::runtime_error("inrw: payload is " + std::to_string(payload) + " bytes, expected " +
                             std::to_string(8 * count));

  // The Fourier basis is a deterministic function of (arch, seed).
  Mlp<Scalar> mlp = Mlp<Scalar>::init(arch, seed);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + newline + 1;
  for (std::size_t i = 0; i < count; ++i)
    mlp.theta()(static_cast<Eigen::Index>(i)) = static_cast<Scalar>(read_f64_le(p + 8 * i));
  return mlp;
}

template <class Scalar>
void save_weights(const Mlp<Scalar>& mlp, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  const std::string bytes = encode_weights(mlp);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

template <class Scalar>
Mlp<Scalar> load_weights(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_weights<Scalar>(ss.str());
}

template std::string encode_weights(const Mlp<float>&);
template std::string encode_weights(const Mlp<double>&);
template Mlp<float> decode_weights<float>(const std::string&);
template Mlp<double> decode_weights<double>(const std::string&);
template void save_weights(const Mlp<float>&, const std::filesystem::path&);
template void save_weights(const Mlp<double>&, const std::filesystem::path&);
template Mlp<float> load_weights<float>(const std::filesystem::path&);
template Mlp<double> load_weights<double>(const std::filesystem::path&);

}  // namespace inrteach
