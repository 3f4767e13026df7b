#include "run.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace inrteach::cli {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

std::string extension_of(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

MatrixXd unit_range(const MatrixXd& values) { return (values.array().max(-1.0).min(1.0) + 1.0) / 2.0; }

/// Channel c of a row-major height x width grid as an image matrix.
MatrixXd channel_image(const MatrixXd& values, Eigen::Index c, std::size_t height, std::size_t width) {
  const VectorXd row = values.row(c).transpose();
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      row.data(), static_cast<Eigen::Index>(height), static_cast<Eigen::Index>(width));
}

std::vector<std::uint8_t> occupancy(const MatrixXd& sdf) {
  const VectorXd flat = sdf.row(0).transpose();
  return occupancy_from_sdf(std::span<const double>(flat.data(), static_cast<std::size_t>(flat.size())));
}

MetricReport evaluate(const Signal& signal, const MatrixXd& recon) {
  MetricReport report;
  if (signal.modality == Modality::Volume3D) {
    report.mse = mse(signal.values, recon);
    report.psnr_db = psnr(signal.values, recon, 1.0);
    report.iou = iou(occupancy(signal.values), occupancy(recon));
    return report;
  }
  const MatrixXd ref = unit_range(signal.values);
  const MatrixXd rec = unit_range(recon);
  report.mse = mse(ref, rec);
  report.psnr_db = psnr(ref, rec, 1.0);
  if (signal.modality == Modality::Image2D && signal.shape[0] >= 11 && signal.shape[1] >= 11) {
    double total = 0.0;
    for (Eigen::Index c = 0; c < ref.rows(); ++c)
      total += ssim(channel_image(ref, c, signal.shape[0], signal.shape[1]),
                    channel_image(rec, c, signal.shape[0], signal.shape[1]));
    report.ssim = total / static_cast<double>(ref.rows());
  }
  return report;
}

std::string save_reconstruction(const Signal& signal, const MatrixXd& recon, const std::filesystem::path& dir) {
  Signal out = signal;
  out.values = recon.array().max(-1.0).min(1.0).matrix();
  switch (signal.modality) {
    case Modality::Image2D: {
      const std::string name = signal.channels() == 1 ? "recon.pgm" : "recon.ppm";
      save_image(out, dir / name);
      return name;
    }
    case Modality::Audio1D:
      save_audio_wav(out, dir / "recon.wav");
      return "recon.wav";
    case Modality::Volume3D:
      save_occupancy_raw(occupancy(recon), signal.shape, dir / "recon.raw");
      return "recon.raw";
    case Modality::Synthetic1D: {
      std::ostringstream csv;
      csv << "x,target,prediction\n" << std::setprecision(17);
      for (Eigen::Index i = 0; i < recon.cols(); ++i)
        csv << signal.coords(0, i) << ',' << signal.values(0, i) << ',' << recon(0, i) << '\n';
      write_text(dir / "recon.csv", csv.str());
      return "recon.csv";
    }
  }
  return {};
}

void save_mask(const Signal& signal, std::span<const std::size_t> selection, const std::filesystem::path& path) {
  Signal mask;
  mask.modality = Modality::Image2D;
  mask.shape = signal.shape;
  mask.coords = signal.coords;
  mask.values = MatrixXd::Ones(1, signal.coords.cols());
  for (std::size_t i : selection) mask.values(0, static_cast<Eigen::Index>(i)) = -1.0;
  save_image(mask, path);
}

template <class Scalar>
RunOutcome fit_typed(const RunConfig& config, const Signal& signal, const std::filesystem::path& dir) {
  const MlpArch arch = config.mlp_arch(signal.dim(), signal.channels());
  Mlp<Scalar> mlp = Mlp<Scalar>::init(arch, config.seed);
  auto ts = TeachingSet<Scalar>::from_signal(signal);
  const IntConfig int_config = config.int_config();
  int_config.validate(ts.size());

  RunOutcome outcome;
  TrainHooks hooks;
  if (config.masks && signal.modality == Modality::Image2D) {
    hooks.on_selection = [&](std::size_t step, std::span<const std::size_t> selection) {
      const std::string name = "mask_" + std::to_string(step) + ".pgm";
      save_mask(signal, selection, dir / name);
      outcome.outputs.push_back(name);
    };
  }
  outcome.log = int_train(mlp, ts, int_config, config.optim_config(), config.steps, config.eps, config.seed, hooks);

  const MatrixXd recon = mlp.forward(ts.coords).template cast<double>();
  outcome.metrics = evaluate(signal, recon);

  std::ostringstream csv;
  outcome.log.write_csv(csv);
  write_text(dir / "run.csv", csv.str());
  outcome.outputs.push_back("run.csv");

  nlohmann::json metrics = outcome.metrics;
  metrics["example_gradients"] = outcome.log.example_gradients;
  metrics["example_inferences"] = outcome.log.example_inferences;
  metrics["optimizer_steps"] = outcome.log.optimizer_steps;
  metrics["refreshes"] = outcome.log.refreshes;
  metrics["stopped_early"] = outcome.log.stopped_early;
  metrics["wall_ms"] = outcome.log.wall_ms;
  metrics["final_loss"] = outcome.log.rows.empty() ? nlohmann::json(nullptr) : nlohmann::json(outcome.log.rows.back().loss);
  metrics["psnr_scale"] = signal.modality == Modality::Volume3D ? "sdf, peak 1" : "values mapped to [0, 1], peak 1";
  if (outcome.metrics.ssim)
    metrics["ssim_params"] = {{"window", 11}, {"gaussian_sigma", 1.5}, {"k1", 0.01}, {"k2", 0.03}, {"range", 1.0}};
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  outcome.outputs.push_back("metrics.json");

  save_weights(mlp, dir / "weights.inrw");
  outcome.outputs.push_back("weights.inrw");
  outcome.outputs.push_back(save_reconstruction(signal, recon, dir));
  return outcome;
}

}  // namespace

void RunConfig::validate() const {
  require(input.empty() || extension_of(input) == ".pgm" || extension_of(input) == ".ppm" ||
              extension_of(input) == ".wav",
          "input must be a .pgm, .ppm or .wav file");
  require(synthetic == "sine" || synthetic == "sphere", "synthetic must be sine or sphere");
  require(sine_points >= 2, "sine-points must be at least 2");
  require(volume_grid >= 2, "volume-grid must be at least 2");
  require(sphere_radius > 0.0 && sphere_radius < 1.0, "sphere-radius must lie in (0, 1)");
  require(arch == "siren" || arch == "ffn", "arch must be siren or ffn");
  require(width >= 1, "width must be at least 1");
  require(depth >= 2, "depth must be at least 2");
  require(omega0 > 0.0, "omega0 must be positive");
  require(features >= 1, "features must be at least 1");
  require(sigma > 0.0, "sigma must be positive");
  require(precision == "float" || precision == "double", "precision must be float or double");
  require(optimizer == "adam" || optimizer == "sgd", "optimizer must be adam or sgd");
  require(lr > 0.0, "lr must be positive");
  require(lr_schedule == "cosine" || lr_schedule == "constant", "lr-schedule must be cosine or constant");
  require(lr_min >= 0.0 && lr_min <= lr, "lr-min must lie in [0, lr]");
  require(steps >= 1, "steps must be at least 1");
  require(eps >= 0.0, "eps must be non-negative");
  require(rule == "greedy" || rule == "uniform", "rule must be greedy or uniform");
  int_config();
}

MlpArch RunConfig::mlp_arch(std::size_t in_dim, std::size_t out_dim) const {
  if (arch == "ffn") {
    MlpArch a = MlpArch::ffn(in_dim, out_dim, width, depth, features, sigma);
    return a;
  }
  return MlpArch::siren(in_dim, out_dim, width, depth, omega0);
}

OptimConfig RunConfig::optim_config() const {
  OptimConfig c;
  c.kind = optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
  c.lr = lr;
  if (lr_schedule == "cosine") c.cosine_lr_min = lr_min;
  return c;
}

IntConfig RunConfig::int_config() const {
  IntConfig c;
  c.enabled = int_enabled;
  c.ratio = parse_ratio(ratio);
  c.interval = parse_interval(interval);
  c.rule = rule == "uniform" ? SelectionRule::Uniform : SelectionRule::Greedy;
  if (minibatch > 0) c.minibatch_size = minibatch;
  return c;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  j = nlohmann::json{{"input", c.input},
                     {"synthetic", c.synthetic},
                     {"sine_points", c.sine_points},
                     {"volume_grid", c.volume_grid},
                     {"sphere_radius", c.sphere_radius},
                     {"arch", c.arch},
                     {"width", c.width},
                     {"depth", c.depth},
                     {"omega0", c.omega0},
                     {"features", c.features},
                     {"sigma", c.sigma},
                     {"precision", c.precision},
                     {"optimizer", c.optimizer},
                     {"lr", c.lr},
                     {"lr_schedule", c.lr_schedule},
                     {"lr_min", c.lr_min},
                     {"steps", c.steps},
                     {"seed", c.seed},
                     {"eps", c.eps},
                     {"int", c.int_enabled ? "on" : "off"},
                     {"ratio", to_string(parse_ratio(c.ratio))},
                     {"interval", to_string(parse_interval(c.interval))},
                     {"minibatch", c.minibatch},
                     {"rule", c.rule},
                     {"masks", c.masks}};
}

Signal load_signal(const RunConfig& config) {
  if (!config.input.empty()) {
    const std::string ext = extension_of(config.input);
    if (ext == ".wav") return load_audio_wav(config.input);
    return load_image(config.input);
  }
  if (config.synthetic == "sphere")
    return synth_volume_sphere(config.volume_grid, config.sphere_radius, VolumeField::Sdf);
  return synth_sine(config.sine_points, -std::numbers::pi, std::numbers::pi);
}

RunOutcome fit_signal(const RunConfig& config, const Signal& signal, const std::filesystem::path& dir) {
  config.validate();
  std::filesystem::create_directories(dir);
  if (config.precision == "double") return fit_typed<double>(config, signal, dir);
  return fit_typed<float>(config, signal, dir);
}

std::string blob_hash(const std::vector<std::uint8_t>& bytes) {
  const std::string header = "blob " + std::to_string(bytes.size()) + '\0';
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx) throw std::runtime_error("blob_hash: cannot allocate digest context");
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, header.data(), header.size()) == 1 &&
                  EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, digest, &length) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok) throw std::runtime_error("blob_hash: SHA-1 failed");
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

void write_manifest(const std::filesystem::path& dir, const nlohmann::json& config, const std::string& input,
                    const std::string& status, const std::vector<std::string>& outputs, const std::string& error) {
  nlohmann::json manifest;
  manifest["tool"] = "inrteach";
  manifest["config"] = config;
  manifest["conventions"] = {
      {"coordinates", "pixel and sample centres mapped into [-1, 1]"},
      {"siren_init", "first layer U(-1/fan_in, 1/fan_in), later layers U(-sqrt(6/fan_in)/omega0, sqrt(6/fan_in)/omega0)"},
      {"selected_count", "ceil(ratio * N), at least 1"},
      {"eps_check", "full-set residual norm, evaluated at refreshes"},
  };
  if (!input.empty()) {
    nlohmann::json entry{{"path", input}};
    try {
      const auto bytes = read_file(input);
      entry["bytes"] = bytes.size();
      entry["blob_sha1"] = blob_hash(bytes);
    } catch (const std::exception& e) {
      entry["error"] = e.what();
    }
    manifest["inputs"] = nlohmann::json::array({entry});
  } else {
    manifest["inputs"] = nlohmann::json::array();
  }
  manifest["outputs"] = outputs;
  manifest["status"] = status;
  manifest["complete"] = status == "complete";
  if (!error.empty()) manifest["error"] = error;
  std::filesystem::create_directories(dir);
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

}  // namespace inrteach::cli
