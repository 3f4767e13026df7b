#include "inrteach/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace inrteach {

void to_json(nlohmann::json& j, const MetricReport& report) {
  j = nlohmann::json{{"mse", report.mse}};
  if (std::isinf(report.psnr_db))
    j["psnr_db"] = "inf";
  else
    j["psnr_db"] = report.psnr_db;
  j["ssim"] = report.ssim ? nlohmann::json(*report.ssim) : nlohmann::json(nullptr);
  j["iou"] = report.iou ? nlohmann::json(*report.iou) : nlohmann::json(nullptr);
}

double mse(const MatrixXd& reference, const MatrixXd& reconstruction) {
  if (reference.rows() != reconstruction.rows() || reference.cols() != reconstruction.cols())
    throw std::invalid_argument("mse: shape mismatch");
  if (reference.size() == 0) throw std::invalid_argument("mse: empty input");
  return (reference - reconstruction).squaredNorm() / static_cast<double>(reference.size());
}

double psnr(const MatrixXd& reference, const MatrixXd& reconstruction, double peak) {
  if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
  const double err = mse(reference, reconstruction);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / err);
}

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

MatrixXd gaussian_window() {
  MatrixXd w(kWindow, kWindow);
  const int half = kWindow / 2;
  for (int i = 0; i < kWindow; ++i)
    for (int j = 0; j < kWindow; ++j)
      w(i, j) = std::exp(-((i - half) * (i - half) + (j - half) * (j - half)) / (2.0 * kSigma * kSigma));
  return w / w.sum();
}

}  // namespace

double ssim(const MatrixXd& reference, const MatrixXd& reconstruction) {
  if (reference.rows() != reconstruction.rows() || reference.cols() != reconstruction.cols())
    throw std::invalid_argument("ssim: shape mismatch");
  if (reference.rows() < kWindow || reference.cols() < kWindow)
    throw std::invalid_argument("ssim: image smaller than the 11x11 window");

  constexpr double c1 = (0.01 * 1.0) * (0.01 * 1.0);
  constexpr double c2 = (0.03 * 1.0) * (0.03 * 1.0);
  static const MatrixXd w = gaussian_window();

  const Eigen::Index out_rows = reference.rows() - kWindow + 1;
  const Eigen::Index out_cols = reference.cols() - kWindow + 1;
  double total = 0.0;
  for (Eigen::Index r = 0; r < out_rows; ++r) {
    for (Eigen::Index c = 0; c < out_cols; ++c) {
      const auto x = reference.block(r, c, kWindow, kWindow).array();
      const auto y = reconstruction.block(r, c, kWindow, kWindow).array();
      const double mx = (w.array() * x).sum();
      const double my = (w.array() * y).sum();
      const double sxx = (w.array() * x * x).sum() - mx * mx;
      const double syy = (w.array() * y * y).sum() - my * my;
      const double sxy = (w.array() * x * y).sum() - mx * my;
      total += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
    }
  }
  return total / static_cast<double>(out_rows * out_cols);
}

double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("iou: grid sizes differ");
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] != 0;
    const bool in_b = b[i] != 0;
    inter += in_a && in_b;
    uni += in_a || in_b;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<std::uint8_t> occupancy_from_sdf(std::span<const double> sdf) {
  std::vector<std::uint8_t> out(sdf.size());
  for (std::size_t i = 0; i < sdf.size(); ++i) out[i] = sdf[i] <= 0.0 ? 1 : 0;
  return out;
}

}  // namespace inrteach
