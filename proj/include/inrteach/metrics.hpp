#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "json.hpp"

#include "inrteach/linalg.hpp"

namespace inrteach {

struct MetricReport {
  double mse = 0.0;
  double psnr_db = 0.0;
  std::optional<double> ssim;
  std::optional<double> iou;
};

/// PSNR is written as the string "inf" when mse is zero.
void to_json(nlohmann::json& j, const MetricReport& report);

double mse(const MatrixXd& reference, const MatrixXd& reconstruction);

/// 10 log10(peak^2 / mse); +infinity for identical inputs.
double psnr(const MatrixXd& reference, const MatrixXd& reconstruction, double peak);

/// Mean SSIM over all valid 11x11 windows (Gaussian weights, sigma 1.5,
/// K1 = 0.01, K2 = 0.03, dynamic range 1) of two single-channel images in
/// [0, 1], stored height x width.
double ssim(const MatrixXd& reference, const MatrixXd& reconstruction);

/// |A n B| / |A u B| of two binary grids; 1 when both are empty.
double iou(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

/// 1 where sdf <= 0.
std::vector<std::uint8_t> occupancy_from_sdf(std::span<const double> sdf);

}  // namespace inrteach
