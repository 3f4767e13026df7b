#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "inrteach/linalg.hpp"
#include "inrteach/rng.hpp"

namespace inrteach {

enum class Modality { Audio1D, Image2D, Volume3D, Synthetic1D };

const char* to_string(Modality modality);

/// Affine map between stored raw samples and network values:
/// value = scale * raw + offset.
struct ValueScale {
  double scale = 1.0;
  double offset = 0.0;

  double to_value(double raw) const { return scale * raw + offset; }
  double to_raw(double value) const { return (value - offset) / scale; }
};

/// A discretely sampled signal. Coordinates are stored column-wise
/// (dim x N) in [-1, 1]^dim, values column-wise (channels x N). For grid
/// signals N is the product of `shape` and samples are in row-major order
/// (last axis fastest); coordinate row a corresponds to shape axis a.
struct Signal {
  Modality modality = Modality::Synthetic1D;
  MatrixXd coords;
  MatrixXd values;
  std::vector<std::size_t> shape;
  ValueScale value_scale;
  std::uint32_t sample_rate = 0;  // audio only

  std::size_t size() const { return static_cast<std::size_t>(coords.cols()); }
  std::size_t dim() const { return static_cast<std::size_t>(coords.rows()); }
  std::size_t channels() const { return static_cast<std::size_t>(values.rows()); }
};

/// Raised by the binary decoders; `offset` is the byte position at which the
/// input stopped making sense.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

/// Pixel-center coordinates of a row-major grid: index j on an axis of
/// length L maps to -1 + (2j + 1) / L.
MatrixXd grid_coords(std::span<const std::size_t> shape);

/// n points spread uniformly over [lo, hi], values sin(x), with x mapped
/// affinely so lo -> -1 and hi -> +1.
Signal synth_sine(std::size_t n_points, double lo, double hi);

// Binary PGM (P5) and PPM (P6) with maxval 255. Values are 2 v / 255 - 1.
Signal decode_pnm(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_pnm(const Signal& image);
Signal load_image(const std::filesystem::path& path);
void save_image(const Signal& image, const std::filesystem::path& path);

/// Round-half-to-even quantization of a [-1, 1] image value back to 0..255.
std::uint8_t quantize_pixel(double value);

// RIFF/WAVE, PCM 16-bit mono. Values are sample / 32768.
Signal decode_wav(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_wav(const Signal& audio);
Signal load_audio_wav(const std::filesystem::path& path);
void save_audio_wav(const Signal& audio, const std::filesystem::path& path);

/// Sphere centred at the origin.
struct SphereSdf {
  double radius = 0.5;

  double operator()(const Eigen::Ref<const VectorXd>& x) const { return x.norm() - radius; }
};

enum class VolumeField { Occupancy, Sdf };

/// grid_dim^3 pixel-centred grid over [-1, 1]^3 with occupancy (1 inside or
/// on the sphere, 0 outside) or signed distance |x| - radius.
Signal synth_volume_sphere(std::size_t grid_dim, double radius, VolumeField field);

/// Training points for SDF fitting.
struct SurfaceSamples {
  MatrixXd coords;   // 3 x n
  MatrixXd targets;  // 1 x n
};

/// Points drawn uniformly on the surface and perturbed per coordinate by
/// zero-mean Laplace noise: variance `coarse_variance` for the first n_coarse
/// points and `fine_variance` for the following n_fine. Targets are the exact
/// SDF at the perturbed (clamped to [-1, 1]^3) positions.
SurfaceSamples sample_surface_points(const SphereSdf& sdf, std::size_t n_coarse, std::size_t n_fine,
                                     Rng& rng, double coarse_variance = 1e-1,
                                     double fine_variance = 1e-3);

/// Points uniform in [-1, 1]^3 with exact SDF targets.
SurfaceSamples sample_volume_points(const SphereSdf& sdf, std::size_t n, Rng& rng);

/// Occupancy grid as raw bytes (one per voxel, row-major) next to a JSON
/// sidecar `<path>.json` holding {"dims": [...]}.
void save_occupancy_raw(std::span<const std::uint8_t> voxels, std::span<const std::size_t> dims,
                        const std::filesystem::path& path);
std::vector<std::uint8_t> load_occupancy_raw(const std::filesystem::path& path,
                                             std::vector<std::size_t>& dims);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace inrteach
