#include "inrteach/signals.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>

#include "json.hpp"

namespace inrteach {

const char* to_string(Modality modality) {
  switch (modality) {
    case Modality::Audio1D: return "audio1d";
    case Modality::Image2D: return "image2d";
    case Modality::Volume3D: return "volume3d";
    case Modality::Synthetic1D: return "synthetic1d";
  }
  return "unknown";
}

ParseError::ParseError(const std::string& what, std::size_t offset)
    : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

MatrixXd grid_coords(std::span<const std::size_t> shape) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  const auto dims = static_cast<Eigen::Index>(shape.size());
  MatrixXd coords(dims, static_cast<Eigen::Index>(n));
  for (std::size_t idx = 0; idx < n; ++idx) {
    std::size_t rem = idx;
    for (Eigen::Index a = dims - 1; a >= 0; --a) {
      const std::size_t len = shape[static_cast<std::size_t>(a)];
      const std::size_t j = rem % len;
      rem /= len;
      coords(a, static_cast<Eigen::Index>(idx)) =
          -1.0 + static_cast<double>(2 * j + 1) / static_cast<double>(len);
    }
  }
  return coords;
}

Signal synth_sine(std::size_t n_points, double lo, double hi) {
  if (n_points < 2) throw std::invalid_argument("synth_sine: need at least two points");
  if (!(lo < hi)) throw std::invalid_argument("synth_sine: requires lo < hi");
  Signal s;
  s.modality = Modality::Synthetic1D;
  s.shape = {n_points};
  s.coords.resize(1, static_cast<Eigen::Index>(n_points));
  s.values.resize(1, static_cast<Eigen::Index>(n_points));
  const double denom = static_cast<double>(n_points - 1);
  for (std::size_t i = 0; i < n_points; ++i) {
    const double u = static_cast<double>(i) / denom;
    const double x = i + 1 == n_points ? hi : lo + (hi - lo) * u;
    s.coords(0, static_cast<Eigen::Index>(i)) = -1.0 + 2.0 * u;
    s.values(0, static_cast<Eigen::Index>(i)) = std::sin(x);
  }
  return s;
}

// --- PNM -------------------------------------------------------------------

namespace {

class PnmHeaderReader {
 public:
  PnmHeaderReader(std::span<const std::uint8_t> bytes, std::size_t pos) : bytes_(bytes), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n' && bytes_[pos_] != '\r') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint(const char* field, std::size_t* at = nullptr) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    if (at) *at = start;
    std::size_t value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > (1u << 24)) throw ParseError(std::string("PNM: ") + field + " too large", start);
      ++pos_;
    }
    if (pos_ == start) throw ParseError(std::string("PNM: expected ") + field, start);
    return value;
  }

  void expect_single_whitespace() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_]))
      throw ParseError("PNM: expected whitespace before pixel data", pos_);
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

Signal decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ParseError("PNM: expected magic P5 or P6", 0);
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  PnmHeaderReader reader(bytes, 2);
  const std::size_t width = reader.read_uint("width");
  const std::size_t height = reader.read_uint("height");
  std::size_t maxval_at = 0;
  const std::size_t maxval = reader.read_uint("maxval", &maxval_at);
  if (width == 0 || height == 0) throw ParseError("PNM: zero image dimension", 2);
  if (maxval != 255) throw ParseError("PNM: only maxval 255 is supported", maxval_at);
  reader.expect_single_whitespace();

  const std::size_t start = reader.pos();
  const std::size_t payload = width * height * channels;
  if (bytes.size() - start < payload)
    throw ParseError("PNM: truncated pixel data, need " + std::to_string(payload) + " bytes, have " +
                         std::to_string(bytes.size() - start),
                     bytes.size());
  if (bytes.size() - start > payload) throw ParseError("PNM: trailing bytes after pixel data", start + payload);

  Signal s;
  s.modality = Modality::Image2D;
  s.shape = {height, width};
  s.value_scale = ValueScale{2.0 / 255.0, -1.0};
  s.coords = grid_coords(s.shape);
  const auto n = static_cast<Eigen::Index>(width * height);
  s.values.resize(static_cast<Eigen::Index>(channels), n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(channels); ++c)
      s.values(c, i) = s.value_scale.to_value(
          bytes[start + static_cast<std::size_t>(i) * channels + static_cast<std::size_t>(c)]);
  return s;
}

std::uint8_t quantize_pixel(double value) {
  const double raw = std::nearbyint((value + 1.0) * 127.5);
  return static_cast<std::uint8_t>(std::clamp(raw, 0.0, 255.0));
}

std::vector<std::uint8_t> encode_pnm(const Signal& image) {
  if (image.shape.size() != 2) throw std::invalid_argument("encode_pnm: image needs a 2D shape");
  const std::size_t channels = image.channels();
  if (channels != 1 && channels != 3) throw std::invalid_argument("encode_pnm: need 1 or 3 channels");
  const std::size_t height = image.shape[0];
  const std::size_t width = image.shape[1];
  if (static_cast<std::size_t>(image.values.cols()) != width * height)
    throw std::invalid_argument("encode_pnm: value count does not match shape");

  const std::string header = std::string(channels == 1 ? "P5" : "P6") + "\n" + std::to_string(width) +
                             " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + width * height * channels);
  for (Eigen::Index i = 0; i < image.values.cols(); ++i)
    for (Eigen::Index c = 0; c < static_cast<Eigen::Index>(channels); ++c)
      out.push_back(quantize_pixel(image.values(c, i)));
  return out;
}

Signal load_image(const std::filesystem::path& path) { return decode_pnm(read_file(path)); }

void save_image(const Signal& image, const std::filesystem::path& path) {
  write_file(path, encode_pnm(image));
}

// --- WAV -------------------------------------------------------------------

namespace {

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | static_cast<std::uint32_t>(b[at + 1]) << 8 |
         static_cast<std::uint32_t>(b[at + 2]) << 16 | static_cast<std::uint32_t>(b[at + 3]) << 24;
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | b[at + 1] << 8);
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::equal(tag, tag + 4, b.begin() + static_cast<std::ptrdiff_t>(at));
}

}  // namespace

Signal decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE"))
    throw ParseError("WAV: missing RIFF/WAVE header", 0);
  const std::size_t riff_end = std::min<std::size_t>(bytes.size(), std::size_t{8} + le32(bytes, 4));

  bool have_fmt = false;
  std::uint32_t sample_rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= riff_end) {
    const std::string tag(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                          bytes.begin() + static_cast<std::ptrdiff_t>(pos + 4));
    const std::size_t size = le32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    if (size > riff_end - body) throw ParseError("WAV: chunk '" + tag + "' overruns the file", pos);

    if (tag == "fmt ") {
      if (size < 16) throw ParseError("WAV: chunk 'fmt ' too short", pos);
      const auto format = le16(bytes, body);
      const auto channels = le16(bytes, body + 2);
      sample_rate = le32(bytes, body + 4);
      const auto bits = le16(bytes, body + 14);
      if (format != 1) throw ParseError("WAV: chunk 'fmt ' declares non-PCM encoding", body);
      if (channels != 1) throw ParseError("WAV: chunk 'fmt ' declares non-mono audio", body + 2);
      if (bits != 16) throw ParseError("WAV: chunk 'fmt ' declares non-16-bit samples", body + 14);
      have_fmt = true;
    } else if (tag == "data") {
      if (!have_fmt) throw ParseError("WAV: chunk 'data' before chunk 'fmt '", pos);
      if (size % 2 != 0) throw ParseError("WAV: chunk 'data' has odd byte count", pos + 4);
      const std::size_t n = size / 2;
      Signal s;
      s.modality = Modality::Audio1D;
      s.shape = {n};
      s.sample_rate = sample_rate;
      s.value_scale = ValueScale{1.0 / 32768.0, 0.0};
      s.coords = grid_coords(s.shape);
      s.values.resize(1, static_cast<Eigen::Index>(n));
      for (std::size_t i = 0; i < n; ++i) {
        const auto raw = static_cast<std::int16_t>(le16(bytes, body + 2 * i));
        s.values(0, static_cast<Eigen::Index>(i)) = s.value_scale.to_value(raw);
      }
      return s;
    }
    pos = body + size + (size & 1u);
  }
  throw ParseError(have_fmt ? "WAV: no 'data' chunk" : "WAV: no 'fmt ' chunk", pos);
}

std::vector<std::uint8_t> encode_wav(const Signal& audio) {
  if (audio.channels() != 1) throw std::invalid_argument("encode_wav: mono only");
  const auto n = static_cast<std::uint32_t>(audio.values.cols());
  const std::uint32_t rate = audio.sample_rate ? audio.sample_rate : 16000;
  std::vector<std::uint8_t> out;
  out.reserve(44 + 2 * n);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, 1);
  put16(out, 1);
  put32(out, rate);
  put32(out, rate * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, 2 * n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double raw = std::nearbyint(audio.values(0, i) * 32768.0);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(raw, -32768.0, 32767.0))));
  }
  return out;
}

Signal load_audio_wav(const std::filesystem::path& path) { return decode_wav(read_file(path)); }

void save_audio_wav(const Signal& audio, const std::filesystem::path& path) {
  write_file(path, encode_wav(audio));
}

// --- Volumes ---------------------------------------------------------------

Signal synth_volume_sphere(std::size_t grid_dim, double radius, VolumeField field) {
  if (grid_dim < 2) throw std::invalid_argument("synth_volume_sphere: grid_dim must be >= 2");
  if (!(radius > 0.0 && radius < 1.0))
    throw std::invalid_argument("synth_volume_sphere: radius must lie in (0, 1)");
  Signal s;
  s.modality = Modality::Volume3D;
  s.shape = {grid_dim, grid_dim, grid_dim};
  s.coords = grid_coords(s.shape);
  const SphereSdf sdf{radius};
  s.values.resize(1, s.coords.cols());
  for (Eigen::Index i = 0; i < s.coords.cols(); ++i) {
    const double d = sdf(s.coords.col(i));
    s.values(0, i) = field == VolumeField::Sdf ? d : (d <= 0.0 ? 1.0 : 0.0);
  }
  return s;
}

namespace {

Eigen::Vector3d random_unit(Rng& rng) {
  Eigen::Vector3d v;
  do {
    v = {rng.normal(), rng.normal(), rng.normal()};
  } while (v.norm() < 1e-12);
  return v.normalized();
}

}  // namespace

SurfaceSamples sample_surface_points(const SphereSdf& sdf, std::size_t n_coarse, std::size_t n_fine,
                                     Rng& rng, double coarse_variance, double fine_variance) {
  if (coarse_variance < 0.0 || fine_variance < 0.0)
    throw std::invalid_argument("sample_surface_points: variances must be non-negative");
  const std::size_t n = n_coarse + n_fine;
  SurfaceSamples out;
  out.coords.resize(3, static_cast<Eigen::Index>(n));
  out.targets.resize(1, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double variance = i < n_coarse ? coarse_variance : fine_variance;
    const double scale = std::sqrt(variance / 2.0);
    Eigen::Vector3d p = sdf.radius * random_unit(rng);
    for (int a = 0; a < 3; ++a) p(a) = std::clamp(p(a) + rng.laplace(scale), -1.0, 1.0);
    out.coords.col(static_cast<Eigen::Index>(i)) = p;
    out.targets(0, static_cast<Eigen::Index>(i)) = sdf(p);
  }
  return out;
}

SurfaceSamples sample_volume_points(const SphereSdf& sdf, std::size_t n, Rng& rng) {
  SurfaceSamples out;
  out.coords.resize(3, static_cast<Eigen::Index>(n));
  out.targets.resize(1, static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector3d p{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    out.coords.col(static_cast<Eigen::Index>(i)) = p;
    out.targets(0, static_cast<Eigen::Index>(i)) = sdf(p);
  }
  return out;
}

void save_occupancy_raw(std::span<const std::uint8_t> voxels, std::span<const std::size_t> dims,
                        const std::filesystem::path& path) {
  const std::size_t n = std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  if (n != voxels.size()) throw std::invalid_argument("save_occupancy_raw: dims do not match voxel count");
  write_file(path, voxels);
  const nlohmann::json sidecar{{"dims", std::vector<std::size_t>(dims.begin(), dims.end())}};
  const std::string text = sidecar.dump() + "\n";
  write_file(std::filesystem::path(path.string() + ".json"),
             std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<std::uint8_t> load_occupancy_raw(const std::filesystem::path& path,
                                             std::vector<std::size_t>& dims) {
  const auto side = read_file(std::filesystem::path(path.string() + ".json"));
  dims = nlohmann::json::parse(side.begin(), side.end()).at("dims").get<std::vector<std::size_t>>();
  auto voxels = read_file(path);
  const std::size_t n = std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
  if (voxels.size() != n) throw ParseError("occupancy: byte count does not match sidecar dims", voxels.size());
  return voxels;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace inrteach
