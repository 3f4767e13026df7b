#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

#include "inrteach/metrics.hpp"
#include "inrteach/rng.hpp"
#include "inrteach/signals.hpp"

using namespace inrteach;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

std::vector<std::uint8_t> pgm(std::size_t w, std::size_t h, const std::vector<std::uint8_t>& pixels) {
  auto out = bytes_of("P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n");
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::size_t parse_offset(const std::vector<std::uint8_t>& bytes, bool wav) {
  try {
    if (wav)
      decode_wav(bytes);
    else
      decode_pnm(bytes);
  } catch (const ParseError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected a parse error";
  return 0;
}

std::vector<std::uint8_t> wav_with(std::uint16_t format, std::uint16_t channels, std::uint16_t bits,
                                   const std::vector<std::int16_t>& samples) {
  Signal s;
  s.values = MatrixXd::Zero(1, static_cast<Eigen::Index>(samples.size()));
  auto out = encode_wav(s);
  out[20] = static_cast<std::uint8_t>(format);
  out[22] = static_cast<std::uint8_t>(channels);
  out[34] = static_cast<std::uint8_t>(bits);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto u = static_cast<std::uint16_t>(samples[i]);
    out[44 + 2 * i] = static_cast<std::uint8_t>(u & 0xff);
    out[45 + 2 * i] = static_cast<std::uint8_t>(u >> 8);
  }
  return out;
}

}  // namespace

TEST(GridCoords, PixelCenters) {
  const std::vector<std::size_t> one{1, 1};
  const MatrixXd c1 = grid_coords(one);
  EXPECT_EQ(c1.cols(), 1);
  EXPECT_DOUBLE_EQ(c1(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(c1(1, 0), 0.0);

  const std::vector<std::size_t> shape{2, 4};
  const MatrixXd c = grid_coords(shape);
  ASSERT_EQ(c.cols(), 8);
  EXPECT_DOUBLE_EQ(c(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(c(1, 0), -0.75);
  EXPECT_DOUBLE_EQ(c(1, 1), -0.25);  // last axis fastest
  EXPECT_DOUBLE_EQ(c(0, 4), 0.5);
  EXPECT_DOUBLE_EQ(c(1, 7), 0.75);
  EXPECT_LE(c.cwiseAbs().maxCoeff(), 1.0);
}

TEST(SynthSine, EndpointsAndCenter) {
  const Signal s = synth_sine(101, -std::numbers::pi, std::numbers::pi);
  EXPECT_EQ(s.size(), 101u);
  EXPECT_DOUBLE_EQ(s.coords(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.coords(0, 100), 1.0);
  EXPECT_NEAR(s.values(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(s.values(0, 100), 0.0, 1e-12);
  EXPECT_NEAR(s.coords(0, 50), 0.0, 1e-15);
  EXPECT_NEAR(s.values(0, 50), 0.0, 1e-15);
  EXPECT_NEAR(s.values(0, 25), -1.0, 1e-12);
  const Signal hundred = synth_sine(100, -std::numbers::pi, std::numbers::pi);
  EXPECT_NEAR(hundred.values(0, 99), 0.0, 1e-12);
  EXPECT_THROW(synth_sine(1, 0.0, 1.0), std::invalid_argument);
  EXPECT_THROW(synth_sine(10, 1.0, 1.0), std::invalid_argument);
}

TEST(Pnm, TwoByTwoAffineMap) {
  const Signal s = decode_pnm(pgm(2, 2, {0, 255, 128, 64}));
  EXPECT_EQ(s.modality, Modality::Image2D);
  EXPECT_EQ(s.shape, (std::vector<std::size_t>{2, 2}));
  EXPECT_DOUBLE_EQ(s.values(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.values(0, 1), 1.0);
  EXPECT_NEAR(s.values(0, 2), 2.0 * 128.0 / 255.0 - 1.0, 1e-15);
  EXPECT_NEAR(s.values(0, 2), 0.00392, 1e-5);
  EXPECT_NEAR(s.values(0, 3), -0.498, 1e-3);
  EXPECT_DOUBLE_EQ(s.coords(0, 0), -0.5);
  EXPECT_DOUBLE_EQ(s.coords(1, 1), 0.5);
}

TEST(Pnm, OneByOneIsCentred) {
  const Signal s = decode_pnm(pgm(1, 1, {7}));
  EXPECT_DOUBLE_EQ(s.coords(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(s.coords(1, 0), 0.0);
}

TEST(Pnm, CommentsAndRoundTrip) {
  auto commented = bytes_of("P5 # hi\n3 # width\n1\n255\n");
  commented.insert(commented.end(), {1, 2, 3});
  const Signal s = decode_pnm(commented);
  EXPECT_EQ(encode_pnm(s), pgm(3, 1, {1, 2, 3}));

  Rng rng(1);
  std::vector<std::uint8_t> pixels(5 * 4 * 3);
  for (auto& p : pixels) p = static_cast<std::uint8_t>(rng.index(256));
  auto ppm = bytes_of("P6\n5 4\n255\n");
  ppm.insert(ppm.end(), pixels.begin(), pixels.end());
  const Signal color = decode_pnm(ppm);
  EXPECT_EQ(color.channels(), 3u);
  EXPECT_EQ(encode_pnm(color), ppm);
}

TEST(Pnm, BundledImageRoundTripsBitExactly) {
  const auto bytes = read_file(std::filesystem::path(INRTEACH_TEST_DATA) / "cameraman64.pgm");
  const Signal s = decode_pnm(bytes);
  EXPECT_EQ(s.shape, (std::vector<std::size_t>{64, 64}));
  EXPECT_EQ(encode_pnm(s), bytes);
}

TEST(Pnm, QuantizationInvertsDecoding) {
  for (int v = 0; v < 256; ++v) EXPECT_EQ(quantize_pixel(2.0 * v / 255.0 - 1.0), v);
  EXPECT_EQ(quantize_pixel(0.0), 128);  // raw 127.5
  EXPECT_EQ(quantize_pixel(0.004), 128);
  EXPECT_EQ(quantize_pixel(5.0), 255);
  EXPECT_EQ(quantize_pixel(-5.0), 0);
}

TEST(Pnm, ErrorsCarryByteOffsets) {
  EXPECT_EQ(parse_offset(bytes_of("P3\n1 1\n255\n0"), false), 0u);
  EXPECT_EQ(parse_offset(bytes_of("P5\n1 1\n65535\n00"), false), 7u);
  EXPECT_EQ(parse_offset(bytes_of("P5\nx 1\n255\n0"), false), 3u);
  EXPECT_EQ(parse_offset(pgm(2, 2, {1, 2, 3}), false), 14u);
  EXPECT_EQ(parse_offset(pgm(1, 1, {1, 2}), false), 12u);
  EXPECT_EQ(parse_offset(bytes_of("P5\n0 1\n255\n"), false), 2u);
}

TEST(Pnm, RandomBytesNeverCrash) {
  Rng rng(2);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<std::uint8_t> junk(rng.index(40));
    for (auto& b : junk) b = static_cast<std::uint8_t>(rng.index(256));
    if (trial % 2 == 0 && junk.size() >= 2) {
      junk[0] = 'P';
      junk[1] = '5';
    }
    try {
      const Signal s = decode_pnm(junk);
      EXPECT_EQ(static_cast<std::size_t>(s.values.cols()), s.shape[0] * s.shape[1]);
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), junk.size());
    }
  }
}

TEST(Wav, ScalingOfExtremes) {
  const Signal s = decode_wav(wav_with(1, 1, 16, {-32768, 32767, 0, 16384}));
  EXPECT_EQ(s.modality, Modality::Audio1D);
  EXPECT_DOUBLE_EQ(s.values(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(s.values(0, 1), 32767.0 / 32768.0);
  EXPECT_DOUBLE_EQ(s.values(0, 2), 0.0);
  EXPECT_DOUBLE_EQ(s.values(0, 3), 0.5);
  EXPECT_EQ(s.sample_rate, 16000u);
  EXPECT_DOUBLE_EQ(s.coords(0, 0), -0.75);
}

TEST(Wav, AllZeroSamples) {
  const Signal s = decode_wav(wav_with(1, 1, 16, {0, 0, 0}));
  EXPECT_EQ(s.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Wav, RoundTripWithinOneLsb) {
  Signal s;
  s.modality = Modality::Audio1D;
  s.sample_rate = 8000;
  s.values.resize(1, 500);
  Rng rng(3);
  for (auto& v : s.values.reshaped()) v = rng.uniform(-1.0, 1.0);
  const Signal back = decode_wav(encode_wav(s));
  EXPECT_EQ(back.sample_rate, 8000u);
  EXPECT_LE((back.values - s.values).cwiseAbs().maxCoeff(), 1.0 / 32768.0);
  EXPECT_EQ(encode_wav(back), encode_wav(s));
}

TEST(Wav, UnsupportedEncodingNamesChunk) {
  for (const auto& bytes : {wav_with(3, 1, 16, {0}), wav_with(1, 2, 16, {0}), wav_with(1, 1, 8, {0})}) {
    try {
      decode_wav(bytes);
      ADD_FAILURE() << "expected a parse error";
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find("'fmt '"), std::string::npos) << e.what();
    }
  }
  EXPECT_EQ(parse_offset(bytes_of("RIFX"), true), 0u);
  auto truncated = wav_with(1, 1, 16, {1, 2, 3});
  truncated.resize(truncated.size() - 2);
  EXPECT_EQ(parse_offset(truncated, true), 36u);
}

TEST(Wav, RandomBytesNeverCrash) {
  Rng rng(4);
  const auto good = wav_with(1, 1, 16, {1, 2, 3, 4});
  for (int trial = 0; trial < 2000; ++trial) {
    auto bytes = good;
    const std::size_t flips = 1 + rng.index(4);
    for (std::size_t f = 0; f < flips; ++f) bytes[rng.index(bytes.size())] = static_cast<std::uint8_t>(rng.index(256));
    bytes.resize(rng.index(bytes.size() + 1));
    try {
      decode_wav(bytes);
    } catch (const ParseError& e) {
      EXPECT_LE(e.offset(), bytes.size());
    }
  }
}

TEST(Volume, SphereOccupancyAndSdf) {
  const Signal occ = synth_volume_sphere(64, 0.5, VolumeField::Occupancy);
  EXPECT_EQ(occ.size(), 64u * 64u * 64u);
  const double fraction = occ.values.sum() / static_cast<double>(occ.size());
  const double expected = 4.0 / 3.0 * std::numbers::pi * 0.125 / 8.0;
  EXPECT_NEAR(fraction, expected, 0.05 * expected);

  const Signal odd = synth_volume_sphere(5, 0.3, VolumeField::Occupancy);
  EXPECT_EQ(odd.values(0, 62), 1.0);  // centre voxel (2, 2, 2)

  const Signal sdf = synth_volume_sphere(5, 0.3, VolumeField::Sdf);
  EXPECT_DOUBLE_EQ(sdf.values(0, 62), -0.3);
  EXPECT_DOUBLE_EQ(SphereSdf{0.3}(VectorXd::Zero(3)), -0.3);
  EXPECT_THROW(synth_volume_sphere(1, 0.5, VolumeField::Sdf), std::invalid_argument);
  EXPECT_THROW(synth_volume_sphere(8, 1.0, VolumeField::Sdf), std::invalid_argument);
}

TEST(SurfaceSamples, ZeroVarianceLiesOnSurface) {
  Rng rng(5);
  const auto s = sample_surface_points(SphereSdf{0.5}, 50, 50, rng, 0.0, 0.0);
  EXPECT_LE(s.targets.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(SurfaceSamples, CoarseFartherThanFine) {
  Rng rng(6);
  const auto s = sample_surface_points(SphereSdf{0.5}, 10000, 10000, rng);
  const double coarse = s.targets.leftCols(10000).cwiseAbs().mean();
  const double fine = s.targets.rightCols(10000).cwiseAbs().mean();
  EXPECT_GT(coarse, 3.0 * fine);
  EXPECT_LE(s.coords.cwiseAbs().maxCoeff(), 1.0);
}

TEST(SurfaceSamples, DeterministicUnderSeed) {
  Rng a(7), b(7);
  const auto x = sample_surface_points(SphereSdf{0.4}, 20, 20, a);
  const auto y = sample_surface_points(SphereSdf{0.4}, 20, 20, b);
  EXPECT_EQ(x.coords, y.coords);
  EXPECT_EQ(x.targets, y.targets);
  Rng c(8);
  const auto v = sample_volume_points(SphereSdf{0.4}, 100, c);
  for (Eigen::Index i = 0; i < 100; ++i) EXPECT_DOUBLE_EQ(v.targets(0, i), v.coords.col(i).norm() - 0.4);
}

TEST(OccupancyRaw, RoundTripWithSidecar) {
  const auto path = std::filesystem::temp_directory_path() / "inrteach_test_occ.raw";
  const std::vector<std::uint8_t> voxels{0, 1, 1, 0, 1, 0, 0, 1};
  const std::vector<std::size_t> dims{2, 2, 2};
  save_occupancy_raw(voxels, dims, path);
  std::vector<std::size_t> back_dims;
  EXPECT_EQ(load_occupancy_raw(path, back_dims), voxels);
  EXPECT_EQ(back_dims, dims);
  const std::vector<std::size_t> wrong{3, 3, 3};
  EXPECT_THROW(save_occupancy_raw(voxels, wrong, path), std::invalid_argument);
  std::filesystem::remove(path);
  std::filesystem::remove(path.string() + ".json");
}

TEST(Files, MissingFileThrows) {
  EXPECT_THROW(read_file("/nonexistent/inrteach/file"), std::runtime_error);
  EXPECT_THROW(load_image("/nonexistent/inrteach/file.pgm"), std::runtime_error);
}
