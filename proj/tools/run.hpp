#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "inrteach/metrics.hpp"
#include "inrteach/nn.hpp"
#include "inrteach/signals.hpp"
#include "inrteach/teaching.hpp"

namespace inrteach::cli {

/// Everything one fit needs. Strings hold the same text forms the flags take.
struct RunConfig {
  std::string input;                 // .pgm, .ppm or .wav; empty selects `synthetic`
  std::string synthetic = "sine";    // sine | sphere
  std::size_t sine_points = 100;
  std::size_t volume_grid = 32;
  double sphere_radius = 0.5;

  std::string arch = "siren";        // siren | ffn
  std::size_t width = 128;
  std::size_t depth = 5;
  double omega0 = 30.0;
  std::size_t features = 128;
  double sigma = 2.0;
  std::string precision = "float";   // float | double

  std::string optimizer = "adam";    // adam | sgd
  double lr = 1e-3;
  std::string lr_schedule = "cosine";  // cosine | constant
  double lr_min = 0.0;

  std::size_t steps = 5000;
  std::uint64_t seed = 0;
  double eps = 0.0;
  bool int_enabled = true;
  std::string ratio = "step:0.2,0.08,10";
  std::string interval = "inc:1,90,10";
  std::size_t minibatch = 0;         // 0: whole teaching set
  std::string rule = "greedy";       // greedy | uniform
  bool masks = false;

  /// Throws std::invalid_argument naming the first bad field.
  void validate() const;
  MlpArch mlp_arch(std::size_t in_dim, std::size_t out_dim) const;
  OptimConfig optim_config() const;
  IntConfig int_config() const;
};

void to_json(nlohmann::json& j, const RunConfig& config);

struct RunOutcome {
  RunLog log;
  MetricReport metrics;
  std::vector<std::string> outputs;  // file names written, relative to the run directory
};

/// Loads or synthesizes the configured signal.
Signal load_signal(const RunConfig& config);

/// Trains on `signal` and writes run.csv, metrics.json, weights.inrw, the
/// reconstruction and (if asked) selection masks into `dir`.
RunOutcome fit_signal(const RunConfig& config, const Signal& signal, const std::filesystem::path& dir);

/// Git blob id (SHA-1 of "blob <size>\0" + bytes) as lowercase hex.
std::string blob_hash(const std::vector<std::uint8_t>& bytes);

/// Writes manifest.json: config echo, input hash, outputs and status.
void write_manifest(const std::filesystem::path& dir, const nlohmann::json& config, const std::string& input,
                    const std::string& status, const std::vector<std::string>& outputs,
                    const std::string& error = {});

}  // namespace inrteach::cli
