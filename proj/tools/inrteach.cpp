#include <malloc.h>

#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "inrteach/verify.hpp"
#include "run.hpp"

namespace fs = std::filesystem;
using inrteach::cli::RunConfig;

namespace {

struct Strategy {
  std::string name;
  bool full_batch = false;
  std::string ratio;
  std::string interval;
};

// "full", "<ratio>|<interval>" or "<name>=<ratio>|<interval>".
Strategy parse_strategy(const std::string& text, std::size_t index) {
  Strategy s;
  std::string body = text;
  if (const auto eq = text.find('='); eq != std::string::npos) {
    s.name = text.substr(0, eq);
    body = text.substr(eq + 1);
  }
  if (body == "full") {
    s.full_batch = true;
    if (s.name.empty()) s.name = "full";
  } else {
    const auto bar = body.find('|');
    if (bar == std::string::npos)
      throw std::invalid_argument("strategy '" + text + "' must be 'full' or '<ratio>|<interval>'");
    s.ratio = body.substr(0, bar);
    s.interval = body.substr(bar + 1);
    inrteach::parse_ratio(s.ratio);
    inrteach::parse_interval(s.interval);
  }
  if (s.name.empty()) s.name = "s" + std::to_string(index);
  for (char c : s.name)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
      throw std::invalid_argument("strategy name '" + s.name + "' may only use letters, digits, '-' and '_'");
  return s;
}

void add_run_options(CLI::App& app, RunConfig& c, std::string& int_flag, std::string& out) {
  app.add_option("--input", c.input, "Signal file (.pgm, .ppm, .wav)");
  app.add_option("--synthetic", c.synthetic, "Synthetic signal when no input is given")
      ->check(CLI::IsMember({"sine", "sphere"}))
      ->capture_default_str();
  app.add_option("--sine-points", c.sine_points, "Points of the synthetic sine")->capture_default_str();
  app.add_option("--volume-grid", c.volume_grid, "Grid size of the synthetic sphere")->capture_default_str();
  app.add_option("--sphere-radius", c.sphere_radius, "Radius of the synthetic sphere")->capture_default_str();
  app.add_option("--arch", c.arch, "Network type")->check(CLI::IsMember({"siren", "ffn"}))->capture_default_str();
  app.add_option("--width", c.width, "Hidden width")->capture_default_str();
  app.add_option("--depth", c.depth, "Number of linear layers")->capture_default_str();
  app.add_option("--omega0", c.omega0, "Sine frequency factor")->capture_default_str();
  app.add_option("--features", c.features, "Fourier features (ffn)")->capture_default_str();
  app.add_option("--sigma", c.sigma, "Fourier feature scale (ffn)")->capture_default_str();
  app.add_option("--precision", c.precision, "Scalar type")
      ->check(CLI::IsMember({"float", "double"}))
      ->capture_default_str();
  app.add_option("--optimizer", c.optimizer, "Optimizer")->check(CLI::IsMember({"adam", "sgd"}))->capture_default_str();
  app.add_option("--lr", c.lr, "Learning rate")->capture_default_str();
  app.add_option("--lr-schedule", c.lr_schedule, "Learning-rate schedule")
      ->check(CLI::IsMember({"cosine", "constant"}))
      ->capture_default_str();
  app.add_option("--lr-min", c.lr_min, "Final learning rate of the cosine schedule")->capture_default_str();
  app.add_option("--steps", c.steps, "Optimizer steps")->capture_default_str();
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app.add_option("--eps", c.eps, "Stop when the residual norm falls below this")->capture_default_str();
  app.add_option("--int", int_flag, "Greedy example selection on or off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  app.add_option("--ratio", c.ratio, "Ratio schedule: r | constant:r | step:r0,dr,S | cosine:a,b | rcosine:a,b")
      ->capture_default_str();
  app.add_option("--interval", c.interval, "Interval schedule: dense | inc:a,b,S | dec:a,b,S")->capture_default_str();
  app.add_option("--minibatch", c.minibatch, "Minibatch size (0: whole signal)")->capture_default_str();
  app.add_option("--rule", c.rule, "Selection rule")->check(CLI::IsMember({"greedy", "uniform"}))->capture_default_str();
  app.add_flag("--masks", c.masks, "Write mask_<step>.pgm at every refresh (images)");
  app.add_option("--out", out, "Output directory")->capture_default_str();
}

int run_fit(RunConfig config, const fs::path& out) {
  nlohmann::json echo;
  std::vector<std::string> outputs;
  try {
    config.validate();
    echo = config;
    const auto signal = inrteach::cli::load_signal(config);
    const auto outcome = inrteach::cli::fit_signal(config, signal, out);
    outputs = outcome.outputs;
    outputs.push_back("manifest.json");
    inrteach::cli::write_manifest(out, echo, config.input, "complete", outputs);
    std::cout << std::fixed << std::setprecision(3) << "psnr_db " << outcome.metrics.psnr_db;
    if (outcome.metrics.ssim) std::cout << " ssim " << *outcome.metrics.ssim;
    if (outcome.metrics.iou) std::cout << " iou " << *outcome.metrics.iou;
    std::cout << " wall_ms " << outcome.log.wall_ms << " example_gradients " << outcome.log.example_gradients
              << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "inrteach fit: " << e.what() << '\n';
    if (!echo.is_null()) {
      try {
        inrteach::cli::write_manifest(out, echo, config.input, "failed", outputs, e.what());
      } catch (const std::exception&) {
      }
    }
    return 1;
  }
}

int run_compare(const RunConfig& base, const std::vector<std::string>& specs, const fs::path& out) {
  std::vector<std::string> outputs;
  nlohmann::json echo;
  try {
    base.validate();
    echo = base;
    if (specs.size() < 2) throw std::invalid_argument("compare needs at least two --strategy values");
    std::vector<Strategy> strategies;
    for (std::size_t i = 0; i < specs.size(); ++i) strategies.push_back(parse_strategy(specs[i], i));
    for (std::size_t i = 0; i < strategies.size(); ++i)
      for (std::size_t j = 0; j < i; ++j)
        if (strategies[i].name == strategies[j].name)
          throw std::invalid_argument("duplicate strategy name '" + strategies[i].name + "'");
    echo["strategies"] = specs;

    const auto signal = inrteach::cli::load_signal(base);
    std::ostringstream table;
    table << "strategy,ratio,interval,psnr_db,ssim,iou,wall_ms,example_gradients,example_inferences,optimizer_steps\n"
          << std::setprecision(10);
    for (const auto& s : strategies) {
      RunConfig config = base;
      config.int_enabled = !s.full_batch;
      if (!s.full_batch) {
        config.ratio = s.ratio;
        config.interval = s.interval;
      }
      const auto outcome = inrteach::cli::fit_signal(config, signal, out / s.name);
      for (const auto& file : outcome.outputs) outputs.push_back(s.name + "/" + file);
      const auto& m = outcome.metrics;
      table << s.name << ",\"" << (s.full_batch ? "full" : s.ratio) << "\",\""
            << (s.full_batch ? "full" : s.interval) << "\"," << m.psnr_db << ',' << (m.ssim ? std::to_string(*m.ssim) : "") << ','
            << (m.iou ? std::to_string(*m.iou) : "") << ',' << outcome.log.wall_ms << ','
            << outcome.log.example_gradients << ',' << outcome.log.example_inferences << ','
            << outcome.log.optimizer_steps << '\n';
      std::cout << s.name << " psnr_db " << m.psnr_db << " wall_ms " << outcome.log.wall_ms
                << " example_gradients " << outcome.log.example_gradients << '\n';
    }
    std::ofstream csv(out / "compare.csv", std::ios::binary);
    csv << table.str();
    if (!csv) throw std::runtime_error("cannot write compare.csv");
    outputs.push_back("compare.csv");
    outputs.push_back("manifest.json");
    inrteach::cli::write_manifest(out, echo, base.input, "complete", outputs);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "inrteach compare: " << e.what() << '\n';
    if (!echo.is_null()) {
      try {
        inrteach::cli::write_manifest(out, echo, base.input, "failed", outputs, e.what());
      } catch (const std::exception&) {
      }
    }
    return 1;
  }
}

int run_verify(const std::vector<std::string>& names, std::uint64_t seed) {
  std::vector<inrteach::Suite> suites;
  if (names.empty()) suites = inrteach::all_suites();
  for (const auto& name : names) {
    const auto suite = inrteach::parse_suite(name);
    if (!suite) {
      std::cerr << "inrteach verify: unknown suite '" << name << "'\n";
      return 2;
    }
    suites.push_back(*suite);
  }
  bool all_passed = true;
  for (const auto suite : suites) {
    for (const auto& result : inrteach::run_suite(suite, seed)) {
      all_passed = all_passed && result.passed;
      std::cout << (result.passed ? "PASS " : "FAIL ") << inrteach::to_string(suite) << ": " << result.name;
      if (!result.detail.empty()) std::cout << " (" << result.detail << ')';
      std::cout << '\n';
    }
  }
  return all_passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
  CLI::App app{"Fit signals with coordinate networks using greedy example selection"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML file with option values; flags override it");

  RunConfig config;
  std::string int_flag = "on";
  std::string out = "run";
  add_run_options(app, config, int_flag, out);

  auto* fit = app.add_subcommand("fit", "Fit one signal");
  fit->fallthrough();
  auto* compare = app.add_subcommand("compare", "Fit one signal with several strategies");
  compare->fallthrough();
  std::vector<std::string> strategies;
  compare->add_option("--strategy", strategies, "full | <ratio>|<interval> | <name>=<ratio>|<interval>")
      ->take_all();
  auto* verify = app.add_subcommand("verify", "Run property suites");
  verify->fallthrough();
  std::vector<std::string> suites;
  std::string suite_help = "Suites to run (default all):";
  for (auto s : inrteach::all_suites()) suite_help += std::string(" ") + inrteach::to_string(s);
  verify->add_option("suites", suites, suite_help);

  CLI11_PARSE(app, argc, argv);
  config.int_enabled = int_flag == "on";

  if (*fit) return run_fit(config, out);
  if (*compare) return run_compare(config, strategies, out);
  return run_verify(suites, config.seed);
}
