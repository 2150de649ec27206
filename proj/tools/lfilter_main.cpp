// Command-line front end: run experiments from config files or presets,
// emit preset configs, and validate configs without running them.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>

#include "lfilter/experiment.hpp"

namespace {

void apply_overrides(lfilter::ExperimentConfig& cfg, const std::optional<std::string>& out,
                     const std::optional<int>& threads, const std::optional<unsigned>& seed) {
  if (out) cfg.out_path = *out;
  if (threads) cfg.threads = *threads;
  if (seed) cfg.seed = *seed;
}

void print_config_errors(const lfilter::ConfigError& e) {
  std::cerr << "invalid configuration:\n";
  for (const auto& issue : e.issues) std::cerr << "  - " << issue << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lorentzian-filter state preparation toolkit"};
  app.require_subcommand(1);

  std::optional<std::string> config_path, preset_name, out_path;
  std::optional<int> threads;
  std::optional<unsigned> seed;

  auto* run = app.add_subcommand("run", "run an experiment sweep");
  run->add_option("--config", config_path, "config file (flat key-value grammar)");
  run->add_option("--preset", preset_name, "named preset: fig2 fig3 fig4 fig5 fig6 fig8");
  run->add_option("--out", out_path, "override output CSV path");
  run->add_option("--threads", threads, "worker pool size");
  run->add_option("--seed", seed, "seed for randomized solver starts");

  std::string preset_arg;
  auto* preset_cmd = app.add_subcommand("preset", "print a preset config to stdout");
  preset_cmd->add_option("name", preset_arg, "preset name")->required();

  std::string validate_path;
  auto* validate_cmd = app.add_subcommand("validate", "parse and validate a config file");
  validate_cmd->add_option("--config", validate_path, "config file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (preset_cmd->parsed()) {
      std::cout << lfilter::config_text(lfilter::preset(preset_arg));
      return 0;
    }
    if (validate_cmd->parsed()) {
      lfilter::load_config(validate_path);
      std::cout << "ok\n";
      return 0;
    }
    // run
    lfilter::ExperimentConfig cfg;
    if (config_path && preset_name) {
      std::cerr << "specify either --config or --preset, not both\n";
      return 2;
    }
    if (config_path) {
      cfg = lfilter::load_config(*config_path);
    } else if (preset_name) {
      cfg = lfilter::preset(*preset_name);
    } else {
      std::cerr << "run requires --config or --preset\n";
      return 2;
    }
    apply_overrides(cfg, out_path, threads, seed);
    const auto res = lfilter::run_experiment(cfg, std::cout);
    return res.exit_code;
  } catch (const lfilter::ConfigError& e) {
    print_config_errors(e);
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
