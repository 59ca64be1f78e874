// Experiment driver. One process runs one experiment: load a JSON config,
// dispatch, write tables plus report.json into --out.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cdlab/cli/experiments.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed_override;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON experiment config")->required();
  cmd->add_option("--out", args.out_dir, "output directory for tables and report.json");
  cmd->add_option("--seed", args.seed_override, "override the config's seed");
}

int run(const std::string& kind, const CommonArgs& args) {
  cdlab::cli::ExperimentConfig cfg;
  try {
    cfg = cdlab::cli::load_config(args.config_path);
    if (cfg.kind != kind)
      throw cdlab::cli::config_error(
          {"config kind '" + cfg.kind + "' does not match subcommand '" + kind + "'"});
    if (args.seed_override) cfg.seed = *args.seed_override;
  } catch (const cdlab::cli::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  try {
    const auto report = cdlab::cli::run_experiment(cfg, args.out_dir);
    std::cout << "wrote " << (std::filesystem::path(args.out_dir) / "report.json").string()
              << " (" << report.at("wall_seconds").get<double>() << " s)\n";
    return 0;
  } catch (const cdlab::cli::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error [" << kind << "]: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contrastive-guided diffusion lab"};
  app.require_subcommand(1);

  const char* kinds[] = {"simulate-gaussian", "train-diffusion", "sample",
                         "guided-sample",     "select",          "evaluate"};
  const char* descs[] = {
      "Gaussian-mixture self-training simulation",
      "train a denoising diffusion model on the 2D benchmark",
      "DDPM/DDIM sampling from a checkpoint",
      "contrastive-guided sampling from a checkpoint",
      "apply a selection criterion to a sample table",
      "summary statistics of a sample table"};

  CommonArgs args[6];
  for (int i = 0; i < 6; ++i) add_common(app.add_subcommand(kinds[i], descs[i]), args[i]);

  CLI11_PARSE(app, argc, argv);

  for (int i = 0; i < 6; ++i)
    if (app.get_subcommand(kinds[i])->parsed()) return run(kinds[i], args[i]);
  return 2;
}
