// segstat: evaluate, compare, fuse and render two models' segmentation outputs.
//
// Exit codes: 0 success, 1 input or validation error, 2 internal invariant violation.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "segstat/segstat.hpp"

namespace {

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> split_index;
  std::optional<std::size_t> jobs;
  std::optional<std::string> output;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool needs_config = true) {
  auto* config = cmd->add_option("--config", flags.config, "pipeline configuration (INI)");
  if (needs_config) config->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", flags.seed, "override split.seed");
  cmd->add_option("--split-index", flags.split_index, "split to deplete or evaluate (1-based)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--jobs", flags.jobs, "worker threads (default: $SEGSTAT_JOBS, else hardware concurrency)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--output", flags.output, "override output.dir");
}

std::size_t resolve_jobs(const CommonFlags& flags) {
  if (flags.jobs) return *flags.jobs;
  if (const char* env = std::getenv("SEGSTAT_JOBS")) {
    try {
      const auto jobs = std::stoul(env);
      if (jobs > 0) return jobs;
    } catch (const std::exception&) {
    }
    throw segstat::InputError(std::string("SEGSTAT_JOBS must be a positive integer, got ") + env);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

segstat::PipelineConfig load(const CommonFlags& flags) {
  auto config = segstat::load_config(flags.config);
  if (flags.seed) config.seed = *flags.seed;
  if (flags.output) config.output_dir = std::filesystem::absolute(*flags.output).lexically_normal();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segstat: statistical comparison and fusion of binary segmentation outputs"};
  app.require_subcommand(1);
  CommonFlags flags;

  auto* split = app.add_subcommand("split", "seeded train/test splits and class report");
  auto* deplete = app.add_subcommand("deplete", "deplete a split's training side along the schedule");
  auto* evaluate = app.add_subcommand("evaluate", "per-image metrics from replicate outputs");
  auto* compare = app.add_subcommand("compare", "significance tests and comparison tables");
  auto* fuse = app.add_subcommand("fuse", "union/intersection fusion of the two models");
  auto* render = app.add_subcommand("render", "overlays, averaged heatmaps and plot data");
  auto* colormap = app.add_subcommand("colormap", "print the heatmap colormap table as CSV");
  for (auto* cmd : {split, deplete, evaluate, compare, fuse, render}) add_common(cmd, flags);

  std::vector<std::string> regimes;
  compare->add_option("--regime", regimes, "LABEL=METRICS_CSV for the data-regime table (repeatable)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (colormap->parsed()) {
      std::cout << segstat::colormap_csv();
      return 0;
    }
    const auto config = load(flags);
    segstat::pipeline::RunOptions options;
    options.jobs = resolve_jobs(flags);
    options.split_index = flags.split_index;
    for (const auto& r : regimes) {
      const auto eq = r.find('=');
      if (eq == std::string::npos || eq == 0) throw segstat::InputError("--regime expects LABEL=PATH, got " + r);
      options.regimes.emplace_back(r.substr(0, eq), std::filesystem::absolute(r.substr(eq + 1)));
    }

    if (split->parsed()) {
      const auto splits = segstat::pipeline::cmd_split(config);
      std::cout << "wrote " << splits.size() << " split manifests to " << (config.output_dir / "splits").string() << "\n";
    } else if (deplete->parsed()) {
      const auto stages = segstat::pipeline::cmd_deplete(config, flags.split_index.value_or(1));
      std::cout << "wrote " << stages.size() << " depleted manifests\n";
    } else if (evaluate->parsed()) {
      segstat::pipeline::cmd_evaluate(config, options);
      std::cout << "wrote " << (config.output_dir / "metrics.csv").string() << "\n";
    } else if (compare->parsed()) {
      segstat::pipeline::cmd_compare(config, options);
      std::cout << "wrote " << (config.output_dir / "comparison.csv").string() << "\n";
    } else if (fuse->parsed()) {
      segstat::pipeline::cmd_fuse(config, options);
      std::cout << "wrote " << (config.output_dir / "fusion.csv").string() << "\n";
    } else if (render->parsed()) {
      segstat::pipeline::cmd_render(config, options);
      std::cout << "wrote renderings under " << config.output_dir.string() << "\n";
    }
  } catch (const segstat::InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
