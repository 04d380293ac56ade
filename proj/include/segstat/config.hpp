#pragma once

// Pipeline configuration: an INI file with [dataset], [models], [split],
// [metrics], [stats], [fusion] and [output] sections. docs/formats.md lists every
// key. Relative paths resolve against the config file's directory.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "segstat/ensemble.hpp"
#include "segstat/error.hpp"
#include "segstat/metrics.hpp"
#include "segstat/splits.hpp"
#include "segstat/stats.hpp"

namespace segstat {

enum class AurocSource { probability, mask };

struct PipelineConfig {
  std::filesystem::path base_dir;

  std::string dataset_name = "dataset";
  std::filesystem::path manifest;
  std::filesystem::path predictions;
  std::filesystem::path probabilities;
  std::optional<std::filesystem::path> heatmaps;

  std::string model_a = "T_II";
  std::string model_b = "L_MI";
  std::size_t runs = kDefaultRunCount;

  std::uint64_t seed = 42;
  int split_count = 5;
  SplitRatio ratio{80, 20};
  bool stratified = false;
  std::vector<SplitRatio> schedule = default_depletion_schedule();

  AurocSource auroc_source = AurocSource::probability;
  AurocOptions auroc;

  stats::CompareOptions compare;
  std::size_t histogram_bins = 20;

  FusionThresholds fusion;

  std::filesystem::path output_dir;

  std::vector<std::string> models() const { return {model_a, model_b}; }
};

namespace detail {

template <typename T>
T get_or(const boost::property_tree::ptree& tree, const std::string& key, T fallback) {
  try {
    return tree.get<T>(key, fallback);
  } catch (const boost::property_tree::ptree_error& e) {
    throw InputError("config key " + key + ": " + e.what());
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw InputError("config key " + key + ": expected true or false, got " + v);
}

template <typename Enum>
Enum parse_choice(const std::string& key, const std::string& v,
                  std::initializer_list<std::pair<const char*, Enum>> choices) {
  std::string allowed;
  for (const auto& [name, value] : choices) {
    if (v == name) return value;
    allowed += allowed.empty() ? name : std::string(" | ") + name;
  }
  throw InputError("config key " + key + ": expected " + allowed + ", got " + v);
}

}  // namespace detail

inline PipelineConfig load_config(const std::filesystem::path& path) {
  require(std::filesystem::is_regular_file(path), "config file not found: " + path.string());
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  using detail::get_or;

  PipelineConfig c;
  c.base_dir = std::filesystem::absolute(path).parent_path();
  auto resolve = [&](const std::string& p) { return (c.base_dir / p).lexically_normal(); };

  c.dataset_name = get_or<std::string>(tree, "dataset.name", c.dataset_name);
  const auto manifest = get_or<std::string>(tree, "dataset.manifest", "");
  require(!manifest.empty(), "config: dataset.manifest is required");
  c.manifest = resolve(manifest);
  require(std::filesystem::is_regular_file(c.manifest), "manifest not found: " + c.manifest.string());
  c.predictions = resolve(get_or<std::string>(tree, "dataset.predictions", "predictions"));
  c.probabilities = resolve(get_or<std::string>(tree, "dataset.probabilities", "probabilities"));
  if (const auto h = get_or<std::string>(tree, "dataset.heatmaps", ""); !h.empty()) c.heatmaps = resolve(h);

  c.model_a = get_or<std::string>(tree, "models.a", c.model_a);
  c.model_b = get_or<std::string>(tree, "models.b", c.model_b);
  require(!c.model_a.empty() && !c.model_b.empty() && c.model_a != c.model_b, "config: models.a and models.b must differ");
  c.runs = get_or<std::size_t>(tree, "models.runs", c.runs);
  require(c.runs >= 1, "config: models.runs must be positive");

  c.seed = get_or<std::uint64_t>(tree, "split.seed", c.seed);
  c.split_count = get_or<int>(tree, "split.count", c.split_count);
  c.ratio = parse_ratio(get_or<std::string>(tree, "split.ratio", "80:20"));
  c.stratified = detail::parse_bool("split.stratified", get_or<std::string>(tree, "split.stratified", "false"));
  c.schedule = parse_schedule(get_or<std::string>(tree, "split.schedule", "60:40,40:60,20:80,10:90"));

  c.auroc_source = detail::parse_choice<AurocSource>(
      "metrics.auroc_source", get_or<std::string>(tree, "metrics.auroc_source", "probability"),
      {{"probability", AurocSource::probability}, {"mask", AurocSource::mask}});
  c.auroc.degenerate = detail::parse_choice<DegenerateAurocPolicy>(
      "metrics.degenerate_auroc", get_or<std::string>(tree, "metrics.degenerate_auroc", "missing"),
      {{"missing", DegenerateAurocPolicy::missing},
       {"accuracy_at_threshold", DegenerateAurocPolicy::accuracy_at_threshold}});
  c.auroc.accuracy_threshold = get_or<double>(tree, "metrics.accuracy_threshold", 0.5);

  auto& mood = c.compare.mood;
  mood.ties = detail::parse_choice<stats::MedianTies>("stats.ties", get_or<std::string>(tree, "stats.ties", "below"),
                                                      {{"below", stats::MedianTies::below},
                                                       {"above", stats::MedianTies::above}});
  mood.continuity_correction = detail::parse_bool(
      "stats.continuity_correction", get_or<std::string>(tree, "stats.continuity_correction", "false"));
  mood.alpha = get_or<double>(tree, "stats.alpha", 0.05);
  require(mood.alpha > 0.0 && mood.alpha < 1.0, "config: stats.alpha must lie in (0,1)");
  c.compare.superiority = get_or<double>(tree, "stats.superiority", 0.05);
  c.compare.count_threshold = get_or<double>(tree, "stats.count_threshold", 0.9);
  require(c.compare.count_threshold >= 0.0 && c.compare.count_threshold <= 1.0,
          "config: stats.count_threshold must lie in [0,1]");
  c.compare.skip_degenerate_pairs =
      detail::parse_choice<bool>("stats.degenerate_pairs", get_or<std::string>(tree, "stats.degenerate_pairs", "include"),
                                 {{"include", false}, {"skip", true}});
  c.histogram_bins = get_or<std::size_t>(tree, "stats.histogram_bins", c.histogram_bins);
  require(c.histogram_bins >= 1, "config: stats.histogram_bins must be positive");

  c.fusion.fpr_high = get_or<double>(tree, "fusion.fpr_high", c.fusion.fpr_high);
  c.fusion.fnr_high = get_or<double>(tree, "fusion.fnr_high", c.fusion.fnr_high);
  require(c.fusion.fpr_high > 0.0 && c.fusion.fpr_high < 1.0 && c.fusion.fnr_high > 0.0 && c.fusion.fnr_high < 1.0,
          "config: fusion thresholds must lie in (0,1)");

  c.output_dir = resolve(get_or<std::string>(tree, "output.dir", "out"));
  return c;
}

}  // namespace segstat
