#pragma once

// The batch pipeline behind the `segstat` CLI. Every command reads only files
// written by earlier commands (or the dataset itself) and writes its outputs
// under the configured output directory:
//
//   split     splits/split_<k>.csv, splits/class_report.{csv,txt}
//   deplete   splits/split_<k>_<train>-<test>.csv, splits/depletion_report_<k>.{csv,txt}
//   evaluate  metrics.csv, confusion.csv, aggregated/<model>/<id>.png
//   compare   comparison.csv, summary.csv, table1.txt, table2.txt [, table3.{csv,txt}]
//   fuse      fusion.csv, fused/{union,intersection}/<id>.png
//   render    overlays/, averaged/, rendered/, plots/

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <fmt/format.h>

#include "segstat/config.hpp"
#include "segstat/csv.hpp"
#include "segstat/ensemble.hpp"
#include "segstat/error.hpp"
#include "segstat/mask_core.hpp"
#include "segstat/metrics.hpp"
#include "segstat/parallel.hpp"
#include "segstat/splits.hpp"
#include "segstat/stats.hpp"

namespace segstat::pipeline {

namespace fs = std::filesystem;

struct RunOptions {
  std::size_t jobs = 1;
  std::optional<int> split_index;
  // Labelled metric CSVs (e.g. "80%" -> out/metrics.csv) for the depletion table.
  std::vector<std::pair<std::string, fs::path>> regimes;
};

// ---------------------------------------------------------------------------
// Paths and formatting.

inline fs::path split_file(const PipelineConfig& c, int index) {
  return c.output_dir / "splits" / fmt::format("split_{}.csv", index);
}

inline fs::path depleted_split_file(const PipelineConfig& c, int index, const SplitRatio& r) {
  return c.output_dir / "splits" / fmt::format("split_{}_{}-{}.csv", index, r.train_pct, r.test_pct);
}

inline fs::path run_dir(const fs::path& root, const std::string& model, std::size_t run) {
  return root / model / fmt::format("run_{}", run);
}

inline fs::path prediction_file(const PipelineConfig& c, const std::string& model, std::size_t run,
                                const std::string& id) {
  return run_dir(c.predictions, model, run) / (id + ".png");
}

inline fs::path probability_file(const PipelineConfig& c, const std::string& model, std::size_t run,
                                 const std::string& id) {
  return run_dir(c.probabilities, model, run) / (id + ".png");
}

inline fs::path heatmap_file(const PipelineConfig& c, const std::string& model, std::size_t run, int cls,
                             const std::string& id) {
  return run_dir(*c.heatmaps, model, run) / std::to_string(cls) / (id + ".png");
}

inline fs::path aggregated_file(const PipelineConfig& c, const std::string& model, const std::string& id) {
  return c.output_dir / "aggregated" / model / (id + ".png");
}

inline fs::path fused_file(const PipelineConfig& c, FusionOp op, const std::string& id) {
  return c.output_dir / "fused" / std::string(to_string(op)) / (id + ".png");
}

inline std::string format_value(double v) { return fmt::format("{:.10f}", v); }
inline std::string format_stat(double v) { return fmt::format("{:.6f}", v); }
inline std::string format_p(double v) { return fmt::format("{:.6g}", v); }
inline std::string format_pct(double v) { return fmt::format("{:.6f}", v); }

inline std::string threshold_label(double t) { return fmt::format("{}", t); }

// Pads to a display width counted in code points.
inline std::string pad(const std::string& s, std::size_t width) {
  std::size_t points = 0;
  for (unsigned char ch : s) points += (ch & 0xC0) != 0x80;
  return points >= width ? s : s + std::string(width - points, ' ');
}

inline void require_exists(const std::vector<fs::path>& paths, const std::string& what) {
  std::vector<std::string> missing;
  for (const auto& p : paths) {
    if (!fs::exists(p)) missing.push_back(p.string());
  }
  if (missing.empty()) return;
  std::string message = fmt::format("{} missing {} file(s):", what, missing.size());
  for (const auto& m : missing) message += "\n  " + m;
  throw InputError(message);
}

// ---------------------------------------------------------------------------
// Manifest.

/// Loads the manifest; relative gt paths resolve against the manifest's directory.
inline DatasetManifest load_manifest(const PipelineConfig& c) {
  auto manifest = parse_manifest(csv::read(c.manifest));
  std::vector<ManifestEntry> entries = manifest.entries();
  for (auto& e : entries) {
    fs::path p(e.gt_path);
    if (p.is_relative()) e.gt_path = (c.manifest.parent_path() / p).lexically_normal().string();
  }
  return DatasetManifest(std::move(entries));
}

// ---------------------------------------------------------------------------
// split / deplete

inline std::string class_report_csv(const std::vector<SplitManifest>& splits) {
  std::string out = "split_index,ratio,clinical_class,train_count,train_pct,test_count,test_pct\n";
  for (const auto& s : splits) {
    for (const auto& row : class_report(s)) {
      out += csv::join({std::to_string(s.split_index), to_string(s.ratio), row.clinical_class,
                        std::to_string(row.train_count), format_pct(row.train_pct), std::to_string(row.test_count),
                        format_pct(row.test_pct)});
    }
  }
  return out;
}

/// Plain-text class distribution table: one column pair (train, test) per split.
inline std::string class_report_text(const std::string& title, const std::vector<SplitManifest>& splits,
                                     const std::vector<std::string>& column_labels) {
  std::set<std::string> classes;
  for (const auto& s : splits) {
    for (const auto& row : class_report(s)) classes.insert(row.clinical_class);
  }
  std::size_t class_width = 12;
  for (const auto& cls : classes) class_width = std::max(class_width, cls.size() + 2);
  constexpr std::size_t cell = 16;

  std::string out = title + "\n";
  out += pad("", class_width);
  for (const auto& label : column_labels) out += pad(label, 2 * cell);
  out += "\n" + pad("Class", class_width);
  for (std::size_t i = 0; i < splits.size(); ++i) out += pad("Train (%)", cell) + pad("Test (%)", cell);
  out += "\n";
  for (const auto& cls : classes) {
    out += pad(cls, class_width);
    for (const auto& s : splits) {
      for (const auto& row : class_report(s)) {
        if (row.clinical_class != cls) continue;
        out += pad(fmt::format("{} ({})", row.train_count, round_half_up(row.train_pct)), cell);
        out += pad(fmt::format("{} ({})", row.test_count, round_half_up(row.test_pct)), cell);
      }
    }
    out += "\n";
  }
  out += pad("Total", class_width);
  for (const auto& s : splits) {
    out += pad(std::to_string(s.train_ids.size()), cell) + pad(std::to_string(s.test_ids.size()), cell);
  }
  out += "\n";
  return out;
}

inline std::vector<SplitManifest> cmd_split(const PipelineConfig& c) {
  const auto manifest = load_manifest(c);
  auto splits = make_splits(manifest, c.seed, c.split_count, c.ratio, c.stratified);
  std::vector<std::string> labels;
  for (const auto& s : splits) {
    validate_split(manifest, s);
    csv::write_text(split_file(c, s.split_index), write_split_csv(manifest, s));
    labels.push_back(fmt::format("Set {}", s.split_index));
  }
  csv::write_text(c.output_dir / "splits" / "class_report.csv", class_report_csv(splits));
  csv::write_text(c.output_dir / "splits" / "class_report.txt",
                  class_report_text(fmt::format("Clinical label classes per {} split ({}; seed {})",
                                                to_string(c.ratio), c.dataset_name, c.seed),
                                    splits, labels));
  return splits;
}

inline std::vector<SplitManifest> cmd_deplete(const PipelineConfig& c, int split_index) {
  const auto manifest = load_manifest(c);
  const auto path = split_file(c, split_index);
  require_exists({path}, "deplete: upstream split");
  const auto start = read_split_csv(manifest, csv::read(path));
  auto stages = deplete(manifest, start, c.schedule);

  std::vector<SplitManifest> all{start};
  std::vector<std::string> labels{to_string(start.ratio)};
  for (const auto& s : stages) {
    validate_split(manifest, s);
    csv::write_text(depleted_split_file(c, split_index, s.ratio), write_split_csv(manifest, s));
    all.push_back(s);
    labels.push_back(to_string(s.ratio));
  }
  const auto stem = fmt::format("depletion_report_{}", split_index);
  csv::write_text(c.output_dir / "splits" / (stem + ".csv"), class_report_csv(all));
  csv::write_text(c.output_dir / "splits" / (stem + ".txt"),
                  class_report_text(fmt::format("Depletion of split {} ({})", split_index, c.dataset_name), all,
                                    labels));
  return stages;
}

// ---------------------------------------------------------------------------
// evaluate

struct ImageEvaluation {
  std::map<std::string, ImageMetrics> by_model;
};

inline std::vector<std::string> evaluation_ids(const PipelineConfig& c, const DatasetManifest& manifest,
                                               const RunOptions& options) {
  std::vector<std::string> ids;
  if (options.split_index) {
    const auto path = split_file(c, *options.split_index);
    require_exists({path}, "evaluate: split manifest");
    ids = read_split_csv(manifest, csv::read(path)).test_ids;
  } else {
    for (const auto& e : manifest.entries()) ids.push_back(e.image_id);
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

inline std::string metrics_csv_header() { return "image_id,model,metric,value,degenerate\n"; }

inline void cmd_evaluate(const PipelineConfig& c, const RunOptions& options) {
  const auto manifest = load_manifest(c);
  const auto ids = evaluation_ids(c, manifest, options);
  require(!ids.empty(), "evaluate: no images to evaluate");
  const auto models = c.models();

  std::vector<fs::path> needed;
  for (const auto& id : ids) {
    needed.emplace_back(manifest.at(id).gt_path);
    for (const auto& model : models) {
      for (std::size_t run = 1; run <= c.runs; ++run) {
        needed.push_back(prediction_file(c, model, run, id));
        if (c.auroc_source == AurocSource::probability) needed.push_back(probability_file(c, model, run, id));
      }
    }
  }
  require_exists(needed, "evaluate:");

  std::vector<ImageEvaluation> results(ids.size());
  parallel_for(ids.size(), options.jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    const auto gt = load_mask(manifest.at(id).gt_path, MaskKind::ground_truth);
    for (const auto& model : models) {
      std::vector<BinaryMask> runs;
      for (std::size_t run = 1; run <= c.runs; ++run) {
        runs.push_back(load_mask(prediction_file(c, model, run, id), MaskKind::prediction));
      }
      const auto final_output = run_intersection(runs);
      require_same_extent(gt, final_output, (id + "/" + model).c_str());

      ProbabilityMap prob;
      if (c.auroc_source == AurocSource::probability) {
        std::vector<ProbabilityMap> maps;
        for (std::size_t run = 1; run <= c.runs; ++run) {
          maps.push_back(load_probability_map(probability_file(c, model, run, id)));
        }
        prob = run_minimum(maps);
      } else {
        prob = ProbabilityMap(final_output.extent());
        for (std::size_t p = 0; p < prob.size(); ++p) prob[p] = final_output[p];
      }
      results[i].by_model[model] = evaluate_image(gt, final_output, prob, c.auroc);
      save_mask(aggregated_file(c, model, id), final_output);
    }
  });

  std::string metrics = metrics_csv_header();
  std::string counts = "image_id,model,tp,fp,tn,fn\n";
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (const auto& model : models) {
      const auto& m = results[i].by_model.at(model);
      ensure(m.counts.total() > 0, "evaluate: empty confusion counts");
      for (auto kind : kAllMetrics) {
        const auto& v = m.get(kind);
        metrics += csv::join({ids[i], model, std::string(to_string(kind)),
                              v.present() ? format_value(*v.value) : "", v.degenerate ? "1" : "0"});
      }
      counts += csv::join({ids[i], model, std::to_string(m.counts.tp), std::to_string(m.counts.fp),
                           std::to_string(m.counts.tn), std::to_string(m.counts.fn)});
    }
  }
  csv::write_text(c.output_dir / "metrics.csv", metrics);
  csv::write_text(c.output_dir / "confusion.csv", counts);
}

// ---------------------------------------------------------------------------
// compare

// model -> metric -> distribution
using MetricTable = std::map<std::string, std::map<MetricKind, stats::MetricDistribution>>;

inline MetricTable read_metrics_csv(const fs::path& path) {
  const auto table = csv::read(path);
  const auto id = table.column("image_id");
  const auto model = table.column("model");
  const auto metric = table.column("metric");
  const auto value = table.column("value");
  const auto degenerate = table.column("degenerate");
  MetricTable out;
  for (const auto& row : table.rows) {
    const auto kind = parse_metric_kind(row[metric]);
    auto& dist = out[row[model]][kind];
    dist.model = row[model];
    dist.kind = kind;
    MetricValue v;
    if (!row[value].empty()) {
      try {
        v.value = std::stod(row[value]);
      } catch (const std::exception&) {
        throw InputError(path.string() + ": bad metric value " + row[value]);
      }
      require(*v.value >= 0.0 && *v.value <= 1.0, path.string() + ": metric value outside [0,1]: " + row[value]);
    }
    v.degenerate = row[degenerate] == "1";
    require(dist.values.emplace(row[id], v).second,
            path.string() + ": duplicate row for " + row[id] + "/" + row[model] + "/" + row[metric]);
  }
  return out;
}

inline std::vector<std::string> metric_image_ids(const MetricTable& table) {
  std::set<std::string> ids;
  for (const auto& [model, kinds] : table) {
    for (const auto& [kind, dist] : kinds) {
      for (const auto& [id, v] : dist.values) ids.insert(id);
    }
  }
  return {ids.begin(), ids.end()};
}

/// Checks that both models cover every metric over the same images.
inline void validate_coverage(const PipelineConfig& c, const MetricTable& table, const std::string& origin) {
  for (const auto& model : c.models()) {
    require(table.contains(model), origin + ": no rows for model " + model);
  }
  const auto& first = table.at(c.model_a);
  for (const auto& model : c.models()) {
    for (auto kind : kAllMetrics) {
      require(table.at(model).contains(kind),
              origin + ": model " + model + " lacks metric " + std::string(to_string(kind)));
      const auto& dist = table.at(model).at(kind);
      const auto& reference = first.at(MetricKind::auroc);
      require(dist.values.size() == reference.values.size(),
              origin + ": model coverage mismatch for " + model + "/" + std::string(to_string(kind)));
      for (const auto& [id, v] : reference.values) {
        require(dist.values.contains(id), origin + ": model coverage mismatch, " + model + " lacks " + id);
      }
    }
  }
}

inline std::vector<stats::ModelComparison> compare_all(const PipelineConfig& c, const MetricTable& table) {
  std::vector<stats::ModelComparison> out;
  for (auto kind : kAllMetrics) {
    out.push_back(stats::compare_models(table.at(c.model_a).at(kind), table.at(c.model_b).at(kind), c.compare));
  }
  return out;
}

inline std::string dagger_label(const PipelineConfig& c, const std::optional<Preference>& d) {
  if (!d || *d == Preference::tie) return "none";
  return *d == Preference::first_better ? c.model_a : c.model_b;
}

inline std::string comparison_csv(const PipelineConfig& c, const std::vector<stats::ModelComparison>& rows) {
  const auto t = threshold_label(c.compare.count_threshold);
  std::string out = fmt::format(
      "metric,model_a_median,model_b_median,delta_median,p_value,significant,dagger,n_gt,n_eq,n_lt,n_a_ge_{},n_b_ge_{}\n",
      t, t);
  for (const auto& r : rows) {
    out += csv::join({std::string(to_string(r.kind)), format_stat(r.summary_a.median), format_stat(r.summary_b.median),
                      format_stat(r.median_delta.value), r.mood ? format_p(r.mood->p_value) : "NA",
                      r.significant ? "1" : "0", dagger_label(c, r.median_dagger), std::to_string(r.n_gt),
                      std::to_string(r.n_eq), std::to_string(r.n_lt), std::to_string(r.n_a_at_threshold),
                      std::to_string(r.n_b_at_threshold)});
  }
  return out;
}

struct NormalityReport {
  stats::Summary summary;
  std::size_t missing = 0;
  std::optional<stats::ShapiroWilkResult> shapiro;
  std::optional<double> yj_lambda;
  std::optional<stats::ShapiroWilkResult> yj_shapiro;
};

inline NormalityReport normality(const stats::MetricDistribution& dist, std::uint64_t seed) {
  NormalityReport r;
  const auto values = dist.present();
  r.missing = dist.values.size() - values.size();
  if (values.empty()) return r;
  r.summary = stats::summarize(values);
  try {
    r.shapiro = stats::shapiro_wilk(values, seed);
    const auto fit = stats::yeo_johnson_mle(values);
    r.yj_lambda = fit.lambda;
    r.yj_shapiro = stats::shapiro_wilk(stats::yeo_johnson(values, fit.lambda), seed);
  } catch (const InputError&) {
    // fewer than three values or constant data: tests are undefined
  }
  return r;
}

inline std::string summary_csv(const PipelineConfig& c, const MetricTable& table) {
  std::string out =
      "model,metric,n,missing,mean,median,sd,shapiro_w,shapiro_p,shapiro_subsampled,yj_lambda,yj_shapiro_w,yj_shapiro_p\n";
  auto opt = [](const auto& o, auto f) { return o ? f(*o) : std::string("NA"); };
  for (const auto& model : c.models()) {
    for (auto kind : kAllMetrics) {
      const auto r = normality(table.at(model).at(kind), c.seed);
      out += csv::join({model, std::string(to_string(kind)), std::to_string(r.summary.n), std::to_string(r.missing),
                        format_stat(r.summary.mean), format_stat(r.summary.median), format_stat(r.summary.sd),
                        opt(r.shapiro, [](auto& s) { return format_stat(s.w); }),
                        opt(r.shapiro, [](auto& s) { return format_p(s.p_value); }),
                        opt(r.shapiro, [](auto& s) { return std::string(s.subsampled ? "1" : "0"); }),
                        opt(r.yj_lambda, [](double l) { return format_stat(l); }),
                        opt(r.yj_shapiro, [](auto& s) { return format_stat(s.w); }),
                        opt(r.yj_shapiro, [](auto& s) { return format_p(s.p_value); })});
    }
  }
  return out;
}

inline std::string table1_text(const PipelineConfig& c, const std::vector<stats::ModelComparison>& rows) {
  constexpr std::size_t w0 = 14, w = 16;
  std::string out = fmt::format("Summary of per-image metrics ({})\n", c.dataset_name);
  out += "* Mood's median test p < " + fmt::format("{}", c.compare.mood.alpha) + "; † difference > " +
         fmt::format("{}", c.compare.superiority) + " for the better-performing model\n\n";
  out += pad("", w0) + pad(c.model_a, w) + pad(c.model_b, w) + "\n";
  auto mark = [&](double v, bool star, const std::optional<Preference>& d, Preference self) {
    std::string s = fmt::format("{:.4f}", v);
    if (star) s += "*";
    if (d && *d == self) s += "†";
    return s;
  };
  for (const auto& r : rows) {
    out += std::string(to_string(r.kind)) + "\n";
    out += pad("  median", w0) + pad(mark(r.summary_a.median, r.significant, r.median_dagger, Preference::first_better), w) +
           pad(mark(r.summary_b.median, r.significant, r.median_dagger, Preference::second_better), w) + "\n";
    out += pad("  mean", w0) + pad(mark(r.summary_a.mean, false, r.mean_dagger, Preference::first_better), w) +
           pad(mark(r.summary_b.mean, false, r.mean_dagger, Preference::second_better), w) + "\n";
    out += pad("  sd.", w0) + pad(fmt::format("{:.4f}", r.summary_a.sd), w) + pad(fmt::format("{:.4f}", r.summary_b.sd), w) +
           "\n";
  }
  return out;
}

inline int percent_of(std::size_t count, std::size_t total) {
  return total == 0 ? 0 : round_half_up(100.0 * static_cast<double>(count) / static_cast<double>(total));
}

// Count daggers mark the larger of two counts when the two differ by more than
// the superiority threshold as a share of the images compared.
inline std::pair<bool, bool> count_daggers(std::size_t x, std::size_t y, std::size_t total, double superiority) {
  if (total == 0) return {false, false};
  const double gap = (static_cast<double>(x) - static_cast<double>(y)) / static_cast<double>(total);
  return {gap > superiority, -gap > superiority};
}

inline std::string table2_text(const PipelineConfig& c, const std::vector<stats::ModelComparison>& rows) {
  constexpr std::size_t w0 = 14, w = 16;
  const auto t = threshold_label(c.compare.count_threshold);
  std::size_t n_test = 0;
  if (!rows.empty()) n_test = rows.front().n_gt + rows.front().n_eq + rows.front().n_lt + rows.front().n_skipped;
  std::string out = fmt::format("Per-image comparison, delta = {} - {} ({}, n_test = {})\n", c.model_a, c.model_b,
                                c.dataset_name, n_test);
  out += "† better-performing model\n\n";
  out += pad("Metric", w0) + pad("delta > 0 (%)", w) + pad("delta = 0 (%)", w) + pad("delta < 0 (%)", w) +
         pad(c.model_a + " >= " + t, w) + pad(c.model_b + " >= " + t, w) + "\n";
  for (const auto& r : rows) {
    const std::size_t compared = r.n_gt + r.n_eq + r.n_lt;
    const auto [gt_mark, lt_mark] = count_daggers(r.n_gt, r.n_lt, compared, c.compare.superiority);
    const std::size_t present_a = r.summary_a.n, present_b = r.summary_b.n;
    const auto [a_mark, b_mark] =
        count_daggers(r.n_a_at_threshold, r.n_b_at_threshold, std::max(present_a, present_b), c.compare.superiority);
    auto cell = [&](std::size_t n, bool dag) {
      return fmt::format("{} ({}){}", n, percent_of(n, compared), dag ? "†" : "");
    };
    out += pad(std::string(to_string(r.kind)), w0) + pad(cell(r.n_gt, gt_mark), w) + pad(cell(r.n_eq, false), w) +
           pad(cell(r.n_lt, lt_mark), w) + pad(std::to_string(r.n_a_at_threshold) + (a_mark ? "†" : ""), w) +
           pad(std::to_string(r.n_b_at_threshold) + (b_mark ? "†" : ""), w) + "\n";
    if (r.n_skipped > 0) out += pad("", w0) + fmt::format("({} image(s) without a value for both models)\n", r.n_skipped);
  }
  return out;
}

inline void write_table3(const PipelineConfig& c, const RunOptions& options) {
  std::string csv_out = "regime,metric,model_a_median,model_b_median,delta_median,p_value,significant,dagger\n";
  constexpr std::size_t w0 = 14, w = 16;
  std::string text = fmt::format("Medians across data regimes ({})\n", c.dataset_name);
  text += "* Mood's median test p < " + fmt::format("{}", c.compare.mood.alpha) + "; † difference > " +
          fmt::format("{}", c.compare.superiority) + "\n\n";
  text += pad("", w0) + pad(c.model_a, w) + pad(c.model_b, w) + "\n";

  std::vector<std::pair<std::string, std::vector<stats::ModelComparison>>> regimes;
  for (const auto& [label, path] : options.regimes) {
    require_exists({path}, "compare: regime metrics");
    const auto table = read_metrics_csv(path);
    validate_coverage(c, table, path.string());
    regimes.emplace_back(label, compare_all(c, table));
  }
  for (auto kind : kAllMetrics) {
    text += std::string(to_string(kind)) + "\n";
    for (const auto& [label, rows] : regimes) {
      const auto& r = rows[static_cast<std::size_t>(kind)];
      csv_out += csv::join({label, std::string(to_string(kind)), format_stat(r.summary_a.median),
                            format_stat(r.summary_b.median), format_stat(r.median_delta.value),
                            r.mood ? format_p(r.mood->p_value) : "NA", r.significant ? "1" : "0",
                            dagger_label(c, r.median_dagger)});
      auto cell = [&](double v, Preference self) {
        std::string s = fmt::format("{:.4f}", v);
        if (r.significant) s += "*";
        if (r.median_dagger && *r.median_dagger == self) s += "†";
        return s;
      };
      text += pad("  " + label, w0) + pad(cell(r.summary_a.median, Preference::first_better), w) +
              pad(cell(r.summary_b.median, Preference::second_better), w) + "\n";
    }
  }
  csv::write_text(c.output_dir / "table3.csv", csv_out);
  csv::write_text(c.output_dir / "table3.txt", text);
}

inline std::vector<stats::ModelComparison> cmd_compare(const PipelineConfig& c, const RunOptions& options,
                                                       std::optional<fs::path> metrics_path = std::nullopt) {
  const auto path = metrics_path.value_or(c.output_dir / "metrics.csv");
  require_exists({path}, "compare: upstream metrics");
  const auto table = read_metrics_csv(path);
  validate_coverage(c, table, path.string());
  const auto rows = compare_all(c, table);
  csv::write_text(c.output_dir / "comparison.csv", comparison_csv(c, rows));
  csv::write_text(c.output_dir / "summary.csv", summary_csv(c, table));
  csv::write_text(c.output_dir / "table1.txt", table1_text(c, rows));
  csv::write_text(c.output_dir / "table2.txt", table2_text(c, rows));
  if (!options.regimes.empty()) write_table3(c, options);
  return rows;
}

// ---------------------------------------------------------------------------
// fuse

inline std::vector<std::string> upstream_ids(const PipelineConfig& c) {
  const auto path = c.output_dir / "metrics.csv";
  require_exists({path}, "upstream metrics");
  return metric_image_ids(read_metrics_csv(path));
}

inline void cmd_fuse(const PipelineConfig& c, const RunOptions& options) {
  const auto manifest = load_manifest(c);
  const auto ids = upstream_ids(c);
  std::vector<fs::path> needed;
  for (const auto& id : ids) {
    for (const auto& model : c.models()) needed.push_back(aggregated_file(c, model, id));
  }
  require_exists(needed, "fuse: upstream aggregated masks,");

  std::vector<std::string> lines(ids.size());
  parallel_for(ids.size(), options.jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    const auto gt = load_mask(manifest.at(id).gt_path, MaskKind::ground_truth);
    const auto a = load_mask(aggregated_file(c, c.model_a, id), MaskKind::prediction);
    const auto b = load_mask(aggregated_file(c, c.model_b, id), MaskKind::prediction);
    const auto evaluation = best_fusion_oracle(gt, a, b);
    const auto recommendation = recommend_fusion(confusion(gt, a), confusion(gt, b), c.fusion);
    for (auto op : {FusionOp::union_, FusionOp::intersection}) save_mask(fused_file(c, op, id), fuse(a, b, op));

    auto label = [&](FusionCandidate cand) -> std::string {
      switch (cand) {
        case FusionCandidate::a: return c.model_a;
        case FusionCandidate::b: return c.model_b;
        case FusionCandidate::union_: return "union";
        case FusionCandidate::intersection: return "intersection";
      }
      return "?";
    };
    lines[i] = csv::join({id, format_value(*evaluation.dice[0].value), format_value(*evaluation.dice[1].value),
                          format_value(*evaluation.dice[2].value), format_value(*evaluation.dice[3].value),
                          std::string(to_string(recommendation)), label(evaluation.best)});
  });
  std::string out = "image_id,dice_a,dice_b,dice_union,dice_intersection,recommended_op,oracle_op\n";
  for (const auto& line : lines) out += line;
  csv::write_text(c.output_dir / "fusion.csv", out);
}

// ---------------------------------------------------------------------------
// render

/// Equal-width bins over [0,1]; the last bin is closed on the right.
inline std::vector<std::size_t> histogram(const std::vector<double>& values, std::size_t bins) {
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor(v * static_cast<double>(bins)));
    ++counts[std::min(b, bins - 1)];
  }
  return counts;
}

inline std::string histogram_csv(const PipelineConfig& c, const MetricTable& table, MetricKind kind) {
  std::string out = fmt::format("bin_lo,bin_hi,{},{}\n", c.model_a, c.model_b);
  const auto ha = histogram(table.at(c.model_a).at(kind).present(), c.histogram_bins);
  const auto hb = histogram(table.at(c.model_b).at(kind).present(), c.histogram_bins);
  for (std::size_t b = 0; b < c.histogram_bins; ++b) {
    const double lo = static_cast<double>(b) / static_cast<double>(c.histogram_bins);
    const double hi = static_cast<double>(b + 1) / static_cast<double>(c.histogram_bins);
    out += csv::join({format_stat(lo), format_stat(hi), std::to_string(ha[b]), std::to_string(hb[b])});
  }
  return out;
}

/// Normal Q-Q coordinates: Blom plotting positions (i - 3/8) / (n + 1/4) against the
/// standardized order statistics, before and after a fitted Yeo-Johnson transform.
inline std::string qq_csv(const std::vector<double>& values) {
  std::string out = "rank,theoretical,sample_z,yj_sample_z\n";
  const std::size_t n = values.size();
  if (n == 0) return out;
  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  const auto s = stats::summarize(sorted);

  std::optional<std::vector<double>> yj;
  std::optional<stats::Summary> yj_summary;
  try {
    auto t = stats::yeo_johnson(sorted, stats::yeo_johnson_mle(sorted).lambda);
    yj_summary = stats::summarize(t);
    if (yj_summary->sd > 0.0) yj = std::move(t);
  } catch (const InputError&) {
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double position = (static_cast<double>(i + 1) - 0.375) / (static_cast<double>(n) + 0.25);
    const double theoretical = stats::detail::normal_quantile(position);
    const std::string z = s.sd > 0.0 ? format_stat((sorted[i] - s.mean) / s.sd) : "NA";
    const std::string yz = yj ? format_stat(((*yj)[i] - yj_summary->mean) / yj_summary->sd) : "NA";
    out += csv::join({std::to_string(i + 1), format_stat(theoretical), z, yz});
  }
  return out;
}

inline void cmd_render(const PipelineConfig& c, const RunOptions& options) {
  const auto manifest = load_manifest(c);
  const auto metrics_path = c.output_dir / "metrics.csv";
  require_exists({metrics_path}, "render: upstream metrics");
  const auto table = read_metrics_csv(metrics_path);
  validate_coverage(c, table, metrics_path.string());
  const auto ids = metric_image_ids(table);

  std::vector<fs::path> needed;
  for (const auto& id : ids) {
    for (const auto& model : c.models()) needed.push_back(aggregated_file(c, model, id));
    for (auto op : {FusionOp::union_, FusionOp::intersection}) needed.push_back(fused_file(c, op, id));
    if (c.heatmaps) {
      for (const auto& model : c.models()) {
        for (std::size_t run = 1; run <= c.runs; ++run) {
          for (int cls : {0, 1}) needed.push_back(heatmap_file(c, model, run, cls, id));
        }
      }
    }
  }
  require_exists(needed, "render: upstream artifacts,");

  parallel_for(ids.size(), options.jobs, [&](std::size_t i) {
    const auto& id = ids[i];
    const auto gt = load_mask(manifest.at(id).gt_path, MaskKind::ground_truth);
    for (const auto& model : c.models()) {
      const auto mask = load_mask(aggregated_file(c, model, id), MaskKind::prediction);
      save_rgb(c.output_dir / "overlays" / model / (id + ".png"), overlay(gt, mask));
    }
    for (auto op : {FusionOp::union_, FusionOp::intersection}) {
      const auto fused = load_mask(fused_file(c, op, id), MaskKind::prediction);
      save_rgb(c.output_dir / "overlays" / std::string(to_string(op)) / (id + ".png"), overlay(gt, fused));
    }
    if (!c.heatmaps) return;
    for (const auto& model : c.models()) {
      for (int cls : {0, 1}) {
        std::vector<Heatmap> maps;
        for (std::size_t run = 1; run <= c.runs; ++run) maps.push_back(load_heatmap(heatmap_file(c, model, run, cls, id), cls));
        const auto average = gradcam_average(maps);
        const auto stem = fs::path(model) / std::to_string(cls) / (id + ".png");
        save_unit_plane(c.output_dir / "averaged" / stem, average.values);
        save_rgb(c.output_dir / "rendered" / stem, render_heatmap(average));
      }
    }
  });

  for (auto kind : kAllMetrics) {
    const std::string name(to_string(kind));
    csv::write_text(c.output_dir / "plots" / fmt::format("histogram_{}.csv", name), histogram_csv(c, table, kind));
    for (const auto& model : c.models()) {
      csv::write_text(c.output_dir / "plots" / fmt::format("qq_{}_{}.csv", model, name),
                      qq_csv(table.at(model).at(kind).present()));
    }
  }
}

}  // namespace segstat::pipeline
