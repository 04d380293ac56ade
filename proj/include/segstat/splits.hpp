#pragma once

// Seeded train/test splitting, the depletion protocol (80:20 down to 10:90 with
// strictly nested test sets) and per-class distribution reports.
//
// Shuffles use segstat::Rng (std::mt19937_64) and segstat::shuffle. Split k of a
// run seeded with S draws from Rng(S ^ k). Depletion step t (1-based) of split k
// draws from Rng(S ^ (k << 32) ^ t).

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <fmt/format.h>

#include "segstat/csv.hpp"
#include "segstat/error.hpp"
#include "segstat/random.hpp"

namespace segstat {

inline constexpr std::string_view kToolVersion = "0.1.0";

struct ManifestEntry {
  std::string image_id;
  std::string clinical_class;
  std::string gt_path;
};

class DatasetManifest {
public:
  DatasetManifest() = default;
  explicit DatasetManifest(std::vector<ManifestEntry> entries) : entries_(std::move(entries)) {
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      require(!e.image_id.empty(), "manifest row " + std::to_string(i + 1) + ": empty image_id");
      require(!e.clinical_class.empty(), "manifest entry " + e.image_id + ": empty clinical_class");
      require(index_.emplace(e.image_id, i).second, "manifest: duplicate image_id " + e.image_id);
    }
  }

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  std::size_t index_of(const std::string& id) const {
    auto it = index_.find(id);
    require(it != index_.end(), "image_id not in manifest: " + id);
    return it->second;
  }
  bool contains(const std::string& id) const { return index_.contains(id); }
  const ManifestEntry& at(const std::string& id) const { return entries_[index_of(id)]; }

private:
  std::vector<ManifestEntry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Reads `image_id,clinical_class,gt_path[,...]`; extra columns are ignored.
inline DatasetManifest parse_manifest(const csv::Table& table) {
  const auto id = table.column("image_id");
  const auto cls = table.column("clinical_class");
  const auto gt = table.column("gt_path");
  std::vector<ManifestEntry> entries;
  entries.reserve(table.rows.size());
  for (const auto& row : table.rows) entries.push_back({row[id], row[cls], row[gt]});
  return DatasetManifest(std::move(entries));
}

struct SplitRatio {
  int train_pct = 80;
  int test_pct = 20;

  friend bool operator==(const SplitRatio&, const SplitRatio&) = default;
};

inline std::string to_string(const SplitRatio& r) { return fmt::format("{}:{}", r.train_pct, r.test_pct); }

inline SplitRatio parse_ratio(std::string_view text) {
  const auto colon = text.find(':');
  require(colon != std::string_view::npos, "ratio must look like 80:20, got " + std::string(text));
  SplitRatio r;
  auto parse_int = [&](std::string_view s, int& out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    require(ec == std::errc{} && ptr == s.data() + s.size(), "bad ratio: " + std::string(text));
  };
  parse_int(text.substr(0, colon), r.train_pct);
  parse_int(text.substr(colon + 1), r.test_pct);
  require(r.train_pct >= 0 && r.test_pct >= 0 && r.train_pct + r.test_pct == 100,
          "ratio parts must be non-negative and sum to 100: " + std::string(text));
  return r;
}

inline std::vector<SplitRatio> parse_schedule(std::string_view text) {
  std::vector<SplitRatio> schedule;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    auto part = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
    while (!part.empty() && part.front() == ' ') part.remove_prefix(1);
    while (!part.empty() && part.back() == ' ') part.remove_suffix(1);
    schedule.push_back(parse_ratio(part));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return schedule;
}

inline const std::vector<SplitRatio>& default_depletion_schedule() {
  static const std::vector<SplitRatio> schedule{{60, 40}, {40, 60}, {20, 80}, {10, 90}};
  return schedule;
}

using ClassCounts = std::map<std::string, std::size_t>;

struct SplitManifest {
  std::uint64_t seed = 0;
  SplitRatio ratio;
  int split_index = 1;
  std::string rule = "unstratified";  // unstratified | stratified | depletion
  int depletion_step = 0;             // 0 for an original split
  std::vector<std::string> train_ids;  // manifest order
  std::vector<std::string> test_ids;   // manifest order
  ClassCounts train_counts;
  ClassCounts test_counts;

  friend bool operator==(const SplitManifest&, const SplitManifest&) = default;
};

/// floor(n * train_pct / 100); the remainder goes to test.
inline std::size_t train_size(std::size_t n, int train_pct) {
  return static_cast<std::size_t>((static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(train_pct)) / 100);
}

namespace detail {

inline ClassCounts count_classes(const DatasetManifest& m, const std::vector<std::size_t>& indices) {
  ClassCounts counts;
  for (const auto& e : m.entries()) counts.try_emplace(e.clinical_class, 0);
  for (auto i : indices) ++counts[m.entries()[i].clinical_class];
  return counts;
}

inline void fill_sides(const DatasetManifest& m, std::vector<std::size_t> train, std::vector<std::size_t> test,
                       SplitManifest& s) {
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  s.train_counts = count_classes(m, train);
  s.test_counts = count_classes(m, test);
  s.train_ids.clear();
  s.test_ids.clear();
  for (auto i : train) s.train_ids.push_back(m.entries()[i].image_id);
  for (auto i : test) s.test_ids.push_back(m.entries()[i].image_id);
}

inline std::vector<std::size_t> indices_of(const DatasetManifest& m, const std::vector<std::string>& ids) {
  std::vector<std::size_t> out;
  out.reserve(ids.size());
  for (const auto& id : ids) out.push_back(m.index_of(id));
  return out;
}

// Per-class train quotas summing to `target`: floor of each exact share, then the
// leftover units to the largest fractional remainders (ties by class name).
inline std::map<std::string, std::size_t> stratified_quotas(const ClassCounts& totals, std::size_t n,
                                                            std::size_t target) {
  std::map<std::string, std::size_t> quotas;
  std::vector<std::pair<std::uint64_t, std::string>> remainders;
  std::size_t assigned = 0;
  for (const auto& [cls, count] : totals) {
    const std::uint64_t scaled = static_cast<std::uint64_t>(count) * target;
    quotas[cls] = static_cast<std::size_t>(scaled / n);
    assigned += quotas[cls];
    remainders.emplace_back(scaled % n, cls);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target && i < remainders.size(); ++i, ++assigned) ++quotas[remainders[i].second];
  return quotas;
}

}  // namespace detail

/// k seeded train/test splits of the manifest at `ratio`.
inline std::vector<SplitManifest> make_splits(const DatasetManifest& m, std::uint64_t seed, int k = 5,
                                              SplitRatio ratio = {80, 20}, bool stratified = false) {
  require(!m.empty(), "make_splits: empty manifest");
  require(k >= 1, "make_splits: need at least one split");
  require(ratio.train_pct > 0 && ratio.train_pct < 100, "make_splits: train share must lie strictly in (0,100)");
  const std::size_t n = m.size();
  const std::size_t n_train = train_size(n, ratio.train_pct);

  std::vector<SplitManifest> out;
  for (int index = 1; index <= k; ++index) {
    SplitManifest s;
    s.seed = seed;
    s.ratio = ratio;
    s.split_index = index;
    s.rule = stratified ? "stratified" : "unstratified";
    Rng rng(seed ^ static_cast<std::uint64_t>(index));

    std::vector<std::size_t> train, test;
    if (!stratified) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      shuffle(order, rng);
      train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
      test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
    } else {
      std::map<std::string, std::vector<std::size_t>> by_class;
      for (std::size_t i = 0; i < n; ++i) by_class[m.entries()[i].clinical_class].push_back(i);
      ClassCounts totals;
      for (const auto& [cls, members] : by_class) totals[cls] = members.size();
      const auto quotas = detail::stratified_quotas(totals, n, n_train);
      for (auto& [cls, members] : by_class) {
        shuffle(members, rng);
        const auto q = static_cast<std::ptrdiff_t>(quotas.at(cls));
        train.insert(train.end(), members.begin(), members.begin() + q);
        test.insert(test.end(), members.begin() + q, members.end());
      }
    }
    detail::fill_sides(m, std::move(train), std::move(test), s);
    out.push_back(std::move(s));
  }
  return out;
}

/// Depletes a split along `schedule`: each step moves a seeded uniform subset of
/// the current training side into test, so test sets are strictly nested.
inline std::vector<SplitManifest> deplete(const DatasetManifest& m, const SplitManifest& start,
                                          const std::vector<SplitRatio>& schedule = default_depletion_schedule()) {
  require(!schedule.empty(), "deplete: empty schedule");
  int previous = start.ratio.train_pct;
  for (const auto& r : schedule) {
    require(r.train_pct < previous, "deplete: schedule must be strictly decreasing in train share");
    require(r.train_pct >= 0, "deplete: negative train share");
    previous = r.train_pct;
  }
  const std::size_t n = start.train_ids.size() + start.test_ids.size();
  require(n == m.size(), "deplete: split does not cover the manifest");

  std::vector<SplitManifest> out;
  auto train = detail::indices_of(m, start.train_ids);
  auto test = detail::indices_of(m, start.test_ids);
  int step = 0;
  for (const auto& r : schedule) {
    ++step;
    const std::size_t target = train_size(n, r.train_pct);
    Rng rng(start.seed ^ (static_cast<std::uint64_t>(start.split_index) << 32) ^ static_cast<std::uint64_t>(step));
    std::sort(train.begin(), train.end());
    shuffle(train, rng);
    const std::size_t moving = train.size() - target;
    test.insert(test.end(), train.begin(), train.begin() + static_cast<std::ptrdiff_t>(moving));
    train.erase(train.begin(), train.begin() + static_cast<std::ptrdiff_t>(moving));

    SplitManifest s;
    s.seed = start.seed;
    s.ratio = r;
    s.split_index = start.split_index;
    s.rule = "depletion";
    s.depletion_step = step;
    detail::fill_sides(m, train, test, s);
    out.push_back(std::move(s));
  }
  return out;
}

/// Recounts classes from the id lists; used to validate recorded counts.
inline std::pair<ClassCounts, ClassCounts> recount(const DatasetManifest& m, const SplitManifest& s) {
  return {detail::count_classes(m, detail::indices_of(m, s.train_ids)),
          detail::count_classes(m, detail::indices_of(m, s.test_ids))};
}

/// Checks disjointness, coverage and recorded class counts.
inline void validate_split(const DatasetManifest& m, const SplitManifest& s) {
  std::set<std::string> seen;
  for (const auto* side : {&s.train_ids, &s.test_ids}) {
    for (const auto& id : *side) {
      require(m.contains(id), "split references unknown image " + id);
      require(seen.insert(id).second, "split assigns " + id + " twice");
    }
  }
  require(seen.size() == m.size(), "split does not cover the manifest");
  const auto [train, test] = recount(m, s);
  require(train == s.train_counts && test == s.test_counts, "split class counts do not match its ids");
}

struct ClassReportRow {
  std::string clinical_class;
  std::size_t train_count = 0;
  double train_pct = 0.0;
  std::size_t test_count = 0;
  double test_pct = 0.0;
};

inline int round_half_up(double pct) { return static_cast<int>(std::floor(pct + 0.5)); }

inline std::vector<ClassReportRow> class_report(const SplitManifest& s) {
  std::size_t train_total = 0, test_total = 0;
  for (const auto& [cls, c] : s.train_counts) train_total += c;
  for (const auto& [cls, c] : s.test_counts) test_total += c;
  std::set<std::string> classes;
  for (const auto& [cls, c] : s.train_counts) classes.insert(cls);
  for (const auto& [cls, c] : s.test_counts) classes.insert(cls);

  auto pct = [](std::size_t count, std::size_t total) {
    return total == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(total);
  };
  std::vector<ClassReportRow> rows;
  for (const auto& cls : classes) {
    const auto train = s.train_counts.contains(cls) ? s.train_counts.at(cls) : 0;
    const auto test = s.test_counts.contains(cls) ? s.test_counts.at(cls) : 0;
    rows.push_back({cls, train, pct(train, train_total), test, pct(test, test_total)});
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Serialization.

inline std::string write_split_csv(const DatasetManifest& m, const SplitManifest& s) {
  std::string out;
  out += "# segstat split manifest\n";
  out += fmt::format("# tool_version: {}\n", kToolVersion);
  out += fmt::format("# seed: {}\n", s.seed);
  out += fmt::format("# ratio: {}\n", to_string(s.ratio));
  out += fmt::format("# split_index: {}\n", s.split_index);
  out += fmt::format("# rule: {}\n", s.rule);
  out += fmt::format("# depletion_step: {}\n", s.depletion_step);
  if (s.rule == "depletion") out += "# depletion_sampling: uniform seeded subset of the current training side\n";
  out += "image_id,clinical_class,side\n";
  for (const auto* side : {&s.train_ids, &s.test_ids}) {
    const char* label = side == &s.train_ids ? "train" : "test";
    for (const auto& id : *side) out += csv::join({id, m.at(id).clinical_class, label});
  }
  return out;
}

inline SplitManifest read_split_csv(const DatasetManifest& m, const csv::Table& table) {
  SplitManifest s;
  for (const auto& c : table.comments) {
    const auto colon = c.find(": ");
    if (colon == std::string::npos) continue;
    const auto key = c.substr(0, colon);
    const auto value = c.substr(colon + 2);
    if (key == "seed") s.seed = std::stoull(value);
    else if (key == "ratio") s.ratio = parse_ratio(value);
    else if (key == "split_index") s.split_index = std::stoi(value);
    else if (key == "rule") s.rule = value;
    else if (key == "depletion_step") s.depletion_step = std::stoi(value);
  }
  const auto id = table.column("image_id");
  const auto side = table.column("side");
  std::vector<std::size_t> train, test;
  for (const auto& row : table.rows) {
    if (row[side] == "train") train.push_back(m.index_of(row[id]));
    else if (row[side] == "test") test.push_back(m.index_of(row[id]));
    else throw InputError("split manifest: side must be train or test, got " + row[side]);
  }
  detail::fill_sides(m, std::move(train), std::move(test), s);
  validate_split(m, s);
  return s;
}

}  // namespace segstat
