#include "snapture/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "snapture/image_io.hpp"
#include "snapture/rng.hpp"

namespace snapture {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<int> Manifest::labels() const {
  std::vector<int> out;
  out.reserve(entries.size());
  for (const auto &e : entries) out.push_back(e.label_index);
  return out;
}

namespace {

std::optional<int> optional_int(const json &row, const char *key, std::size_t line) {
  if (!row.contains(key) || row[key].is_null()) return std::nullopt;
  if (!row[key].is_number_integer())
    throw ManifestParseError(line, std::string("field '") + key + "' must be an integer");
  return row[key].get<int>();
}

BBox parse_bbox(const json &v, std::size_t line) {
  if (!v.is_array() || v.size() != 4)
    throw ManifestParseError(line, "face_bbox must be [min_row, min_col, max_row, max_col]");
  for (const auto &x : v)
    if (!x.is_number_integer()) throw ManifestParseError(line, "face_bbox entries must be integers");
  BBox b{v[0].get<int>(), v[1].get<int>(), v[2].get<int>(), v[3].get<int>()};
  if (b.max_row < b.min_row || b.max_col < b.min_col)
    throw ManifestParseError(line, "face_bbox is degenerate");
  return b;
}

std::string require_string(const json &row, const char *key, std::size_t line) {
  if (!row.contains(key) || !row[key].is_string())
    throw ManifestParseError(line, std::string("missing string field '") + key + "'");
  return row[key].get<std::string>();
}

} // namespace

Manifest parse_manifest(std::string_view text, const fs::path &base_dir) {
  Manifest m;
  std::optional<std::vector<std::string>> declared;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++row_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); }))
      continue;
    json row;
    try {
      row = json::parse(line);
    } catch (const json::parse_error &e) {
      throw ManifestParseError(row_no, std::string("invalid JSON: ") + e.what());
    }
    if (!row.is_object()) throw ManifestParseError(row_no, "each line must be a JSON object");

    if (row.contains("classes")) {
      if (declared || !m.entries.empty())
        throw ManifestParseError(row_no, "class declaration must be the first line");
      if (!row["classes"].is_array()) throw ManifestParseError(row_no, "'classes' must be an array");
      std::vector<std::string> classes;
      for (const auto &c : row["classes"]) {
        if (!c.is_string()) throw ManifestParseError(row_no, "class names must be strings");
        classes.push_back(c.get<std::string>());
      }
      if (std::set<std::string>(classes.begin(), classes.end()).size() != classes.size())
        throw ManifestParseError(row_no, "duplicate class names");
      declared = std::move(classes);
      continue;
    }

    ManifestEntry e;
    const fs::path rel = require_string(row, "path", row_no);
    e.path = rel.is_absolute() || base_dir.empty() ? rel : base_dir / rel;
    e.label = require_string(row, "label", row_no);
    e.subject = row.contains("subject") && row["subject"].is_string() ? row["subject"].get<std::string>()
                                                                       : std::string{};
    e.id = row.contains("id") && row["id"].is_string() ? row["id"].get<std::string>()
                                                       : rel.filename().string();
    e.start = optional_int(row, "start", row_no);
    e.end = optional_int(row, "end", row_no);
    if (e.start.has_value() != e.end.has_value())
      throw ManifestParseError(row_no, "start and end must be given together");
    if (e.start && (*e.start < 0 || *e.end <= *e.start))
      throw ManifestParseError(row_no, "require 0 <= start < end");
    if (row.contains("face_bbox") && !row["face_bbox"].is_null())
      e.face_bbox = parse_bbox(row["face_bbox"], row_no);
    if (declared) {
      auto it = std::find(declared->begin(), declared->end(), e.label);
      if (it == declared->end()) throw ManifestParseError(row_no, "unknown label '" + e.label + "'");
      e.label_index = static_cast<int>(it - declared->begin());
    }
    m.entries.push_back(std::move(e));
  }

  if (declared) {
    m.classes = std::move(*declared);
  } else {
    std::set<std::string> names;
    for (const auto &e : m.entries) names.insert(e.label);
    m.classes.assign(names.begin(), names.end());
    for (auto &e : m.entries)
      e.label_index = static_cast<int>(std::find(m.classes.begin(), m.classes.end(), e.label) -
                                       m.classes.begin());
  }
  return m;
}

Manifest load_manifest(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw ManifestParseError(0, "cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

std::string format_manifest(const Manifest &manifest, const fs::path &base_dir) {
  std::string out = json{{"classes", manifest.classes}}.dump() + "\n";
  for (const auto &e : manifest.entries) {
    json row = json::object();
    row["id"] = e.id;
    row["path"] = base_dir.empty() ? e.path.string() : fs::relative(e.path, base_dir).string();
    row["label"] = e.label;
    row["subject"] = e.subject;
    if (e.start) {
      row["start"] = *e.start;
      row["end"] = *e.end;
    }
    if (e.face_bbox)
      row["face_bbox"] = {e.face_bbox->min_row, e.face_bbox->min_col, e.face_bbox->max_row,
                          e.face_bbox->max_col};
    out += row.dump() + "\n";
  }
  return out;
}

GestureSequence cut_isolated(const GestureSequence &sequence, int start, int end) {
  const int n = static_cast<int>(sequence.size());
  if (start < 0 || end > n || start >= end)
    throw IndexError("cut_isolated: need 0 <= start < end <= " + std::to_string(n) + ", got [" +
                     std::to_string(start) + ", " + std::to_string(end) + ")");
  GestureSequence out;
  out.id = sequence.id;
  out.label = sequence.label;
  out.label_name = sequence.label_name;
  out.subject = sequence.subject;
  out.face_bbox = sequence.face_bbox;
  out.frames.assign(sequence.frames.begin() + start, sequence.frames.begin() + end);
  return out;
}

GestureSequence load_sequence(const ManifestEntry &entry) {
  GestureSequence seq;
  seq.id = entry.id;
  seq.label = entry.label_index;
  seq.label_name = entry.label;
  seq.subject = entry.subject;
  seq.face_bbox = entry.face_bbox;
  for (const auto &file : list_frame_files(entry.path)) seq.frames.push_back(read_image(file));
  if (entry.start) return cut_isolated(seq, *entry.start, *entry.end);
  return seq;
}

namespace {

std::map<int, std::vector<int>> group_by_class(std::span<const int> labels) {
  std::map<int, std::vector<int>> groups;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) groups[labels[i]].push_back(i);
  return groups;
}

} // namespace

SplitPlan stratified_split(std::span<const int> labels, double test_frac, std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0))
    throw ConfigError("test fraction must lie in (0, 1)");
  SplitPlan plan;
  plan.seed = seed;
  Rng rng = make_rng(seed, 0x5917);
  for (auto &[label, idx] : group_by_class(labels)) {
    const int n = static_cast<int>(idx.size());
    if (n < 2)
      throw StratificationError("class " + std::to_string(label) + " has fewer than 2 samples");
    shuffle(idx, rng);
    const int n_test = std::clamp(static_cast<int>(std::lround(n * test_frac)), 1, n - 1);
    plan.test.insert(plan.test.end(), idx.begin(), idx.begin() + n_test);
    plan.train.insert(plan.train.end(), idx.begin() + n_test, idx.end());
  }
  std::sort(plan.train.begin(), plan.train.end());
  std::sort(plan.test.begin(), plan.test.end());
  return plan;
}

std::vector<SplitPlan> kfold(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
  Rng rng = make_rng(seed, 0xF01D);
  int offset = 0;
  for (auto &[label, idx] : group_by_class(labels)) {
    if (static_cast<int>(idx.size()) < k)
      throw StratificationError("class " + std::to_string(label) + " has fewer than k samples");
    shuffle(idx, rng);
    // Rotating the starting fold per class keeps fold totals balanced.
    for (std::size_t j = 0; j < idx.size(); ++j) folds[(offset + j) % k].push_back(idx[j]);
    offset = static_cast<int>((offset + idx.size()) % k);
  }
  std::vector<SplitPlan> plans;
  for (int f = 0; f < k; ++f) {
    SplitPlan p;
    p.seed = seed;
    p.fold = f;
    p.test = folds[f];
    for (int g = 0; g < k; ++g)
      if (g != f) p.train.insert(p.train.end(), folds[g].begin(), folds[g].end());
    std::sort(p.train.begin(), p.train.end());
    std::sort(p.test.begin(), p.test.end());
    plans.push_back(std::move(p));
  }
  return plans;
}

SplitPlan subject_holdout_split(std::span<const std::string> subjects, double test_frac,
                                std::uint64_t seed) {
  if (!(test_frac > 0.0 && test_frac < 1.0))
    throw ConfigError("test fraction must lie in (0, 1)");
  std::vector<std::string> unique(subjects.begin(), subjects.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (unique.size() < 2) throw StratificationError("subject hold-out needs at least 2 subjects");
  Rng rng = make_rng(seed, 0x50B);
  shuffle(unique, rng);
  const int n = static_cast<int>(unique.size());
  const int n_test = std::clamp(static_cast<int>(std::lround(n * test_frac)), 1, n - 1);
  const std::set<std::string> held(unique.begin(), unique.begin() + n_test);
  SplitPlan plan;
  plan.seed = seed;
  plan.stratified = false;
  for (int i = 0; i < static_cast<int>(subjects.size()); ++i)
    (held.count(subjects[i]) ? plan.test : plan.train).push_back(i);
  return plan;
}

json to_json(const SplitPlan &plan) {
  return json{{"train", plan.train}, {"test", plan.test},        {"seed", plan.seed},
              {"stratified", plan.stratified}, {"fold", plan.fold}};
}

SplitPlan split_from_json(const json &j) {
  SplitPlan p;
  p.train = j.at("train").get<std::vector<int>>();
  p.test = j.at("test").get<std::vector<int>>();
  p.seed = j.value("seed", std::uint64_t{0});
  p.stratified = j.value("stratified", true);
  p.fold = j.value("fold", -1);
  return p;
}

} // namespace snapture
