#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "snapture/data.hpp"
#include "snapture/image_io.hpp"
#include "snapture/rng.hpp"

using namespace snapture;
namespace fs = std::filesystem;

namespace {

std::vector<int> labels_of(const std::vector<int> &per_class) {
  std::vector<int> labels;
  for (int c = 0; c < static_cast<int>(per_class.size()); ++c) labels.insert(labels.end(), per_class[c], c);
  // interleave so indices are not sorted by class
  Rng rng = make_rng(99);
  shuffle(labels, rng);
  return labels;
}

std::map<int, int> counts(const std::vector<int> &idx, const std::vector<int> &labels) {
  std::map<int, int> m;
  for (int i : idx) ++m[labels[i]];
  return m;
}

} // namespace

TEST_CASE("manifest parsing") {
  const std::string text = R"({"classes": ["stop", "come"]}
{"id": "a", "path": "seq_a", "label": "come", "subject": "s1", "start": 2, "end": 9, "face_bbox": [1, 2, 10, 12]}

{"path": "seq_b", "label": "stop"}
)";
  const auto m = parse_manifest(text, "/data");
  REQUIRE(m.entries.size() == 2);
  CHECK(m.classes == std::vector<std::string>{"stop", "come"});
  CHECK(m.entries[0].label_index == 1);
  CHECK(m.entries[0].path == fs::path("/data/seq_a"));
  CHECK(m.entries[0].start == 2);
  CHECK(m.entries[0].face_bbox == BBox{1, 2, 10, 12});
  CHECK(m.entries[1].id == "seq_b");
  CHECK(m.labels() == std::vector<int>{1, 0});

  const auto again = parse_manifest(format_manifest(m, "/data"), "/data");
  CHECK(again.classes == m.classes);
  REQUIRE(again.entries.size() == 2);
  CHECK(again.entries[0].path == m.entries[0].path);
  CHECK(again.entries[0].end == 9);
  CHECK(again.entries[1].subject.empty());

  const auto implicit = parse_manifest("{\"path\": \"x\", \"label\": \"b\"}\n{\"path\": \"y\", \"label\": \"a\"}\n");
  CHECK(implicit.classes == std::vector<std::string>{"a", "b"});
  CHECK(implicit.labels() == std::vector<int>{1, 0});
  CHECK(parse_manifest("").entries.empty());
}

TEST_CASE("manifest errors carry the row") {
  auto row_of = [](const std::string &text) {
    try {
      parse_manifest(text);
    } catch (const ManifestParseError &e) {
      return static_cast<int>(e.row());
    }
    return -1;
  };
  CHECK(row_of("{\"path\": \"x\", \"label\": \"a\"}\nnot json\n") == 2);
  CHECK(row_of("{\"label\": \"a\"}\n") == 1);
  CHECK(row_of("{\"classes\": [\"a\"]}\n{\"path\": \"x\", \"label\": \"b\"}\n") == 2);
  CHECK(row_of("{\"path\": \"x\", \"label\": \"a\", \"start\": 3}\n") == 1);
  CHECK(row_of("{\"path\": \"x\", \"label\": \"a\", \"start\": 3, \"end\": 3}\n") == 1);
  CHECK(row_of("{\"classes\": [\"a\", \"a\"]}\n") == 1);
  CHECK(row_of("[1, 2]\n") == 1);
}

TEST_CASE("isolated gestures are cut by frame range") {
  GestureSequence s;
  s.id = "cut";
  s.label = 3;
  for (int i = 0; i < 12; ++i) s.frames.emplace_back(4, 4, 1, static_cast<std::uint8_t>(i));
  const auto c = cut_isolated(s, 2, 9);
  REQUIRE(c.size() == 7);
  CHECK(c.frames.front().at(0, 0) == 2);
  CHECK(c.frames.back().at(0, 0) == 8);
  CHECK(c.label == 3);
  CHECK(cut_isolated(s, 0, 12).size() == 12);
  CHECK_THROWS_AS(cut_isolated(s, 5, 5), IndexError);
  CHECK_THROWS_AS(cut_isolated(s, -1, 4), IndexError);
  CHECK_THROWS_AS(cut_isolated(s, 3, 13), IndexError);
}

TEST_CASE("sequences load from disk with the manifest cut") {
  const fs::path dir = fs::temp_directory_path() / "snapture_data_test";
  fs::remove_all(dir);
  fs::create_directories(dir / "seq");
  for (int i = 0; i < 6; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "frame_%03d.ppm", i);
    write_pnm(dir / "seq" / name, Frame(5, 4, 3, static_cast<std::uint8_t>(10 * i)));
  }
  std::ofstream(dir / "manifest.jsonl") << "{\"id\": \"q\", \"path\": \"seq\", \"label\": \"x\", \"start\": 1, \"end\": 4}\n";
  const auto m = load_manifest(dir / "manifest.jsonl");
  const auto s = load_sequence(m.entries.at(0));
  REQUIRE(s.size() == 3);
  CHECK(s.frames[0].at(0, 0, 2) == 10);
  CHECK(s.label == 0);
  CHECK_THROWS_AS(load_manifest(dir / "missing.jsonl"), ManifestParseError);
  fs::remove_all(dir);
}

TEST_CASE("stratified split") {
  const auto labels = labels_of({10, 7, 3, 2});
  const auto plan = stratified_split(labels, 0.3, 5);
  const auto tr = counts(plan.train, labels), te = counts(plan.test, labels);
  CHECK(te.at(0) == 3);
  CHECK(te.at(1) == 2);
  CHECK(te.at(2) == 1);
  CHECK(te.at(3) == 1);
  for (int c = 0; c < 4; ++c) CHECK(tr.at(c) >= 1);
  std::vector<int> all = plan.train;
  all.insert(all.end(), plan.test.begin(), plan.test.end());
  std::sort(all.begin(), all.end());
  CHECK(all == iota_indices(static_cast<int>(labels.size())));

  const auto same = stratified_split(labels, 0.3, 5);
  CHECK(same.train == plan.train);
  CHECK(same.test == plan.test);
  CHECK(to_json(plan) == to_json(split_from_json(to_json(plan))));
  bool differs = false;
  for (std::uint64_t s = 6; s < 12; ++s) differs |= stratified_split(labels, 0.3, s).test != plan.test;
  CHECK(differs);

  CHECK_THROWS_AS(stratified_split(labels_of({5, 1}), 0.3, 0), StratificationError);
  CHECK_THROWS_AS(stratified_split(labels, 1.0, 0), ConfigError);
}

TEST_CASE("k-fold plans partition the data") {
  const auto labels = labels_of({12, 9, 5});
  const auto plans = kfold(labels, 5, 11);
  REQUIRE(plans.size() == 5);
  std::vector<int> tested;
  for (const auto &p : plans) {
    tested.insert(tested.end(), p.test.begin(), p.test.end());
    CHECK(p.train.size() + p.test.size() == labels.size());
    CHECK(p.test.size() >= 5);
    CHECK(p.test.size() <= 6);
    for (const auto &[c, n] : counts(p.test, labels)) {
      const int total = c == 0 ? 12 : c == 1 ? 9 : 5;
      CHECK(n >= total / 5);
      CHECK(n <= (total + 4) / 5);
    }
    std::set<int> tr(p.train.begin(), p.train.end());
    for (int i : p.test) CHECK(tr.count(i) == 0);
  }
  std::sort(tested.begin(), tested.end());
  CHECK(tested == iota_indices(static_cast<int>(labels.size())));
  CHECK_THROWS_AS(kfold(labels, 6, 0), StratificationError);
  CHECK_THROWS_AS(kfold(labels, 1, 0), ConfigError);
}

TEST_CASE("subject hold-out keeps subjects on one side") {
  std::vector<std::string> subjects;
  for (int i = 0; i < 40; ++i) subjects.push_back("s" + std::to_string(i % 8));
  const auto plan = subject_holdout_split(subjects, 0.25, 3);
  std::set<std::string> tr, te;
  for (int i : plan.train) tr.insert(subjects[i]);
  for (int i : plan.test) te.insert(subjects[i]);
  CHECK(te.size() == 2);
  for (const auto &s : te) CHECK(tr.count(s) == 0);
  CHECK(plan.train.size() + plan.test.size() == 40);
}

TEST_CASE("split counting examples") {
  std::vector<int> forty;
  for (int c = 0; c < 4; ++c) forty.insert(forty.end(), 10, c);
  const auto plan = stratified_split(forty, 0.3, 0);
  for (const auto &[c, n] : counts(plan.test, forty)) CHECK(n == 3);
  CHECK_THROWS_AS(stratified_split(forty, 0.0, 0), ConfigError);

  std::vector<int> nine;
  for (int c = 0; c < 3; ++c) nine.insert(nine.end(), 9, c);
  for (const auto &p : kfold(nine, 3, 2))
    for (const auto &[c, n] : counts(p.test, nine)) CHECK(n == 3);
  CHECK(kfold(nine, 3, 2)[1].test == kfold(nine, 3, 2)[1].test);

  GestureSequence s;
  for (int i = 0; i < 10; ++i) s.frames.emplace_back(2, 2, 1, static_cast<std::uint8_t>(i));
  CHECK(cut_isolated(s, 2, 5).size() == 3);
  const auto once = cut_isolated(s, 2, 5);
  CHECK(cut_isolated(once, 0, 3).frames == once.frames);
}
