#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "commands.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using snapture::cli::run;

namespace {

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path &p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string &name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

const std::vector<std::string> kModel{"--input-width", "32", "--input-height", "24", "--hidden",
                                      "8",  "--cnn-ff",      "16", "--fusion",       "16"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string> &b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

} // namespace

TEST_CASE("cli: synth, profile, snapshot, train, eval") {
  TempDir tmp("snapture_cli_test");
  const auto corpus = (tmp.path / "corpus").string(), manifest = (tmp.path / "corpus" / "manifest.jsonl").string();
  REQUIRE(run({"synth", "--out", corpus, "--preset", "benchmark", "--seed", "2", "--per-class", "4",
               "--width", "64", "--height", "48"}) == 0);
  CHECK(lines(manifest).size() == 17);

  const auto prof = tmp.path / "profile";
  REQUIRE(run({"profile", "--manifest", manifest, "--out", prof.string()}) == 0);
  CHECK(lines(prof / "profile.csv").size() == 1 + 16 * 15);
  CHECK(lines(prof / "summary.csv").size() == 17);
  const auto gate = json::parse(slurp(prof / "gate.json"));
  CHECK(gate.contains("threshold"));

  const auto snap = tmp.path / "snap";
  REQUIRE(run({"snapshot", "--manifest", manifest, "--out", snap.string(), "--calibrate-frac", "0.5"}) == 0);
  const auto rows = lines(snap / "snapshots.csv");
  REQUIRE(rows.size() == 17);
  int files = 0;
  for (const auto &e : fs::directory_iterator(snap / "snapshots")) files += e.path().extension() == ".pgm";
  CHECK(files > 0);
  CHECK(files < 16);

  const auto train_dir = tmp.path / "train";
  const auto train_args = with({"train", "--manifest", manifest, "--out", train_dir.string(), "--seed", "3",
                                "--epochs", "2", "--batch", "4", "--variant", "snapture"},
                               kModel);
  REQUIRE(run(train_args) == 0);
  for (const char *f : {"checkpoint.bin", "loss.csv", "metrics.json", "confusion.csv", "split.json", "timing.json"})
    CHECK(fs::exists(train_dir / f));
  CHECK(lines(train_dir / "loss.csv").size() == 3);

  const auto eval_dir = tmp.path / "eval";
  REQUIRE(run({"eval", "--manifest", manifest, "--out", eval_dir.string(), "--checkpoint",
               (train_dir / "checkpoint.bin").string(), "--split", (train_dir / "split.json").string()}) == 0);
  const auto em = json::parse(slurp(eval_dir / "metrics.json")), tm = json::parse(slurp(train_dir / "metrics.json"));
  for (const char *k : {"accuracy", "macro_f1", "per_class_f1", "confusion", "classes", "variant"}) CHECK(em[k] == tm[k]);
  CHECK(slurp(eval_dir / "confusion.csv") == slurp(train_dir / "confusion.csv"));
  CHECK(lines(eval_dir / "predictions.csv").size() ==
        1 + json::parse(slurp(train_dir / "split.json"))["test"].size());

  // Same seed, byte-identical artifacts.
  const auto again = tmp.path / "train2";
  auto args2 = train_args;
  args2[4] = again.string();
  REQUIRE(run(args2) == 0);
  for (const char *f : {"checkpoint.bin", "loss.csv", "metrics.json", "confusion.csv", "split.json"})
    CHECK(slurp(train_dir / f) == slurp(again / f));

  // Thold with a calibrated gate stores the threshold in the checkpoint config.
  const auto thold = tmp.path / "thold";
  REQUIRE(run(with({"train", "--manifest", manifest, "--out", thold.string(), "--seed", "3", "--epochs", "1",
                    "--batch", "4", "--variant", "snapture-thold", "--calibrate-frac", "0.5"},
                   kModel)) == 0);
  CHECK(json::parse(slurp(thold / "metrics.json")).contains("accuracy"));
}

TEST_CASE("cli: report over two variants") {
  TempDir tmp("snapture_cli_report");
  const auto corpus = tmp.path / "corpus";
  REQUIRE(run({"synth", "--out", corpus.string(), "--preset", "benchmark", "--seed", "4", "--per-class", "3",
               "--width", "64", "--height", "48"}) == 0);
  std::ofstream(tmp.path / "report.ini") << "[report]\nepochs=1\nbatch=4\ntrials=3\n";
  const auto out = tmp.path / "report";
  REQUIRE(run(with({"--config", (tmp.path / "report.ini").string(), "report", "--manifest",
                    (corpus / "manifest.jsonl").string(), "--out", out.string(), "--seed", "1", "--trials", "2",
                    "--variants", "cnnlstm", "snapture"},
                   kModel)) == 0);
  const auto r = json::parse(slurp(out / "report.json"));
  REQUIRE(r["variants"].size() == 2);
  CHECK(r["variants"][0]["trials"].size() == 2); // the flag beats the config file
  CHECK(lines(out / "comparison.csv").size() == 3);
  CHECK(fs::exists(out / "trials" / "snapture_trial1.json"));
  CHECK(fs::exists(out / "confusion_cnnlstm.csv"));
}

TEST_CASE("cli: empty manifests and bad input") {
  TempDir tmp("snapture_cli_empty");
  const auto manifest = tmp.path / "m.jsonl";
  std::ofstream(manifest) << "{\"classes\": [\"a\", \"b\"]}\n";
  REQUIRE(run({"profile", "--manifest", manifest.string(), "--out", (tmp.path / "p").string()}) == 0);
  CHECK(lines(tmp.path / "p" / "profile.csv").size() == 1);
  CHECK(lines(tmp.path / "p" / "summary.csv").size() == 1);
  REQUIRE(run({"snapshot", "--manifest", manifest.string(), "--out", (tmp.path / "s").string()}) == 0);
  CHECK(lines(tmp.path / "s" / "snapshots.csv").size() == 1);

  CHECK(run({"train", "--manifest", manifest.string(), "--out", (tmp.path / "t").string(), "--seed", "1"}) != 0);
  CHECK(run({"profile", "--manifest", (tmp.path / "missing.jsonl").string(), "--out", (tmp.path / "q").string()}) != 0);
  CHECK(run({"train", "--manifest", manifest.string(), "--out", (tmp.path / "t").string()}) != 0); // no seed
  CHECK(run({"snapshot", "--manifest", manifest.string(), "--out", (tmp.path / "s").string(), "--threshold", "0.1",
             "--calibrate-frac", "0.5"}) != 0);
  CHECK(run({"frobnicate"}) != 0);

  // A sequence without frames fails its row but not the rest.
  fs::create_directories(tmp.path / "empty_seq");
  std::ofstream(manifest) << "{\"classes\": [\"a\", \"b\"]}\n{\"path\": \"empty_seq\", \"label\": \"a\"}\n";
  CHECK(run({"profile", "--manifest", manifest.string(), "--out", (tmp.path / "p2").string()}) == 1);
  const auto summary = lines(tmp.path / "p2" / "summary.csv");
  REQUIRE(summary.size() == 2);
  CHECK(summary[1].find("empty_seq") == 0);
}
