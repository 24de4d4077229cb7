#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapture/imaging.hpp"

namespace snapture {

/// An isolated gesture: frames from start to end of one performance.
struct GestureSequence {
  std::string id;
  int label = -1;
  std::string label_name;
  std::string subject;
  std::vector<Frame> frames;
  std::optional<BBox> face_bbox;

  std::size_t size() const noexcept { return frames.size(); }
};

struct ManifestEntry {
  std::string id;
  std::filesystem::path path; ///< sequence directory, resolved against the manifest location
  std::string label;
  int label_index = -1;
  std::string subject;
  std::optional<int> start;
  std::optional<int> end;
  std::optional<BBox> face_bbox;
};

struct Manifest {
  std::vector<std::string> classes;
  std::vector<ManifestEntry> entries;

  std::vector<int> labels() const;
};

/// JSON-lines manifest. An optional first line {"classes": [...]} declares the
/// class set (and its index order); labels outside it are rejected. Without it
/// the class set is the sorted set of labels that occur.
Manifest load_manifest(const std::filesystem::path &path);
Manifest parse_manifest(std::string_view text, const std::filesystem::path &base_dir = {});
std::string format_manifest(const Manifest &manifest, const std::filesystem::path &base_dir = {});

/// frames[start, end).
GestureSequence cut_isolated(const GestureSequence &sequence, int start, int end);

/// Reads the entry's frame files and applies its start/end cut.
GestureSequence load_sequence(const ManifestEntry &entry);

struct SplitPlan {
  std::vector<int> train;
  std::vector<int> test;
  std::uint64_t seed = 0;
  bool stratified = true;
  int fold = -1; ///< fold index for k-fold plans, -1 otherwise
};

/// Per-class shuffled allocation with round(n_c * test_frac) test samples per
/// class, clamped so both parts keep at least one sample of every class.
SplitPlan stratified_split(std::span<const int> labels, double test_frac, std::uint64_t seed);

/// k stratified folds; plan i tests on fold i.
std::vector<SplitPlan> kfold(std::span<const int> labels, int k, std::uint64_t seed);

/// Holds out whole subjects (about test_frac of them) for testing.
SplitPlan subject_holdout_split(std::span<const std::string> subjects, double test_frac,
                                std::uint64_t seed);

nlohmann::json to_json(const SplitPlan &plan);
SplitPlan split_from_json(const nlohmann::json &j);

} // namespace snapture
