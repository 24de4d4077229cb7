#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "snapture/nn/tensor.hpp"

namespace snapture::nn {

struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

/// Text manifest (versioned header, config line, one line per tensor with
/// name/shape/offset) followed by a little-endian float32 blob.
struct Checkpoint {
  nlohmann::json config = nlohmann::json::object();
  std::vector<NamedTensor> tensors;

  const NamedTensor &at(const std::string &name) const;
};

std::string encode_checkpoint(const Checkpoint &ckpt);
Checkpoint decode_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
Checkpoint load_checkpoint(const std::filesystem::path &path);

} // namespace snapture::nn
