#include "snapture/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "snapture/image_io.hpp"

namespace snapture::nn {

namespace {

constexpr std::string_view kMagic = "SNAPTURE-CHECKPOINT 1";

void put_le32(std::string &out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
}

float get_le32(const unsigned char *p) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(p[b]) << (8 * b);
  return std::bit_cast<float>(bits);
}

} // namespace

const NamedTensor &Checkpoint::at(const std::string &name) const {
  for (const auto &t : tensors)
    if (t.name == name) return t;
  throw CheckpointError("checkpoint has no tensor '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint &ckpt) {
  std::string header = std::string(kMagic) + "\n";
  header += "config " + ckpt.config.dump() + "\n";
  std::size_t offset = 0;
  for (const auto &t : ckpt.tensors) {
    if (static_cast<Index>(t.data.size()) != shape_size(t.shape))
      throw CheckpointError("tensor '" + t.name + "' data does not match its shape");
    if (t.name.empty() || t.name.find_first_of(" \n") != std::string::npos)
      throw CheckpointError("tensor names must be non-empty and contain no whitespace");
    header += "tensor " + t.name + " " + std::to_string(t.shape.size());
    for (Index d : t.shape) header += " " + std::to_string(d);
    header += " " + std::to_string(offset) + "\n";
    offset += t.data.size();
  }
  header += "end " + std::to_string(offset) + "\n";
  std::string out = header;
  out.reserve(header.size() + 4 * offset);
  for (const auto &t : ckpt.tensors)
    for (float v : t.data) put_le32(out, v);
  return out;
}

Checkpoint decode_checkpoint(std::string_view bytes) {
  std::size_t pos = 0;
  auto next_line = [&]() -> std::string {
    const auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) throw CheckpointError("truncated checkpoint header");
    std::string line(bytes.substr(pos, nl - pos));
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw CheckpointError("not a snapture checkpoint (bad magic/version)");

  Checkpoint ckpt;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;
  for (;;) {
    const std::string line = next_line();
    if (line.rfind("config ", 0) == 0) {
      ckpt.config = nlohmann::json::parse(line.substr(7));
    } else if (line.rfind("tensor ", 0) == 0) {
      std::istringstream in(line.substr(7));
      NamedTensor t;
      std::size_t rank = 0, offset = 0;
      in >> t.name >> rank;
      t.shape.resize(rank);
      for (auto &d : t.shape) in >> d;
      in >> offset;
      if (!in) throw CheckpointError("malformed tensor line: " + line);
      offsets.push_back(offset);
      ckpt.tensors.push_back(std::move(t));
    } else if (line.rfind("end ", 0) == 0) {
      total = std::stoull(line.substr(4));
      break;
    } else {
      throw CheckpointError("unexpected checkpoint header line: " + line);
    }
  }
  if (bytes.size() - pos != 4 * total) throw CheckpointError("checkpoint blob size mismatch");
  const auto *blob = reinterpret_cast<const unsigned char *>(bytes.data() + pos);
  for (std::size_t k = 0; k < ckpt.tensors.size(); ++k) {
    auto &t = ckpt.tensors[k];
    const auto n = static_cast<std::size_t>(shape_size(t.shape));
    if (offsets[k] + n > total) throw CheckpointError("tensor '" + t.name + "' exceeds blob");
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.data[i] = get_le32(blob + 4 * (offsets[k] + i));
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str());
}

} // namespace snapture::nn
