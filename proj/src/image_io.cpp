#include "snapture/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <memory>
#include <string>

namespace snapture {

namespace fs = std::filesystem;

namespace {

std::vector<unsigned char> slurp(const fs::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageIoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct PnmCursor {
  std::span<const unsigned char> bytes;
  std::size_t pos = 0;

  void skip_space_and_comments() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  }

  int read_int() {
    skip_space_and_comments();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw ImageIoError("malformed PNM header");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > (1 << 24)) throw ImageIoError("PNM header value too large");
    }
    return static_cast<int>(v);
  }
};

Frame read_png(const fs::path &path) {
  std::unique_ptr<FILE, int (*)(FILE *)> fp(std::fopen(path.c_str(), "rb"), &std::fclose);
  if (!fp) throw ImageIoError("cannot open " + path.string());

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw ImageIoError("libpng init failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw ImageIoError("libpng init failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("failed to decode PNG " + path.string());
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_set_strip_16(png);
  png_set_strip_alpha(png);
  png_set_packing(png);
  const auto color = png_get_color_type(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8)
    png_set_expand_gray_1_2_4_to_8(png);
  png_read_update_info(png, info);

  const int width = static_cast<int>(png_get_image_width(png, info));
  const int height = static_cast<int>(png_get_image_height(png, info));
  const int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ImageIoError("unsupported PNG channel layout in " + path.string());
  }
  std::vector<std::uint8_t> data(static_cast<std::size_t>(width) * height * channels);
  std::vector<png_bytep> rows(height);
  for (int r = 0; r < height; ++r) rows[r] = data.data() + static_cast<std::size_t>(r) * width * channels;
  png_read_image(png, rows.data());
  png_destroy_read_struct(&png, &info, nullptr);
  return Frame(width, height, channels, std::move(data));
}

} // namespace

Frame decode_pnm(std::span<const unsigned char> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw ImageIoError("not a binary PGM/PPM");
  const int channels = bytes[1] == '5' ? 1 : 3;
  PnmCursor cur{bytes, 2};
  const int width = cur.read_int();
  const int height = cur.read_int();
  const int maxval = cur.read_int();
  if (maxval != 255) throw ImageIoError("only 8-bit PNM (maxval 255) is supported");
  ++cur.pos; // single whitespace before raster
  const std::size_t n = static_cast<std::size_t>(width) * height * channels;
  if (cur.pos + n > bytes.size()) throw ImageIoError("truncated PNM raster");
  std::vector<std::uint8_t> data(bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos),
                                 bytes.begin() + static_cast<std::ptrdiff_t>(cur.pos + n));
  return Frame(width, height, channels, std::move(data));
}

std::vector<unsigned char> encode_pnm(const Frame &frame) {
  const std::string header = std::string(frame.channels() == 1 ? "P5" : "P6") + "\n" +
                             std::to_string(frame.width()) + " " + std::to_string(frame.height()) +
                             "\n255\n";
  std::vector<unsigned char> out(header.begin(), header.end());
  out.insert(out.end(), frame.data().begin(), frame.data().end());
  return out;
}

Frame read_image(const fs::path &path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") return read_png(path);
  const auto bytes = slurp(path);
  return decode_pnm(bytes);
}

void write_file_atomic(const fs::path &path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ImageIoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw ImageIoError("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void write_pnm(const fs::path &path, const Frame &frame) {
  const auto bytes = encode_pnm(frame);
  write_file_atomic(path, std::string_view(reinterpret_cast<const char *>(bytes.data()), bytes.size()));
}

std::vector<fs::path> list_frame_files(const fs::path &dir) {
  if (!fs::is_directory(dir)) throw ImageIoError("not a sequence directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto &entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    auto ext = entry.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".pgm" || ext == ".ppm" || ext == ".png") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

} // namespace snapture
