#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include "snapture/imaging.hpp"

namespace snapture {

/// Decodes binary PGM (P5), binary PPM (P6) or 8-bit PNG. PNG alpha is
/// dropped; gray+alpha becomes gray.
Frame read_image(const std::filesystem::path &path);

/// P5 for 1-channel frames, P6 for 3-channel frames.
void write_pnm(const std::filesystem::path &path, const Frame &frame);
std::vector<unsigned char> encode_pnm(const Frame &frame);
Frame decode_pnm(std::span<const unsigned char> bytes);

/// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path &path, std::string_view contents);

/// Sorted frame files (.pgm, .ppm, .png) inside a sequence directory.
std::vector<std::filesystem::path> list_frame_files(const std::filesystem::path &dir);

} // namespace snapture
