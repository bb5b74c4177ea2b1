#pragma once

#include <filesystem>

#include "advpatch/image.hpp"

namespace advpatch {

/// Reads an 8-bit PNG as RGB with v = byte / 255. Grey, palette and alpha
/// inputs are expanded or stripped to RGB. Throws ParseError on failure.
Image read_png(const std::filesystem::path& path);

/// Writes an 8-bit RGB PNG, byte = round(255 * clamp(v, 0, 1)). Output bytes
/// depend only on the pixel values.
void write_png(const std::filesystem::path& path, const Image& image);

}  // namespace advpatch
