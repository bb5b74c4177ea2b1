#include "advpatch/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "advpatch/errors.hpp"

namespace advpatch {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

Image read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ParseError("cannot open PNG: " + path.string());

  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_stdio(&img, file.get())) {
    throw ParseError("invalid PNG " + path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buffer.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ParseError("cannot decode PNG " + path.string() + ": " + img.message);
  }
  Image out = make_image(static_cast<int>(img.height), static_cast<int>(img.width));
  auto values = out.values();
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = buffer[i] / 255.0;
  return out;
}

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.channels() != kRgb || image.empty()) throw InvalidArgument("write_png: expected an RGB image");
  std::vector<png_byte> buffer(image.size());
  const auto values = image.values();
  for (std::size_t i = 0; i < values.size(); ++i) {
    buffer[i] = static_cast<png_byte>(std::lround(std::clamp(values[i], 0.0, 1.0) * 255.0));
  }
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw ParseError("cannot write PNG " + path.string() + ": " + img.message);
  }
}

}  // namespace advpatch
