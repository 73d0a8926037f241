#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "pseudocyl/image.hpp"

namespace pseudocyl {

class ImageIoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads an 8-bit PNG. Grayscale files load as one channel, everything else as RGB
/// (alpha is composited away by libpng). Samples are value / 255.
inline PlaneImage read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw ImageIoError("cannot read PNG '" + path.string() + "': " + image.message);
  }
  const bool gray = (image.format & PNG_FORMAT_FLAG_COLOR) == 0;
  image.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw ImageIoError("cannot decode PNG '" + path.string() + "': " + msg);
  }
  const int rows = static_cast<int>(image.height);
  const int cols = static_cast<int>(image.width);
  const int channels = gray ? 1 : 3;
  PlaneImage out(rows, cols, channels);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        out.at(r, c, ch) = buffer[(static_cast<std::size_t>(r) * cols + c) * channels + ch] / 255.0;
      }
    }
  }
  return out;
}

/// Writes an 8-bit PNG (1 channel → gray, 3 channels → RGB). Samples are clamped
/// to [0, 1] and rounded to the nearest 8-bit code.
inline void write_png(const std::filesystem::path& path, const PlaneImage& img) {
  if (img.channels() != 1 && img.channels() != 3) {
    throw ImageIoError("write_png: only 1- or 3-channel images are supported");
  }
  if (img.rows() == 0 || img.cols() == 0) throw ImageIoError("write_png: empty image");
  const int channels = img.channels();
  std::vector<std::uint8_t> buffer(static_cast<std::size_t>(img.rows()) * img.cols() * channels);
  for (int r = 0; r < img.rows(); ++r) {
    for (int c = 0; c < img.cols(); ++c) {
      for (int ch = 0; ch < channels; ++ch) {
        const double v = std::clamp(img.at(r, c, ch), 0.0, 1.0);
        buffer[(static_cast<std::size_t>(r) * img.cols() + c) * channels + ch] =
            static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
    }
  }
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.cols());
  image.height = static_cast<png_uint_32>(img.rows());
  image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.c_str(), 0, buffer.data(), 0, nullptr)) {
    throw ImageIoError("cannot write PNG '" + path.string() + "': " + image.message);
  }
}

}  // namespace pseudocyl
