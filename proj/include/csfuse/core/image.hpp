#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace csfuse {

/// 8-bit RGB raster, interleaved, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

/// 16-bit single-channel raster (raw radiometric counts for thermal frames).
struct Gray16Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint16_t> pixels;

  Gray16Image() = default;
  Gray16Image(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint16_t& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::uint16_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

// Binary PPM (P6, maxval 255) and PGM (P5, maxval up to 65535, big-endian samples).
std::string encode_ppm(const RgbImage& image);
RgbImage decode_ppm(std::string_view bytes);
std::string encode_pgm16(const Gray16Image& image);
/// Accepts 8-bit or 16-bit P5; 8-bit samples are scaled to the 16-bit range.
Gray16Image decode_pgm(std::string_view bytes);

void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const Gray16Image& image);
Gray16Image read_pgm(const std::filesystem::path& path);

}  // namespace csfuse
