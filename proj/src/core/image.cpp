#include "csfuse/core/image.hpp"

#include <algorithm>
#include <cctype>
#include <limits>

#include "csfuse/core/error.hpp"
#include "csfuse/core/io.hpp"

namespace csfuse {
namespace {

struct PnmHeader {
  std::string magic;
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_header(std::string_view bytes) {
  PnmHeader hdr;
  std::size_t pos = 0;
  auto skip_space_and_comments = [&] {
    while (pos < bytes.size()) {
      if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else {
        break;
      }
    }
  };
  auto read_token = [&]() -> std::string {
    skip_space_and_comments();
    std::size_t start = pos;
    while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
    return std::string(bytes.substr(start, pos - start));
  };
  auto read_int = [&](const char* what) {
    const std::string tok = read_token();
    if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos) {
      throw DataError(std::string("malformed PNM header: bad ") + what);
    }
    const long v = std::stol(tok);
    if (v <= 0 || v > std::numeric_limits<int>::max()) {
      throw DataError(std::string("malformed PNM header: ") + what + " out of range");
    }
    return static_cast<int>(v);
  };
  hdr.magic = read_token();
  hdr.width = read_int("width");
  hdr.height = read_int("height");
  hdr.maxval = read_int("maxval");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw DataError("malformed PNM header: missing separator before raster");
  }
  hdr.data_offset = pos + 1;
  return hdr;
}

}  // namespace

std::string encode_ppm(const RgbImage& image) {
  std::string out = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(image.pixels.data()), image.pixels.size());
  return out;
}

RgbImage decode_ppm(std::string_view bytes) {
  const PnmHeader hdr = parse_header(bytes);
  if (hdr.magic != "P6") {
    throw DataError("not a binary PPM (P6): magic '" + hdr.magic + "'");
  }
  if (hdr.maxval != 255) {
    throw DataError("unsupported PPM maxval " + std::to_string(hdr.maxval) + " (expected 255)");
  }
  RgbImage img(hdr.width, hdr.height);
  if (bytes.size() - hdr.data_offset < img.pixels.size()) {
    throw DataError("truncated PPM raster");
  }
  std::copy_n(bytes.data() + hdr.data_offset, img.pixels.size(), reinterpret_cast<char*>(img.pixels.data()));
  return img;
}

std::string encode_pgm16(const Gray16Image& image) {
  std::string out = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n65535\n";
  out.reserve(out.size() + image.pixels.size() * 2);
  for (std::uint16_t v : image.pixels) {
    out.push_back(static_cast<char>(v >> 8));
    out.push_back(static_cast<char>(v & 0xFF));
  }
  return out;
}

Gray16Image decode_pgm(std::string_view bytes) {
  const PnmHeader hdr = parse_header(bytes);
  if (hdr.magic != "P5") {
    throw DataError("not a binary PGM (P5): magic '" + hdr.magic + "'");
  }
  if (hdr.maxval > 65535) {
    throw DataError("PGM maxval exceeds 65535");
  }
  Gray16Image img(hdr.width, hdr.height);
  const std::size_t n = img.pixels.size();
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data() + hdr.data_offset);
  const std::size_t avail = bytes.size() - hdr.data_offset;
  if (hdr.maxval < 256) {
    if (avail < n) throw DataError("truncated 8-bit PGM raster");
    for (std::size_t i = 0; i < n; ++i) {
      img.pixels[i] = static_cast<std::uint16_t>(raw[i] * 65535u / static_cast<unsigned>(hdr.maxval));
    }
  } else {
    if (avail < 2 * n) throw DataError("truncated 16-bit PGM raster");
    for (std::size_t i = 0; i < n; ++i) {
      const unsigned v = (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
      img.pixels[i] = static_cast<std::uint16_t>(
          hdr.maxval == 65535 ? v : static_cast<unsigned long>(v) * 65535ul / static_cast<unsigned>(hdr.maxval));
    }
  }
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& image) { io::atomic_write(path, encode_ppm(image)); }

RgbImage read_ppm(const std::filesystem::path& path) { return decode_ppm(io::read_file(path)); }

void write_pgm16(const std::filesystem::path& path, const Gray16Image& image) {
  io::atomic_write(path, encode_pgm16(image));
}

Gray16Image read_pgm(const std::filesystem::path& path) { return decode_pgm(io::read_file(path)); }

}  // namespace csfuse
