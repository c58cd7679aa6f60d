#include "csfuse/numcore/weights_io.hpp"

#include <bit>
#include <cstring>

#include "csfuse/core/error.hpp"
#include "csfuse/core/io.hpp"

namespace csfuse::numcore {
namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view b) : bytes_(b) {}

  void need(std::size_t n, const char* what) const {
    if (bytes_.size() - pos_ < n) throw DataError(std::string("weights file truncated reading ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  double f64() {
    need(8, "values");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return std::bit_cast<double>(v);
  }
  std::string str(std::size_t n) {
    need(n, "name");
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

NamedArray to_named_array(std::string name, const Tensor& t) {
  const Shape& s = t.shape();
  NamedArray a;
  a.name = std::move(name);
  a.dims = {static_cast<std::uint32_t>(s.n), static_cast<std::uint32_t>(s.c), static_cast<std::uint32_t>(s.h),
            static_cast<std::uint32_t>(s.w)};
  a.values.assign(t.data().begin(), t.data().end());
  return a;
}

Tensor to_tensor(const NamedArray& a) {
  if (a.dims.size() != 4) {
    throw DataError("weights array '" + a.name + "' has " + std::to_string(a.dims.size()) + " dims, expected 4");
  }
  return Tensor(Shape{a.dims[0], a.dims[1], a.dims[2], a.dims[3]}, a.values);
}

std::string encode_weights(const std::vector<NamedArray>& arrays) {
  std::string out = "CSGW";
  put_u32(out, kWeightsVersion);
  put_u32(out, static_cast<std::uint32_t>(arrays.size()));
  for (const NamedArray& a : arrays) {
    std::size_t count = 1;
    for (auto d : a.dims) count *= d;
    if (count != a.values.size()) throw ShapeError("weights array '" + a.name + "': dims do not match value count");
    put_u32(out, static_cast<std::uint32_t>(a.name.size()));
    out += a.name;
    put_u32(out, static_cast<std::uint32_t>(a.dims.size()));
    for (auto d : a.dims) put_u32(out, d);
    for (double v : a.values) put_f64(out, v);
  }
  return out;
}

std::vector<NamedArray> decode_weights(std::string_view bytes) {
  if (bytes.size() < 4 || bytes.substr(0, 4) != "CSGW") throw DataError("not a CSGW weights file (bad magic)");
  Reader r(bytes.substr(4));
  const std::uint32_t version = r.u32("version");
  if (version != kWeightsVersion) throw DataError("unsupported weights version " + std::to_string(version));
  const std::uint32_t n = r.u32("array count");
  std::vector<NamedArray> arrays;
  arrays.reserve(n);
  for (std::uint32_t k = 0; k < n; ++k) {
    NamedArray a;
    a.name = r.str(r.u32("name length"));
    const std::uint32_t nd = r.u32("ndims");
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < nd; ++i) {
      a.dims.push_back(r.u32("dims"));
      count *= a.dims.back();
    }
    r.need(count * 8, "values");
    a.values.resize(count);
    for (double& v : a.values) v = r.f64();
    arrays.push_back(std::move(a));
  }
  if (!r.done()) throw DataError("trailing bytes after weights payload");
  return arrays;
}

void save_weights(const std::filesystem::path& path, const std::vector<NamedArray>& arrays) {
  io::atomic_write(path, encode_weights(arrays));
}

std::vector<NamedArray> load_weights(const std::filesystem::path& path) { return decode_weights(io::read_file(path)); }

}  // namespace csfuse::numcore
