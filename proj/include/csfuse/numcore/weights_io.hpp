#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "csfuse/numcore/tensor.hpp"

namespace csfuse::numcore {

inline constexpr std::uint32_t kWeightsVersion = 1;

struct NamedArray {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;
};

NamedArray to_named_array(std::string name, const Tensor& t);
/// Requires exactly four dims.
Tensor to_tensor(const NamedArray& a);

std::string encode_weights(const std::vector<NamedArray>& arrays);
/// Throws DataError on bad magic, unknown version, truncation or trailing bytes.
std::vector<NamedArray> decode_weights(std::string_view bytes);

void save_weights(const std::filesystem::path& path, const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_weights(const std::filesystem::path& path);

}  // namespace csfuse::numcore
