#ifndef CGFORGE_ARRAY_IO_HPP
#define CGFORGE_ARRAY_IO_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace cgforge {

/// Raw little-endian array files with a JSON sidecar `{rows, cols, dtype}`.
/// `base` names the pair base.bin / base.json; dtype is "fp32" or "fp64".
namespace array_io {

struct ArrayMeta {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::string dtype;
};

void save_array(const std::string& base, const float* data, std::int64_t rows, std::int64_t cols);
void save_array(const std::string& base, const double* data, std::int64_t rows, std::int64_t cols);

ArrayMeta read_meta(const std::string& base);

template <typename T>
std::vector<T> load_array(const std::string& base, ArrayMeta* meta_out = nullptr);

extern template std::vector<float> load_array<float>(const std::string&, ArrayMeta*);
extern template std::vector<double> load_array<double>(const std::string&, ArrayMeta*);

}  // namespace array_io
}  // namespace cgforge

#endif
