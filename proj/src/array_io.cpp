#include "cgforge/array_io.hpp"

#include <bit>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "array files are little-endian; byte swapping is not implemented");

namespace cgforge::array_io {

namespace {

void save_impl(const std::string& base, const void* data, std::int64_t rows, std::int64_t cols,
               std::size_t elem, const char* dtype) {
  std::ofstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + base + ".bin");
  bin.write(static_cast<const char*>(data),
            static_cast<std::streamsize>(elem * static_cast<std::size_t>(rows * cols)));
  nlohmann::json j = {{"rows", rows}, {"cols", cols}, {"dtype", dtype}};
  std::ofstream meta(base + ".json");
  if (!meta) throw std::runtime_error("cannot write " + base + ".json");
  meta << j.dump() << "\n";
}

}  // namespace

void save_array(const std::string& base, const float* data, std::int64_t rows,
                std::int64_t cols) {
  save_impl(base, data, rows, cols, sizeof(float), "fp32");
}

void save_array(const std::string& base, const double* data, std::int64_t rows,
                std::int64_t cols) {
  save_impl(base, data, rows, cols, sizeof(double), "fp64");
}

ArrayMeta read_meta(const std::string& base) {
  std::ifstream meta(base + ".json");
  if (!meta) throw std::runtime_error("cannot read " + base + ".json");
  nlohmann::json j;
  meta >> j;
  ArrayMeta m;
  m.rows = j.at("rows").get<std::int64_t>();
  m.cols = j.at("cols").get<std::int64_t>();
  m.dtype = j.at("dtype").get<std::string>();
  return m;
}

template <typename T>
std::vector<T> load_array(const std::string& base, ArrayMeta* meta_out) {
  const ArrayMeta m = read_meta(base);
  const char* expected = sizeof(T) == 4 ? "fp32" : "fp64";
  if (m.dtype != expected) {
    throw std::runtime_error(base + ": dtype is " + m.dtype + ", expected " + expected);
  }
  std::ifstream bin(base + ".bin", std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + base + ".bin");
  std::vector<T> data(static_cast<std::size_t>(m.rows * m.cols));
  bin.read(reinterpret_cast<char*>(data.data()),
           static_cast<std::streamsize>(sizeof(T) * data.size()));
  if (bin.gcount() != static_cast<std::streamsize>(sizeof(T) * data.size())) {
    throw std::runtime_error(base + ".bin: file shorter than the sidecar promises");
  }
  if (meta_out) *meta_out = m;
  return data;
}

template std::vector<float> load_array<float>(const std::string&, ArrayMeta*);
template std::vector<double> load_array<double>(const std::string&, ArrayMeta*);

}  // namespace cgforge::array_io
