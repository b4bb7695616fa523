#include "stsim/tensor_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "stsim/core.hpp"

namespace stsim {

namespace {

constexpr std::array<char, 4> kMagic{'S', 'T', 'S', 'N'};

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kF32; }
template <>
constexpr DType dtype_of<double>() { return DType::kF64; }

template <typename U>
void put_le(std::ostream& out, U value) {
  std::array<unsigned char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<unsigned char>((value >> (8 * i)) & 0xFF);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

template <typename U>
U get_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  if (!in.read(reinterpret_cast<char*>(bytes.data()), bytes.size())) throw InvalidInput("truncated tensor header");
  U value = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
  return value;
}

template <typename T>
using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace

template <typename T>
std::size_t Tensor<T>::element_count() const {
  std::size_t n = 1;
  for (std::uint64_t d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t) {
  if (t.dims.size() > 255) throw InvalidInput("tensor rank exceeds 255");
  if (t.element_count() != t.data.size()) throw InvalidInput("tensor dims do not match payload size");
  out.write(kMagic.data(), kMagic.size());
  put_le<std::uint16_t>(out, kTensorVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(dtype_of<T>()));
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
  for (std::uint64_t d : t.dims) put_le<std::uint64_t>(out, d);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * sizeof(T)));
  } else {
    for (T v : t.data) put_le<Bits<T>>(out, std::bit_cast<Bits<T>>(v));
  }
  if (!out) throw InvalidInput("failed to write tensor");
}

template <typename T>
Tensor<T> read_tensor(std::istream& in) {
  std::array<char, 4> magic{};
  if (!in.read(magic.data(), magic.size()) || magic != kMagic) throw InvalidInput("bad tensor magic");
  const auto version = get_le<std::uint16_t>(in);
  if (version != kTensorVersion) throw InvalidInput("unsupported tensor version " + std::to_string(version));
  const auto dtype = get_le<std::uint8_t>(in);
  if (dtype != static_cast<std::uint8_t>(dtype_of<T>())) {
    throw InvalidInput("tensor dtype code " + std::to_string(dtype) + " does not match the requested type");
  }
  const auto ndim = get_le<std::uint8_t>(in);
  Tensor<T> t;
  t.dims.resize(ndim);
  for (auto& d : t.dims) d = get_le<std::uint64_t>(in);
  t.data.resize(t.element_count());
  if constexpr (std::endian::native == std::endian::little) {
    const auto bytes = static_cast<std::streamsize>(t.data.size() * sizeof(T));
    if (!in.read(reinterpret_cast<char*>(t.data.data()), bytes)) throw InvalidInput("truncated tensor payload");
  } else {
    for (T& v : t.data) v = std::bit_cast<T>(get_le<Bits<T>>(in));
  }
  return t;
}

bool has_tensor(std::istream& in) {
  return in.peek() != std::char_traits<char>::eof();
}

template <typename T>
void save_tensors(const std::filesystem::path& path, const std::vector<Tensor<T>>& blocks) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InvalidInput("cannot open " + path.string() + " for writing");
  for (const auto& b : blocks) write_tensor(out, b);
}

template <typename T>
std::vector<Tensor<T>> load_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::vector<Tensor<T>> blocks;
  while (has_tensor(in)) blocks.push_back(read_tensor<T>(in));
  return blocks;
}

template struct Tensor<float>;
template struct Tensor<double>;
template void write_tensor(std::ostream&, const Tensor<float>&);
template void write_tensor(std::ostream&, const Tensor<double>&);
template Tensor<float> read_tensor(std::istream&);
template Tensor<double> read_tensor(std::istream&);
template void save_tensors(const std::filesystem::path&, const std::vector<Tensor<float>>&);
template void save_tensors(const std::filesystem::path&, const std::vector<Tensor<double>>&);
template std::vector<Tensor<float>> load_tensors(const std::filesystem::path&);
template std::vector<Tensor<double>> load_tensors(const std::filesystem::path&);

}  // namespace stsim
