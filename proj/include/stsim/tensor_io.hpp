#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace stsim {

/// "tns" block: magic STSN, u16 version, u8 dtype, u8 ndim, u64 dims, then a
/// little-endian row-major payload. A file may hold several blocks back to back.
enum class DType : std::uint8_t { kF32 = 1, kF64 = 2 };

inline constexpr std::uint16_t kTensorVersion = 1;

template <typename T>
struct Tensor {
  std::vector<std::uint64_t> dims;
  std::vector<T> data;

  std::size_t element_count() const;
  bool operator==(const Tensor&) const = default;
};

using TensorF32 = Tensor<float>;
using TensorF64 = Tensor<double>;

/// Throws InvalidInput when dims do not multiply to data.size().
template <typename T>
void write_tensor(std::ostream& out, const Tensor<T>& t);

/// Reads one block. Throws InvalidInput on a bad magic, version, dtype
/// mismatch or truncated payload.
template <typename T>
Tensor<T> read_tensor(std::istream& in);

/// True iff another block follows at the current position.
bool has_tensor(std::istream& in);

template <typename T>
void save_tensors(const std::filesystem::path& path, const std::vector<Tensor<T>>& blocks);

template <typename T>
std::vector<Tensor<T>> load_tensors(const std::filesystem::path& path);

}  // namespace stsim
