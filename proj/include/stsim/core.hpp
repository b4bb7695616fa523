#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace stsim {

/// Raised when a caller violates an operation's preconditions.
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a numerical state becomes non-finite or a solve cannot proceed.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Row-major 2D grid. Index (x, y) addresses column x of row y.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t width, std::size_t height, T fill = T{})
      : width_(width), height_(height), data_(width * height, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t x, std::size_t y) { return data_[y * width_ + x]; }
  const T& operator()(std::size_t x, std::size_t y) const { return data_[y * width_ + x]; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::vector<T>& values() { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool same_shape(std::size_t w, std::size_t h) const { return w == width_ && h == height_; }

  bool operator==(const Grid&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<unsigned char>;

/// Interleaved RGB image with float channels in [0, 1].
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(std::size_t width, std::size_t height, float fill = 0.0f)
      : width_(width), height_(height), data_(width * height * 3, fill) {}

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t x, std::size_t y, std::size_t c) { return data_[(y * width_ + x) * 3 + c]; }
  float at(std::size_t x, std::size_t y, std::size_t c) const {
    return data_[(y * width_ + x) * 3 + c];
  }

  void set_pixel(std::size_t x, std::size_t y, float r, float g, float b) {
    float* p = &data_[(y * width_ + x) * 3];
    p[0] = r;
    p[1] = g;
    p[2] = b;
  }

  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }

  bool operator==(const RgbImage&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<float> data_;
};

}  // namespace stsim
