#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "polarpose/error.hpp"

namespace polarpose {

/// Dense row-major single-plane image. T is the per-pixel payload
/// (double for scalar maps, Eigen::Vector3d for 3-channel maps,
/// uint8_t for masks).
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, const T& fill = T{})
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0)
      throw InvalidInputError("image dimensions must be non-negative");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return pixels_.size(); }
  bool empty() const { return pixels_.empty(); }

  T& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const T& at(int x, int y) const {
    return pixels_[static_cast<std::size_t>(y) * width_ + x];
  }
  T& operator[](std::size_t i) { return pixels_[i]; }
  const T& operator[](std::size_t i) const { return pixels_[i]; }

  T* data() { return pixels_.data(); }
  const T* data() const { return pixels_.data(); }

  auto begin() { return pixels_.begin(); }
  auto end() { return pixels_.end(); }
  auto begin() const { return pixels_.begin(); }
  auto end() const { return pixels_.end(); }

  void fill(const T& value) { std::fill(pixels_.begin(), pixels_.end(), value); }

  template <typename U>
  bool same_size(const Image<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> pixels_;
};

using ImageF = Image<double>;
using ImageV3 = Image<Eigen::Vector3d>;
using ImageMask = Image<std::uint8_t>;  // 0 = false, 1 = true

inline std::size_t count_set(const ImageMask& mask) {
  std::size_t n = 0;
  for (auto v : mask) n += (v != 0);
  return n;
}

}  // namespace polarpose
