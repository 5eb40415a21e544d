#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "csrobust/error.hpp"

namespace csr {

using cplx = std::complex<double>;

// Row-major 2D array.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width), data_(static_cast<std::size_t>(height) * width, fill) {
    require(height >= 0 && width >= 0, ErrorCode::InvalidSpec, "negative image dimensions");
  }

  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int row, int col) { return data_[static_cast<std::size_t>(row) * width_ + col]; }
  const T& operator()(int row, int col) const {
    return data_[static_cast<std::size_t>(row) * width_ + col];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Grid& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }
  bool operator==(const Grid&) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<T> data_;
};

using ComplexImage = Grid<cplx>;
using RealImage = Grid<double>;

// n_coils x height x width complex samples, coils outermost.
class CoilStack {
 public:
  CoilStack() = default;
  CoilStack(int n_coils, int height, int width)
      : n_coils_(n_coils), height_(height), width_(width),
        data_(static_cast<std::size_t>(n_coils) * height * width) {
    require(n_coils >= 0 && height >= 0 && width >= 0, ErrorCode::InvalidSpec,
            "negative coil stack dimensions");
  }

  int n_coils() const { return n_coils_; }
  int height() const { return height_; }
  int width() const { return width_; }
  std::size_t plane_size() const { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const { return data_.size(); }

  cplx& operator()(int coil, int row, int col) {
    return data_[coil * plane_size() + static_cast<std::size_t>(row) * width_ + col];
  }
  const cplx& operator()(int coil, int row, int col) const {
    return data_[coil * plane_size() + static_cast<std::size_t>(row) * width_ + col];
  }

  std::span<cplx> coil(int i) { return {data_.data() + i * plane_size(), plane_size()}; }
  std::span<const cplx> coil(int i) const {
    return {data_.data() + i * plane_size(), plane_size()};
  }
  ComplexImage coil_image(int i) const {
    ComplexImage out(height_, width_);
    auto src = coil(i);
    std::copy(src.begin(), src.end(), out.values().begin());
    return out;
  }
  void set_coil(int i, const ComplexImage& img) {
    require(img.height() == height_ && img.width() == width_, ErrorCode::ShapeMismatch,
            "coil image shape mismatch");
    std::copy(img.values().begin(), img.values().end(), coil(i).begin());
  }

  std::span<cplx> values() { return data_; }
  std::span<const cplx> values() const { return data_; }

  bool same_shape(const CoilStack& o) const {
    return n_coils_ == o.n_coils_ && height_ == o.height_ && width_ == o.width_;
  }
  bool operator==(const CoilStack&) const = default;

 private:
  int n_coils_ = 0;
  int height_ = 0;
  int width_ = 0;
  std::vector<cplx> data_;
};

struct KSpaceVolume : CoilStack {
  using CoilStack::CoilStack;
  KSpaceVolume() = default;
  explicit KSpaceVolume(CoilStack s) : CoilStack(std::move(s)) {}
};

struct CoilSensitivities : CoilStack {
  using CoilStack::CoilStack;
  CoilSensitivities() = default;
  explicit CoilSensitivities(CoilStack s) : CoilStack(std::move(s)) {}
};

inline double squared_norm(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& c : v) s += std::norm(c);
  return s;
}
inline double norm2(std::span<const cplx> v) { return std::sqrt(squared_norm(v)); }

inline RealImage magnitude(const ComplexImage& x) {
  RealImage out(x.height(), x.width());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = std::abs(x[i]);
  return out;
}

inline bool all_finite(std::span<const cplx> v) {
  for (const auto& c : v)
    if (!std::isfinite(c.real()) || !std::isfinite(c.imag())) return false;
  return true;
}

}  // namespace csr
