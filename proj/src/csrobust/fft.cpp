#include "csrobust/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <tuple>

namespace csr::fft {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
std::mutex plan_mutex;

fftw_plan dft_plan(int height, int width, int sign) {
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  std::lock_guard lock(plan_mutex);
  auto key = std::make_tuple(height, width, sign);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto* buf = fftw_alloc_complex(static_cast<std::size_t>(height) * width);
  fftw_plan p = fftw_plan_dft_2d(height, width, buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  require(p != nullptr, ErrorCode::Internal, "FFTW failed to create a DFT plan");
  cache.emplace(key, p);
  return p;
}

fftw_plan r2r_plan(int height, int width, fftw_r2r_kind kind) {
  static std::map<std::tuple<int, int, int>, fftw_plan> cache;
  std::lock_guard lock(plan_mutex);
  auto key = std::make_tuple(height, width, static_cast<int>(kind));
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  auto* buf = fftw_alloc_real(static_cast<std::size_t>(height) * width);
  fftw_plan p = fftw_plan_r2r_2d(height, width, buf, buf, kind, kind, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(buf);
  require(p != nullptr, ErrorCode::Internal, "FFTW failed to create an r2r plan");
  cache.emplace(key, p);
  return p;
}

// Circular shift by (dr, dc) with wrap-around.
void roll(std::span<cplx> data, int height, int width, int dr, int dc) {
  std::vector<cplx> tmp(data.begin(), data.end());
  for (int r = 0; r < height; ++r) {
    const int rr = ((r + dr) % height + height) % height;
    for (int c = 0; c < width; ++c) {
      const int cc = ((c + dc) % width + width) % width;
      data[static_cast<std::size_t>(rr) * width + cc] = tmp[static_cast<std::size_t>(r) * width + c];
    }
  }
}

void centered(std::span<cplx> data, int height, int width, int sign) {
  require(data.size() == static_cast<std::size_t>(height) * width, ErrorCode::ShapeMismatch,
          "fft buffer size does not match dimensions");
  if (data.empty()) return;
  roll(data, height, width, -(height / 2), -(width / 2));
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(dft_plan(height, width, sign), p, p);
  roll(data, height, width, height / 2, width / 2);
  const double scale = 1.0 / std::sqrt(static_cast<double>(height) * width);
  for (auto& v : data) v *= scale;
}

// Per-axis orthonormal DCT-II scaling relative to FFTW's unnormalized REDFT10.
double dct_axis_scale(int k, int n) {
  return (k == 0 ? 1.0 / std::sqrt(2.0) : 1.0) / std::sqrt(2.0 * n);
}

}  // namespace

void fft2c(std::span<cplx> data, int height, int width) { centered(data, height, width, FFTW_FORWARD); }
void ifft2c(std::span<cplx> data, int height, int width) { centered(data, height, width, FFTW_BACKWARD); }

ComplexImage fft2c(ComplexImage x) {
  fft2c(x.values(), x.height(), x.width());
  return x;
}

ComplexImage ifft2c(ComplexImage x) {
  ifft2c(x.values(), x.height(), x.width());
  return x;
}

void dct2(std::span<double> data, int height, int width) {
  require(data.size() == static_cast<std::size_t>(height) * width, ErrorCode::ShapeMismatch,
          "dct buffer size does not match dimensions");
  fftw_execute_r2r(r2r_plan(height, width, FFTW_REDFT10), data.data(), data.data());
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      data[static_cast<std::size_t>(r) * width + c] *= dct_axis_scale(r, height) * dct_axis_scale(c, width);
}

void idct2(std::span<double> data, int height, int width) {
  require(data.size() == static_cast<std::size_t>(height) * width, ErrorCode::ShapeMismatch,
          "dct buffer size does not match dimensions");
  // REDFT01 computes X_0 + 2 sum_k X_k cos(...); prescale so the result is the orthonormal DCT-III.
  auto pre = [](int k, int n) {
    return k == 0 ? 1.0 / std::sqrt(static_cast<double>(n)) : 1.0 / std::sqrt(2.0 * n);
  };
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c)
      data[static_cast<std::size_t>(r) * width + c] *= pre(r, height) * pre(c, width);
  fftw_execute_r2r(r2r_plan(height, width, FFTW_REDFT01), data.data(), data.data());
}

}  // namespace csr::fft
