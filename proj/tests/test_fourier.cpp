#include <doctest.h>

#include <cmath>
#include <numbers>

#include "csrobust/fft.hpp"
#include "csrobust/fourier_model.hpp"
#include "helpers.hpp"

using namespace csr;

namespace {

// Direct O(N^4) centered unitary DFT.
ComplexImage naive_dft(const ComplexImage& x) {
  const int h = x.height(), w = x.width();
  ComplexImage out(h, w);
  for (int k1 = 0; k1 < h; ++k1)
    for (int k2 = 0; k2 < w; ++k2) {
      cplx acc{};
      for (int n1 = 0; n1 < h; ++n1)
        for (int n2 = 0; n2 < w; ++n2) {
          const double ph = -2.0 * std::numbers::pi *
                            (double(k1 - h / 2) * (n1 - h / 2) / h + double(k2 - w / 2) * (n2 - w / 2) / w);
          acc += x(n1, n2) * cplx(std::cos(ph), std::sin(ph));
        }
      out(k1, k2) = acc / std::sqrt(double(h * w));
    }
  return out;
}

double naive_dct_coeff(const std::vector<double>& x, int h, int w, int k1, int k2) {
  double acc = 0.0;
  for (int n1 = 0; n1 < h; ++n1)
    for (int n2 = 0; n2 < w; ++n2)
      acc += x[n1 * w + n2] * std::cos(std::numbers::pi * (n1 + 0.5) * k1 / h) *
             std::cos(std::numbers::pi * (n2 + 0.5) * k2 / w);
  const double a1 = k1 == 0 ? std::sqrt(1.0 / h) : std::sqrt(2.0 / h);
  const double a2 = k2 == 0 ? std::sqrt(1.0 / w) : std::sqrt(2.0 / w);
  return a1 * a2 * acc;
}

cplx inner(std::span<const cplx> a, std::span<const cplx> b) {
  cplx s{};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * std::conj(b[i]);
  return s;
}

}  // namespace

TEST_CASE("centered fft matches the direct sum") {
  for (auto [h, w] : {std::pair{8, 8}, std::pair{4, 8}, std::pair{6, 10}}) {
    const ComplexImage x = testutil::random_image(h, w, 3);
    const ComplexImage fast = fft::fft2c(x);
    const ComplexImage slow = naive_dft(x);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(fast[i] - slow[i]) < 1e-12);
    const ComplexImage back = fft::ifft2c(fast);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) < 1e-12);
  }
}

TEST_CASE("centered fft puts the DC term at the center") {
  ComplexImage ones(8, 8, {1.0, 0.0});
  const ComplexImage k = fft::fft2c(ones);
  CHECK(std::abs(k(4, 4) - cplx(8.0, 0.0)) < 1e-12);
  double rest = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i)
    if (i != 4 * 8 + 4) rest += std::abs(k[i]);
  CHECK(rest < 1e-12);
}

TEST_CASE("dct2 matches the orthonormal DCT-II formula") {
  const int h = 6, w = 8;
  std::vector<double> x = testutil::random_vector(h * w, 5);
  std::vector<double> c = x;
  fft::dct2(c, h, w);
  for (int k1 = 0; k1 < h; ++k1)
    for (int k2 = 0; k2 < w; ++k2) CHECK(std::abs(c[k1 * w + k2] - naive_dct_coeff(x, h, w, k1, k2)) < 1e-12);
  fft::idct2(c, h, w);
  CHECK(testutil::max_abs_diff(c, x) < 1e-12);
}

TEST_CASE("masks keep the requested number of columns and the full center band") {
  for (int w : {32, 64, 96}) {
    for (auto pattern : {MaskPattern::Equispaced, MaskPattern::Random}) {
      for (double acc : {2.0, 4.0, 8.0}) {
        MaskSpec spec{acc, 0.08, pattern, 7};
        const SamplingMask m = make_mask(w, spec);
        CHECK(m.kept() == static_cast<int>(std::lround(w / acc)));
        for (int c = m.center_begin; c < m.center_begin + m.center_count; ++c) CHECK(m.keep[c] == 1);
      }
    }
  }
  CHECK(full_mask(16).kept() == 16);
  CHECK_THROWS_AS(make_mask(32, MaskSpec{0.5, 0.08, MaskPattern::Equispaced, 0}), Error);
  CHECK_THROWS_AS(make_mask(32, MaskSpec{4.0, 0.9, MaskPattern::Equispaced, 0}), Error);
}

TEST_CASE("masks are reproducible from their seed") {
  MaskSpec spec{4.0, 0.08, MaskPattern::Random, 11};
  CHECK(make_mask(64, spec) == make_mask(64, spec));
}

TEST_CASE("forward and adjoint satisfy the dot-product test") {
  const int n = 16, nc = 3;
  const auto sens = generate_sensitivities(nc, n, 2);
  const auto mask = make_mask(n, MaskSpec{});
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ComplexImage x = testutil::random_image(n, n, 100 + s);
    KSpaceVolume y = testutil::random_kspace(nc, n, 200 + s);
    const KSpaceVolume ax = forward(x, sens, mask);
    const ComplexImage ahy = adjoint(y, sens, mask);
    const cplx lhs = inner(ax.values(), y.values());
    const cplx rhs = inner(x.values(), ahy.values());
    CHECK(std::abs(lhs - rhs) / (norm2(ax.values()) * norm2(y.values())) < 1e-12);
  }
}

TEST_CASE("forward zeroes dropped columns") {
  const auto v = testutil::phantom_volume(16, 2, 1);
  const auto mask = make_mask(16, MaskSpec{});
  const KSpaceVolume y = forward(v.target, v.sens, mask);
  for (int k = 0; k < 2; ++k)
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        if (!mask.keep[c]) CHECK(y(k, r, c) == cplx{});
}

TEST_CASE("noise hits the requested SNR on average") {
  const KSpaceVolume y = testutil::random_kspace(4, 32, 9);
  for (double snr : {10.0, 30.0}) {
    double ratio = 0.0;
    for (std::uint64_t s = 0; s < 20; ++s) {
      KSpaceVolume noisy = add_noise(y, snr, s);
      for (std::size_t i = 0; i < noisy.size(); ++i) noisy.values()[i] -= y.values()[i];
      ratio += std::pow(norm2(noisy.values()), 2);
    }
    ratio /= 20.0;
    const double measured = 10.0 * std::log10(std::pow(norm2(y.values()), 2) / ratio);
    CHECK(std::abs(measured - snr) < 0.1);
  }
  const KSpaceVolume same = add_noise(y, std::numeric_limits<double>::infinity(), 0);
  CHECK(same == y);
}

TEST_CASE("noise respects the mask") {
  const auto mask = make_mask(16, MaskSpec{});
  const KSpaceVolume y = testutil::random_kspace(2, 16, 1);
  const KSpaceVolume noisy = add_noise(y, 20.0, 3, &mask);
  int changed = 0;
  for (int k = 0; k < 2; ++k)
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) {
        if (!mask.keep[c]) CHECK(noisy(k, r, c) == y(k, r, c));
        changed += noisy(k, r, c) != y(k, r, c);
      }
  CHECK(changed > 0);
}

TEST_CASE("low frequency proportion matches a direct energy count") {
  const KSpaceVolume y = testutil::random_kspace(2, 32, 4);
  const auto [begin, count] = center_band(32, 0.25);
  double low = 0.0, total = 0.0;
  for (int k = 0; k < 2; ++k)
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        const double e = std::norm(y(k, r, c));
        total += e;
        if (c >= begin && c < begin + count) low += e;
      }
  CHECK(low_frequency_proportion(y, 0.25) == doctest::Approx(low / total).epsilon(1e-12));
  CHECK(low_frequency_proportion(y, 1.0) == doctest::Approx(1.0));
}

TEST_CASE("full sampling with normalized sensitivities inverts exactly") {
  const auto v = testutil::phantom_volume(32, 4, 3);
  const RealImage rec = rss(coil_images(v.kspace));
  const RealImage ref = magnitude(v.target);
  CHECK(testutil::max_abs_diff(rec.values(), ref.values()) < 1e-12);
}
