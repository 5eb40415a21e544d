#include "csrobust/fourier_model.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "csrobust/fft.hpp"

namespace csr {

MaskPattern parse_mask_pattern(const std::string& name) {
  if (name == "equispaced") return MaskPattern::Equispaced;
  if (name == "random") return MaskPattern::Random;
  fail(ErrorCode::InvalidSpec, "unknown mask pattern '" + name + "'");
}

const char* to_string(MaskPattern p) { return p == MaskPattern::Equispaced ? "equispaced" : "random"; }

int SamplingMask::kept() const { return static_cast<int>(std::count(keep.begin(), keep.end(), 1)); }

std::pair<int, int> center_band(int width, double center_fraction) {
  const int count = std::clamp(static_cast<int>(std::floor(width * center_fraction + 1e-9)), 0, width);
  return {(width - count + 1) / 2, count};
}

SamplingMask make_mask(int width, const MaskSpec& spec) {
  require(width >= 1, ErrorCode::InvalidSpec, "mask width must be positive");
  require(spec.acceleration >= 1.0, ErrorCode::InvalidSpec, "acceleration must be >= 1");
  require(spec.center_fraction > 0.0 && spec.center_fraction <= 1.0 && spec.center_fraction * width >= 1.0,
          ErrorCode::InvalidSpec, "center_fraction * width must be >= 1");

  SamplingMask mask;
  mask.spec = spec;
  mask.keep.assign(width, 0);
  auto [begin, count] = center_band(width, spec.center_fraction);
  mask.center_begin = begin;
  mask.center_count = count;
  for (int c = begin; c < begin + count; ++c) mask.keep[c] = 1;

  const int target = std::clamp(static_cast<int>(std::lround(width / spec.acceleration)), 1, width);
  require(count <= target, ErrorCode::InvalidSpec,
          "center band of " + std::to_string(count) + " columns exceeds the budget of " +
              std::to_string(target) + " columns at acceleration " + std::to_string(spec.acceleration));
  const int extra = target - count;
  if (extra == 0) return mask;

  std::vector<int> outer;
  for (int c = 0; c < width; ++c)
    if (!mask.keep[c]) outer.push_back(c);

  std::mt19937_64 rng(spec.seed);
  if (spec.pattern == MaskPattern::Equispaced) {
    const double spacing = static_cast<double>(outer.size()) / extra;
    const double offset = std::uniform_real_distribution<double>(0.0, spacing)(rng);
    for (int j = 0; j < extra; ++j) {
      const auto idx = std::min(outer.size() - 1, static_cast<std::size_t>(offset + j * spacing));
      mask.keep[outer[idx]] = 1;
    }
  } else {
    std::shuffle(outer.begin(), outer.end(), rng);
    for (int j = 0; j < extra; ++j) mask.keep[outer[j]] = 1;
  }
  return mask;
}

SamplingMask full_mask(int width) {
  SamplingMask mask;
  mask.spec = MaskSpec{1.0, 1.0, MaskPattern::Equispaced, 0};
  mask.keep.assign(width, 1);
  mask.center_begin = 0;
  mask.center_count = width;
  return mask;
}

void apply_mask(KSpaceVolume& y, const SamplingMask& mask) {
  require(mask.width() == y.width(), ErrorCode::ShapeMismatch, "mask width does not match k-space width");
  for (int i = 0; i < y.n_coils(); ++i)
    for (int r = 0; r < y.height(); ++r)
      for (int c = 0; c < y.width(); ++c)
        if (!mask.keep[c]) y(i, r, c) = cplx{};
}

KSpaceVolume forward(const ComplexImage& x, const CoilSensitivities& sens, const SamplingMask& mask) {
  require(x.height() == sens.height() && x.width() == sens.width(), ErrorCode::ShapeMismatch,
          "image and sensitivity shapes differ");
  require(mask.width() == x.width(), ErrorCode::ShapeMismatch, "mask width does not match image width");
  KSpaceVolume y(sens.n_coils(), x.height(), x.width());
  for (int i = 0; i < sens.n_coils(); ++i) {
    auto out = y.coil(i);
    auto s = sens.coil(i);
    for (std::size_t p = 0; p < out.size(); ++p) out[p] = s[p] * x[p];
    fft::fft2c(out, x.height(), x.width());
  }
  apply_mask(y, mask);
  return y;
}

ComplexImage adjoint(const KSpaceVolume& y, const CoilSensitivities& sens, const SamplingMask& mask) {
  require(y.same_shape(sens), ErrorCode::ShapeMismatch, "k-space and sensitivity shapes differ");
  require(mask.width() == y.width(), ErrorCode::ShapeMismatch, "mask width does not match k-space width");
  ComplexImage x(y.height(), y.width());
  std::vector<cplx> buf(y.plane_size());
  for (int i = 0; i < y.n_coils(); ++i) {
    auto src = y.coil(i);
    for (int r = 0; r < y.height(); ++r)
      for (int c = 0; c < y.width(); ++c) {
        const std::size_t p = static_cast<std::size_t>(r) * y.width() + c;
        buf[p] = mask.keep[c] ? src[p] : cplx{};
      }
    fft::ifft2c(buf, y.height(), y.width());
    auto s = sens.coil(i);
    for (std::size_t p = 0; p < buf.size(); ++p) x[p] += std::conj(s[p]) * buf[p];
  }
  return x;
}

std::vector<ComplexImage> coil_images(const KSpaceVolume& y) {
  std::vector<ComplexImage> out;
  out.reserve(y.n_coils());
  for (int i = 0; i < y.n_coils(); ++i) out.push_back(fft::ifft2c(y.coil_image(i)));
  return out;
}

RealImage rss(const std::vector<ComplexImage>& coil_images) {
  require(!coil_images.empty(), ErrorCode::InvalidSpec, "rss needs at least one coil image");
  const auto& first = coil_images.front();
  RealImage out(first.height(), first.width());
  for (const auto& img : coil_images) {
    require(img.same_shape(first), ErrorCode::ShapeMismatch, "rss coil images differ in shape");
    for (std::size_t p = 0; p < img.size(); ++p) out[p] += std::norm(img[p]);
  }
  for (auto& v : out.values()) v = std::sqrt(v);
  return out;
}

KSpaceVolume add_noise(const KSpaceVolume& y, double snr_db, std::uint64_t seed, const SamplingMask* mask) {
  if (std::isinf(snr_db) && snr_db > 0) return y;
  require(std::isfinite(snr_db), ErrorCode::InvalidSpec, "snr_db must be finite or +inf");
  if (mask) require(mask->width() == y.width(), ErrorCode::ShapeMismatch, "noise mask width mismatch");

  std::size_t measured = 0;
  for (int i = 0; i < y.n_coils(); ++i)
    for (int r = 0; r < y.height(); ++r)
      for (int c = 0; c < y.width(); ++c)
        if (!mask || mask->keep[c]) ++measured;
  KSpaceVolume out = y;
  if (measured == 0) return out;

  const double signal = squared_norm(y.values());
  const double noise_power = signal / std::pow(10.0, snr_db / 10.0) / static_cast<double>(measured);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, std::sqrt(noise_power / 2.0));
  for (int i = 0; i < y.n_coils(); ++i)
    for (int r = 0; r < y.height(); ++r)
      for (int c = 0; c < y.width(); ++c)
        if (!mask || mask->keep[c]) {
          const double re = normal(rng);
          const double im = normal(rng);
          out(i, r, c) += cplx{re, im};
        }
  return out;
}

double low_frequency_proportion(const KSpaceVolume& y, double center_fraction) {
  require(center_fraction > 0.0 && center_fraction <= 1.0, ErrorCode::InvalidSpec,
          "center_fraction must lie in (0, 1]");
  auto [begin, count] = center_band(y.width(), center_fraction);
  count = std::max(count, 1);
  begin = (y.width() - count + 1) / 2;
  double center = 0.0, total = 0.0;
  for (int i = 0; i < y.n_coils(); ++i)
    for (int r = 0; r < y.height(); ++r)
      for (int c = 0; c < y.width(); ++c) {
        const double e = std::norm(y(i, r, c));
        total += e;
        if (c >= begin && c < begin + count) center += e;
      }
  require(total > 0.0, ErrorCode::UndefinedRatio, "low-frequency proportion of a zero-energy volume");
  return center / total;
}

}  // namespace csr
