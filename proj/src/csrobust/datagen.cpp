#include "csrobust/datagen.hpp"

#include <algorithm>
#include <bit>
#include <numbers>
#include <numeric>
#include <random>

namespace csr {
namespace {

using std::numbers::pi;

struct Ellipse {
  double cx, cy, a, b, angle, value;
};

void paint(RealImage& img, const Ellipse& e) {
  const int n = img.width();
  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      // normalized coordinates in [-1, 1]
      const double x = (2.0 * c + 1.0) / n - 1.0 - e.cx;
      const double y = (2.0 * r + 1.0) / n - 1.0 - e.cy;
      const double u = x * ca + y * sa;
      const double v = -x * sa + y * ca;
      if ((u * u) / (e.a * e.a) + (v * v) / (e.b * e.b) <= 1.0) img(r, c) += e.value;
    }
}

RealImage ellipse_phantom(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  RealImage img(n, n);
  paint(img, {0.0, 0.0, 0.80 + 0.1 * U(rng), 0.70 + 0.15 * U(rng), pi * (U(rng) - 0.5) * 0.3, 0.6});
  const int count = 6 + static_cast<int>(U(rng) * 5);
  for (int k = 0; k < count; ++k) {
    Ellipse e{};
    e.cx = 0.9 * (U(rng) - 0.5);
    e.cy = 0.9 * (U(rng) - 0.5);
    e.a = 0.06 + 0.25 * U(rng);
    e.b = 0.06 + 0.25 * U(rng);
    e.angle = pi * U(rng);
    e.value = (U(rng) < 0.3 ? -1.0 : 1.0) * (0.1 + 0.3 * U(rng));
    paint(img, e);
  }
  for (auto& v : img.values()) v = std::max(v, 0.0);
  return img;
}

void add_texture(RealImage& img, std::mt19937_64& rng) {
  const int n = img.width();
  std::uniform_real_distribution<double> U(0.0, 1.0);
  RealImage texture(n, n);
  for (int k = 0; k < 6; ++k) {
    // frequencies in cycles per image, well outside the fully sampled center band
    const double f = n * (0.18 + 0.2 * U(rng));
    const double theta = 2.0 * pi * U(rng);
    const double fx = f * std::cos(theta), fy = f * std::sin(theta);
    const double phase = 2.0 * pi * U(rng);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) texture(r, c) += std::sin(2.0 * pi * (fx * c + fy * r) / n + phase);
  }
  for (std::size_t p = 0; p < img.size(); ++p)
    if (img[p] > 0.0) img[p] = std::max(0.0, img[p] + 0.12 * texture[p]);
}

RealImage smooth_phantom(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  RealImage img(n, n);
  const int blobs = 4 + static_cast<int>(U(rng) * 4);
  for (int k = 0; k < blobs; ++k) {
    const double cx = 0.8 * (U(rng) - 0.5), cy = 0.8 * (U(rng) - 0.5);
    const double sx = 0.18 + 0.25 * U(rng), sy = 0.18 + 0.25 * U(rng);
    const double amp = 0.3 + 0.7 * U(rng);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) {
        const double x = (2.0 * c + 1.0) / n - 1.0 - cx;
        const double y = (2.0 * r + 1.0) / n - 1.0 - cy;
        img(r, c) += amp * std::exp(-0.5 * (x * x / (sx * sx) + y * y / (sy * sy)));
      }
  }
  return img;
}

ComplexImage normalized(const RealImage& img) {
  double peak = 0.0;
  for (double v : img.values()) peak = std::max(peak, std::abs(v));
  ComplexImage out(img.height(), img.width());
  const double scale = peak > 0.0 ? 1.0 / peak : 1.0;
  for (std::size_t p = 0; p < img.size(); ++p) out[p] = {img[p] * scale, 0.0};
  return out;
}

}  // namespace

PhantomFamily parse_phantom_family(const std::string& name) {
  if (name == "ellipses") return PhantomFamily::Ellipses;
  if (name == "textured") return PhantomFamily::Textured;
  if (name == "smooth") return PhantomFamily::Smooth;
  fail(ErrorCode::InvalidSpec, "unknown phantom family '" + name + "'");
}

const char* to_string(PhantomFamily f) {
  switch (f) {
    case PhantomFamily::Ellipses: return "ellipses";
    case PhantomFamily::Textured: return "textured";
    case PhantomFamily::Smooth: return "smooth";
  }
  return "?";
}

std::size_t sparsity_count(int n, double fraction) {
  const double total = static_cast<double>(n) * n;
  // guard against fraction * total landing a hair above an integer
  return static_cast<std::size_t>(std::ceil(fraction * total - 1e-9));
}

ComplexImage generate_phantom(const PhantomSpec& spec) {
  require(spec.size >= 2 && std::has_single_bit(static_cast<unsigned>(spec.size)), ErrorCode::InvalidSpec,
          "phantom size must be a power of two, got " + std::to_string(spec.size));
  if (spec.sparsity_basis)
    require(spec.sparsity_fraction > 0.0 && spec.sparsity_fraction <= 1.0, ErrorCode::InvalidSpec,
            "sparsity_fraction must lie in (0, 1]");

  std::mt19937_64 rng(spec.seed);
  RealImage base;
  switch (spec.family) {
    case PhantomFamily::Ellipses: base = ellipse_phantom(spec.size, rng); break;
    case PhantomFamily::Textured:
      base = ellipse_phantom(spec.size, rng);
      add_texture(base, rng);
      break;
    case PhantomFamily::Smooth: base = smooth_phantom(spec.size, rng); break;
  }
  ComplexImage x = normalized(base);
  if (!spec.sparsity_basis) return x;

  const TransformSpec& basis = *spec.sparsity_basis;
  ComplexImage coeffs = analyze(x, basis);
  const std::size_t keep = sparsity_count(spec.size, spec.sparsity_fraction);
  std::vector<std::size_t> order(coeffs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(coeffs[a]) > std::abs(coeffs[b]); });
  ComplexImage sparse(coeffs.height(), coeffs.width());
  for (std::size_t k = 0; k < keep; ++k) sparse[order[k]] = coeffs[order[k]];
  return synthesize(sparse, basis);
}

CoilSensitivities generate_sensitivities(int n_coils, int size, std::uint64_t seed) {
  require(n_coils >= 1, ErrorCode::InvalidSpec, "n_coils must be >= 1");
  require(size >= 1, ErrorCode::InvalidSpec, "sensitivity size must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  CoilSensitivities sens(n_coils, size, size);
  const double rotation = 2.0 * pi * U(rng);
  for (int i = 0; i < n_coils; ++i) {
    const double angle = rotation + 2.0 * pi * i / n_coils;
    const double radius = 1.1 + 0.2 * U(rng);
    const double cx = radius * std::cos(angle), cy = radius * std::sin(angle);
    const double sigma = 0.8 + 0.4 * U(rng);
    const double phase0 = 2.0 * pi * U(rng);
    const double ramp_x = 0.5 * (U(rng) - 0.5), ramp_y = 0.5 * (U(rng) - 0.5);
    for (int r = 0; r < size; ++r)
      for (int c = 0; c < size; ++c) {
        const double x = (2.0 * c + 1.0) / size - 1.0;
        const double y = (2.0 * r + 1.0) / size - 1.0;
        const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
        const double mag = std::exp(-d2 / (2.0 * sigma * sigma));
        sens(i, r, c) = std::polar(mag, phase0 + pi * (ramp_x * x + ramp_y * y));
      }
  }
  for (int r = 0; r < size; ++r)
    for (int c = 0; c < size; ++c) {
      double total = 0.0;
      for (int i = 0; i < n_coils; ++i) total += std::norm(sens(i, r, c));
      const double inv = 1.0 / std::sqrt(total);
      for (int i = 0; i < n_coils; ++i) sens(i, r, c) *= inv;
    }
  return sens;
}

}  // namespace csr
