#include "csrobust/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace csr {
namespace {

void same_shape(const RealImage& a, const RealImage& b) {
  require(a.same_shape(b), ErrorCode::ShapeMismatch,
          "metric inputs differ in shape: " + std::to_string(a.height()) + "x" + std::to_string(a.width()) +
              " vs " + std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

double max_value(const RealImage& img) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : img.values()) m = std::max(m, v);
  return m;
}

// Inclusive 2D prefix sums, (h+1) x (w+1).
std::vector<double> integral(const RealImage& img, auto&& f) {
  const int h = img.height(), w = img.width();
  std::vector<double> s(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      s[(r + 1) * (w + 1) + c + 1] = f(r, c) + s[r * (w + 1) + c + 1] + s[(r + 1) * (w + 1) + c] - s[r * (w + 1) + c];
  return s;
}

double box(const std::vector<double>& s, int w, int r, int c, int k) {
  const int W = w + 1;
  return s[(r + k) * W + c + k] - s[r * W + c + k] - s[(r + k) * W + c] + s[r * W + c];
}

}  // namespace

double mse(const RealImage& reference, const RealImage& test) {
  same_shape(reference, test);
  require(!reference.empty(), ErrorCode::InvalidSpec, "mse of empty images");
  double s = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - test[i];
    s += d * d;
  }
  return s / static_cast<double>(reference.size());
}

double nmse(const RealImage& reference, const RealImage& test) {
  same_shape(reference, test);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - test[i];
    num += d * d;
    den += reference[i] * reference[i];
  }
  require(den > 0.0, ErrorCode::UndefinedRatio, "nmse with an all-zero reference");
  return num / den;
}

double psnr(const RealImage& reference, const RealImage& test) {
  const double e = mse(reference, test);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  const double peak = max_value(reference);
  return 10.0 * std::log10(peak * peak / e);
}

double ssim(const RealImage& reference, const RealImage& test, const SsimParams& p) {
  same_shape(reference, test);
  require(p.window >= 1 && p.window % 2 == 1, ErrorCode::InvalidSpec, "ssim window must be odd");
  require(p.window <= reference.height() && p.window <= reference.width(), ErrorCode::InvalidSpec,
          "ssim window larger than image");
  const double range = p.data_range > 0.0 ? p.data_range : max_value(reference);
  require(range > 0.0, ErrorCode::UndefinedRatio, "ssim data range must be positive");
  const double c1 = (p.k1 * range) * (p.k1 * range);
  const double c2 = (p.k2 * range) * (p.k2 * range);
  const int k = p.window, w = reference.width();
  const double np = static_cast<double>(k) * k;
  const double cov_norm = np > 1 ? np / (np - 1.0) : 1.0;

  const auto sx = integral(reference, [&](int r, int c) { return reference(r, c); });
  const auto sy = integral(reference, [&](int r, int c) { return test(r, c); });
  const auto sxx = integral(reference, [&](int r, int c) { return reference(r, c) * reference(r, c); });
  const auto syy = integral(reference, [&](int r, int c) { return test(r, c) * test(r, c); });
  const auto sxy = integral(reference, [&](int r, int c) { return reference(r, c) * test(r, c); });

  double total = 0.0;
  int count = 0;
  for (int r = 0; r + k <= reference.height(); ++r)
    for (int c = 0; c + k <= w; ++c) {
      const double mx = box(sx, w, r, c, k) / np;
      const double my = box(sy, w, r, c, k) / np;
      const double vx = cov_norm * (box(sxx, w, r, c, k) / np - mx * mx);
      const double vy = cov_norm * (box(syy, w, r, c, k) / np - my * my);
      const double vxy = cov_norm * (box(sxy, w, r, c, k) / np - mx * my);
      total += ((2 * mx * my + c1) * (2 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return total / count;
}

double region_mse(const RealImage& reference, const RealImage& test, int top, int left, int k) {
  same_shape(reference, test);
  require(k >= 1, ErrorCode::InvalidSpec, "region size must be >= 1");
  require(top >= 0 && left >= 0 && top + k <= reference.height() && left + k <= reference.width(),
          ErrorCode::InvalidSpec, "region window out of bounds");
  double s = 0.0;
  for (int r = top; r < top + k; ++r)
    for (int c = left; c < left + k; ++c) {
      const double d = reference(r, c) - test(r, c);
      s += d * d;
    }
  return s / (static_cast<double>(k) * k);
}

MetricReport bootstrap_ci(std::span<const double> samples, double level, int resamples, std::uint64_t seed) {
  std::vector<double> xs;
  for (double v : samples)
    if (std::isfinite(v)) xs.push_back(v);
  MetricReport rep;
  rep.excluded = samples.size() - xs.size();
  rep.n = xs.size();
  require(!xs.empty(), ErrorCode::InvalidSpec, "bootstrap over an empty sample set");
  require(level > 0.0 && level < 1.0 && resamples >= 1, ErrorCode::InvalidSpec, "invalid bootstrap settings");
  rep.value = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() == 1) {
    rep.ci_lo = rep.ci_hi = rep.value;
    return rep;
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, xs.size() - 1);
  std::vector<double> means(resamples);
  for (auto& m : means) {
    double s = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) s += xs[pick(rng)];
    m = s / static_cast<double>(xs.size());
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  auto quantile = [&](double q) {
    const double pos = q * (means.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, means.size() - 1);
    return means[lo] + (pos - lo) * (means[hi] - means[lo]);
  };
  rep.ci_lo = std::min(quantile(alpha), rep.value);
  rep.ci_hi = std::max(quantile(1.0 - alpha), rep.value);
  return rep;
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), ErrorCode::ShapeMismatch, "fit_line needs equally many x and y values");
  require(x.size() >= 2, ErrorCode::InvalidSpec, "fit_line needs at least two points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, ErrorCode::InvalidSpec, "degenerate fit: all x values are equal");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.residuals.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) fit.residuals[i] = y[i] - (fit.slope * x[i] + fit.intercept);
  return fit;
}

}  // namespace csr
