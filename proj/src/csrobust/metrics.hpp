#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "csrobust/image.hpp"

namespace csr {

struct MetricReport {
  std::string metric;
  double value = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  std::size_t n = 0;
  std::size_t excluded = 0;  // non-finite samples (e.g. PSNR of identical images)
};

double mse(const RealImage& reference, const RealImage& test);
double nmse(const RealImage& reference, const RealImage& test);
// 10 log10(max(ref)^2 / mse); +infinity when the images are identical.
double psnr(const RealImage& reference, const RealImage& test);

struct SsimParams {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double data_range = 0.0;  // <= 0 selects max(reference)
};

// Mean local SSIM over all fully contained uniform windows, with sample
// (N-1 normalized) variances and covariance.
double ssim(const RealImage& reference, const RealImage& test, const SsimParams& params = {});

double region_mse(const RealImage& reference, const RealImage& test, int top, int left, int k);

// Percentile bootstrap of the mean. Non-finite samples are dropped and counted.
MetricReport bootstrap_ci(std::span<const double> samples, double level = 0.95, int resamples = 2000,
                          std::uint64_t seed = 0);

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  std::vector<double> residuals;
};

LineFit fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace csr
