#pragma once

#include <cmath>
#include <random>

#include "csrobust/datagen.hpp"
#include "csrobust/fourier_model.hpp"
#include "csrobust/volume_io.hpp"

namespace testutil {

inline csr::ComplexImage random_image(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  csr::ComplexImage x(h, w);
  for (auto& v : x.values()) v = {d(rng), d(rng)};
  return x;
}

inline csr::KSpaceVolume random_kspace(int nc, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  csr::KSpaceVolume y(nc, n, n);
  for (auto& v : y.values()) v = {d(rng), d(rng)};
  return y;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = scale * d(rng);
  return v;
}

inline csr::Volume phantom_volume(int n, int nc, std::uint64_t seed,
                                  csr::PhantomFamily family = csr::PhantomFamily::Ellipses) {
  csr::PhantomSpec ps;
  ps.family = family;
  ps.size = n;
  ps.seed = seed;
  csr::Volume v;
  v.target = csr::generate_phantom(ps);
  v.sens = csr::generate_sensitivities(nc, n, seed + 1000);
  v.kspace = csr::forward(v.target, v.sens, csr::full_mask(n));
  return v;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace testutil
