#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csrobust/metrics.hpp"
#include "csrobust/reconstructors.hpp"

namespace csr {

// Replaces the k x k window at (top, left) with max|x| + 0i.
ComplexImage insert_feature(const ComplexImage& x, int top, int left, int k);

// Region MSE between |x with feature| and the reconstruction of its noiseless
// measurement, restricted to the feature window.
double probe_location(const Reconstructor& recon, const ComplexImage& x_star, const CoilSensitivities& sens,
                      const SamplingMask& mask, int top, int left, int k);

enum class ProbeLocations { Grid, List, Random };

struct ProbeSpec {
  int window = 3;
  int stride = 8;
  ProbeLocations locations = ProbeLocations::Grid;
  std::vector<std::pair<int, int>> list;  // (top, left) for List
  int n_random = 16;
  std::uint64_t seed = 0;
};

// Window positions in row-major order. Grid positions are 0, s, 2s, ... <= n - k.
std::vector<std::pair<int, int>> probe_positions(int n, const ProbeSpec& spec);

struct HeatMap {
  std::vector<std::pair<int, int>> positions;
  int rows = 0;  // grid shape (1 x count for non-grid location sets)
  int cols = 0;
  std::vector<double> raw;         // NaN marks a failed location
  std::vector<double> normalized;  // (raw - min) / (max - min); all 0 when max == min
  double min = 0.0;
  double max = 0.0;
  std::size_t missing = 0;
};

double denormalize(const HeatMap& map, double normalized);

HeatMap heatmap(const Reconstructor& recon, const ComplexImage& x_star, const CoilSensitivities& sens,
                const SamplingMask& mask, const ProbeSpec& spec, int jobs);

std::string heatmap_csv(const HeatMap& map);
// 8-bit binary PGM of the normalized grid; missing cells are written as 0.
std::vector<std::uint8_t> heatmap_pgm(const HeatMap& map);

struct ProbeImage {
  std::string id;
  ComplexImage target;
  CoilSensitivities sens;
};

struct SweepRow {
  std::string method;
  int window_size = 0;
  MetricReport error;
  std::size_t failures = 0;
};

// Mean region MSE over n_locations random windows per image, per (method, size).
// Locations depend only on (seed, image index, size), so every method sees the same windows.
std::vector<SweepRow> window_size_sweep(const std::vector<ReconstructorPtr>& methods,
                                        const std::vector<ProbeImage>& images, const SamplingMask& mask,
                                        const std::vector<int>& sizes, int n_locations, std::uint64_t seed,
                                        int jobs);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace csr
