#include "csrobust/feature_probe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "csrobust/parallel.hpp"
#include "csrobust/report.hpp"

namespace csr {
namespace {

void check_window(int n_rows, int n_cols, int top, int left, int k) {
  require(k >= 1, ErrorCode::InvalidSpec, "feature window size must be >= 1");
  require(top >= 0 && left >= 0 && top + k <= n_rows && left + k <= n_cols, ErrorCode::InvalidSpec,
          "feature window at (" + std::to_string(top) + "," + std::to_string(left) + ") of size " + std::to_string(k) +
              " is outside the image");
}

std::vector<std::pair<int, int>> random_positions(int n, int k, int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pos(0, n - k);
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < count; ++i) {
    const int top = pos(rng);
    out.emplace_back(top, pos(rng));
  }
  return out;
}

}  // namespace

ComplexImage insert_feature(const ComplexImage& x, int top, int left, int k) {
  check_window(x.height(), x.width(), top, left, k);
  double peak = 0.0;
  for (const auto& v : x.values()) peak = std::max(peak, std::abs(v));
  ComplexImage out = x;
  for (int r = top; r < top + k; ++r)
    for (int c = left; c < left + k; ++c) out(r, c) = {peak, 0.0};
  return out;
}

double probe_location(const Reconstructor& recon, const ComplexImage& x_star, const CoilSensitivities& sens,
                      const SamplingMask& mask, int top, int left, int k) {
  const ComplexImage with = insert_feature(x_star, top, left, k);
  try {
    RealImage rec = recon.reconstruct(forward(with, sens, mask), mask, sens);
    return region_mse(magnitude(with), rec, top, left, k);
  } catch (const Error& e) {
    throw Error(e.code(), "probe at (" + std::to_string(top) + "," + std::to_string(left) + "): " + e.what());
  }
}

std::vector<std::pair<int, int>> probe_positions(int n, const ProbeSpec& spec) {
  require(spec.window >= 1 && spec.window <= n, ErrorCode::InvalidSpec, "probe window must be in [1, N]");
  switch (spec.locations) {
    case ProbeLocations::Grid: {
      require(spec.stride >= 1, ErrorCode::InvalidSpec, "probe stride must be >= 1");
      std::vector<std::pair<int, int>> out;
      for (int r = 0; r + spec.window <= n; r += spec.stride)
        for (int c = 0; c + spec.window <= n; c += spec.stride) out.emplace_back(r, c);
      return out;
    }
    case ProbeLocations::List:
      for (const auto& [r, c] : spec.list) check_window(n, n, r, c, spec.window);
      return spec.list;
    case ProbeLocations::Random:
      require(spec.n_random >= 1, ErrorCode::InvalidSpec, "random probe count must be >= 1");
      return random_positions(n, spec.window, spec.n_random, spec.seed);
  }
  return {};
}

double denormalize(const HeatMap& map, double normalized) {
  return map.min + normalized * (map.max - map.min);
}

HeatMap heatmap(const Reconstructor& recon, const ComplexImage& x_star, const CoilSensitivities& sens,
                const SamplingMask& mask, const ProbeSpec& spec, int jobs) {
  require(x_star.height() == x_star.width(), ErrorCode::ShapeMismatch, "heatmaps need square images");
  HeatMap map;
  map.positions = probe_positions(x_star.width(), spec);
  if (spec.locations == ProbeLocations::Grid) {
    map.rows = map.cols = 0;
    for (const auto& [r, c] : map.positions) {
      if (c == 0) ++map.rows;
      if (r == 0) ++map.cols;
    }
  } else {
    map.rows = 1;
    map.cols = static_cast<int>(map.positions.size());
  }
  map.raw.assign(map.positions.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(map.positions.size(), jobs, [&](std::size_t i) {
    try {
      map.raw[i] = probe_location(recon, x_star, sens, mask, map.positions[i].first, map.positions[i].second,
                                  spec.window);
    } catch (const Error&) {
    }
  });

  bool any = false;
  for (double v : map.raw) {
    if (std::isnan(v)) {
      ++map.missing;
      continue;
    }
    map.min = any ? std::min(map.min, v) : v;
    map.max = any ? std::max(map.max, v) : v;
    any = true;
  }
  map.normalized.resize(map.raw.size());
  const double span = map.max - map.min;
  for (std::size_t i = 0; i < map.raw.size(); ++i) {
    if (std::isnan(map.raw[i]))
      map.normalized[i] = map.raw[i];
    else
      map.normalized[i] = span > 0.0 ? (map.raw[i] - map.min) / span : 0.0;
  }
  return map;
}

std::string heatmap_csv(const HeatMap& map) {
  std::string out = "row,col,raw_mse,normalized\n";
  for (std::size_t i = 0; i < map.positions.size(); ++i)
    out += std::to_string(map.positions[i].first) + "," + std::to_string(map.positions[i].second) + "," +
           format_number(map.raw[i]) + "," + format_number(map.normalized[i]) + "\n";
  return out;
}

std::vector<std::uint8_t> heatmap_pgm(const HeatMap& map) {
  const std::string header = "P5\n" + std::to_string(map.cols) + " " + std::to_string(map.rows) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double v : map.normalized)
    out.push_back(std::isnan(v) ? 0 : static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  return out;
}

std::vector<SweepRow> window_size_sweep(const std::vector<ReconstructorPtr>& methods,
                                        const std::vector<ProbeImage>& images, const SamplingMask& mask,
                                        const std::vector<int>& sizes, int n_locations, std::uint64_t seed,
                                        int jobs) {
  require(!images.empty(), ErrorCode::InvalidSpec, "window sweep needs at least one image");
  require(n_locations >= 1, ErrorCode::InvalidSpec, "window sweep needs at least one location");
  for (int k : sizes)
    for (const auto& img : images)
      require(k >= 1 && k <= img.target.width() && k <= img.target.height(), ErrorCode::InvalidSpec,
              "window size " + std::to_string(k) + " does not fit image '" + img.id + "'");

  const std::size_t nm = methods.size(), ns = sizes.size(), ni = images.size(), nl = n_locations;
  std::vector<double> err(nm * ns * ni * nl, std::numeric_limits<double>::quiet_NaN());
  parallel_for(err.size(), jobs, [&](std::size_t task) {
    const std::size_t m = task / (ns * ni * nl), s = (task / (ni * nl)) % ns, i = (task / nl) % ni, l = task % nl;
    const auto& img = images[i];
    const auto pos = random_positions(img.target.width(), sizes[s], n_locations,
                                      seed ^ (i * 0x9e3779b97f4a7c15ULL) ^ static_cast<std::uint64_t>(sizes[s]));
    try {
      err[task] = probe_location(*methods[m], img.target, img.sens, mask, pos[l].first, pos[l].second, sizes[s]);
    } catch (const Error&) {
    }
  });

  std::vector<SweepRow> rows;
  for (std::size_t m = 0; m < nm; ++m)
    for (std::size_t s = 0; s < ns; ++s) {
      std::span<const double> vals(err.data() + (m * ns + s) * ni * nl, ni * nl);
      SweepRow row{methods[m]->id(), sizes[s], {}, 0};
      for (double v : vals) row.failures += std::isnan(v) ? 1 : 0;
      if (row.failures < vals.size()) row.error = bootstrap_ci(vals, 0.95, 2000, seed);
      row.error.metric = "region_mse";
      rows.push_back(row);
    }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "method,window_size,mean,ci_lo,ci_hi\n";
  for (const auto& r : rows) {
    out += r.method + "," + std::to_string(r.window_size) + ",";
    out += r.error.n ? format_number(r.error.value) + "," + format_number(r.error.ci_lo) + "," +
                           format_number(r.error.ci_hi)
                     : std::string("nan,nan,nan");
    out += "\n";
  }
  return out;
}

}  // namespace csr
