#include "csrobust/shift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "csrobust/parallel.hpp"
#include "csrobust/report.hpp"

namespace csr {
namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double finite_mean(std::span<const double> v) {
  double s = 0.0;
  std::size_t n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      s += x;
      ++n;
    }
  return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

MetricReport maybe_ci(std::span<const double> v, std::uint64_t seed) {
  if (std::none_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); })) return {};
  return bootstrap_ci(v, 0.95, 2000, seed);
}

std::string report_fields(const MetricReport& r) {
  if (r.n == 0) return "nan,nan,nan";
  return format_number(r.value) + "," + format_number(r.ci_lo) + "," + format_number(r.ci_hi);
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Tune: return "tune";
    case Split::Test: return "test";
  }
  return "?";
}

Split split_of(const std::string& image_id) {
  const auto bucket = fnv1a(image_id) % 10;
  if (bucket < 6) return Split::Train;
  if (bucket < 8) return Split::Tune;
  return Split::Test;
}

std::vector<LoadedVolume> load_volumes(const DatasetManifest& manifest) {
  std::vector<LoadedVolume> out;
  out.reserve(manifest.volumes.size());
  for (const auto& e : manifest.volumes) out.push_back({e.id, e.family, read_volume(e.path)});
  return out;
}

std::vector<LoadedVolume> select_split(const std::vector<LoadedVolume>& volumes, Split split) {
  std::vector<LoadedVolume> out;
  for (const auto& v : volumes)
    if (split_of(v.id) == split) out.push_back(v);
  return out;
}

KSpaceVolume measure(const Volume& v, const SamplingMask& mask) {
  KSpaceVolume y = v.kspace;
  apply_mask(y, mask);
  return y;
}

Metric parse_metric(const std::string& name) {
  if (name == "ssim") return Metric::Ssim;
  if (name == "psnr") return Metric::Psnr;
  if (name == "nmse") return Metric::Nmse;
  fail(ErrorCode::InvalidSpec, "unknown metric '" + name + "' (expected ssim, psnr or nmse)");
}

const char* to_string(Metric m) {
  switch (m) {
    case Metric::Ssim: return "ssim";
    case Metric::Psnr: return "psnr";
    case Metric::Nmse: return "nmse";
  }
  return "?";
}

double metric_value(Metric m, const RealImage& reference, const RealImage& test) {
  switch (m) {
    case Metric::Ssim: return ssim(reference, test);
    case Metric::Psnr: return psnr(reference, test);
    case Metric::Nmse: return nmse(reference, test);
  }
  return 0.0;
}

double score(Metric m, double value) { return m == Metric::Nmse ? -value : value; }

std::vector<double> evaluate_method(const Reconstructor& recon, const std::vector<LoadedVolume>& volumes,
                                    const SamplingMask& mask, Metric metric, int jobs) {
  std::vector<double> out(volumes.size(), std::numeric_limits<double>::quiet_NaN());
  parallel_for(volumes.size(), jobs, [&](std::size_t i) {
    const auto& v = volumes[i].volume;
    try {
      out[i] = metric_value(metric, magnitude(v.target), recon.reconstruct(measure(v, mask), mask, v.sens));
    } catch (const Error&) {
    }
  });
  return out;
}

TuneResult tune(const std::vector<ReconstructorPtr>& grid, const std::vector<LoadedVolume>& tune_split,
                const SamplingMask& mask, Metric metric, int jobs) {
  require(!grid.empty(), ErrorCode::InvalidSpec, "tuning grid is empty");
  require(!tune_split.empty(), ErrorCode::InvalidSpec, "tune split is empty");
  TuneResult res;
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto values = evaluate_method(*grid[g], tune_split, mask, metric, jobs);
    const double m = finite_mean(values);
    res.mean_score.push_back(m);
    if (std::isnan(m)) {
      res.failures.push_back(grid[g]->id());
      continue;
    }
    if (!any || score(metric, m) > best) {
      best = score(metric, m);
      res.best = g;
      any = true;
    }
  }
  if (!any) {
    std::string names;
    for (const auto& f : res.failures) names += (names.empty() ? "" : ", ") + f;
    fail(ErrorCode::NumericalFailure, "every tuning variant failed: " + names);
  }
  return res;
}

std::vector<ShiftResult> evaluate_shift(const std::vector<ShiftVariant>& variants,
                                        const std::vector<LoadedVolume>& domain_a_test,
                                        const std::vector<LoadedVolume>& domain_b_test, const SamplingMask& mask,
                                        Metric metric, std::uint64_t seed, int jobs) {
  require(!domain_a_test.empty() && !domain_b_test.empty(), ErrorCode::InvalidSpec, "shift test splits must be non-empty");
  std::vector<ShiftResult> out;
  for (const auto& v : variants) {
    ShiftResult r{v.recon->id(), v.family, {}, {}, 0};
    const auto in = evaluate_method(*v.recon, domain_a_test, mask, metric, jobs);
    const auto ood = evaluate_method(*v.recon, domain_b_test, mask, metric, jobs);
    for (double x : in) r.failures += std::isnan(x) ? 1 : 0;
    for (double x : ood) r.failures += std::isnan(x) ? 1 : 0;
    r.in_domain = maybe_ci(in, seed);
    r.out_domain = maybe_ci(ood, seed);
    r.in_domain.metric = r.out_domain.metric = to_string(metric);
    out.push_back(std::move(r));
  }
  return out;
}

ShiftFit fit_shift(const std::vector<ShiftResult>& results) {
  std::vector<double> x, y;
  for (const auto& r : results)
    if (r.in_domain.n && r.out_domain.n) {
      x.push_back(r.in_domain.value);
      y.push_back(r.out_domain.value);
    }
  ShiftFit fit;
  double gap = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) gap += x[i] - y[i];
  fit.mean_identity_gap = x.empty() ? std::numeric_limits<double>::quiet_NaN() : gap / static_cast<double>(x.size());
  if (x.size() >= 2) {
    try {
      fit.line = fit_line(x, y);
    } catch (const Error&) {
      fit.line.slope = fit.line.intercept = std::numeric_limits<double>::quiet_NaN();
    }
  } else {
    fit.line.slope = fit.line.intercept = std::numeric_limits<double>::quiet_NaN();
  }
  return fit;
}

std::string shift_csv(const std::vector<ShiftResult>& results) {
  std::string out = "variant,family,in_mean,in_lo,in_hi,out_mean,out_lo,out_hi\n";
  for (const auto& r : results)
    out += r.variant + "," + r.family + "," + report_fields(r.in_domain) + "," + report_fields(r.out_domain) + "\n";
  return out;
}

std::string shift_fit_json(const ShiftFit& fit) {
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  nlohmann::json j = {{"slope", num(fit.line.slope)},
                      {"intercept", num(fit.line.intercept)},
                      {"mean_identity_gap", num(fit.mean_identity_gap)}};
  return j.dump(2) + "\n";
}

std::size_t filter_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
}

FilterResult adversarial_filter(const std::vector<LoadedVolume>& volumes, const Reconstructor& filter,
                                const SamplingMask& mask, double fraction,
                                const std::vector<std::string>& evaluated_ids, bool allow_overlap, int jobs) {
  require(!volumes.empty(), ErrorCode::InvalidSpec, "adversarial filter needs a non-empty manifest");
  require(fraction > 0.0 && fraction < 1.0, ErrorCode::InvalidSpec, "filter fraction must be in (0, 1)");
  const std::size_t count = filter_count(volumes.size(), fraction);
  require(count > 0, ErrorCode::InvalidSpec, "filter fraction selects no volumes");
  if (!allow_overlap && std::find(evaluated_ids.begin(), evaluated_ids.end(), filter.id()) != evaluated_ids.end())
    fail(ErrorCode::InvalidSpec, "filter method '" + filter.id() + "' is also an evaluated method");

  FilterResult res;
  res.ssim = evaluate_method(filter, volumes, mask, Metric::Ssim, jobs);
  for (const auto& v : volumes) res.ids.push_back(v.id);
  std::vector<std::size_t> order(volumes.size());
  std::iota(order.begin(), order.end(), 0);
  // Failed reconstructions count as hardest.
  auto key = [&](std::size_t i) { return std::isnan(res.ssim[i]) ? -std::numeric_limits<double>::infinity() : res.ssim[i]; };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key(a) != key(b)) return key(a) < key(b);
    return volumes[a].id < volumes[b].id;
  });
  for (std::size_t k = 0; k < count; ++k) res.selected.push_back(volumes[order[k]]);
  return res;
}

SpectrumReport spectrum_report(const std::vector<LoadedVolume>& volumes, double center_fraction,
                               const std::vector<std::string>& subset_ids, std::uint64_t seed) {
  SpectrumReport rep;
  std::vector<double> all, sub;
  for (const auto& v : volumes) {
    SpectrumRow row{v.id, std::numeric_limits<double>::quiet_NaN(),
                    std::find(subset_ids.begin(), subset_ids.end(), v.id) != subset_ids.end()};
    try {
      row.proportion = low_frequency_proportion(v.volume.kspace, center_fraction);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UndefinedRatio) throw;
      ++rep.flagged;
    }
    all.push_back(row.proportion);
    if (row.in_subset) sub.push_back(row.proportion);
    rep.rows.push_back(row);
  }
  rep.full = maybe_ci(all, seed);
  rep.subset = maybe_ci(sub, seed);
  rep.full.metric = rep.subset.metric = "low_frequency_proportion";
  return rep;
}

std::string spectrum_csv(const SpectrumReport& report) {
  std::string out = "image_id,low_frequency_proportion,in_subset\n";
  for (const auto& r : report.rows)
    out += r.id + "," + format_number(r.proportion) + "," + (r.in_subset ? "1" : "0") + "\n";
  return out;
}

}  // namespace csr
