#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csrobust/metrics.hpp"
#include "csrobust/reconstructors.hpp"

namespace csr {

// Disjoint splits derived from a hash of the image id.
enum class Split { Train, Tune, Test };

const char* to_string(Split s);
Split split_of(const std::string& image_id);

struct LoadedVolume {
  std::string id;
  std::string family;
  Volume volume;
};

std::vector<LoadedVolume> load_volumes(const DatasetManifest& manifest);
std::vector<LoadedVolume> select_split(const std::vector<LoadedVolume>& volumes, Split split);

// Masked measurement of a (fully sampled) stored volume.
KSpaceVolume measure(const Volume& v, const SamplingMask& mask);

enum class Metric { Ssim, Psnr, Nmse };
Metric parse_metric(const std::string& name);
const char* to_string(Metric m);
// Larger is better for ssim/psnr; nmse is negated by score().
double metric_value(Metric m, const RealImage& reference, const RealImage& test);
double score(Metric m, double value);

// metric of every volume under one reconstructor, NaN where reconstruction failed.
std::vector<double> evaluate_method(const Reconstructor& recon, const std::vector<LoadedVolume>& volumes,
                                    const SamplingMask& mask, Metric metric, int jobs);

struct TuneResult {
  std::size_t best = 0;           // index into the grid
  std::vector<double> mean_score;  // per grid point, NaN if every volume failed
  std::vector<std::string> failures;
};

// Exhaustive grid search on the tune split; ties go to the smaller index.
TuneResult tune(const std::vector<ReconstructorPtr>& grid, const std::vector<LoadedVolume>& tune_split,
                const SamplingMask& mask, Metric metric, int jobs);

struct ShiftVariant {
  std::string family;
  ReconstructorPtr recon;
};

struct ShiftResult {
  std::string variant;
  std::string family;
  MetricReport in_domain;
  MetricReport out_domain;
  std::size_t failures = 0;
};

std::vector<ShiftResult> evaluate_shift(const std::vector<ShiftVariant>& variants,
                                        const std::vector<LoadedVolume>& domain_a_test,
                                        const std::vector<LoadedVolume>& domain_b_test, const SamplingMask& mask,
                                        Metric metric, std::uint64_t seed, int jobs);

struct ShiftFit {
  LineFit line;
  double mean_identity_gap = 0.0;  // mean(in - out)
};

ShiftFit fit_shift(const std::vector<ShiftResult>& results);
std::string shift_csv(const std::vector<ShiftResult>& results);
std::string shift_fit_json(const ShiftFit& fit);

struct FilterResult {
  std::vector<LoadedVolume> selected;  // hardest first
  std::vector<std::string> ids;        // all ids, in input order
  std::vector<double> ssim;            // filter-method SSIM per input volume
};

std::size_t filter_count(std::size_t n, double fraction);

// Bottom ceil(fraction * n) volumes by the filter method's SSIM. The filter
// method must not be one of the evaluated ids unless allow_overlap is set.
FilterResult adversarial_filter(const std::vector<LoadedVolume>& volumes, const Reconstructor& filter,
                                const SamplingMask& mask, double fraction,
                                const std::vector<std::string>& evaluated_ids, bool allow_overlap, int jobs);

struct SpectrumRow {
  std::string id;
  double proportion = 0.0;  // NaN for zero-energy volumes
  bool in_subset = false;
};

struct SpectrumReport {
  std::vector<SpectrumRow> rows;
  MetricReport full;
  MetricReport subset;  // n == 0 when no subset was given
  std::size_t flagged = 0;
};

SpectrumReport spectrum_report(const std::vector<LoadedVolume>& volumes, double center_fraction,
                               const std::vector<std::string>& subset_ids, std::uint64_t seed);
std::string spectrum_csv(const SpectrumReport& report);

}  // namespace csr
