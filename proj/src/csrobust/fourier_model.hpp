#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csrobust/image.hpp"

namespace csr {

enum class MaskPattern { Equispaced, Random };

MaskPattern parse_mask_pattern(const std::string& name);
const char* to_string(MaskPattern p);

struct MaskSpec {
  double acceleration = 4.0;
  double center_fraction = 0.08;
  MaskPattern pattern = MaskPattern::Equispaced;
  std::uint64_t seed = 0;
  bool operator==(const MaskSpec&) const = default;
};

// Column (phase-encode line) selection with a fully-sampled center band.
struct SamplingMask {
  std::vector<std::uint8_t> keep;
  MaskSpec spec;
  int center_begin = 0;  // first column of the center band
  int center_count = 0;

  int width() const { return static_cast<int>(keep.size()); }
  int kept() const;
  bool operator==(const SamplingMask&) const = default;
};

SamplingMask make_mask(int width, const MaskSpec& spec);
SamplingMask full_mask(int width);

// First column and length of the centered low-frequency band of a given fraction.
std::pair<int, int> center_band(int width, double center_fraction);

// A x: per coil multiply by S_i, centered unitary DFT, zero dropped columns.
KSpaceVolume forward(const ComplexImage& x, const CoilSensitivities& sens, const SamplingMask& mask);

// A^H y = sum_i conj(S_i) F^-1 (M y_i).
ComplexImage adjoint(const KSpaceVolume& y, const CoilSensitivities& sens, const SamplingMask& mask);

// Zero the dropped columns in place.
void apply_mask(KSpaceVolume& y, const SamplingMask& mask);

// Coil-wise inverse DFT (no coil weighting).
std::vector<ComplexImage> coil_images(const KSpaceVolume& y);

RealImage rss(const std::vector<ComplexImage>& coil_images);

// i.i.d. complex Gaussian noise such that ||y|| / ||noise|| matches snr_db in
// expectation. An infinite snr_db returns y unchanged. When a mask is given only
// its kept columns receive noise.
KSpaceVolume add_noise(const KSpaceVolume& y, double snr_db, std::uint64_t seed,
                       const SamplingMask* mask = nullptr);

// Energy in the central column band over total energy, all coils.
double low_frequency_proportion(const KSpaceVolume& y, double center_fraction);

}  // namespace csr
