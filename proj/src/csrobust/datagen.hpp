#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "csrobust/image.hpp"
#include "csrobust/transforms.hpp"

namespace csr {

enum class PhantomFamily { Ellipses, Textured, Smooth };

PhantomFamily parse_phantom_family(const std::string& name);
const char* to_string(PhantomFamily f);

struct PhantomSpec {
  PhantomFamily family = PhantomFamily::Ellipses;
  int size = 64;
  std::uint64_t seed = 0;
  std::optional<TransformSpec> sparsity_basis;
  double sparsity_fraction = 1.0;
};

// Real-valued phantom with peak magnitude 1. With a sparsity basis the result
// has exactly ceil(fraction * N^2) nonzero coefficients in that basis.
ComplexImage generate_phantom(const PhantomSpec& spec);

// Number of nonzero coefficients implied by a sparsity fraction on an n x n image.
std::size_t sparsity_count(int n, double fraction);

// Gaussian-bump coil profiles around the field of view, normalized so that the
// pixel-wise sum of squared magnitudes is one.
CoilSensitivities generate_sensitivities(int n_coils, int size, std::uint64_t seed);

}  // namespace csr
