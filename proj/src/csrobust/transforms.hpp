#pragma once

#include <string>

#include "csrobust/image.hpp"

namespace csr {

enum class TransformKind { WaveletHaar, WaveletDb4, Dct, Fourier };

TransformKind parse_transform_kind(const std::string& name);
const char* to_string(TransformKind kind);

struct TransformSpec {
  TransformKind kind = TransformKind::WaveletHaar;
  int levels = 4;  // wavelet decomposition depth; ignored for dct/fourier
};

// Orthonormal sparsifying transform. Real transforms act on the real and
// imaginary parts independently; the Fourier basis is the centered unitary DFT.
ComplexImage analyze(const ComplexImage& x, const TransformSpec& spec);
ComplexImage synthesize(const ComplexImage& coeffs, const TransformSpec& spec);

// Throws InvalidSpec when the spec cannot be applied to an n x n image.
void validate(const TransformSpec& spec, int n);

// Proximal map of tau * ||.||_1 for complex entries: shrink magnitudes by tau.
ComplexImage soft_threshold(const ComplexImage& c, double tau);
void soft_threshold_inplace(std::span<cplx> c, double tau);

}  // namespace csr
