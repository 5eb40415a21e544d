#pragma once

#include "csrobust/image.hpp"

namespace csr::fft {

// Centered unitary 2D DFT: zero frequency at (H/2, W/2), scale 1/sqrt(HW) both ways.
void fft2c(std::span<cplx> data, int height, int width);
void ifft2c(std::span<cplx> data, int height, int width);

ComplexImage fft2c(ComplexImage x);
ComplexImage ifft2c(ComplexImage x);

// Orthonormal 2D DCT-II and its inverse on a real array.
void dct2(std::span<double> data, int height, int width);
void idct2(std::span<double> data, int height, int width);

}  // namespace csr::fft
