#include "csrobust/transforms.hpp"

#include <array>
#include <bit>

#include "csrobust/fft.hpp"

namespace csr {
namespace {

struct Filter {
  std::vector<double> lo;
  std::vector<double> hi;
};

Filter make_filter(TransformKind kind) {
  Filter f;
  if (kind == TransformKind::WaveletHaar) {
    const double s = 1.0 / std::sqrt(2.0);
    f.lo = {s, s};
  } else {
    const double r3 = std::sqrt(3.0);
    const double d = 4.0 * std::sqrt(2.0);
    f.lo = {(1 + r3) / d, (3 + r3) / d, (3 - r3) / d, (1 - r3) / d};
  }
  const std::size_t n = f.lo.size();
  f.hi.resize(n);
  for (std::size_t k = 0; k < n; ++k) f.hi[k] = ((k % 2) ? -1.0 : 1.0) * f.lo[n - 1 - k];
  return f;
}

// One periodized analysis step on n samples read/written with a stride.
void analyze_1d(double* x, int n, int stride, const Filter& f, std::vector<double>& tmp) {
  const int half = n / 2;
  tmp.assign(n, 0.0);
  const int taps = static_cast<int>(f.lo.size());
  for (int i = 0; i < half; ++i) {
    double a = 0.0, d = 0.0;
    for (int k = 0; k < taps; ++k) {
      const double v = x[static_cast<std::ptrdiff_t>((2 * i + k) % n) * stride];
      a += f.lo[k] * v;
      d += f.hi[k] * v;
    }
    tmp[i] = a;
    tmp[half + i] = d;
  }
  for (int i = 0; i < n; ++i) x[static_cast<std::ptrdiff_t>(i) * stride] = tmp[i];
}

void synthesize_1d(double* x, int n, int stride, const Filter& f, std::vector<double>& tmp) {
  const int half = n / 2;
  tmp.assign(n, 0.0);
  const int taps = static_cast<int>(f.lo.size());
  for (int i = 0; i < half; ++i) {
    const double a = x[static_cast<std::ptrdiff_t>(i) * stride];
    const double d = x[static_cast<std::ptrdiff_t>(half + i) * stride];
    for (int k = 0; k < taps; ++k) tmp[(2 * i + k) % n] += f.lo[k] * a + f.hi[k] * d;
  }
  for (int i = 0; i < n; ++i) x[static_cast<std::ptrdiff_t>(i) * stride] = tmp[i];
}

void wavelet_forward(std::vector<double>& img, int n, int levels, const Filter& f) {
  std::vector<double> tmp;
  for (int lvl = 0, size = n; lvl < levels; ++lvl, size /= 2) {
    for (int r = 0; r < size; ++r) analyze_1d(img.data() + static_cast<std::size_t>(r) * n, size, 1, f, tmp);
    for (int c = 0; c < size; ++c) analyze_1d(img.data() + c, size, n, f, tmp);
  }
}

void wavelet_inverse(std::vector<double>& img, int n, int levels, const Filter& f) {
  std::vector<double> tmp;
  for (int lvl = levels - 1; lvl >= 0; --lvl) {
    const int size = n >> lvl;
    for (int c = 0; c < size; ++c) synthesize_1d(img.data() + c, size, n, f, tmp);
    for (int r = 0; r < size; ++r) synthesize_1d(img.data() + static_cast<std::size_t>(r) * n, size, 1, f, tmp);
  }
}

template <class RealOp>
ComplexImage apply_real(const ComplexImage& x, RealOp op) {
  const std::size_t n = x.size();
  std::vector<double> re(n), im(n);
  for (std::size_t i = 0; i < n; ++i) {
    re[i] = x[i].real();
    im[i] = x[i].imag();
  }
  op(re);
  op(im);
  ComplexImage out(x.height(), x.width());
  for (std::size_t i = 0; i < n; ++i) out[i] = {re[i], im[i]};
  return out;
}

bool is_wavelet(TransformKind k) {
  return k == TransformKind::WaveletHaar || k == TransformKind::WaveletDb4;
}

}  // namespace

TransformKind parse_transform_kind(const std::string& name) {
  if (name == "wavelet-haar" || name == "haar") return TransformKind::WaveletHaar;
  if (name == "wavelet-db4" || name == "db4") return TransformKind::WaveletDb4;
  if (name == "dct") return TransformKind::Dct;
  if (name == "fourier") return TransformKind::Fourier;
  fail(ErrorCode::InvalidSpec, "unknown transform kind '" + name + "'");
}

const char* to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::WaveletHaar: return "wavelet-haar";
    case TransformKind::WaveletDb4: return "wavelet-db4";
    case TransformKind::Dct: return "dct";
    case TransformKind::Fourier: return "fourier";
  }
  return "?";
}

void validate(const TransformSpec& spec, int n) {
  if (!is_wavelet(spec.kind)) return;
  require(n > 0 && std::has_single_bit(static_cast<unsigned>(n)), ErrorCode::InvalidSpec,
          "wavelet transforms need a power-of-two image size, got " + std::to_string(n));
  const int max_levels = std::countr_zero(static_cast<unsigned>(n));
  require(spec.levels >= 1 && spec.levels <= max_levels, ErrorCode::InvalidSpec,
          "wavelet levels must lie in [1, log2(N)=" + std::to_string(max_levels) + "], got " +
              std::to_string(spec.levels));
}

ComplexImage analyze(const ComplexImage& x, const TransformSpec& spec) {
  require(x.height() == x.width(), ErrorCode::ShapeMismatch, "transforms expect square images");
  validate(spec, x.width());
  const int n = x.width();
  switch (spec.kind) {
    case TransformKind::WaveletHaar:
    case TransformKind::WaveletDb4: {
      const Filter f = make_filter(spec.kind);
      return apply_real(x, [&](std::vector<double>& v) { wavelet_forward(v, n, spec.levels, f); });
    }
    case TransformKind::Dct:
      return apply_real(x, [&](std::vector<double>& v) { fft::dct2(v, n, n); });
    case TransformKind::Fourier:
      return fft::fft2c(x);
  }
  fail(ErrorCode::InvalidSpec, "unknown transform");
}

ComplexImage synthesize(const ComplexImage& coeffs, const TransformSpec& spec) {
  require(coeffs.height() == coeffs.width(), ErrorCode::ShapeMismatch, "transforms expect square images");
  validate(spec, coeffs.width());
  const int n = coeffs.width();
  switch (spec.kind) {
    case TransformKind::WaveletHaar:
    case TransformKind::WaveletDb4: {
      const Filter f = make_filter(spec.kind);
      return apply_real(coeffs, [&](std::vector<double>& v) { wavelet_inverse(v, n, spec.levels, f); });
    }
    case TransformKind::Dct:
      return apply_real(coeffs, [&](std::vector<double>& v) { fft::idct2(v, n, n); });
    case TransformKind::Fourier:
      return fft::ifft2c(coeffs);
  }
  fail(ErrorCode::InvalidSpec, "unknown transform");
}

void soft_threshold_inplace(std::span<cplx> c, double tau) {
  require(tau >= 0.0, ErrorCode::InvalidSpec, "soft threshold needs tau >= 0");
  if (tau == 0.0) return;
  for (auto& v : c) {
    const double mag = std::abs(v);
    v = mag <= tau ? cplx{} : v * ((mag - tau) / mag);
  }
}

ComplexImage soft_threshold(const ComplexImage& c, double tau) {
  ComplexImage out = c;
  soft_threshold_inplace(out.values(), tau);
  return out;
}

}  // namespace csr
