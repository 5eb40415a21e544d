#include "csrobust/autodiff.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numeric>

#include "csrobust/fft.hpp"
#include "csrobust/image.hpp"

namespace csr::ad {
namespace {

using MatR = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapR = Eigen::Map<MatR>;
using CMapR = Eigen::Map<const MatR>;

void check(bool cond, const std::string& what) { require(cond, ErrorCode::ShapeMismatch, what); }

void check_chw(const Var& x, const char* op) {
  check(x.shape().size() == 3, std::string(op) + " expects a [C,H,W] tensor, got " + shape_string(x.shape()));
}

void check_complex(const Var& x, const char* op) {
  check_chw(x, op);
  check(x.shape()[0] % 2 == 0, std::string(op) + " expects an even channel count (re/im pairs)");
}

// Per-axis 2x bilinear (half-pixel centers, edge clamped) sampling weights.
struct Tap {
  int i0, i1;
  double w0, w1;
};

std::vector<Tap> bilinear_taps(int n) {
  std::vector<Tap> taps(2 * n);
  for (int o = 0; o < 2 * n; ++o) {
    const int i = o / 2;
    const int j = (o % 2 == 0) ? std::max(i - 1, 0) : std::min(i + 1, n - 1);
    taps[o] = {i, j, 0.75, 0.25};
  }
  return taps;
}

}  // namespace

std::size_t element_count(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, int d) { return a * static_cast<std::size_t>(d); });
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "]";
}

const Shape& Var::shape() const { return tape_->shape(id_); }
std::size_t Var::size() const { return tape_->value(id_).size(); }
std::span<const double> Var::value() const { return tape_->value(id_); }
std::span<const double> Var::grad() const { return tape_->grad(id_); }

Var Tape::variable(Shape shape, std::vector<double> values) {
  require(element_count(shape) == values.size(), ErrorCode::ShapeMismatch,
          "leaf value count does not match shape " + shape_string(shape));
  nodes_.push_back(Node{std::move(shape), std::move(values), {}, true, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Shape shape, std::vector<double> values) {
  require(element_count(shape) == values.size(), ErrorCode::ShapeMismatch,
          "constant value count does not match shape " + shape_string(shape));
  nodes_.push_back(Node{std::move(shape), std::move(values), {}, false, {}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::record(const char* op, Shape shape, std::vector<double> value, std::initializer_list<Var> parents,
                 Pullback pullback) {
  for (double v : value)
    if (!std::isfinite(v)) fail(ErrorCode::NumericalFailure, std::string("non-finite value produced by ") + op);
  bool needs = false;
  for (const auto& p : parents) {
    require(p.tape_ == this, ErrorCode::Internal, std::string(op) + ": operand from a different tape");
    needs = needs || nodes_[p.id_].needs_grad;
  }
  nodes_.push_back(Node{std::move(shape), std::move(value), {}, needs, needs ? std::move(pullback) : Pullback{}});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

std::span<double> Tape::grad_buffer(int id) {
  auto& n = nodes_[id];
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tape::backward(Var loss) {
  require(loss.tape_ == this, ErrorCode::Internal, "backward on a variable from another tape");
  require(nodes_[loss.id_].value.size() == 1, ErrorCode::ShapeMismatch,
          "backward needs a scalar loss, got shape " + shape_string(nodes_[loss.id_].shape));
  grad_buffer(loss.id_)[0] += 1.0;
  for (int id = loss.id_; id >= 0; --id) {
    auto& n = nodes_[id];
    if (n.needs_grad && n.pullback && !n.grad.empty()) n.pullback(n.grad, *this);
  }
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.clear();
}

void Tape::clear() { nodes_.clear(); }

Var add(Var a, Var b) {
  check(a.shape() == b.shape(), "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  auto av = a.value(), bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record("add", a.shape(), std::move(out), {a, b}, [ia, ib](std::span<const double> g, Tape& t) {
    for (int id : {ia, ib})
      if (t.needs_grad(id)) {
        auto d = t.grad_buffer(id);
        for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
      }
  });
}

Var sub(Var a, Var b) {
  check(a.shape() == b.shape(), "sub: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  auto av = a.value(), bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record("sub", a.shape(), std::move(out), {a, b}, [ia, ib](std::span<const double> g, Tape& t) {
    if (t.needs_grad(ia)) {
      auto d = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i];
    }
    if (t.needs_grad(ib)) {
      auto d = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  check(a.shape() == b.shape(), "mul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  auto av = a.value(), bv = b.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const int ia = a.id(), ib = b.id();
  return a.tape().record("mul", a.shape(), std::move(out), {a, b}, [ia, ib](std::span<const double> g, Tape& t) {
    auto av = t.value(ia), bv = t.value(ib);
    if (t.needs_grad(ia)) {
      auto d = t.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * bv[i];
    }
    if (t.needs_grad(ib)) {
      auto d = t.grad_buffer(ib);
      for (std::size_t i = 0; i < g.size(); ++i) d[i] += g[i] * av[i];
    }
  });
}

Var scale(Var a, double s) {
  auto av = a.value();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * av[i];
  const int ia = a.id();
  return a.tape().record("scale", a.shape(), std::move(out), {a}, [ia, s](std::span<const double> g, Tape& t) {
    auto d = t.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) d[i] += s * g[i];
  });
}

namespace {

Var conv2d_impl(Var x, Var w, const Var* b) {
  check_chw(x, "conv2d");
  const Shape& ws = w.shape();
  check(ws.size() == 4, "conv2d weight must be [O,C,k,k], got " + shape_string(ws));
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const int O = ws[0], k = ws[2];
  check(ws[1] == C && ws[3] == k && k % 2 == 1,
        "conv2d weight " + shape_string(ws) + " incompatible with input " + shape_string(x.shape()));
  if (b) check(b->shape() == Shape{O}, "conv2d bias must be [O]");
  const int p = k / 2;
  const int HW = H * W;
  const int K = C * k * k;

  std::vector<double> cols(static_cast<std::size_t>(K) * HW, 0.0);
  auto xv = x.value();
  for (int c = 0; c < C; ++c)
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        double* row = cols.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * HW;
        for (int y = 0; y < H; ++y) {
          const int sy = y + ky - p;
          if (sy < 0 || sy >= H) continue;
          const double* src = xv.data() + (static_cast<std::size_t>(c) * H + sy) * W;
          for (int xx = 0; xx < W; ++xx) {
            const int sx = xx + kx - p;
            if (sx >= 0 && sx < W) row[y * W + xx] = src[sx];
          }
        }
      }

  std::vector<double> out(static_cast<std::size_t>(O) * HW);
  MapR om(out.data(), O, HW);
  om.noalias() = CMapR(w.value().data(), O, K) * CMapR(cols.data(), K, HW);
  if (b) {
    auto bv = b->value();
    for (int o = 0; o < O; ++o) om.row(o).array() += bv[o];
  }

  const int ix = x.id(), iw = w.id(), ib = b ? b->id() : -1;
  auto pull = [=, cols = std::move(cols)](std::span<const double> g, Tape& t) {
    CMapR gm(g.data(), O, HW);
    if (t.needs_grad(iw)) MapR(t.grad_buffer(iw).data(), O, K).noalias() += gm * CMapR(cols.data(), K, HW).transpose();
    if (ib >= 0 && t.needs_grad(ib)) {
      auto d = t.grad_buffer(ib);
      for (int o = 0; o < O; ++o) d[o] += gm.row(o).sum();
    }
    if (t.needs_grad(ix)) {
      MatR dcols = CMapR(t.value(iw).data(), O, K).transpose() * gm;
      auto dx = t.grad_buffer(ix);
      for (int c = 0; c < C; ++c)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const double* row = dcols.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * HW;
            for (int y = 0; y < H; ++y) {
              const int sy = y + ky - p;
              if (sy < 0 || sy >= H) continue;
              double* dst = dx.data() + (static_cast<std::size_t>(c) * H + sy) * W;
              for (int xx = 0; xx < W; ++xx) {
                const int sx = xx + kx - p;
                if (sx >= 0 && sx < W) dst[sx] += row[y * W + xx];
              }
            }
          }
    }
  };
  if (b) return x.tape().record("conv2d", {O, H, W}, std::move(out), {x, w, *b}, std::move(pull));
  return x.tape().record("conv2d", {O, H, W}, std::move(out), {x, w}, std::move(pull));
}

}  // namespace

Var conv2d(Var x, Var weight, Var bias) { return conv2d_impl(x, weight, &bias); }
Var conv2d(Var x, Var weight) { return conv2d_impl(x, weight, nullptr); }

Upsample parse_upsample(const std::string& name) {
  if (name == "nearest") return Upsample::Nearest;
  if (name == "bilinear") return Upsample::Bilinear;
  fail(ErrorCode::InvalidSpec, "unknown upsampling kind '" + name + "'");
}

Var upsample2x(Var x, Upsample kind) {
  check_chw(x, "upsample2x");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  const int H2 = 2 * H, W2 = 2 * W;
  std::vector<Tap> ty, tx;
  if (kind == Upsample::Bilinear) {
    ty = bilinear_taps(H);
    tx = bilinear_taps(W);
  } else {
    for (int o = 0; o < H2; ++o) ty.push_back({o / 2, o / 2, 1.0, 0.0});
    for (int o = 0; o < W2; ++o) tx.push_back({o / 2, o / 2, 1.0, 0.0});
  }
  auto xv = x.value();
  std::vector<double> out(static_cast<std::size_t>(C) * H2 * W2);
  for (int c = 0; c < C; ++c)
    for (int oy = 0; oy < H2; ++oy)
      for (int ox = 0; ox < W2; ++ox) {
        const auto& a = ty[oy];
        const auto& bb = tx[ox];
        auto at = [&](int r, int q) { return xv[(static_cast<std::size_t>(c) * H + r) * W + q]; };
        out[(static_cast<std::size_t>(c) * H2 + oy) * W2 + ox] =
            a.w0 * (bb.w0 * at(a.i0, bb.i0) + bb.w1 * at(a.i0, bb.i1)) +
            a.w1 * (bb.w0 * at(a.i1, bb.i0) + bb.w1 * at(a.i1, bb.i1));
      }
  const int ix = x.id();
  return x.tape().record("upsample2x", {C, H2, W2}, std::move(out), {x},
                         [=](std::span<const double> g, Tape& t) {
                           auto d = t.grad_buffer(ix);
                           for (int c = 0; c < C; ++c)
                             for (int oy = 0; oy < H2; ++oy)
                               for (int ox = 0; ox < W2; ++ox) {
                                 const double gv = g[(static_cast<std::size_t>(c) * H2 + oy) * W2 + ox];
                                 const auto& a = ty[oy];
                                 const auto& bb = tx[ox];
                                 auto at = [&](int r, int q) -> double& {
                                   return d[(static_cast<std::size_t>(c) * H + r) * W + q];
                                 };
                                 at(a.i0, bb.i0) += a.w0 * bb.w0 * gv;
                                 at(a.i0, bb.i1) += a.w0 * bb.w1 * gv;
                                 at(a.i1, bb.i0) += a.w1 * bb.w0 * gv;
                                 at(a.i1, bb.i1) += a.w1 * bb.w1 * gv;
                               }
                         });
}

Var avg_pool2x(Var x) {
  check_chw(x, "avg_pool2x");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  check(H % 2 == 0 && W % 2 == 0, "avg_pool2x needs even spatial dimensions");
  const int h = H / 2, w = W / 2;
  auto xv = x.value();
  std::vector<double> out(static_cast<std::size_t>(C) * h * w);
  for (int c = 0; c < C; ++c)
    for (int r = 0; r < h; ++r)
      for (int q = 0; q < w; ++q) {
        const std::size_t base = (static_cast<std::size_t>(c) * H + 2 * r) * W + 2 * q;
        out[(static_cast<std::size_t>(c) * h + r) * w + q] = 0.25 * (xv[base] + xv[base + 1] + xv[base + W] + xv[base + W + 1]);
      }
  const int ix = x.id();
  return x.tape().record("avg_pool2x", {C, h, w}, std::move(out), {x}, [=](std::span<const double> g, Tape& t) {
    auto d = t.grad_buffer(ix);
    for (int c = 0; c < C; ++c)
      for (int r = 0; r < h; ++r)
        for (int q = 0; q < w; ++q) {
          const double gv = 0.25 * g[(static_cast<std::size_t>(c) * h + r) * w + q];
          const std::size_t base = (static_cast<std::size_t>(c) * H + 2 * r) * W + 2 * q;
          d[base] += gv;
          d[base + 1] += gv;
          d[base + W] += gv;
          d[base + W + 1] += gv;
        }
  });
}

Var concat_channels(Var a, Var b) {
  check_chw(a, "concat_channels");
  check_chw(b, "concat_channels");
  check(a.shape()[1] == b.shape()[1] && a.shape()[2] == b.shape()[2], "concat_channels: spatial shapes differ");
  std::vector<double> out(a.value().begin(), a.value().end());
  out.insert(out.end(), b.value().begin(), b.value().end());
  const std::size_t na = a.size();
  const int ia = a.id(), ib = b.id();
  return a.tape().record("concat_channels", {a.shape()[0] + b.shape()[0], a.shape()[1], a.shape()[2]},
                         std::move(out), {a, b}, [=](std::span<const double> g, Tape& t) {
                           if (t.needs_grad(ia)) {
                             auto d = t.grad_buffer(ia);
                             for (std::size_t i = 0; i < na; ++i) d[i] += g[i];
                           }
                           if (t.needs_grad(ib)) {
                             auto d = t.grad_buffer(ib);
                             for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[na + i];
                           }
                         });
}

Var leaky_relu(Var x, double slope) {
  auto xv = x.value();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  const int ix = x.id();
  return x.tape().record(slope == 0.0 ? "relu" : "leaky_relu", x.shape(), std::move(out), {x},
                         [=](std::span<const double> g, Tape& t) {
                           auto v = t.value(ix);
                           auto d = t.grad_buffer(ix);
                           for (std::size_t i = 0; i < g.size(); ++i) d[i] += v[i] > 0.0 ? g[i] : slope * g[i];
                         });
}

Var relu(Var x) { return leaky_relu(x, 0.0); }

Var channel_affine(Var x, Var gamma, Var beta) {
  check_chw(x, "channel_affine");
  const int C = x.shape()[0];
  check(gamma.shape() == Shape{C} && beta.shape() == Shape{C}, "channel_affine parameters must be [C]");
  const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  auto xv = x.value(), gv = gamma.value(), bv = beta.value();
  std::vector<double> out(xv.size());
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < plane; ++p) out[c * plane + p] = gv[c] * xv[c * plane + p] + bv[c];
  const int ix = x.id(), ig = gamma.id(), ib = beta.id();
  return x.tape().record("channel_affine", x.shape(), std::move(out), {x, gamma, beta},
                         [=](std::span<const double> g, Tape& t) {
                           auto xv = t.value(ix), gv = t.value(ig);
                           if (t.needs_grad(ix)) {
                             auto d = t.grad_buffer(ix);
                             for (int c = 0; c < C; ++c)
                               for (std::size_t p = 0; p < plane; ++p) d[c * plane + p] += gv[c] * g[c * plane + p];
                           }
                           if (t.needs_grad(ig)) {
                             auto d = t.grad_buffer(ig);
                             for (int c = 0; c < C; ++c)
                               for (std::size_t p = 0; p < plane; ++p) d[c] += xv[c * plane + p] * g[c * plane + p];
                           }
                           if (t.needs_grad(ib)) {
                             auto d = t.grad_buffer(ib);
                             for (int c = 0; c < C; ++c)
                               for (std::size_t p = 0; p < plane; ++p) d[c] += g[c * plane + p];
                           }
                         });
}

namespace {

void transform_pairs(std::span<const double> in, std::span<double> out, int K, int H, int W, bool inverse,
                     bool accumulate) {
  const std::size_t plane = static_cast<std::size_t>(H) * W;
  std::vector<cplx> buf(plane);
  for (int k = 0; k < K; ++k) {
    const double* re = in.data() + (2 * k) * plane;
    const double* im = in.data() + (2 * k + 1) * plane;
    for (std::size_t p = 0; p < plane; ++p) buf[p] = {re[p], im[p]};
    if (inverse)
      fft::ifft2c(buf, H, W);
    else
      fft::fft2c(buf, H, W);
    double* ore = out.data() + (2 * k) * plane;
    double* oim = out.data() + (2 * k + 1) * plane;
    for (std::size_t p = 0; p < plane; ++p) {
      if (accumulate) {
        ore[p] += buf[p].real();
        oim[p] += buf[p].imag();
      } else {
        ore[p] = buf[p].real();
        oim[p] = buf[p].imag();
      }
    }
  }
}

Var fft_op(Var x, bool inverse) {
  check_complex(x, inverse ? "ifft2c" : "fft2c");
  const int K = x.shape()[0] / 2, H = x.shape()[1], W = x.shape()[2];
  std::vector<double> out(x.size());
  transform_pairs(x.value(), out, K, H, W, inverse, false);
  const int ix = x.id();
  // A unitary map's adjoint is its inverse.
  return x.tape().record(inverse ? "ifft2c" : "fft2c", x.shape(), std::move(out), {x},
                         [=](std::span<const double> g, Tape& t) {
                           transform_pairs(g, t.grad_buffer(ix), K, H, W, !inverse, true);
                         });
}

}  // namespace

Var fft2c(Var x) { return fft_op(x, false); }
Var ifft2c(Var x) { return fft_op(x, true); }

Var column_mask(Var x, std::span<const std::uint8_t> keep) {
  check_chw(x, "column_mask");
  const int C = x.shape()[0], H = x.shape()[1], W = x.shape()[2];
  check(static_cast<int>(keep.size()) == W, "column_mask: mask width does not match tensor width");
  std::vector<std::uint8_t> k(keep.begin(), keep.end());
  auto xv = x.value();
  std::vector<double> out(xv.size());
  const std::size_t rows = static_cast<std::size_t>(C) * H;
  for (std::size_t r = 0; r < rows; ++r)
    for (int c = 0; c < W; ++c) out[r * W + c] = k[c] ? xv[r * W + c] : 0.0;
  const int ix = x.id();
  return x.tape().record("column_mask", x.shape(), std::move(out), {x},
                         [=, k = std::move(k)](std::span<const double> g, Tape& t) {
                           auto d = t.grad_buffer(ix);
                           for (std::size_t r = 0; r < rows; ++r)
                             for (int c = 0; c < W; ++c)
                               if (k[c]) d[r * W + c] += g[r * W + c];
                         });
}

Var magnitude(Var x) {
  check_complex(x, "magnitude");
  const int K = x.shape()[0] / 2;
  const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  auto xv = x.value();
  std::vector<double> out(K * plane);
  for (int k = 0; k < K; ++k)
    for (std::size_t p = 0; p < plane; ++p) {
      const double re = xv[2 * k * plane + p], im = xv[(2 * k + 1) * plane + p];
      out[k * plane + p] = std::sqrt(re * re + im * im + kMagnitudeSmoothing);
    }
  const int ix = x.id(), self = static_cast<int>(x.tape().size());
  return x.tape().record("magnitude", {K, x.shape()[1], x.shape()[2]}, std::move(out), {x},
                         [=](std::span<const double> g, Tape& t) {
                           auto xv = t.value(ix), ov = t.value(self);
                           auto d = t.grad_buffer(ix);
                           for (int k = 0; k < K; ++k)
                             for (std::size_t p = 0; p < plane; ++p) {
                               const double s = g[k * plane + p] / ov[k * plane + p];
                               d[2 * k * plane + p] += s * xv[2 * k * plane + p];
                               d[(2 * k + 1) * plane + p] += s * xv[(2 * k + 1) * plane + p];
                             }
                         });
}

Var rss(Var x) {
  check_complex(x, "rss");
  const int C = x.shape()[0];
  const std::size_t plane = static_cast<std::size_t>(x.shape()[1]) * x.shape()[2];
  auto xv = x.value();
  std::vector<double> out(plane, kMagnitudeSmoothing);
  for (int c = 0; c < C; ++c)
    for (std::size_t p = 0; p < plane; ++p) out[p] += xv[c * plane + p] * xv[c * plane + p];
  for (auto& v : out) v = std::sqrt(v);
  const int ix = x.id(), self = static_cast<int>(x.tape().size());
  return x.tape().record("rss", {1, x.shape()[1], x.shape()[2]}, std::move(out), {x},
                         [=](std::span<const double> g, Tape& t) {
                           auto xv = t.value(ix), ov = t.value(self);
                           auto d = t.grad_buffer(ix);
                           for (int c = 0; c < C; ++c)
                             for (std::size_t p = 0; p < plane; ++p) d[c * plane + p] += g[p] * xv[c * plane + p] / ov[p];
                         });
}

Var sum_squares(Var x) {
  double s = 0.0;
  for (double v : x.value()) s += v * v;
  const int ix = x.id();
  return x.tape().record("sum_squares", {1}, {s}, {x}, [=](std::span<const double> g, Tape& t) {
    auto xv = t.value(ix);
    auto d = t.grad_buffer(ix);
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * xv[i] * g[0];
  });
}

std::vector<double> finite_diff_gradient(const std::function<double(std::span<const double>)>& f,
                                         std::span<const double> x, double h, Difference scheme) {
  require(h > 0.0, ErrorCode::InvalidSpec, "finite-difference step must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  const double f0 = scheme == Difference::Forward ? f(probe) : 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double fp = f(probe);
    if (scheme == Difference::Forward) {
      grad[i] = (fp - f0) / h;
    } else {
      probe[i] = x[i] - h;
      grad[i] = (fp - f(probe)) / (2.0 * h);
    }
    probe[i] = x[i];
  }
  return grad;
}

}  // namespace csr::ad
