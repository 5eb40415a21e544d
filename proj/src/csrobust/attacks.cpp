#include "csrobust/attacks.hpp"

#include <cmath>
#include <limits>
#include <random>

#include "csrobust/parallel.hpp"
#include "csrobust/report.hpp"

namespace csr {
namespace {

double channel_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void mask_channels(std::span<double> v, const SamplingMask& mask) {
  const int w = mask.width();
  for (std::size_t i = 0; i < v.size(); ++i)
    if (!mask.keep[i % w]) v[i] = 0.0;
}

// Rescale onto the sphere (or into the ball) of the given radius.
void project(std::span<double> v, double radius, bool sphere) {
  const double n = channel_norm(v);
  if (n == 0.0) return;
  if (sphere || n > radius)
    for (auto& x : v) x *= radius / n;
}

KSpaceVolume difference_measurement(const ComplexImage& x, const ComplexImage& x_star, const CoilSensitivities& sens,
                                    const SamplingMask& mask) {
  ComplexImage d = x;
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= x_star[i];
  return forward(d, sens, mask);
}

// Moves z a fraction kappa toward target and projects back onto the sphere or ball.
void z_update(KSpaceVolume& z, const KSpaceVolume& target, double kappa, double radius, const SamplingMask& mask,
              bool sphere) {
  for (std::size_t i = 0; i < z.size(); ++i) z.values()[i] += kappa * (target.values()[i] - z.values()[i]);
  apply_mask(z, mask);
  const double n = norm2(z.values());
  if (n == 0.0 || (!sphere && n <= radius)) return;
  for (auto& v : z.values()) v *= radius / n;
}

ComplexImage subgradient_l1(const ComplexImage& x, const TransformSpec& transform) {
  ComplexImage c = analyze(x, transform);
  for (auto& v : c.values()) {
    const double a = std::abs(v);
    v = a > 0.0 ? v / a : cplx{};
  }
  return synthesize(c, transform);
}

Perturbation zero_perturbation(int n_coils, int n, double reference_norm, const std::string& source) {
  return {KSpaceVolume(n_coils, n, n), 0.0, reference_norm, source};
}

JointAttackResult joint_l1(const L1Reconstructor& method, const ComplexImage& x_star, const CoilSensitivities& sens,
                           const SamplingMask& mask, const JointAttackConfig& cfg, double beta,
                           const KSpaceVolume& y, double radius) {
  const auto& l1 = method.config();
  const double lipschitz = 2.0 * operator_norm_sq(sens, mask, l1.power_iters);
  const double eta = cfg.x_step_scale / lipschitz;
  const double limit = cfg.divergence_factor * std::max(norm2(x_star.values()), 1e-300);

  JointAttackResult res;
  res.beta = beta;
  Perturbation init = random_perturbation(y.n_coils(), y.height(), y.width(), cfg.epsilon, norm2(y.values()),
                                          cfg.seed, &mask);
  KSpaceVolume z = init.z;
  ComplexImage x = x_star;
  const int block = std::max(cfg.block, 1);
  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    for (int b = 0; b < block; ++b) {
      KSpaceVolume r = forward(x, sens, mask);
      for (std::size_t i = 0; i < r.size(); ++i) r.values()[i] -= y.values()[i] + z.values()[i];
      ComplexImage g = adjoint(r, sens, mask);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] = 2.0 * g[i] - 2.0 * beta * (x[i] - x_star[i]);
      if (cfg.l1_prox) {
        ComplexImage v = x;
        for (std::size_t i = 0; i < v.size(); ++i) v[i] -= eta * g[i];
        ComplexImage c = analyze(v, l1.transform);
        soft_threshold_inplace(c.values(), eta * l1.lambda);
        x = synthesize(c, l1.transform);
      } else {
        ComplexImage s = subgradient_l1(x, l1.transform);
        for (std::size_t i = 0; i < x.size(); ++i) x[i] -= eta * (g[i] + l1.lambda * s[i]);
      }
      const double xn = norm2(x.values());
      if (!std::isfinite(xn) || xn > limit)
        fail(ErrorCode::NumericalFailure, "joint attack diverged: beta=" + format_number(beta) +
                                              " drives ||x|| past " + format_number(cfg.divergence_factor) +
                                              " * ||x*||");
    }
    for (int b = 0; b < block; ++b) z_update(z, difference_measurement(x, x_star, sens, mask), cfg.z_step, radius, mask, cfg.sphere);
    res.loss.push_back(joint_l1_loss(x, z, x_star, sens, mask, l1.lambda, l1.transform, beta));
  }
  res.perturbation = {std::move(z), cfg.epsilon, norm2(y.values()), method.id()};
  return res;
}

JointAttackResult joint_decoder(const DecoderReconstructor& method, const ComplexImage& x_star,
                                const CoilSensitivities& sens, const SamplingMask& mask, const JointAttackConfig& cfg,
                                double beta, const KSpaceVolume& y, double radius) {
  const auto& dc = method.config();
  const int n = y.width(), nc = y.n_coils();
  nn::DecoderNet net(n, dc.layers, dc.channels, 2 * nc, dc.upsample, dc.seed);
  nn::Adam adam(net.params(), dc.adam);

  // Coil images S_i x* as channels.
  CoilStack sx(nc, n, n);
  for (int k = 0; k < nc; ++k)
    for (std::size_t p = 0; p < sx.plane_size(); ++p) sx.coil(k)[p] = sens.coil(k)[p] * x_star[p];
  const std::vector<double> sx_ch = to_channels(sx);
  const std::vector<double> y_ch = to_channels(y);
  const ad::Shape shape = channel_shape(y);
  const double limit = cfg.divergence_factor * std::max(channel_norm(sx_ch), 1e-300);

  JointAttackResult res;
  res.beta = beta;
  KSpaceVolume z = random_perturbation(nc, n, n, cfg.epsilon, norm2(y.values()), cfg.seed, &mask).z;
  if (cfg.warm_start) {
    for (int it = 0; it < dc.iterations; ++it) {
      ad::Tape tape;
      auto bound = net.params().bind(tape);
      ad::Var ak = ad::column_mask(ad::fft2c(net.forward(tape, bound)), mask.keep);
      ad::Var fit = ad::scale(ad::sum_squares(ad::sub(ak, tape.constant(shape, y_ch))), 0.5);
      tape.backward(fit);
      adam.step(net.params(), bound);
    }
  }
  const int block = std::max(cfg.block, 1);
  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    std::vector<double> kspace_out;
    double loss_value = 0.0;
    for (int b = 0; b < block; ++b) {
      ad::Tape tape;
      auto bound = net.params().bind(tape);
      ad::Var g = net.forward(tape, bound);
      std::vector<double> yz = y_ch;
      const std::vector<double> z_ch = to_channels(z);
      for (std::size_t i = 0; i < yz.size(); ++i) yz[i] += z_ch[i];
      ad::Var ak = ad::column_mask(ad::fft2c(g), mask.keep);
      ad::Var fit = ad::scale(ad::sum_squares(ad::sub(ak, tape.constant(shape, yz))), 0.5);
      ad::Var away = ad::scale(ad::sum_squares(ad::sub(g, tape.constant(shape, sx_ch))), -beta);
      ad::Var loss = ad::add(fit, away);
      loss_value = loss.value()[0];
      const double gn = channel_norm(g.value());
      if (!std::isfinite(loss_value) || gn > limit)
        fail(ErrorCode::NumericalFailure, "joint attack diverged: beta=" + format_number(beta) +
                                              " drives the decoder output past " +
                                              format_number(cfg.divergence_factor) + " * ||S x*||");
      tape.backward(loss);
      adam.step(net.params(), bound);
      kspace_out.assign(ak.value().begin(), ak.value().end());
    }
    // z-gradient of the fit term is z - (M F G(C) - A x*); step toward its minimizer.
    KSpaceVolume target = kspace_from_channels(kspace_out, nc, n, n);
    for (std::size_t i = 0; i < target.size(); ++i) target.values()[i] -= y.values()[i];
    for (int b = 0; b < block; ++b) z_update(z, target, cfg.z_step, radius, mask, cfg.sphere);
    res.loss.push_back(loss_value);
  }
  res.perturbation = {std::move(z), cfg.epsilon, norm2(y.values()), method.id()};
  return res;
}

}  // namespace

KSpaceVolume apply_perturbation(const KSpaceVolume& y, const Perturbation& p) {
  require(y.same_shape(p.z), ErrorCode::ShapeMismatch, "perturbation shape does not match k-space");
  KSpaceVolume out = y;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += p.z.values()[i];
  return out;
}

double attack_discrepancy(const Reconstructor& recon, const KSpaceVolume& y, const KSpaceVolume& z,
                          const SamplingMask& mask, const CoilSensitivities& sens) {
  ad::Tape tape;
  const ad::Shape shape = channel_shape(y);
  ad::Var clean = recon.reconstruct(tape, tape.constant(shape, to_channels(y)), mask, sens);
  std::vector<double> yz = to_channels(y);
  const std::vector<double> zc = to_channels(z);
  for (std::size_t i = 0; i < yz.size(); ++i) yz[i] += zc[i];
  ad::Var pert = recon.reconstruct(tape, tape.constant(shape, yz), mask, sens);
  return 0.5 * ad::sum_squares(ad::sub(pert, clean)).value()[0];
}

Perturbation pgd_attack(const Reconstructor& recon, const ComplexImage& x_star, const CoilSensitivities& sens,
                        const SamplingMask& mask, const PgdConfig& cfg, PgdTrace* trace) {
  require(cfg.epsilon >= 0.0, ErrorCode::InvalidSpec, "epsilon must be >= 0");
  require(cfg.iterations >= 0, ErrorCode::InvalidSpec, "PGD iterations must be >= 0");
  if (!recon.differentiable())
    fail(ErrorCode::Capability, "PGD needs a differentiable reconstructor; '" + recon.id() +
                                    "' is optimization-based, use joint_attack");
  const KSpaceVolume y = forward(x_star, sens, mask);
  const double ref = norm2(y.values());
  const double radius = cfg.epsilon * ref;
  if (radius == 0.0) return zero_perturbation(y.n_coils(), y.width(), ref, recon.id());

  const ad::Shape shape = channel_shape(y);
  const std::vector<double> y_ch = to_channels(y);
  std::vector<double> clean;
  {
    ad::Tape tape;
    ad::Var out = recon.reconstruct(tape, tape.constant(shape, y_ch), mask, sens);
    clean.assign(out.value().begin(), out.value().end());
  }

  std::vector<double> z = to_channels(
      random_perturbation(y.n_coils(), y.height(), y.width(), cfg.epsilon * cfg.init_scale, ref, cfg.seed, &mask).z);
  project(z, radius, cfg.sphere);
  const double step = cfg.step > 0.0 ? cfg.step : 2.0 * radius / std::max(cfg.iterations, 1);

  std::vector<double> best = z;
  double best_obj = -std::numeric_limits<double>::infinity();
  for (int it = 0; it <= cfg.iterations; ++it) {
    ad::Tape tape;
    ad::Var zv = tape.variable(shape, z);
    ad::Var out = recon.reconstruct(tape, ad::add(tape.constant(shape, y_ch), zv), mask, sens);
    ad::Var loss = ad::scale(ad::sum_squares(ad::sub(out, tape.constant(out.shape(), clean))), 0.5);
    const double obj = loss.value()[0];
    if (obj > best_obj) {
      best_obj = obj;
      best = z;
    }
    if (trace) {
      trace->objective.push_back(obj);
      trace->best.push_back(best_obj);
    }
    if (it == cfg.iterations) break;
    tape.backward(loss);
    std::vector<double> g(zv.grad().begin(), zv.grad().end());
    mask_channels(g, mask);
    const double gn = channel_norm(g);
    if (!std::isfinite(gn)) fail(ErrorCode::NumericalFailure, "PGD gradient is not finite at iteration " + std::to_string(it));
    if (gn == 0.0) break;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] += step * g[i] / gn;
    project(z, radius, cfg.sphere);
  }
  return {kspace_from_channels(best, y.n_coils(), y.height(), y.width()), cfg.epsilon, ref, recon.id()};
}

double joint_l1_loss(const ComplexImage& x, const KSpaceVolume& z, const ComplexImage& x_star,
                     const CoilSensitivities& sens, const SamplingMask& mask, double lambda,
                     const TransformSpec& transform, double beta) {
  KSpaceVolume r = difference_measurement(x, x_star, sens, mask);
  double data = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) data += std::norm(r.values()[i] - z.values()[i]);
  double away = 0.0, l1 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) away += std::norm(x[i] - x_star[i]);
  if (lambda != 0.0) {
    const ComplexImage c = analyze(x, transform);
    for (const auto& v : c.values()) l1 += std::abs(v);
  }
  return data + lambda * l1 - beta * away;
}

KSpaceVolume joint_l1_z_gradient(const ComplexImage& x, const KSpaceVolume& z, const ComplexImage& x_star,
                                 const CoilSensitivities& sens, const SamplingMask& mask) {
  KSpaceVolume g = difference_measurement(x, x_star, sens, mask);
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = 2.0 * (z.values()[i] - g.values()[i]);
  return g;
}

JointAttackResult joint_attack(const Reconstructor& method, const ComplexImage& x_star, const CoilSensitivities& sens,
                               const SamplingMask& mask, const JointAttackConfig& cfg) {
  require(cfg.epsilon >= 0.0, ErrorCode::InvalidSpec, "epsilon must be >= 0");
  require(cfg.outer_iterations >= 0, ErrorCode::InvalidSpec, "outer iterations must be >= 0");
  const auto* l1 = dynamic_cast<const L1Reconstructor*>(&method);
  const auto* dec = dynamic_cast<const DecoderReconstructor*>(&method);
  if (!l1 && !dec)
    fail(ErrorCode::Capability, "joint attack supports l1 and decoder reconstructors, not '" + method.id() + "'");

  const KSpaceVolume y = forward(x_star, sens, mask);
  const double radius = cfg.epsilon * norm2(y.values());
  if (radius == 0.0) {
    JointAttackResult res;
    res.beta = cfg.beta.value_or(0.0);
    res.perturbation = zero_perturbation(y.n_coils(), y.width(), norm2(y.values()), method.id());
    return res;
  }
  auto run = [&](double beta) {
    require(beta >= 0.0, ErrorCode::InvalidSpec, "beta must be >= 0");
    return l1 ? joint_l1(*l1, x_star, sens, mask, cfg, beta, y, radius)
              : joint_decoder(*dec, x_star, sens, mask, cfg, beta, y, radius);
  };
  if (cfg.beta) return run(*cfg.beta);

  std::vector<double> grid = cfg.beta_grid;
  std::sort(grid.begin(), grid.end(), std::greater<>());
  std::string tried;
  for (double beta : grid) {
    try {
      return run(beta);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NumericalFailure) throw;
      tried += (tried.empty() ? "" : ", ") + format_number(beta);
    }
  }
  fail(ErrorCode::NumericalFailure, "joint attack diverged for every beta in the grid (" + tried + ")");
}

Perturbation random_perturbation(int n_coils, int height, int width, double epsilon, double reference_norm,
                                 std::uint64_t seed, const SamplingMask* mask) {
  require(epsilon >= 0.0, ErrorCode::InvalidSpec, "epsilon must be >= 0");
  Perturbation p{KSpaceVolume(n_coils, height, width), epsilon, reference_norm, "random"};
  if (epsilon == 0.0 || reference_norm == 0.0) return p;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (auto& v : p.z.values()) v = {normal(rng), normal(rng)};
  if (mask) apply_mask(p.z, *mask);
  const double n = norm2(p.z.values());
  if (n == 0.0) return p;
  const double s = epsilon * reference_norm / n;
  for (auto& v : p.z.values()) v *= s;
  return p;
}

Perturbation attack(const Reconstructor& method, const ComplexImage& x_star, const CoilSensitivities& sens,
                    const SamplingMask& mask, double epsilon, const AttackSettings& settings, std::uint64_t seed) {
  if (method.differentiable()) {
    PgdConfig cfg = settings.pgd;
    cfg.epsilon = epsilon;
    cfg.seed = seed;
    return pgd_attack(method, x_star, sens, mask, cfg);
  }
  JointAttackConfig cfg = settings.joint;
  cfg.epsilon = epsilon;
  cfg.seed = seed;
  return joint_attack(method, x_star, sens, mask, cfg).perturbation;
}

KSpaceVolume evaluation_measurement(const AttackImage& img, const SamplingMask& mask) {
  if (img.measured.size() == 0) return forward(img.target, img.sens, mask);
  KSpaceVolume y = img.measured;
  apply_mask(y, mask);
  return y;
}

PerturbationSet compute_perturbations(const std::vector<ReconstructorPtr>& methods,
                                      const std::vector<AttackImage>& images, const SamplingMask& mask,
                                      const std::vector<double>& epsilons, const AttackSettings& settings,
                                      std::uint64_t seed, int jobs) {
  const std::size_t ni = images.size(), ne = epsilons.size();
  PerturbationSet out(methods.size(), std::vector<std::vector<Perturbation>>(ni, std::vector<Perturbation>(ne)));
  parallel_for(methods.size() * ni * ne, jobs, [&](std::size_t task) {
    const std::size_t m = task / (ni * ne), i = (task / ne) % ni, e = task % ne;
    out[m][i][e] = attack(*methods[m], images[i].target, images[i].sens, mask, epsilons[e], settings, seed ^ i);
  });
  return out;
}

std::vector<TransferRow> transfer_evaluate(const PerturbationSet& perturbations,
                                           const std::vector<ReconstructorPtr>& methods,
                                           const std::vector<AttackImage>& images, const SamplingMask& mask,
                                           const std::vector<double>& epsilons, std::uint64_t seed, int jobs) {
  const std::size_t nm = methods.size(), ni = images.size(), ne = epsilons.size();
  require(perturbations.size() == nm, ErrorCode::ShapeMismatch, "one perturbation list per source method expected");
  std::vector<KSpaceVolume> clean(ni);
  std::vector<RealImage> refs(ni);
  for (std::size_t i = 0; i < ni; ++i) {
    clean[i] = evaluation_measurement(images[i], mask);
    refs[i] = magnitude(images[i].target);
  }

  // psnr[source][target][eps][image]; NaN marks a failed reconstruction.
  std::vector<double> psnr(nm * nm * ne * ni, std::numeric_limits<double>::quiet_NaN());
  parallel_for(psnr.size(), jobs, [&](std::size_t task) {
    const std::size_t s = task / (nm * ne * ni), t = (task / (ne * ni)) % nm, e = (task / ni) % ne, i = task % ni;
    try {
      const auto& p = perturbations[s][i][e];
      RealImage rec = methods[t]->reconstruct(apply_perturbation(clean[i], p), mask, images[i].sens);
      psnr[task] = csr::psnr(refs[i], rec);
    } catch (const Error&) {
    }
  });

  std::vector<TransferRow> rows;
  for (std::size_t s = 0; s < nm; ++s)
    for (std::size_t t = 0; t < nm; ++t)
      for (std::size_t e = 0; e < ne; ++e) {
        const std::size_t base = ((s * nm + t) * ne + e) * ni;
        std::span<const double> vals(psnr.data() + base, ni);
        TransferRow row{methods[s]->id(), methods[t]->id(), epsilons[e], {}, 0};
        for (double v : vals) row.failures += std::isnan(v) ? 1 : 0;
        if (row.failures < ni) row.psnr = bootstrap_ci(vals, 0.95, 2000, seed);
        row.psnr.metric = "psnr";
        rows.push_back(row);
      }
  return rows;
}

std::string transfer_csv(const std::vector<TransferRow>& rows) {
  std::string out = "source_method,target_method,epsilon,psnr_mean,psnr_ci_lo,psnr_ci_hi,n_images\n";
  for (const auto& r : rows) {
    out += r.source + "," + r.target + "," + format_number(r.epsilon) + ",";
    if (r.psnr.n == 0) {
      out += "nan,nan,nan,0\n";
      continue;
    }
    out += format_number(r.psnr.value) + "," + format_number(r.psnr.ci_lo) + "," + format_number(r.psnr.ci_hi) + "," +
           std::to_string(r.psnr.n) + "\n";
  }
  return out;
}

std::vector<AttackCurveRow> attack_curve(const Reconstructor& method, const std::vector<AttackImage>& images,
                                         const SamplingMask& mask, const std::vector<double>& epsilons,
                                         const AttackSettings& settings, std::uint64_t seed, int jobs) {
  const std::size_t ni = images.size(), ne = epsilons.size();
  std::vector<double> adv(ne * ni, std::numeric_limits<double>::quiet_NaN()), rnd = adv;
  parallel_for(ne * ni, jobs, [&](std::size_t task) {
    const std::size_t e = task / ni, i = task % ni;
    const auto& img = images[i];
    const KSpaceVolume y = evaluation_measurement(img, mask);
    const RealImage ref = magnitude(img.target);
    try {
      Perturbation p = attack(method, img.target, img.sens, mask, epsilons[e], settings, seed ^ i);
      adv[task] = psnr(ref, method.reconstruct(apply_perturbation(y, p), mask, img.sens));
    } catch (const Error&) {
    }
    try {
      Perturbation r = random_perturbation(y.n_coils(), y.height(), y.width(), epsilons[e], norm2(y.values()),
                                           (seed ^ i) + 0x9e3779b97f4a7c15ULL, &mask);
      rnd[task] = psnr(ref, method.reconstruct(apply_perturbation(y, r), mask, img.sens));
    } catch (const Error&) {
    }
  });
  std::vector<AttackCurveRow> rows;
  for (std::size_t e = 0; e < ne; ++e)
    for (int k = 0; k < 2; ++k) {
      const auto& src = k == 0 ? adv : rnd;
      AttackCurveRow row{method.id(), epsilons[e], k == 0 ? "adversarial" : "random", {}, {}, 0};
      row.per_image.assign(src.begin() + e * ni, src.begin() + (e + 1) * ni);
      for (double v : row.per_image) row.failures += std::isnan(v) ? 1 : 0;
      if (row.failures < ni) row.psnr = bootstrap_ci(row.per_image, 0.95, 2000, seed);
      row.psnr.metric = "psnr";
      rows.push_back(std::move(row));
    }
  return rows;
}

std::string attack_curve_csv(const std::vector<AttackCurveRow>& rows) {
  std::string out = "method,epsilon,perturbation,psnr_mean,psnr_ci_lo,psnr_ci_hi,n_images\n";
  for (const auto& r : rows) {
    out += r.method + "," + format_number(r.epsilon) + "," + r.kind + ",";
    if (r.psnr.n == 0) {
      out += "nan,nan,nan,0\n";
      continue;
    }
    out += format_number(r.psnr.value) + "," + format_number(r.psnr.ci_lo) + "," + format_number(r.psnr.ci_hi) + "," +
           std::to_string(r.psnr.n) + "\n";
  }
  return out;
}

}  // namespace csr
