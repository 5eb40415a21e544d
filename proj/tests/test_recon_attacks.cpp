#include <doctest.h>

#include <cmath>

#include "csrobust/attacks.hpp"
#include "csrobust/metrics.hpp"
#include "csrobust/reconstructors.hpp"
#include "helpers.hpp"

using namespace csr;

namespace {

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

double nmse_complex(const ComplexImage& a, const ComplexImage& ref) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - ref[i]);
    den += std::norm(ref[i]);
  }
  return num / den;
}

std::shared_ptr<const CnnModel> tiny_cnn(int n, std::uint64_t seed) {
  std::vector<Volume> vols;
  for (int i = 0; i < 4; ++i) vols.push_back(testutil::phantom_volume(n, 2, 50 + i));
  TrainedCnnConfig cfg;
  cfg.depth = 2;
  cfg.width = 4;
  cfg.epochs = 3;
  return std::make_shared<CnnModel>(cnn_train(make_training_set(vols, make_mask(n, MaskSpec{})), cfg, seed));
}

}  // namespace

TEST_CASE("zero-filled inverts fully sampled noiseless data") {
  ZeroFilled zf;
  const auto mask = full_mask(32);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const Volume v = testutil::phantom_volume(32, 4, s);
    CHECK(nmse(magnitude(v.target), zf.reconstruct(v.kspace, mask, v.sens)) <= 1e-10);
  }
}

TEST_CASE("zero-filled tape path agrees with the direct path") {
  const Volume v = testutil::phantom_volume(16, 2, 4);
  const auto mask = make_mask(16, MaskSpec{});
  const KSpaceVolume y = forward(v.target, v.sens, mask);
  ZeroFilled zf;
  const RealImage direct = zf.reconstruct(y, mask, v.sens);
  ad::Tape tape;
  ad::Var out = zf.reconstruct(tape, tape.constant(channel_shape(y), to_channels(y)), mask, v.sens);
  // the tape magnitude is sqrt(re^2 + im^2 + 1e-12)
  CHECK(testutil::max_abs_diff(out.value(), direct.values()) < 2e-6);
}

TEST_CASE("fista matches the closed-form solution when A is an isometry") {
  // Full sampling with normalized sensitivities gives A^H A = I, so the
  // minimizer is H^T soft(H A^H y, lambda / 2).
  const int n = 16;
  const Volume v = testutil::phantom_volume(n, 3, 8);
  const auto mask = full_mask(n);
  const KSpaceVolume y = add_noise(forward(v.target, v.sens, mask), 20.0, 1);
  for (auto kind : {TransformKind::WaveletHaar, TransformKind::Dct}) {
    SparseReconConfig cfg;
    cfg.lambda = 0.05;
    cfg.transform = {kind, 3};
    cfg.max_iters = 200;
    cfg.tolerance = 0.0;
    const SparseReconResult r = l1_solve(y, mask, v.sens, cfg);
    const ComplexImage expect =
        synthesize(soft_threshold(analyze(adjoint(y, v.sens, mask), cfg.transform), cfg.lambda / 2), cfg.transform);
    CHECK(nmse_complex(r.image, expect) < 1e-12);
    CHECK(r.lipschitz == doctest::Approx(2.0).epsilon(1e-6));
  }
}

TEST_CASE("fista returns its lowest-objective iterate") {
  const Volume v = testutil::phantom_volume(16, 2, 9);
  const auto mask = make_mask(16, MaskSpec{});
  const KSpaceVolume y = forward(v.target, v.sens, mask);
  SparseReconConfig cfg;
  cfg.max_iters = 50;
  const SparseReconResult r = l1_solve(y, mask, v.sens, cfg);
  const double best = *std::min_element(r.objective.begin(), r.objective.end());
  CHECK(l1_objective(r.image, y, mask, v.sens, cfg.lambda, cfg.transform) == doctest::Approx(best).epsilon(1e-10));
  CHECK(best < r.objective.front());
  CHECK(r.step == doctest::Approx(cfg.step_scale / r.lipschitz));
}

TEST_CASE("fista divergence names the step size") {
  const Volume v = testutil::phantom_volume(16, 2, 9);
  const auto mask = make_mask(16, MaskSpec{});
  SparseReconConfig cfg;
  cfg.max_iters = 100;
  KSpaceVolume y = forward(v.target, v.sens, mask);
  for (auto& e : y.values()) e *= 1e160;
  try {
    l1_solve(y, mask, v.sens, cfg);
    FAIL("expected divergence");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericalFailure);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}

TEST_CASE("operator norm of the full-sampling operator is one") {
  CHECK(operator_norm_sq(generate_sensitivities(4, 16, 1), full_mask(16), 30) == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(operator_norm_sq(generate_sensitivities(4, 16, 1), make_mask(16, MaskSpec{}), 30) <= 1.0 + 1e-12);
}

TEST_CASE("decoder fit lowers the loss and is deterministic") {
  const Volume v = testutil::phantom_volume(16, 2, 3);
  const auto mask = make_mask(16, MaskSpec{});
  const KSpaceVolume y = forward(v.target, v.sens, mask);
  DecoderConfig cfg;
  cfg.layers = 3;
  cfg.channels = 8;
  cfg.iterations = 30;
  const DecoderFitResult a = decoder_fit(y, mask, cfg, 5), b = decoder_fit(y, mask, cfg, 5);
  CHECK(a.losses.size() == 31);
  CHECK(a.best_loss < a.initial_loss);
  CHECK(a.best_loss == *std::min_element(a.losses.begin(), a.losses.end()));
  CHECK(a.image == b.image);
  cfg.iterations = 0;
  CHECK(decoder_fit(y, mask, cfg, 5).best_iteration == 0);
  cfg.iterations = 20;
  cfg.optimizer = DecoderOptimizer::GradientDescent;
  const DecoderFitResult gd = decoder_fit(y, mask, cfg, 5);
  CHECK(gd.best_loss <= gd.initial_loss);
}

TEST_CASE("cnn reconstruction is deterministic and matches its tape path") {
  const auto model = tiny_cnn(16, 2);
  CnnReconstructor cnn("cnn", model);
  const Volume v = testutil::phantom_volume(16, 2, 70);
  const auto mask = make_mask(16, MaskSpec{});
  const KSpaceVolume y = forward(v.target, v.sens, mask);
  const RealImage a = cnn.reconstruct(y, mask, v.sens);
  CHECK(a == cnn.reconstruct(y, mask, v.sens));
  ad::Tape tape;
  ad::Var out = cnn.reconstruct(tape, tape.constant(channel_shape(y), to_channels(y)), mask, v.sens);
  CHECK(testutil::max_abs_diff(out.value(), a.values()) < 2e-6);
  CHECK(encode_model(*tiny_cnn(16, 2)) == encode_model(*model));
}

TEST_CASE("optimization-based reconstructors refuse the tape path") {
  L1Reconstructor l1_impl("l1", {});
  const Reconstructor& l1 = l1_impl;
  ad::Tape tape;
  const KSpaceVolume y(2, 8, 8);
  CHECK(code_of([&] {
          l1.reconstruct(tape, tape.constant(channel_shape(y), to_channels(y)), full_mask(8),
                         generate_sensitivities(2, 8, 0));
        }) == ErrorCode::Capability);
}

TEST_CASE("joint attack z-gradient matches finite differences") {
  const int n = 8, nc = 2;
  const auto sens = generate_sensitivities(nc, n, 3);
  const auto mask = make_mask(n, MaskSpec{2.0, 0.25, MaskPattern::Equispaced, 0});
  const ComplexImage x_star = testutil::random_image(n, n, 1);
  const ComplexImage x = testutil::random_image(n, n, 2);
  KSpaceVolume z = testutil::random_kspace(nc, n, 3);
  apply_mask(z, mask);
  const KSpaceVolume g = joint_l1_z_gradient(x, z, x_star, sens, mask);
  // Real and imaginary parts are independent real coordinates.
  double num = 0, den = 0;
  const double h = 1e-6;
  for (std::size_t i = 0; i < z.size(); ++i)
    for (int part = 0; part < 2; ++part) {
      KSpaceVolume zp = z, zm = z;
      const cplx d = part == 0 ? cplx(h, 0) : cplx(0, h);
      zp.values()[i] += d;
      zm.values()[i] -= d;
      const double fd = (joint_l1_loss(x, zp, x_star, sens, mask, 0.01, TransformSpec{TransformKind::WaveletHaar, 2}, 0.1) -
                         joint_l1_loss(x, zm, x_star, sens, mask, 0.01, TransformSpec{TransformKind::WaveletHaar, 2}, 0.1)) /
                        (2 * h);
      const double an = part == 0 ? g.values()[i].real() : g.values()[i].imag();
      num += (fd - an) * (fd - an);
      den += an * an;
    }
  CHECK(std::sqrt(num / den) <= 1e-3);
}

TEST_CASE("pgd perturbations lie on the epsilon sphere inside the measured columns") {
  const Volume v = testutil::phantom_volume(16, 2, 12);
  const auto mask = make_mask(16, MaskSpec{});
  ZeroFilled zf;
  PgdConfig cfg;
  cfg.epsilon = 0.05;
  cfg.iterations = 5;
  PgdTrace trace;
  const Perturbation p = pgd_attack(zf, v.target, v.sens, mask, cfg, &trace);
  const KSpaceVolume y = forward(v.target, v.sens, mask);
  CHECK(norm2(p.z.values()) == doctest::Approx(0.05 * norm2(y.values())).epsilon(1e-10));
  for (int k = 0; k < 2; ++k)
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c)
        if (!mask.keep[c]) CHECK(p.z(k, r, c) == cplx{});
  REQUIRE(trace.best.size() == 6);
  for (std::size_t i = 1; i < trace.best.size(); ++i) CHECK(trace.best[i] >= trace.best[i - 1]);
  CHECK(attack_discrepancy(zf, y, p.z, mask, v.sens) == doctest::Approx(trace.best.back()).epsilon(1e-9));

  cfg.epsilon = 0.0;
  CHECK(norm2(pgd_attack(zf, v.target, v.sens, mask, cfg).z.values()) == 0.0);
  L1Reconstructor l1("l1", {});
  cfg.epsilon = 0.05;
  CHECK(code_of([&] { pgd_attack(l1, v.target, v.sens, mask, cfg); }) == ErrorCode::Capability);
}

TEST_CASE("pgd beats its own random start") {
  const auto model = tiny_cnn(16, 1);
  CnnReconstructor cnn("cnn", model);
  const Volume v = testutil::phantom_volume(16, 2, 13);
  const auto mask = make_mask(16, MaskSpec{});
  PgdConfig cfg;
  cfg.iterations = 10;
  PgdTrace trace;
  pgd_attack(cnn, v.target, v.sens, mask, cfg, &trace);
  CHECK(trace.best.back() > trace.objective.front());
}

TEST_CASE("joint attacks stay on the sphere and reject unsupported methods") {
  const Volume v = testutil::phantom_volume(16, 2, 14);
  const auto mask = make_mask(16, MaskSpec{});
  const KSpaceVolume y = forward(v.target, v.sens, mask);
  SparseReconConfig sc;
  sc.max_iters = 30;
  L1Reconstructor l1("l1", sc);
  JointAttackConfig cfg;
  cfg.outer_iterations = 10;
  const JointAttackResult r = joint_attack(l1, v.target, v.sens, mask, cfg);
  CHECK(norm2(r.perturbation.z.values()) == doctest::Approx(0.05 * norm2(y.values())).epsilon(1e-10));
  CHECK(r.loss.size() == 10);
  CHECK(std::count(cfg.beta_grid.begin(), cfg.beta_grid.end(), r.beta) == 1);

  DecoderConfig dc;
  dc.layers = 3;
  dc.channels = 4;
  dc.iterations = 5;
  DecoderReconstructor dec("dec", dc);
  cfg.beta = 0.01;
  const JointAttackResult d = joint_attack(dec, v.target, v.sens, mask, cfg);
  CHECK(norm2(d.perturbation.z.values()) == doctest::Approx(0.05 * norm2(y.values())).epsilon(1e-10));

  ZeroFilled zf;
  CHECK(code_of([&] { joint_attack(zf, v.target, v.sens, mask, cfg); }) == ErrorCode::Capability);
}

TEST_CASE("random perturbations have the requested norm and support") {
  const auto mask = make_mask(16, MaskSpec{});
  const Perturbation p = random_perturbation(3, 16, 16, 0.1, 7.0, 4, &mask);
  CHECK(norm2(p.z.values()) == doctest::Approx(0.7).epsilon(1e-12));
  for (int c = 0; c < 16; ++c)
    if (!mask.keep[c]) CHECK(p.z(0, 3, c) == cplx{});
  CHECK(random_perturbation(3, 16, 16, 0.1, 7.0, 4, &mask).z == p.z);
}

TEST_CASE("attack curves start at the clean psnr and write the documented header") {
  const auto mask = make_mask(16, MaskSpec{});
  std::vector<AttackImage> images;
  for (int i = 0; i < 3; ++i) {
    const Volume v = testutil::phantom_volume(16, 2, 30 + i);
    images.push_back({"img" + std::to_string(i), v.target, v.sens});
  }
  ZeroFilled zf;
  AttackSettings st;
  st.pgd.iterations = 3;
  const auto rows = attack_curve(zf, images, mask, {0.0, 0.05}, st, 1, 1);
  REQUIRE(rows.size() == 4);
  double clean = 0;
  for (const auto& im : images) clean += psnr(magnitude(im.target), zf.reconstruct(forward(im.target, im.sens, mask), mask, im.sens));
  CHECK(rows[0].psnr.value == clean / 3);
  CHECK(rows[1].psnr.value == clean / 3);
  CHECK(attack_curve_csv(rows).rfind("method,epsilon,perturbation,psnr_mean,psnr_ci_lo,psnr_ci_hi,n_images\n", 0) == 0);

  std::vector<ReconstructorPtr> methods{std::make_shared<ZeroFilled>("a"), std::make_shared<ZeroFilled>("b")};
  const auto perts = compute_perturbations(methods, images, mask, {0.05}, st, 1, 1);
  const auto matrix = transfer_evaluate(perts, methods, images, mask, {0.05}, 1, 1);
  CHECK(matrix.size() == 4);
  CHECK(transfer_csv(matrix).rfind("source_method,target_method,epsilon,psnr_mean,psnr_ci_lo,psnr_ci_hi,n_images\n", 0) == 0);
}
