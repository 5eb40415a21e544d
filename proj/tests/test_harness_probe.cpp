#include <doctest.h>

#include <cmath>
#include <set>

#include "csrobust/feature_probe.hpp"
#include "csrobust/metrics.hpp"
#include "csrobust/parallel.hpp"
#include "csrobust/shift.hpp"
#include "helpers.hpp"

using namespace csr;

namespace {

std::vector<LoadedVolume> corpus(int count, int n, PhantomFamily fam, const std::string& prefix) {
  std::vector<LoadedVolume> out;
  for (int i = 0; i < count; ++i)
    out.push_back({prefix + std::to_string(i), to_string(fam), testutil::phantom_volume(n, 2, 300 + i, fam)});
  return out;
}

template <class F>
ErrorCode code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::Internal;
}

// Zero filling that fails on the measurement with a given norm.
class Flaky final : public Reconstructor {
 public:
  Flaky() = default;
  const std::string& id() const override { return id_; }
  std::string family() const override { return "zero_filled"; }
  RealImage reconstruct(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities&) const override {
    if (norm2(y.values()) == trap_) fail(ErrorCode::NumericalFailure, "trap");
    return zero_filled(y, mask);
  }
  void arm(double norm) { trap_ = norm; }

 private:
  std::string id_ = "flaky";
  double trap_ = -1.0;
};

}  // namespace

TEST_CASE("parallel_for is order independent and propagates the first failure") {
  std::vector<int> a(100), b(100);
  parallel_for(100, 1, [&](std::size_t i) { a[i] = int(i * i); });
  parallel_for(100, 4, [&](std::size_t i) { b[i] = int(i * i); });
  CHECK(a == b);
  try {
    parallel_for(50, 3, [&](std::size_t i) {
      if (i == 7 || i == 30) fail(ErrorCode::Io, "boom " + std::to_string(i));
    });
    FAIL("expected a failure");
  } catch (const Error& e) {
    CHECK(std::string(e.what()) == "boom 7");
  }
}

TEST_CASE("tuning picks the best grid point and breaks ties by index") {
  const auto vols = corpus(4, 16, PhantomFamily::Ellipses, "t");
  const auto mask = make_mask(16, MaskSpec{});
  std::vector<ReconstructorPtr> grid{std::make_shared<ZeroFilled>("a"), std::make_shared<ZeroFilled>("b")};
  const TuneResult t = tune(grid, vols, mask, Metric::Ssim, 2);
  CHECK(t.best == 0);
  CHECK(t.mean_score[0] == t.mean_score[1]);

  SparseReconConfig good, bad;
  good.max_iters = 50;
  good.lambda = 1e-4;
  bad.max_iters = 50;
  bad.lambda = 10.0;
  std::vector<ReconstructorPtr> l1s{std::make_shared<L1Reconstructor>("bad", bad),
                                    std::make_shared<L1Reconstructor>("good", good)};
  CHECK(tune(l1s, vols, mask, Metric::Nmse, 1).best == 1);
}

TEST_CASE("identical domains give identical in and out scores") {
  const auto vols = corpus(5, 16, PhantomFamily::Smooth, "s");
  const auto mask = make_mask(16, MaskSpec{});
  std::vector<ShiftVariant> variants{{"zero_filled", std::make_shared<ZeroFilled>("zf")}};
  const auto res = evaluate_shift(variants, vols, vols, mask, Metric::Ssim, 3, 2);
  REQUIRE(res.size() == 1);
  CHECK(res[0].in_domain.value == res[0].out_domain.value);
  CHECK(shift_csv(res).rfind("variant,family,in_mean,in_lo,in_hi,out_mean,out_lo,out_hi\n", 0) == 0);
}

TEST_CASE("shift fit reports the identity gap") {
  std::vector<ShiftResult> res(3);
  for (int i = 0; i < 3; ++i) {
    res[i].variant = "v" + std::to_string(i);
    res[i].in_domain.value = 0.5 + 0.1 * i;
    res[i].out_domain.value = 0.4 + 0.2 * i;
    res[i].in_domain.n = res[i].out_domain.n = 5;
  }
  const ShiftFit fit = fit_shift(res);
  CHECK(fit.line.slope == doctest::Approx(2.0));
  CHECK(fit.line.intercept == doctest::Approx(-0.6));
  CHECK(fit.mean_identity_gap == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("adversarial filtering selects the hardest images first") {
  CHECK(filter_count(100, 0.1) == 10);
  CHECK(filter_count(101, 0.1) == 11);
  CHECK(filter_count(7, 0.5) == 4);
  auto vols = corpus(6, 16, PhantomFamily::Ellipses, "e");
  auto tex = corpus(6, 16, PhantomFamily::Textured, "x");
  vols.insert(vols.end(), tex.begin(), tex.end());
  const auto mask = make_mask(16, MaskSpec{});
  ZeroFilled zf("filter");
  const FilterResult f = adversarial_filter(vols, zf, mask, 0.25, {"other"}, false, 2);
  REQUIRE(f.selected.size() == 3);
  std::set<std::string> chosen;
  for (const auto& v : f.selected) chosen.insert(v.id);
  double max_selected = -1, min_rest = 2;
  for (std::size_t i = 0; i < f.ids.size(); ++i) {
    if (chosen.count(f.ids[i]))
      max_selected = std::max(max_selected, f.ssim[i]);
    else
      min_rest = std::min(min_rest, f.ssim[i]);
  }
  CHECK(max_selected <= min_rest);
  for (std::size_t k = 1; k < f.selected.size(); ++k) {
    auto pos = [&](const std::string& id) { return std::find(f.ids.begin(), f.ids.end(), id) - f.ids.begin(); };
    CHECK(f.ssim[pos(f.selected[k - 1].id)] <= f.ssim[pos(f.selected[k].id)]);
  }
  CHECK(code_of([&] { adversarial_filter(vols, zf, mask, 0.25, {"filter"}, false, 1); }) == ErrorCode::InvalidSpec);
  CHECK_NOTHROW(adversarial_filter(vols, zf, mask, 0.25, {"filter"}, true, 1));
}

TEST_CASE("failed reconstructions are ranked hardest") {
  const auto vols = corpus(4, 16, PhantomFamily::Ellipses, "f");
  const auto mask = make_mask(16, MaskSpec{});
  Flaky flaky;
  flaky.arm(norm2(measure(vols[2].volume, mask).values()));
  const FilterResult f = adversarial_filter(vols, flaky, mask, 0.25, {}, false, 1);
  CHECK(std::isnan(f.ssim[2]));
  CHECK(f.selected.front().id == "f2");
}

TEST_CASE("spectrum report separates subset and full statistics") {
  const auto vols = corpus(6, 16, PhantomFamily::Ellipses, "p");
  const SpectrumReport rep = spectrum_report(vols, 0.25, {"p1", "p4"}, 0);
  CHECK(rep.rows.size() == 6);
  CHECK(rep.subset.n == 2);
  CHECK(rep.subset.value ==
        doctest::Approx((low_frequency_proportion(vols[1].volume.kspace, 0.25) +
                         low_frequency_proportion(vols[4].volume.kspace, 0.25)) / 2));
  CHECK(spectrum_csv(rep).rfind("image_id,low_frequency_proportion,in_subset\n", 0) == 0);
}

TEST_CASE("features are inserted at the image peak over the window") {
  ComplexImage x(8, 8, {0.25, 0.0});
  x(0, 0) = {0.8, 0.0};
  const ComplexImage y = insert_feature(x, 2, 3, 3);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      const bool inside = r >= 2 && r < 5 && c >= 3 && c < 6;
      CHECK(y(r, c) == (inside ? cplx(0.8, 0.0) : x(r, c)));
    }
  CHECK_THROWS_AS(insert_feature(x, 6, 6, 3), Error);
}

TEST_CASE("heatmaps have grid shape, unit range and an invertible record") {
  const Volume v = testutil::phantom_volume(32, 2, 5);
  const auto mask = make_mask(32, MaskSpec{});
  ZeroFilled zf;
  ProbeSpec spec;
  const HeatMap map = heatmap(zf, v.target, v.sens, mask, spec, 2);
  CHECK(map.rows == 4);
  CHECK(map.cols == 4);
  CHECK(map.raw.size() == 16);
  CHECK(map.missing == 0);
  double lo = 2, hi = -1;
  for (std::size_t i = 0; i < map.raw.size(); ++i) {
    lo = std::min(lo, map.normalized[i]);
    hi = std::max(hi, map.normalized[i]);
    CHECK(denormalize(map, map.normalized[i]) == doctest::Approx(map.raw[i]).epsilon(1e-12));
  }
  CHECK(lo == 0.0);
  CHECK(hi == 1.0);
  const auto pgm = heatmap_pgm(map);
  const std::string header = "P5\n4 4\n255\n";
  CHECK(std::string(pgm.begin(), pgm.begin() + header.size()) == header);
  CHECK(pgm.size() == header.size() + 16);
  CHECK(heatmap_csv(map).rfind("row,col,raw_mse,normalized\n", 0) == 0);
}

TEST_CASE("full sampling makes every probe error vanish") {
  const Volume v = testutil::phantom_volume(32, 4, 6);
  ZeroFilled zf;
  ProbeSpec spec;
  spec.stride = 4;
  const HeatMap map = heatmap(zf, v.target, v.sens, full_mask(32), spec, 1);
  for (double e : map.raw) CHECK(e <= 1e-10);
  for (double e : map.normalized) CHECK(e >= 0.0);
}

TEST_CASE("probe location lists and random draws are validated") {
  ProbeSpec spec;
  spec.locations = ProbeLocations::List;
  spec.list = {{0, 0}, {29, 29}};
  CHECK(probe_positions(32, spec).size() == 2);
  spec.list.push_back({30, 0});
  CHECK_THROWS_AS(probe_positions(32, spec), Error);
  spec.locations = ProbeLocations::Random;
  spec.n_random = 5;
  const auto a = probe_positions(32, spec);
  CHECK(a.size() == 5);
  CHECK(a == probe_positions(32, spec));
  for (const auto& [r, c] : a) CHECK((r >= 0 && c >= 0 && r + 3 <= 32 && c + 3 <= 32));
}

TEST_CASE("window sweep emits one row per method and size") {
  const auto mask = make_mask(16, MaskSpec{});
  std::vector<ProbeImage> images;
  for (int i = 0; i < 2; ++i) {
    const Volume v = testutil::phantom_volume(16, 2, 80 + i);
    images.push_back({"i" + std::to_string(i), v.target, v.sens});
  }
  std::vector<ReconstructorPtr> methods{std::make_shared<ZeroFilled>("a"), std::make_shared<ZeroFilled>("b")};
  const auto rows = window_size_sweep(methods, images, mask, {2, 3, 4, 5}, 3, 1, 2);
  CHECK(rows.size() == 8);
  CHECK(rows[0].error.value == rows[4].error.value);
  CHECK(sweep_csv(rows).rfind("method,window_size,mean,ci_lo,ci_hi\n", 0) == 0);
  CHECK_THROWS_AS(window_size_sweep(methods, images, mask, {17}, 3, 1, 1), Error);
}
