#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>

#include "csrobust/datagen.hpp"
#include "csrobust/reconstructors.hpp"
#include "csrobust/report.hpp"
#include "csrobust/shift.hpp"
#include "csrobust/volume_io.hpp"
#include "helpers.hpp"

using namespace csr;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("csrobust_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
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

std::size_t parse_offset(std::span<const std::uint8_t> bytes) {
  try {
    decode_volume(bytes);
  } catch (const ParseError& e) {
    return e.offset();
  }
  return static_cast<std::size_t>(-1);
}

}  // namespace

TEST_CASE("phantoms are deterministic, real and peak-normalized") {
  for (auto fam : {PhantomFamily::Ellipses, PhantomFamily::Textured, PhantomFamily::Smooth}) {
    PhantomSpec ps;
    ps.family = fam;
    ps.size = 32;
    ps.seed = 4;
    const ComplexImage a = generate_phantom(ps), b = generate_phantom(ps);
    CHECK(a == b);
    double peak = 0;
    for (const auto& v : a.values()) {
      CHECK(v.imag() == 0.0);
      peak = std::max(peak, std::abs(v));
    }
    CHECK(peak == doctest::Approx(1.0));
    ps.seed = 5;
    CHECK_FALSE(generate_phantom(ps) == a);
  }
  CHECK_THROWS_AS(parse_phantom_family("brain"), Error);
}

TEST_CASE("sparse phantoms have exactly the requested support") {
  for (auto kind : {TransformKind::WaveletHaar, TransformKind::Dct}) {
    PhantomSpec ps;
    ps.size = 32;
    ps.seed = 2;
    ps.sparsity_basis = TransformSpec{kind, 4};
    ps.sparsity_fraction = 0.05;
    const ComplexImage x = generate_phantom(ps);
    const ComplexImage c = analyze(x, *ps.sparsity_basis);
    std::size_t nonzero = 0;
    double cmax = 0;
    for (const auto& v : c.values()) cmax = std::max(cmax, std::abs(v));
    for (const auto& v : c.values()) nonzero += std::abs(v) > 1e-9 * cmax;
    CHECK(nonzero == sparsity_count(32, 0.05));
  }
  CHECK(sparsity_count(64, 0.05) == 205);
}

TEST_CASE("sensitivities have unit sum of squares everywhere") {
  const auto s = generate_sensitivities(6, 32, 9);
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      double acc = 0;
      for (int k = 0; k < 6; ++k) acc += std::norm(s(k, r, c));
      CHECK(acc == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("volumes round-trip through the binary format") {
  const Volume v = testutil::phantom_volume(16, 3, 7);
  const auto bytes = encode_volume(v);
  CHECK(std::memcmp(bytes.data(), "KSV1", 4) == 0);
  const Volume back = decode_volume(bytes);
  for (std::size_t i = 0; i < v.kspace.size(); ++i)
    CHECK(std::abs(back.kspace.values()[i] - cplx(float(v.kspace.values()[i].real()), float(v.kspace.values()[i].imag()))) == 0.0);
  CHECK(encode_volume(back) == bytes);
  const auto h = decode_volume_header(bytes);
  CHECK(h.n == 16);
  CHECK(h.n_coils == 3);
}

TEST_CASE("malformed volumes report the failing byte offset") {
  const auto good = encode_volume(testutil::phantom_volume(8, 2, 1));
  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(parse_offset(bad_magic) == 0);

  std::vector<std::uint8_t> truncated(good.begin(), good.end() - 10);
  CHECK(parse_offset(truncated) == truncated.size());

  auto trailing = good;
  trailing.push_back(0);
  CHECK(parse_offset(trailing) == good.size());

  auto bad_json = good;
  bad_json[8] = '!';
  CHECK(parse_offset(bad_json) == 8);
  CHECK(code_of([&] { decode_volume(bad_json); }) == ErrorCode::Parse);
}

TEST_CASE("manifests round-trip and resolve paths relative to themselves") {
  const fs::path dir = scratch_dir("manifest");
  DatasetManifest m{"dom", {}};
  for (int i = 0; i < 3; ++i) {
    ManifestEntry e;
    e.id = "dom-000" + std::to_string(i);
    e.path = dir / "vols" / (e.id + ".ksv");
    e.n = 8;
    e.n_coils = 2;
    e.seed = 100 + i;
    e.family = "ellipses";
    if (i == 1) e.snr_db = 30.0;
    write_volume(e.path, testutil::phantom_volume(8, 2, i));
    m.volumes.push_back(e);
  }
  write_manifest(dir / "manifest.json", m);
  const std::string text(reinterpret_cast<const char*>(read_file_bytes(dir / "manifest.json").data()),
                         read_file_bytes(dir / "manifest.json").size());
  CHECK(text.find("\"vols/dom-0000.ksv\"") != std::string::npos);
  const DatasetManifest back = read_manifest(dir / "manifest.json");
  REQUIRE(back.volumes.size() == 3);
  CHECK(back.domain == "dom");
  CHECK(back.volumes[1].snr_db == 30.0);
  CHECK_FALSE(back.volumes[0].snr_db.has_value());
  CHECK(fs::equivalent(back.volumes[2].path, m.volumes[2].path));

  fs::remove(m.volumes[2].path);
  CHECK(code_of([&] { read_manifest(dir / "manifest.json"); }) == ErrorCode::MissingInput);
  CHECK(code_of([&] { read_manifest(dir / "absent.json"); }) == ErrorCode::MissingInput);
  write_text_file(dir / "broken.json", "{\"domain\": 3}");
  CHECK(code_of([&] { read_manifest(dir / "broken.json"); }) == ErrorCode::Schema);
}

TEST_CASE("cnn weights round-trip through the model format") {
  std::vector<Volume> vols{testutil::phantom_volume(16, 2, 1), testutil::phantom_volume(16, 2, 2)};
  TrainedCnnConfig cfg;
  cfg.depth = 2;
  cfg.width = 4;
  cfg.epochs = 1;
  const CnnModel m = cnn_train(make_training_set(vols, make_mask(16, MaskSpec{})), cfg, 3);
  const auto bytes = encode_model(m);
  CHECK(std::memcmp(bytes.data(), "CNW1", 4) == 0);
  const CnnModel back = decode_model(bytes);
  CHECK(back.size == 16);
  CHECK(back.shape.depth == 2);
  REQUIRE(back.params.size() == m.params.size());
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    CHECK(back.params[i].name == m.params[i].name);
    CHECK(back.params[i].value == m.params[i].value);
  }
  CHECK(encode_model(back) == bytes);

  auto bad = bytes;
  bad[1] = 'X';
  CHECK(code_of([&] { decode_model(bad); }) == ErrorCode::Parse);
  std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 4);
  CHECK(code_of([&] { decode_model(cut); }) == ErrorCode::Parse);
}

TEST_CASE("splits are a disjoint cover with stable membership") {
  int counts[3] = {0, 0, 0};
  for (int i = 0; i < 2000; ++i) {
    const std::string id = "img-" + std::to_string(i);
    const Split s = split_of(id);
    CHECK(split_of(id) == s);
    ++counts[static_cast<int>(s)];
  }
  CHECK(counts[0] + counts[1] + counts[2] == 2000);
  CHECK(std::abs(counts[0] / 2000.0 - 0.6) < 0.05);
  CHECK(std::abs(counts[1] / 2000.0 - 0.2) < 0.05);
  CHECK(std::abs(counts[2] / 2000.0 - 0.2) < 0.05);
}

TEST_CASE("number formatting round-trips") {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e17, 123456789.125}) CHECK(std::stod(format_number(v)) == v);
  CHECK(format_number(std::nan("")) == "nan");
  CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
  CHECK(format_number(0.0) == "0");
}
