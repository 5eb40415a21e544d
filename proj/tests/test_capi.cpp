#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <csrobust.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("csrobust_capi_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Generates four 16x16 ellipse volumes and returns the manifest path.
fs::path make_dataset(const fs::path& dir) {
  write(dir / "gen.json",
        R"({"size":16,"n_coils":2,"seed":3,"output_dir":"data",)"
        R"("domains":[{"name":"ell","family":"ellipses","count":4}]})");
  csr_run_result* r = nullptr;
  REQUIRE(csr_run("gen", (dir / "gen.json").c_str(), nullptr, 1, &r) == CSR_OK);
  REQUIRE(r != nullptr);
  CHECK(csr_run_artifact_count(r) == 5);
  CHECK(fs::equivalent(csr_run_out_dir(r), dir / "data"));
  csr_run_free(r);
  return dir / "data" / "ell" / "manifest.json";
}

}  // namespace

TEST_CASE("status codes have names and exit codes") {
  CHECK(std::string(csr_version()).size() > 0);
  CHECK(std::string(csr_status_name(CSR_OK)) == "ok");
  CHECK(std::string(csr_status_name(CSR_MISSING_INPUT)) == "missing-input");
  CHECK(csr_exit_code(CSR_OK) == 0);
  CHECK(csr_exit_code(CSR_SCHEMA) == 2);
  CHECK(csr_exit_code(CSR_INVALID_SPEC) == 2);
  CHECK(csr_exit_code(CSR_PARSE) == 2);
  CHECK(csr_exit_code(CSR_MISSING_INPUT) == 3);
  CHECK(csr_exit_code(CSR_NUMERICAL_FAILURE) == 4);
  CHECK(csr_exit_code(CSR_IO) == 1);
}

TEST_CASE("every experiment command is listed") {
  std::set<std::string> names;
  for (size_t i = 0; i < csr_command_count(); ++i) names.insert(csr_command_name(i));
  for (const char* c : {"gen", "recon", "attack", "transfer", "shift", "filter", "spectrum", "probe", "sweep", "metrics"})
    CHECK(names.count(c) == 1);
  CHECK(csr_command_name(csr_command_count()) == nullptr);
}

TEST_CASE("errors are reported through status and last error") {
  csr_volume* v = nullptr;
  CHECK(csr_volume_read("/nonexistent/x.ksv", &v) == CSR_MISSING_INPUT);
  CHECK(v == nullptr);
  CHECK(std::string(csr_last_error()).size() > 0);
  CHECK(csr_version() != nullptr);

  const fs::path dir = scratch("errors");
  csr_run_result* r = nullptr;
  CHECK(csr_run("gen", (dir / "absent.json").c_str(), nullptr, 1, &r) == CSR_MISSING_INPUT);
  write(dir / "bad.json", "{");
  CHECK(csr_run("gen", (dir / "bad.json").c_str(), nullptr, 1, &r) == CSR_SCHEMA);
  write(dir / "gen.json", R"({"size":16,"domains":[{"name":"a","family":"ellipses","count":1}],"bogus":1})");
  CHECK(csr_run("gen", (dir / "gen.json").c_str(), nullptr, 1, &r) == CSR_SCHEMA);
  CHECK(csr_run("nonsense", (dir / "gen.json").c_str(), nullptr, 1, &r) != CSR_OK);
  CHECK(r == nullptr);
  CHECK(csr_run("gen", nullptr, nullptr, 1, &r) != CSR_OK);
}

TEST_CASE("volumes load, reconstruct and score through the C interface") {
  const fs::path dir = scratch("volumes");
  make_dataset(dir);
  csr_volume* v = nullptr;
  REQUIRE(csr_volume_read((dir / "data" / "ell" / "ell-0000.ksv").c_str(), &v) == CSR_OK);
  int nc = 0, h = 0, w = 0;
  REQUIRE(csr_volume_dims(v, &nc, &h, &w) == CSR_OK);
  CHECK(nc == 2);
  CHECK(h == 16);
  CHECK(w == 16);

  std::vector<double> target(h * w), recon(h * w);
  REQUIRE(csr_volume_target(v, target.data(), target.size()) == CSR_OK);
  CHECK(csr_volume_target(v, target.data(), 3) == CSR_SHAPE_MISMATCH);

  // Full sampling makes zero filling exact.
  REQUIRE(csr_reconstruct(v, R"({"id":"zf","family":"zero_filled"})", R"({"acceleration":1})", recon.data(),
                          recon.size()) == CSR_OK);
  double nmse = -1;
  REQUIRE(csr_metric("nmse", target.data(), recon.data(), h, w, &nmse) == CSR_OK);
  CHECK(nmse <= 1e-10);

  REQUIRE(csr_reconstruct(v, R"({"id":"zf","family":"zero_filled"})", nullptr, recon.data(), recon.size()) ==
          CSR_OK);
  double ssim = -1;
  REQUIRE(csr_metric("ssim", target.data(), recon.data(), h, w, &ssim) == CSR_OK);
  CHECK(ssim > 0.0);
  CHECK(ssim < 1.0);
  CHECK(csr_metric("lpips", target.data(), recon.data(), h, w, &ssim) != CSR_OK);
  CHECK(csr_reconstruct(v, R"({"id":"x","family":"magic"})", nullptr, recon.data(), recon.size()) == CSR_SCHEMA);
  CHECK(csr_reconstruct(v, R"({"id":"x","family":"cnn"})", nullptr, recon.data(), recon.size()) != CSR_OK);

  const fs::path copy = dir / "copy.ksv";
  REQUIRE(csr_volume_write(v, copy.c_str()) == CSR_OK);
  csr_volume* back = nullptr;
  REQUIRE(csr_volume_read(copy.c_str(), &back) == CSR_OK);
  std::vector<double> t2(h * w);
  REQUIRE(csr_volume_target(back, t2.data(), t2.size()) == CSR_OK);
  CHECK(t2 == target);
  csr_volume_free(back);
  csr_volume_free(v);
}
