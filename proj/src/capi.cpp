#include "csrobust.h"

#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "csrobust/config.hpp"
#include "csrobust/experiments.hpp"
#include "csrobust/volume_io.hpp"

struct csr_volume {
  csr::Volume v;
};

struct csr_run_result {
  std::string out_dir;
  std::vector<std::string> artifacts;
};

namespace {

thread_local std::string g_last_error;

csr_status status_of(csr::ErrorCode c) { return static_cast<csr_status>(static_cast<int>(c) + 1); }

template <class F>
csr_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return CSR_OK;
  } catch (const csr::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const nlohmann::json::exception& e) {
    g_last_error = e.what();
    return CSR_SCHEMA;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CSR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CSR_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (!p) csr::fail(csr::ErrorCode::InvalidSpec, std::string(name) + " must not be NULL");
}

nlohmann::json parse_json(const char* text, const char* what) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw csr::Error(csr::ErrorCode::Schema, std::string(what) + " is not valid JSON: " + e.what());
  }
}

void copy_image(const csr::RealImage& img, double* out, std::size_t out_len) {
  need(out, "out");
  csr::require(out_len == img.size(), csr::ErrorCode::ShapeMismatch,
               "output buffer holds " + std::to_string(out_len) + " values, image has " + std::to_string(img.size()));
  std::memcpy(out, img.data(), img.size() * sizeof(double));
}

}  // namespace

extern "C" {

const char* csr_version(void) { return "0.1.0"; }

const char* csr_status_name(csr_status status) {
  if (status == CSR_OK) return "ok";
  if (status < CSR_OK || status > CSR_INTERNAL) return "unknown";
  return csr::to_string(static_cast<csr::ErrorCode>(static_cast<int>(status) - 1));
}

const char* csr_last_error(void) { return g_last_error.c_str(); }

int csr_exit_code(csr_status status) {
  switch (status) {
    case CSR_OK: return 0;
    case CSR_SCHEMA:
    case CSR_INVALID_SPEC:
    case CSR_PARSE: return 2;
    case CSR_MISSING_INPUT: return 3;
    case CSR_NUMERICAL_FAILURE: return 4;
    default: return 1;
  }
}

size_t csr_command_count(void) { return csr::experiment_commands().size(); }

const char* csr_command_name(size_t index) {
  const auto& c = csr::experiment_commands();
  return index < c.size() ? c[index].c_str() : nullptr;
}

csr_status csr_run(const char* command, const char* config_path, const char* out_dir, int jobs,
                   csr_run_result** result) {
  return guarded([&] {
    need(command, "command");
    need(config_path, "config_path");
    need(result, "result");
    *result = nullptr;
    csr::RunOptions opts;
    if (out_dir) opts.out_dir = out_dir;
    opts.jobs = jobs;
    const csr::RunResult r = csr::run_experiment(command, config_path, opts);
    auto* out = new csr_run_result;
    out->out_dir = r.out_dir.string();
    for (const auto& a : r.artifacts) out->artifacts.push_back(a.string());
    *result = out;
  });
}

const char* csr_run_out_dir(const csr_run_result* result) { return result ? result->out_dir.c_str() : nullptr; }

size_t csr_run_artifact_count(const csr_run_result* result) { return result ? result->artifacts.size() : 0; }

const char* csr_run_artifact(const csr_run_result* result, size_t index) {
  return result && index < result->artifacts.size() ? result->artifacts[index].c_str() : nullptr;
}

void csr_run_free(csr_run_result* result) { delete result; }

csr_status csr_volume_read(const char* path, csr_volume** volume) {
  return guarded([&] {
    need(path, "path");
    need(volume, "volume");
    *volume = nullptr;
    *volume = new csr_volume{csr::read_volume(path)};
  });
}

csr_status csr_volume_write(const csr_volume* volume, const char* path) {
  return guarded([&] {
    need(volume, "volume");
    need(path, "path");
    csr::write_volume(path, volume->v);
  });
}

csr_status csr_volume_dims(const csr_volume* volume, int* n_coils, int* height, int* width) {
  return guarded([&] {
    need(volume, "volume");
    if (n_coils) *n_coils = volume->v.kspace.n_coils();
    if (height) *height = volume->v.kspace.height();
    if (width) *width = volume->v.kspace.width();
  });
}

csr_status csr_volume_target(const csr_volume* volume, double* out, size_t out_len) {
  return guarded([&] {
    need(volume, "volume");
    copy_image(csr::magnitude(volume->v.target), out, out_len);
  });
}

void csr_volume_free(csr_volume* volume) { delete volume; }

csr_status csr_reconstruct(const csr_volume* volume, const char* method_json, const char* mask_json, double* out,
                           size_t out_len) {
  return guarded([&] {
    need(volume, "volume");
    need(method_json, "method_json");
    const auto mj = parse_json(method_json, "method");
    const auto spec = csr::config::parse_method(csr::config::Reader(mj, "method"), ".");
    csr::MaskSpec ms;
    if (mask_json) {
      const auto kj = parse_json(mask_json, "mask");
      ms = csr::config::parse_mask(csr::config::Reader(kj, "mask"));
    }
    const auto& v = volume->v;
    const csr::SamplingMask mask = csr::make_mask(v.kspace.width(), ms);
    const auto recon = csr::config::build_method(spec, mask, nullptr, ".");
    copy_image(recon->reconstruct(csr::measure(v, mask), mask, v.sens), out, out_len);
  });
}

csr_status csr_metric(const char* metric, const double* reference, const double* test, int height, int width,
                      double* value) {
  return guarded([&] {
    need(metric, "metric");
    need(reference, "reference");
    need(test, "test");
    need(value, "value");
    const csr::Metric m = csr::parse_metric(metric);
    csr::RealImage ref(height, width), rec(height, width);
    std::memcpy(ref.data(), reference, ref.size() * sizeof(double));
    std::memcpy(rec.data(), test, rec.size() * sizeof(double));
    *value = csr::metric_value(m, ref, rec);
  });
}

}  // extern "C"
