#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "csrobust/attacks.hpp"
#include "csrobust/feature_probe.hpp"
#include "csrobust/fourier_model.hpp"
#include "csrobust/reconstructors.hpp"
#include "csrobust/shift.hpp"

namespace csr::config {

using nlohmann::json;

// Typed access to one JSON object. Every failure is a Schema error naming the
// full key path; finish() rejects keys that were never read.
class Reader {
 public:
  Reader(const json& j, std::string path);

  bool has(const std::string& key) const;
  Reader child(const std::string& key);
  std::vector<Reader> array(const std::string& key);

  std::string str(const std::string& key);
  std::string str(const std::string& key, const std::string& def);
  double num(const std::string& key);
  double num(const std::string& key, double def);
  std::optional<double> opt_num(const std::string& key);  // absent or null -> nullopt
  int integer(const std::string& key);
  int integer(const std::string& key, int def);
  std::uint64_t seed(const std::string& key, std::uint64_t def = 0);
  bool flag(const std::string& key, bool def);
  std::vector<double> numbers(const std::string& key, const std::vector<double>& def);
  std::vector<int> integers(const std::string& key, const std::vector<int>& def);
  std::vector<std::string> strings(const std::string& key, const std::vector<std::string>& def);

  const std::string& path() const { return path_; }
  void finish() const;

 private:
  const json& at(const std::string& key);
  const json* j_;
  std::string path_;
  std::set<std::string> used_;
};

[[noreturn]] void schema_error(const std::string& what);

MaskSpec parse_mask(Reader r);
TransformSpec parse_transform(Reader r);
PgdConfig parse_pgd(Reader r);
JointAttackConfig parse_joint(Reader r);
ProbeSpec parse_probe(Reader r);

struct CnnSource {
  std::optional<std::filesystem::path> model;           // load weights
  std::optional<std::filesystem::path> train_manifest;  // or train on this manifest's train split
  TrainedCnnConfig train;
  std::uint64_t seed = 0;
  std::optional<std::filesystem::path> save;
};

struct MethodSpec {
  std::string id;
  std::string family;  // zero_filled, l1, decoder, cnn
  SparseReconConfig l1;
  DecoderConfig decoder;
  CnnSource cnn;
};

// Relative paths resolve against base_dir.
MethodSpec parse_method(Reader r, const std::filesystem::path& base_dir);
std::vector<MethodSpec> parse_methods(Reader& r, const std::string& key, const std::filesystem::path& base_dir);

// CNN methods without an explicit model or training manifest train on
// default_train (the train split of the experiment's primary domain).
ReconstructorPtr build_method(const MethodSpec& spec, const SamplingMask& mask,
                              const std::vector<LoadedVolume>* default_train, const std::filesystem::path& out_dir);

}  // namespace csr::config
