#include "csrobust/config.hpp"

#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

namespace csr::config {
namespace {

std::string type_name(const json& j) { return j.type_name(); }

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

}  // namespace

void schema_error(const std::string& what) { throw Error(ErrorCode::Schema, what); }

Reader::Reader(const json& j, std::string path) : j_(&j), path_(std::move(path)) {
  if (!j.is_object()) schema_error(path_ + " must be an object, got " + type_name(j));
}

bool Reader::has(const std::string& key) const { return j_->contains(key) && !(*j_)[key].is_null(); }

const json& Reader::at(const std::string& key) {
  used_.insert(key);
  if (!j_->contains(key)) schema_error("missing required key " + path_ + "." + key);
  return (*j_)[key];
}

Reader Reader::child(const std::string& key) { return Reader(at(key), path_ + "." + key); }

std::vector<Reader> Reader::array(const std::string& key) {
  const json& a = at(key);
  if (!a.is_array()) schema_error(path_ + "." + key + " must be an array");
  std::vector<Reader> out;
  for (std::size_t i = 0; i < a.size(); ++i) out.emplace_back(a[i], path_ + "." + key + "[" + std::to_string(i) + "]");
  return out;
}

std::string Reader::str(const std::string& key) {
  const json& v = at(key);
  if (!v.is_string()) schema_error(path_ + "." + key + " must be a string, got " + type_name(v));
  return v.get<std::string>();
}

std::string Reader::str(const std::string& key, const std::string& def) { return has(key) ? str(key) : (used_.insert(key), def); }

double Reader::num(const std::string& key) {
  const json& v = at(key);
  if (!v.is_number()) schema_error(path_ + "." + key + " must be a number, got " + type_name(v));
  return v.get<double>();
}

double Reader::num(const std::string& key, double def) { return has(key) ? num(key) : (used_.insert(key), def); }

std::optional<double> Reader::opt_num(const std::string& key) {
  used_.insert(key);
  if (!has(key)) return std::nullopt;
  return num(key);
}

int Reader::integer(const std::string& key) {
  const json& v = at(key);
  if (!v.is_number_integer()) schema_error(path_ + "." + key + " must be an integer, got " + type_name(v));
  return v.get<int>();
}

int Reader::integer(const std::string& key, int def) { return has(key) ? integer(key) : (used_.insert(key), def); }

std::uint64_t Reader::seed(const std::string& key, std::uint64_t def) {
  used_.insert(key);
  if (!has(key)) return def;
  const json& v = (*j_)[key];
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
    schema_error(path_ + "." + key + " must be a non-negative integer seed");
  return v.get<std::uint64_t>();
}

bool Reader::flag(const std::string& key, bool def) {
  used_.insert(key);
  if (!has(key)) return def;
  const json& v = (*j_)[key];
  if (!v.is_boolean()) schema_error(path_ + "." + key + " must be a boolean");
  return v.get<bool>();
}

std::vector<double> Reader::numbers(const std::string& key, const std::vector<double>& def) {
  used_.insert(key);
  if (!has(key)) return def;
  const json& v = (*j_)[key];
  if (!v.is_array()) schema_error(path_ + "." + key + " must be an array of numbers");
  std::vector<double> out;
  for (const auto& x : v) {
    if (!x.is_number()) schema_error(path_ + "." + key + " must contain only numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

std::vector<int> Reader::integers(const std::string& key, const std::vector<int>& def) {
  used_.insert(key);
  if (!has(key)) return def;
  const json& v = (*j_)[key];
  if (!v.is_array()) schema_error(path_ + "." + key + " must be an array of integers");
  std::vector<int> out;
  for (const auto& x : v) {
    if (!x.is_number_integer()) schema_error(path_ + "." + key + " must contain only integers");
    out.push_back(x.get<int>());
  }
  return out;
}

std::vector<std::string> Reader::strings(const std::string& key, const std::vector<std::string>& def) {
  used_.insert(key);
  if (!has(key)) return def;
  const json& v = (*j_)[key];
  if (!v.is_array()) schema_error(path_ + "." + key + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& x : v) {
    if (!x.is_string()) schema_error(path_ + "." + key + " must contain only strings");
    out.push_back(x.get<std::string>());
  }
  return out;
}

void Reader::finish() const {
  for (const auto& [key, value] : j_->items())
    if (!used_.count(key)) schema_error("unknown key " + path_ + "." + key);
}

// Wraps spec-level InvalidSpec errors from parse_* helpers as Schema errors.
template <class F>
auto as_schema(const std::string& path, F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidSpec) schema_error(path + ": " + e.what());
    throw;
  }
}

MaskSpec parse_mask(Reader r) {
  MaskSpec m;
  m.acceleration = r.num("acceleration", m.acceleration);
  m.center_fraction = r.num("center_fraction", m.center_fraction);
  m.pattern = as_schema(r.path(), [&] { return parse_mask_pattern(r.str("pattern", "equispaced")); });
  m.seed = r.seed("seed", 0);
  r.finish();
  return m;
}

TransformSpec parse_transform(Reader r) {
  TransformSpec t;
  t.kind = as_schema(r.path(), [&] { return parse_transform_kind(r.str("kind", "haar")); });
  t.levels = r.integer("levels", t.levels);
  r.finish();
  return t;
}

PgdConfig parse_pgd(Reader r) {
  PgdConfig p;
  p.iterations = r.integer("iterations", p.iterations);
  p.step = r.num("step", p.step);
  p.init_scale = r.num("init_scale", p.init_scale);
  p.sphere = r.flag("sphere", p.sphere);
  r.finish();
  if (p.iterations < 0) schema_error(r.path() + ".iterations must be >= 0");
  return p;
}

JointAttackConfig parse_joint(Reader r) {
  JointAttackConfig j;
  j.beta = r.opt_num("beta");
  j.beta_grid = r.numbers("beta_grid", j.beta_grid);
  j.outer_iterations = r.integer("outer_iterations", j.outer_iterations);
  j.block = r.integer("block", j.block);
  j.x_step_scale = r.num("x_step_scale", j.x_step_scale);
  j.z_step = r.num("z_step", j.z_step);
  j.l1_prox = r.flag("l1_prox", j.l1_prox);
  j.sphere = r.flag("sphere", j.sphere);
  j.warm_start = r.flag("warm_start", j.warm_start);
  j.divergence_factor = r.num("divergence_factor", j.divergence_factor);
  r.finish();
  if (j.beta && *j.beta < 0.0) schema_error(r.path() + ".beta must be >= 0");
  if (j.beta_grid.empty()) schema_error(r.path() + ".beta_grid must not be empty");
  return j;
}

ProbeSpec parse_probe(Reader r) {
  ProbeSpec p;
  p.window = r.integer("window", p.window);
  p.stride = r.integer("stride", p.stride);
  const std::string loc = r.str("locations", "grid");
  if (loc == "grid") {
    p.locations = ProbeLocations::Grid;
  } else if (loc == "random") {
    p.locations = ProbeLocations::Random;
  } else if (loc == "list") {
    p.locations = ProbeLocations::List;
  } else {
    schema_error(r.path() + ".locations must be grid, random or list");
  }
  p.n_random = r.integer("n_random", p.n_random);
  p.seed = r.seed("seed", 0);
  if (r.has("list")) {
    for (auto item : r.array("list")) {
      p.list.emplace_back(item.integer("top"), item.integer("left"));
      item.finish();
    }
  } else {
    r.flag("list", false);
  }
  r.finish();
  if (p.window < 1) schema_error(r.path() + ".window must be >= 1");
  if (p.stride < 1) schema_error(r.path() + ".stride must be >= 1");
  return p;
}

MethodSpec parse_method(Reader r, const std::filesystem::path& base_dir) {
  MethodSpec m;
  m.id = r.str("id");
  m.family = r.str("family");
  if (m.id.empty() || m.id.find_first_of(",\n\"/") != std::string::npos)
    schema_error(r.path() + ".id must be non-empty and free of ',', '/', quotes and newlines");
  if (m.family == "zero_filled") {
  } else if (m.family == "l1") {
    m.l1.lambda = r.num("lambda", m.l1.lambda);
    if (r.has("transform")) m.l1.transform = parse_transform(r.child("transform"));
    m.l1.max_iters = r.integer("max_iters", m.l1.max_iters);
    m.l1.tolerance = r.num("tolerance", m.l1.tolerance);
    m.l1.step_scale = r.num("step_scale", m.l1.step_scale);
    m.l1.power_iters = r.integer("power_iters", m.l1.power_iters);
    if (m.l1.lambda < 0.0) schema_error(r.path() + ".lambda must be >= 0");
    if (m.l1.max_iters < 1) schema_error(r.path() + ".max_iters must be >= 1");
  } else if (m.family == "decoder") {
    auto& d = m.decoder;
    d.layers = r.integer("layers", d.layers);
    d.channels = r.integer("channels", d.channels);
    d.upsample = as_schema(r.path(), [&] { return ad::parse_upsample(r.str("upsample", "bilinear")); });
    d.iterations = r.integer("iterations", d.iterations);
    d.seed = r.seed("seed", 0);
    if (r.has("optimizer")) {
      Reader o = r.child("optimizer");
      const std::string kind = o.str("kind", "adam");
      if (kind == "adam") {
        d.optimizer = DecoderOptimizer::Adam;
        d.adam.lr = o.num("lr", d.adam.lr);
        d.adam.beta1 = o.num("beta1", d.adam.beta1);
        d.adam.beta2 = o.num("beta2", d.adam.beta2);
      } else if (kind == "gd") {
        d.optimizer = DecoderOptimizer::GradientDescent;
        d.gd_lr_start = o.num("lr_start", d.gd_lr_start);
        d.gd_lr_end = o.num("lr_end", d.gd_lr_end);
      } else {
        schema_error(o.path() + ".kind must be adam or gd");
      }
      o.finish();
    }
    if (d.layers < 2) schema_error(r.path() + ".layers must be >= 2");
    if (d.channels < 1) schema_error(r.path() + ".channels must be >= 1");
    if (d.iterations < 0) schema_error(r.path() + ".iterations must be >= 0");
  } else if (m.family == "cnn") {
    auto& c = m.cnn;
    if (r.has("model")) c.model = resolve(base_dir, r.str("model"));
    if (r.has("train_manifest")) c.train_manifest = resolve(base_dir, r.str("train_manifest"));
    if (r.has("save_model")) c.save = r.str("save_model");
    c.train.depth = r.integer("depth", c.train.depth);
    c.train.width = r.integer("width", c.train.width);
    c.train.epochs = r.integer("epochs", c.train.epochs);
    c.train.learning_rate = r.num("learning_rate", c.train.learning_rate);
    c.train.batch_size = r.integer("batch_size", c.train.batch_size);
    c.seed = r.seed("seed", 0);
    if (c.train.depth < 1 || c.train.width < 1) schema_error(r.path() + ": depth and width must be >= 1");
    if (c.train.epochs < 0 || c.train.batch_size < 1 || c.train.learning_rate <= 0.0)
      schema_error(r.path() + ": epochs >= 0, batch_size >= 1 and learning_rate > 0 required");
  } else {
    schema_error(r.path() + ".family must be zero_filled, l1, decoder or cnn (got '" + m.family + "')");
  }
  r.finish();
  return m;
}

std::vector<MethodSpec> parse_methods(Reader& r, const std::string& key, const std::filesystem::path& base_dir) {
  std::vector<MethodSpec> out;
  std::set<std::string> ids;
  for (auto item : r.array(key)) {
    out.push_back(parse_method(item, base_dir));
    if (!ids.insert(out.back().id).second) schema_error("duplicate method id '" + out.back().id + "' in " + key);
  }
  if (out.empty()) schema_error(r.path() + "." + key + " must list at least one method");
  return out;
}

ReconstructorPtr build_method(const MethodSpec& spec, const SamplingMask& mask,
                              const std::vector<LoadedVolume>* default_train, const std::filesystem::path& out_dir) {
  if (spec.family == "zero_filled") return std::make_shared<ZeroFilled>(spec.id);
  if (spec.family == "l1") return std::make_shared<L1Reconstructor>(spec.id, spec.l1);
  if (spec.family == "decoder") return std::make_shared<DecoderReconstructor>(spec.id, spec.decoder);

  std::shared_ptr<CnnModel> model;
  if (spec.cnn.model) {
    model = std::make_shared<CnnModel>(load_model(*spec.cnn.model));
    spdlog::info("loaded cnn '{}' from {}", spec.id, spec.cnn.model->string());
  } else {
    std::vector<LoadedVolume> train;
    if (spec.cnn.train_manifest) {
      train = select_split(load_volumes(read_manifest(*spec.cnn.train_manifest)), Split::Train);
    } else if (default_train) {
      train = *default_train;
    } else {
      schema_error("cnn method '" + spec.id + "' needs a model, a train_manifest, or an experiment manifest");
    }
    require(!train.empty(), ErrorCode::Schema, "cnn method '" + spec.id + "' has an empty training split");
    std::vector<Volume> vols;
    for (auto& v : train) vols.push_back(v.volume);
    spdlog::info("training cnn '{}' on {} volumes for {} epochs", spec.id, vols.size(), spec.cnn.train.epochs);
    model = std::make_shared<CnnModel>(cnn_train(make_training_set(vols, mask), spec.cnn.train, spec.cnn.seed));
  }
  if (spec.cnn.save) save_model(out_dir / *spec.cnn.save, *model);
  return std::make_shared<CnnReconstructor>(spec.id, std::move(model));
}

}  // namespace csr::config
