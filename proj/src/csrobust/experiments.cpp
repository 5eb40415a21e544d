#include "csrobust/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <set>

#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "csrobust/config.hpp"
#include "csrobust/datagen.hpp"
#include "csrobust/parallel.hpp"
#include "csrobust/report.hpp"

namespace csr {
namespace {

namespace fs = std::filesystem;
using config::json;
using config::Reader;
using config::schema_error;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return splitmix(splitmix(splitmix(base ^ splitmix(a)) ^ b) ^ c);
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

struct Context {
  std::string command;
  fs::path base_dir;  // config directory
  fs::path out_dir;
  int jobs = 1;
  RunResult result;

  void emit(const std::string& name, const std::string& text) {
    write_text_file(out_dir / name, text);
    result.artifacts.push_back(out_dir / name);
  }
  void emit_bytes(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    write_file_bytes(out_dir / name, bytes);
    result.artifacts.push_back(out_dir / name);
  }
};

struct Corpus {
  std::string domain;
  std::vector<LoadedVolume> volumes;
};

Split parse_split(const std::string& s, const std::string& path) {
  if (s == "train") return Split::Train;
  if (s == "tune") return Split::Tune;
  if (s == "test") return Split::Test;
  schema_error(path + " must be all, train, tune or test");
}

// Reads "manifest", "split" (default `def_split`) and "max_images".
struct CorpusSpec {
  fs::path manifest;
  std::string split = "all";
  int max_images = 0;
};

CorpusSpec parse_corpus(Reader& r, const Context& ctx, const std::string& def_split, const std::string& key = "manifest") {
  CorpusSpec c;
  c.manifest = resolve(ctx.base_dir, r.str(key));
  c.split = r.str("split", def_split);
  if (c.split != "all") parse_split(c.split, r.path() + ".split");
  c.max_images = r.integer("max_images", 0);
  if (c.max_images < 0) schema_error(r.path() + ".max_images must be >= 0");
  return c;
}

Corpus load_corpus(const CorpusSpec& spec) {
  DatasetManifest m = read_manifest(spec.manifest);
  Corpus c{m.domain, load_volumes(m)};
  if (spec.split != "all") c.volumes = select_split(c.volumes, parse_split(spec.split, "split"));
  if (spec.max_images > 0 && static_cast<int>(c.volumes.size()) > spec.max_images) c.volumes.resize(spec.max_images);
  require(!c.volumes.empty(), ErrorCode::Schema,
          "split '" + spec.split + "' of " + spec.manifest.string() + " contains no volumes");
  return c;
}

std::vector<LoadedVolume> train_split_of(const fs::path& manifest) {
  return select_split(load_volumes(read_manifest(manifest)), Split::Train);
}

SamplingMask mask_for(const MaskSpec& spec, const std::vector<LoadedVolume>& vols) {
  require(!vols.empty(), ErrorCode::Schema, "no volumes to size the mask from");
  const int w = vols.front().volume.kspace.width();
  for (const auto& v : vols)
    require(v.volume.kspace.width() == w, ErrorCode::ShapeMismatch, "volumes in one experiment must share a size");
  return make_mask(w, spec);
}

std::vector<ReconstructorPtr> build_all(const std::vector<config::MethodSpec>& specs, const SamplingMask& mask,
                                        const std::vector<LoadedVolume>* train, const Context& ctx) {
  std::vector<ReconstructorPtr> out;
  for (const auto& s : specs) out.push_back(config::build_method(s, mask, train, ctx.out_dir));
  return out;
}

std::vector<Metric> parse_metrics(Reader& r) {
  std::vector<Metric> out;
  for (const auto& name : r.strings("metrics", {"nmse", "psnr", "ssim"})) {
    try {
      out.push_back(parse_metric(name));
    } catch (const Error& e) {
      schema_error(r.path() + ".metrics: " + e.what());
    }
  }
  return out;
}

std::string metrics_header() { return "method,domain,image_id,metric,value\n"; }

std::vector<std::uint8_t> image_pgm(const RealImage& img, double peak) {
  const std::string header = "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  for (double v : img.values()) {
    const double s = peak > 0.0 ? std::clamp(v / peak, 0.0, 1.0) : 0.0;
    out.push_back(static_cast<std::uint8_t>(std::lround(s * 255.0)));
  }
  return out;
}

std::string report_json(const MetricReport& r) {
  auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  json j = {{"mean", r.n ? num(r.value) : json(nullptr)},
            {"ci_lo", r.n ? num(r.ci_lo) : json(nullptr)},
            {"ci_hi", r.n ? num(r.ci_hi) : json(nullptr)},
            {"n", r.n},
            {"excluded", r.excluded}};
  return j.dump();
}

// ---- gen ---------------------------------------------------------------------

void run_gen(Reader& r, Context& ctx) {
  struct DomainSpec {
    std::string name;
    std::vector<PhantomFamily> families;
    int count;
    std::optional<double> snr_db;
    std::optional<TransformSpec> basis;
    double fraction = 1.0;
  };
  const int size = r.integer("size", 64);
  const int n_coils = r.integer("n_coils", 4);
  const std::uint64_t seed = r.seed("seed", 0);
  if (n_coils < 1) schema_error(r.path() + ".n_coils must be >= 1");
  if (size < 2 || (size & (size - 1)) != 0) schema_error(r.path() + ".size must be a power of two >= 2");
  std::vector<DomainSpec> domains;
  std::set<std::string> names;
  for (auto d : r.array("domains")) {
    DomainSpec s;
    s.name = d.str("name");
    if (s.name.empty() || s.name.find_first_of("/\\,") != std::string::npos)
      schema_error(d.path() + ".name must be a plain non-empty name");
    if (!names.insert(s.name).second) schema_error("duplicate domain name '" + s.name + "'");
    if (d.has("family") && d.has("families")) schema_error(d.path() + ": give either family or families");
    std::vector<std::string> fam = d.has("families") ? d.strings("families", {}) : std::vector<std::string>{d.str("family")};
    for (const auto& f : fam) {
      try {
        s.families.push_back(parse_phantom_family(f));
      } catch (const Error& e) {
        schema_error(d.path() + ": " + e.what());
      }
    }
    if (s.families.empty()) schema_error(d.path() + ".families must not be empty");
    s.count = d.integer("count");
    if (s.count < 1) schema_error(d.path() + ".count must be >= 1");
    s.snr_db = d.opt_num("snr_db");
    if (d.has("sparsity")) {
      Reader sp = d.child("sparsity");
      s.basis = sp.has("transform") ? config::parse_transform(sp.child("transform")) : TransformSpec{};
      s.fraction = sp.num("fraction");
      sp.finish();
      if (!(s.fraction > 0.0 && s.fraction <= 1.0)) schema_error(sp.path() + ".fraction must be in (0, 1]");
    }
    d.finish();
    domains.push_back(std::move(s));
  }
  if (domains.empty()) schema_error(r.path() + ".domains must not be empty");
  r.finish();

  const SamplingMask full = full_mask(size);
  for (std::size_t di = 0; di < domains.size(); ++di) {
    const auto& d = domains[di];
    DatasetManifest manifest{d.name, {}};
    std::vector<ManifestEntry> entries(d.count);
    std::vector<Volume> volumes(d.count);
    parallel_for(d.count, ctx.jobs, [&](std::size_t i) {
      PhantomSpec ps;
      ps.family = d.families[i % d.families.size()];
      ps.size = size;
      ps.seed = derive_seed(seed, di, i, 1);
      ps.sparsity_basis = d.basis;
      ps.sparsity_fraction = d.fraction;
      Volume v;
      v.target = generate_phantom(ps);
      v.sens = generate_sensitivities(n_coils, size, derive_seed(seed, di, i, 2));
      v.kspace = forward(v.target, v.sens, full);
      if (d.snr_db) v.kspace = add_noise(v.kspace, *d.snr_db, derive_seed(seed, di, i, 3));
      char id[64];
      std::snprintf(id, sizeof id, "%s-%04zu", d.name.c_str(), i);
      ManifestEntry e;
      e.id = id;
      e.path = ctx.out_dir / d.name / (e.id + ".ksv");
      e.n = size;
      e.n_coils = n_coils;
      e.snr_db = d.snr_db;
      e.seed = ps.seed;
      e.family = to_string(ps.family);
      write_volume(e.path, v);
      entries[i] = std::move(e);
    });
    manifest.volumes = std::move(entries);
    const fs::path mpath = ctx.out_dir / d.name / "manifest.json";
    write_manifest(mpath, manifest);
    for (const auto& e : manifest.volumes) ctx.result.artifacts.push_back(e.path);
    ctx.result.artifacts.push_back(mpath);
    spdlog::info("generated domain '{}' ({} volumes)", d.name, d.count);
  }
}

// ---- recon / metrics ---------------------------------------------------------

void run_recon(Reader& r, Context& ctx) {
  std::optional<fs::path> volume_path;
  std::optional<CorpusSpec> corpus;
  std::string image_id;
  if (r.has("volume")) {
    volume_path = resolve(ctx.base_dir, r.str("volume"));
  } else {
    corpus = parse_corpus(r, ctx, "all");
    image_id = r.str("image_id");
  }
  const MaskSpec ms = r.has("mask") ? config::parse_mask(r.child("mask")) : MaskSpec{};
  const auto specs = config::parse_methods(r, "methods", ctx.base_dir);
  const auto metrics = parse_metrics(r);
  std::optional<fs::path> train_manifest;
  if (r.has("train_manifest")) train_manifest = resolve(ctx.base_dir, r.str("train_manifest"));
  r.finish();

  LoadedVolume target;
  std::string domain = "volume";
  if (volume_path) {
    target = {volume_path->stem().string(), "", read_volume(*volume_path)};
  } else {
    Corpus c = load_corpus(*corpus);
    auto it = std::find_if(c.volumes.begin(), c.volumes.end(), [&](const auto& v) { return v.id == image_id; });
    require(it != c.volumes.end(), ErrorCode::MissingInput, "image '" + image_id + "' is not in the manifest");
    target = *it;
    domain = c.domain;
  }
  std::vector<LoadedVolume> train;
  if (train_manifest) train = train_split_of(*train_manifest);
  else if (corpus) train = train_split_of(corpus->manifest);
  const SamplingMask mask = mask_for(ms, {target});
  const auto methods = build_all(specs, mask, train.empty() ? nullptr : &train, ctx);

  const RealImage ref = magnitude(target.volume.target);
  double peak = 0.0;
  for (double v : ref.values()) peak = std::max(peak, v);
  std::vector<RealImage> recs(methods.size());
  parallel_for(methods.size(), ctx.jobs, [&](std::size_t m) {
    recs[m] = methods[m]->reconstruct(measure(target.volume, mask), mask, target.volume.sens);
  });
  std::string csv = metrics_header();
  for (std::size_t m = 0; m < methods.size(); ++m) {
    for (Metric k : metrics)
      csv += methods[m]->id() + "," + domain + "," + target.id + "," + to_string(k) + "," +
             format_number(metric_value(k, ref, recs[m])) + "\n";
    ctx.emit_bytes("recon_" + methods[m]->id() + ".pgm", image_pgm(recs[m], peak));
  }
  ctx.emit("metrics.csv", csv);
}

void run_metrics(Reader& r, Context& ctx) {
  const CorpusSpec cs = parse_corpus(r, ctx, "all");
  const MaskSpec ms = r.has("mask") ? config::parse_mask(r.child("mask")) : MaskSpec{};
  const auto specs = config::parse_methods(r, "methods", ctx.base_dir);
  const auto metrics = parse_metrics(r);
  std::optional<fs::path> train_manifest;
  if (r.has("train_manifest")) train_manifest = resolve(ctx.base_dir, r.str("train_manifest"));
  r.finish();

  Corpus c = load_corpus(cs);
  const auto train = train_split_of(train_manifest.value_or(cs.manifest));
  const SamplingMask mask = mask_for(ms, c.volumes);
  const auto methods = build_all(specs, mask, train.empty() ? nullptr : &train, ctx);

  const std::size_t nv = c.volumes.size(), nk = metrics.size();
  std::vector<double> values(methods.size() * nv * nk, std::nan(""));
  parallel_for(methods.size() * nv, ctx.jobs, [&](std::size_t task) {
    const std::size_t m = task / nv, i = task % nv;
    const auto& v = c.volumes[i].volume;
    try {
      RealImage rec = methods[m]->reconstruct(measure(v, mask), mask, v.sens);
      const RealImage ref = magnitude(v.target);
      for (std::size_t k = 0; k < nk; ++k) values[task * nk + k] = metric_value(metrics[k], ref, rec);
    } catch (const Error& e) {
      spdlog::warn("{} failed on {}: {}", methods[m]->id(), c.volumes[i].id, e.what());
    }
  });
  std::string csv = metrics_header();
  for (std::size_t m = 0; m < methods.size(); ++m)
    for (std::size_t i = 0; i < nv; ++i)
      for (std::size_t k = 0; k < nk; ++k)
        csv += methods[m]->id() + "," + c.domain + "," + c.volumes[i].id + "," + to_string(metrics[k]) + "," +
               format_number(values[(m * nv + i) * nk + k]) + "\n";
  ctx.emit("metrics.csv", csv);
}

// ---- attack / transfer -------------------------------------------------------

struct AttackPlan {
  CorpusSpec corpus;
  MaskSpec mask;
  std::vector<config::MethodSpec> methods;
  std::vector<double> epsilons;
  AttackSettings settings;
  std::uint64_t seed = 0;
  std::optional<fs::path> train_manifest;
};

AttackPlan parse_attack(Reader& r, Context& ctx) {
  AttackPlan p;
  p.corpus = parse_corpus(r, ctx, "test");
  p.mask = r.has("mask") ? config::parse_mask(r.child("mask")) : MaskSpec{};
  p.methods = config::parse_methods(r, "methods", ctx.base_dir);
  p.epsilons = r.numbers("epsilons", {0.0, 0.01, 0.02, 0.04, 0.08});
  for (double e : p.epsilons)
    if (!(e >= 0.0)) schema_error(r.path() + ".epsilons must be >= 0");
  if (p.epsilons.empty()) schema_error(r.path() + ".epsilons must not be empty");
  if (r.has("pgd")) p.settings.pgd = config::parse_pgd(r.child("pgd"));
  if (r.has("joint")) p.settings.joint = config::parse_joint(r.child("joint"));
  p.seed = r.seed("seed", 0);
  if (r.has("train_manifest")) p.train_manifest = resolve(ctx.base_dir, r.str("train_manifest"));
  r.finish();
  return p;
}

std::vector<AttackImage> attack_images(const Corpus& c) {
  std::vector<AttackImage> out;
  for (const auto& v : c.volumes) out.push_back({v.id, v.volume.target, v.volume.sens, v.volume.kspace});
  return out;
}

void run_attack(Reader& r, Context& ctx) {
  const AttackPlan p = parse_attack(r, ctx);
  Corpus c = load_corpus(p.corpus);
  const auto train = train_split_of(p.train_manifest.value_or(p.corpus.manifest));
  const SamplingMask mask = mask_for(p.mask, c.volumes);
  const auto methods = build_all(p.methods, mask, train.empty() ? nullptr : &train, ctx);
  const auto images = attack_images(c);
  std::vector<AttackCurveRow> rows;
  for (const auto& m : methods) {
    auto part = attack_curve(*m, images, mask, p.epsilons, p.settings, p.seed, ctx.jobs);
    rows.insert(rows.end(), part.begin(), part.end());
  }
  ctx.emit("attack.csv", attack_curve_csv(rows));
}

void run_transfer(Reader& r, Context& ctx) {
  const AttackPlan p = parse_attack(r, ctx);
  Corpus c = load_corpus(p.corpus);
  const auto train = train_split_of(p.train_manifest.value_or(p.corpus.manifest));
  const SamplingMask mask = mask_for(p.mask, c.volumes);
  const auto methods = build_all(p.methods, mask, train.empty() ? nullptr : &train, ctx);
  const auto images = attack_images(c);
  const auto perts = compute_perturbations(methods, images, mask, p.epsilons, p.settings, p.seed, ctx.jobs);
  ctx.emit("transfer.csv", transfer_csv(transfer_evaluate(perts, methods, images, mask, p.epsilons, p.seed, ctx.jobs)));
}

// ---- shift / filter / spectrum -------------------------------------------------

void run_shift(Reader& r, Context& ctx) {
  const fs::path a_path = resolve(ctx.base_dir, r.str("domain_a"));
  const fs::path b_path = resolve(ctx.base_dir, r.str("domain_b"));
  const MaskSpec ms = r.has("mask") ? config::parse_mask(r.child("mask")) : MaskSpec{};
  Metric metric = Metric::Ssim;
  try {
    metric = parse_metric(r.str("metric", "ssim"));
  } catch (const Error& e) {
    schema_error(r.path() + ".metric: " + e.what());
  }
  const std::uint64_t seed = r.seed("seed", 0);
  struct Family {
    std::string name;
    std::vector<config::MethodSpec> variants;
  };
  std::vector<Family> families;
  std::set<std::string> ids;
  for (auto f : r.array("families")) {
    Family fam{f.str("family"), config::parse_methods(f, "variants", ctx.base_dir)};
    for (const auto& v : fam.variants) {
      if (v.family != fam.name)
        schema_error(f.path() + ": variant '" + v.id + "' has family '" + v.family + "', expected '" + fam.name + "'");
      if (!ids.insert(v.id).second) schema_error("duplicate variant id '" + v.id + "'");
    }
    f.finish();
    families.push_back(std::move(fam));
  }
  if (families.empty()) schema_error(r.path() + ".families must not be empty");
  r.finish();

  const auto a_all = load_volumes(read_manifest(a_path));
  const auto b_all = load_volumes(read_manifest(b_path));
  const auto a_train = select_split(a_all, Split::Train);
  const auto a_tune = select_split(a_all, Split::Tune);
  const auto a_test = select_split(a_all, Split::Test);
  const auto b_test = select_split(b_all, Split::Test);
  require(!a_tune.empty() && !a_test.empty() && !b_test.empty(), ErrorCode::Schema,
          "shift needs non-empty tune/test splits in domain A and a test split in domain B");
  const SamplingMask mask = mask_for(ms, a_all);
  mask_for(ms, b_all);

  std::string tune_csv = "family,variant,tune_score,selected\n";
  std::vector<ShiftVariant> variants;
  for (const auto& fam : families) {
    const auto recons = build_all(fam.variants, mask, a_train.empty() ? nullptr : &a_train, ctx);
    const TuneResult t = tune(recons, a_tune, mask, metric, ctx.jobs);
    for (std::size_t g = 0; g < recons.size(); ++g) {
      tune_csv += fam.name + "," + recons[g]->id() + "," + format_number(t.mean_score[g]) + "," +
                  (g == t.best ? "1" : "0") + "\n";
      variants.push_back({fam.name, recons[g]});
    }
  }
  const auto results = evaluate_shift(variants, a_test, b_test, mask, metric, seed, ctx.jobs);
  ctx.emit("tune.csv", tune_csv);
  ctx.emit("scatter.csv", shift_csv(results));
  ctx.emit("fit.json", shift_fit_json(fit_shift(results)));
}

void run_filter(Reader& r, Context& ctx) {
  const CorpusSpec cs = parse_corpus(r, ctx, "all");
  const MaskSpec ms = r.has("mask") ? config::parse_mask(r.child("mask")) : MaskSpec{};
  const config::MethodSpec filter_spec = config::parse_method(r.child("filter_method"), ctx.base_dir);
  const auto specs = config::parse_methods(r, "methods", ctx.base_dir);
  const double fraction = r.num("fraction", 0.10);
  const bool allow_overlap = r.flag("allow_overlap", false);
  const std::uint64_t seed = r.seed("seed", 0);
  std::optional<fs::path> train_manifest;
  if (r.has("train_manifest")) train_manifest = resolve(ctx.base_dir, r.str("train_manifest"));
  r.finish();
  if (!(fraction > 0.0 && fraction < 1.0)) schema_error("filter fraction must be in (0, 1)");
  std::vector<std::string> evaluated;
  for (const auto& s : specs) evaluated.push_back(s.id);
  if (!allow_overlap && std::find(evaluated.begin(), evaluated.end(), filter_spec.id) != evaluated.end())
    schema_error("filter method '" + filter_spec.id + "' is also an evaluated method (set allow_overlap to override)");
  if (allow_overlap) spdlog::warn("filter method may overlap the evaluated methods");

  Corpus c = load_corpus(cs);
  const auto train = train_split_of(train_manifest.value_or(cs.manifest));
  const SamplingMask mask = mask_for(ms, c.volumes);
  const auto filter = config::build_method(filter_spec, mask, train.empty() ? nullptr : &train, ctx.out_dir);
  const auto methods = build_all(specs, mask, train.empty() ? nullptr : &train, ctx);

  const FilterResult f = adversarial_filter(c.volumes, *filter, mask, fraction, evaluated, allow_overlap, ctx.jobs);
  std::set<std::string> selected;
  for (const auto& v : f.selected) selected.insert(v.id);
  std::string fcsv = "image_id,filter_ssim,selected\n";
  for (std::size_t i = 0; i < f.ids.size(); ++i)
    fcsv += f.ids[i] + "," + format_number(f.ssim[i]) + "," + (selected.count(f.ids[i]) ? "1" : "0") + "\n";

  DatasetManifest full = read_manifest(cs.manifest);
  DatasetManifest subset{full.domain + "-filtered", {}};
  for (const auto& e : full.volumes)
    if (selected.count(e.id)) subset.volumes.push_back(e);

  std::string ecsv = "method,full_mean,full_lo,full_hi,subset_mean,subset_lo,subset_hi\n";
  auto fields = [](const MetricReport& m) {
    return m.n ? format_number(m.value) + "," + format_number(m.ci_lo) + "," + format_number(m.ci_hi)
               : std::string("nan,nan,nan");
  };
  for (const auto& m : methods) {
    const auto scores = evaluate_method(*m, c.volumes, mask, Metric::Ssim, ctx.jobs);
    std::vector<double> sub;
    for (std::size_t i = 0; i < scores.size(); ++i)
      if (selected.count(c.volumes[i].id)) sub.push_back(scores[i]);
    ecsv += m->id() + "," + fields(bootstrap_ci(scores, 0.95, 2000, seed)) + "," +
            fields(bootstrap_ci(sub, 0.95, 2000, seed)) + "\n";
  }
  ctx.emit("filter.csv", fcsv);
  ctx.emit("evaluation.csv", ecsv);
  write_manifest(ctx.out_dir / "filtered_manifest.json", subset);
  ctx.result.artifacts.push_back(ctx.out_dir / "filtered_manifest.json");
}

void run_spectrum(Reader& r, Context& ctx) {
  const CorpusSpec cs = parse_corpus(r, ctx, "all");
  const double cf = r.num("center_fraction", 0.08);
  std::optional<fs::path> subset_path;
  if (r.has("subset_manifest")) subset_path = resolve(ctx.base_dir, r.str("subset_manifest"));
  const std::uint64_t seed = r.seed("seed", 0);
  r.finish();
  if (!(cf > 0.0 && cf <= 1.0)) schema_error("center_fraction must be in (0, 1]");

  Corpus c = load_corpus(cs);
  std::vector<std::string> subset;
  if (subset_path)
    for (const auto& e : read_manifest(*subset_path).volumes) subset.push_back(e.id);
  const SpectrumReport rep = spectrum_report(c.volumes, cf, subset, seed);
  ctx.emit("spectrum.csv", spectrum_csv(rep));
  ctx.emit("spectrum_summary.json", "{\"full\":" + report_json(rep.full) + ",\"subset\":" + report_json(rep.subset) +
                                        ",\"flagged\":" + std::to_string(rep.flagged) + "}\n");
}

// ---- probe / sweep -------------------------------------------------------------

void run_probe(Reader& r, Context& ctx) {
  const CorpusSpec cs = parse_corpus(r, ctx, "all");
  const std::string image_id = r.str("image_id", "");
  const MaskSpec ms = r.has("mask") ? config::parse_mask(r.child("mask")) : MaskSpec{};
  const auto specs = config::parse_methods(r, "methods", ctx.base_dir);
  const ProbeSpec probe = r.has("probe") ? config::parse_probe(r.child("probe")) : ProbeSpec{};
  std::optional<fs::path> train_manifest;
  if (r.has("train_manifest")) train_manifest = resolve(ctx.base_dir, r.str("train_manifest"));
  r.finish();

  Corpus c = load_corpus(cs);
  auto it = image_id.empty() ? c.volumes.begin()
                             : std::find_if(c.volumes.begin(), c.volumes.end(), [&](const auto& v) { return v.id == image_id; });
  require(it != c.volumes.end(), ErrorCode::MissingInput, "image '" + image_id + "' is not in the manifest");
  const auto train = train_split_of(train_manifest.value_or(cs.manifest));
  const SamplingMask mask = mask_for(ms, c.volumes);
  const auto methods = build_all(specs, mask, train.empty() ? nullptr : &train, ctx);
  for (const auto& m : methods) {
    const HeatMap map = heatmap(*m, it->volume.target, it->volume.sens, mask, probe, ctx.jobs);
    ctx.emit("heatmap_" + m->id() + ".csv", heatmap_csv(map));
    ctx.emit_bytes("heatmap_" + m->id() + ".pgm", heatmap_pgm(map));
    json rec = {{"image_id", it->id},   {"method", m->id()},   {"window", probe.window},
                {"stride", probe.stride}, {"rows", map.rows},    {"cols", map.cols},
                {"min", map.min},         {"max", map.max},      {"missing", map.missing},
                {"fill_phase", 0.0},      {"normalization", "(raw - min) / (max - min); 0 when max == min"}};
    ctx.emit("heatmap_" + m->id() + ".json", rec.dump(2) + "\n");
  }
}

void run_sweep(Reader& r, Context& ctx) {
  const CorpusSpec cs = parse_corpus(r, ctx, "test");
  const MaskSpec ms = r.has("mask") ? config::parse_mask(r.child("mask")) : MaskSpec{};
  const auto specs = config::parse_methods(r, "methods", ctx.base_dir);
  const auto sizes = r.integers("sizes", {2, 3, 4, 5});
  const int n_locations = r.integer("n_locations", 8);
  const std::uint64_t seed = r.seed("seed", 0);
  std::optional<fs::path> train_manifest;
  if (r.has("train_manifest")) train_manifest = resolve(ctx.base_dir, r.str("train_manifest"));
  r.finish();
  if (sizes.empty()) schema_error("sizes must not be empty");
  for (int k : sizes)
    if (k < 1) schema_error("window sizes must be >= 1");
  if (n_locations < 1) schema_error("n_locations must be >= 1");

  Corpus c = load_corpus(cs);
  const auto train = train_split_of(train_manifest.value_or(cs.manifest));
  const SamplingMask mask = mask_for(ms, c.volumes);
  const auto methods = build_all(specs, mask, train.empty() ? nullptr : &train, ctx);
  std::vector<ProbeImage> images;
  for (const auto& v : c.volumes) images.push_back({v.id, v.volume.target, v.volume.sens});
  ctx.emit("sweep.csv", sweep_csv(window_size_sweep(methods, images, mask, sizes, n_locations, seed, ctx.jobs)));
}

using Runner = void (*)(Reader&, Context&);

const std::vector<std::pair<std::string, Runner>>& runners() {
  static const std::vector<std::pair<std::string, Runner>> table = {
      {"gen", run_gen},       {"recon", run_recon},   {"attack", run_attack}, {"transfer", run_transfer},
      {"shift", run_shift},   {"filter", run_filter}, {"spectrum", run_spectrum}, {"probe", run_probe},
      {"sweep", run_sweep},   {"metrics", run_metrics}};
  return table;
}

}  // namespace

const std::vector<std::string>& experiment_commands() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : runners()) n.push_back(name);
    return n;
  }();
  return names;
}

void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_logger_mt("csrobust");
    spdlog::set_default_logger(logger);
    const char* env = std::getenv("CSROBUST_LOG");
    spdlog::set_level(env ? spdlog::level::from_str(env) : spdlog::level::warn);
  });
}

RunResult run_experiment(const std::string& command, const fs::path& config_path, const RunOptions& options) {
  configure_logging();
  auto it = std::find_if(runners().begin(), runners().end(), [&](const auto& e) { return e.first == command; });
  if (it == runners().end()) schema_error("unknown command '" + command + "'");
  require(options.jobs >= 1, ErrorCode::Schema, "--jobs must be >= 1");

  const auto bytes = read_file_bytes(config_path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    schema_error("config " + config_path.string() + " is not valid JSON: " + e.what());
  }
  Reader r(doc, "config");
  const std::string declared = r.str("command", command);
  if (declared != command) schema_error("config is for command '" + declared + "', not '" + command + "'");

  Context ctx;
  ctx.command = command;
  ctx.base_dir = config_path.has_parent_path() ? config_path.parent_path() : fs::path(".");
  const std::string cfg_out = r.str("output_dir", "");
  ctx.out_dir = options.out_dir ? *options.out_dir : (cfg_out.empty() ? fs::path(".") : resolve(ctx.base_dir, cfg_out));
  ctx.jobs = options.jobs;
  ctx.result.command = command;
  ctx.result.out_dir = ctx.out_dir;
  fs::create_directories(ctx.out_dir);
  spdlog::info("running '{}' with config {} into {}", command, config_path.string(), ctx.out_dir.string());
  it->second(r, ctx);
  return ctx.result;
}

}  // namespace csr
