#include "csrobust/reconstructors.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <random>

#include <json.hpp>

#include "csrobust/fft.hpp"

namespace csr {
namespace {

using nlohmann::json;

constexpr char kModelMagic[4] = {'C', 'N', 'W', '1'};

void check_shapes(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities* sens) {
  require(y.width() == mask.width(), ErrorCode::ShapeMismatch,
          "mask width " + std::to_string(mask.width()) + " does not match k-space width " + std::to_string(y.width()));
  if (sens) require(sens->same_shape(y), ErrorCode::ShapeMismatch, "sensitivities do not match k-space shape");
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<std::uint8_t>(v >> (8 * b)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> in, std::size_t at) {
  std::uint32_t v = 0;
  for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(in[at + b]) << (8 * b);
  return v;
}

ComplexImage axpy(const ComplexImage& x, cplx a, const ComplexImage& y) {
  ComplexImage out = y;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += a * x[i];
  return out;
}

double l1_norm(const ComplexImage& c) {
  double s = 0.0;
  for (const auto& v : c.values()) s += std::abs(v);
  return s;
}

// x <- H^T soft(H v, tau)
ComplexImage prox_l1(const ComplexImage& v, double tau, const TransformSpec& transform) {
  if (tau == 0.0) return v;
  ComplexImage c = analyze(v, transform);
  soft_threshold_inplace(c.values(), tau);
  return synthesize(c, transform);
}

}  // namespace

std::vector<double> to_channels(const CoilStack& y) {
  const std::size_t plane = y.plane_size();
  std::vector<double> out(2 * y.size());
  for (int k = 0; k < y.n_coils(); ++k) {
    auto src = y.coil(k);
    for (std::size_t p = 0; p < plane; ++p) {
      out[2 * k * plane + p] = src[p].real();
      out[(2 * k + 1) * plane + p] = src[p].imag();
    }
  }
  return out;
}

KSpaceVolume kspace_from_channels(std::span<const double> v, int n_coils, int height, int width) {
  KSpaceVolume y(n_coils, height, width);
  const std::size_t plane = y.plane_size();
  require(v.size() == 2 * y.size(), ErrorCode::ShapeMismatch, "channel tensor size does not match k-space shape");
  for (int k = 0; k < n_coils; ++k) {
    auto dst = y.coil(k);
    for (std::size_t p = 0; p < plane; ++p) dst[p] = {v[2 * k * plane + p], v[(2 * k + 1) * plane + p]};
  }
  return y;
}

ad::Shape channel_shape(const CoilStack& y) { return {2 * y.n_coils(), y.height(), y.width()}; }

ad::Var Reconstructor::reconstruct(ad::Tape&, ad::Var, const SamplingMask&, const CoilSensitivities&) const {
  fail(ErrorCode::Capability, "reconstructor '" + id() + "' (" + family() +
                                  ") is not differentiable; use the joint attack instead of PGD");
}

// ---- zero filled --------------------------------------------------------------

RealImage zero_filled(const KSpaceVolume& y, const SamplingMask& mask) {
  check_shapes(y, mask, nullptr);
  KSpaceVolume masked = y;
  apply_mask(masked, mask);
  return rss(coil_images(masked));
}

ad::Var zero_filled(ad::Var y, const SamplingMask& mask) {
  return ad::rss(ad::ifft2c(ad::column_mask(y, mask.keep)));
}

RealImage ZeroFilled::reconstruct(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities&) const {
  return zero_filled(y, mask);
}

ad::Var ZeroFilled::reconstruct(ad::Tape&, ad::Var y, const SamplingMask& mask, const CoilSensitivities&) const {
  return zero_filled(y, mask);
}

// ---- l1 / FISTA ---------------------------------------------------------------

double l1_objective(const ComplexImage& x, const KSpaceVolume& y, const SamplingMask& mask,
                    const CoilSensitivities& sens, double lambda, const TransformSpec& transform) {
  KSpaceVolume r = forward(x, sens, mask);
  double data = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) data += std::norm(r.values()[i] - y.values()[i]);
  return lambda == 0.0 ? data : data + lambda * l1_norm(analyze(x, transform));
}

double operator_norm_sq(const CoilSensitivities& sens, const SamplingMask& mask, int iterations) {
  ComplexImage v(sens.height(), sens.width());
  // Fixed, non-symmetric start so no eigenvector is missed by construction.
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = {1.0 + 0.01 * static_cast<double>(i % 7), 0.1 * (i % 3)};
  double lam = 0.0;
  for (int it = 0; it < std::max(iterations, 1); ++it) {
    const double n = norm2(v.values());
    if (n == 0.0) return 0.0;
    for (auto& c : v.values()) c /= n;
    v = adjoint(forward(v, sens, mask), sens, mask);
    lam = norm2(v.values());
  }
  return lam;
}

SparseReconResult l1_solve(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities& sens,
                           const SparseReconConfig& cfg) {
  check_shapes(y, mask, &sens);
  require(cfg.lambda >= 0.0, ErrorCode::InvalidSpec, "lambda must be >= 0");
  require(cfg.max_iters >= 1, ErrorCode::InvalidSpec, "max_iters must be >= 1");
  require(cfg.step_scale > 0.0 && cfg.step_scale <= 1.0, ErrorCode::InvalidSpec, "step_scale must be in (0, 1]");
  validate(cfg.transform, y.width());

  SparseReconResult res;
  res.lipschitz = 2.0 * operator_norm_sq(sens, mask, cfg.power_iters);
  const int h = y.height(), w = y.width();
  ComplexImage x(h, w), z(h, w), best(h, w);
  if (res.lipschitz == 0.0) {
    res.image = x;
    res.objective.push_back(l1_objective(x, y, mask, sens, cfg.lambda, cfg.transform));
    return res;
  }
  res.step = cfg.step_scale / res.lipschitz;
  const double initial = l1_objective(x, y, mask, sens, cfg.lambda, cfg.transform);
  res.objective.push_back(initial);
  double best_obj = initial, prev = initial, t = 1.0;

  for (int it = 1; it <= cfg.max_iters; ++it) {
    KSpaceVolume r = forward(z, sens, mask);
    for (std::size_t i = 0; i < r.size(); ++i) r.values()[i] -= y.values()[i];
    ComplexImage g = adjoint(r, sens, mask);
    ComplexImage x_next = prox_l1(axpy(g, -2.0 * res.step, z), res.step * cfg.lambda, cfg.transform);
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double momentum = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = x_next[i] + momentum * (x_next[i] - x[i]);
    x = std::move(x_next);
    t = t_next;

    const double obj = l1_objective(x, y, mask, sens, cfg.lambda, cfg.transform);
    if (!std::isfinite(obj) || obj > 10.0 * initial + 1e-300)
      fail(ErrorCode::NumericalFailure, "FISTA diverged at iteration " + std::to_string(it) + " with step size " +
                                            std::to_string(res.step) + " (objective " + std::to_string(obj) + ")");
    res.objective.push_back(obj);
    res.iterations = it;
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
    if (std::abs(prev - obj) <= cfg.tolerance * std::max(std::abs(prev), 1e-300) && obj <= prev) break;
    prev = obj;
  }
  res.image = std::move(best);
  return res;
}

L1Reconstructor::L1Reconstructor(std::string id, SparseReconConfig cfg) : id_(std::move(id)), cfg_(cfg) {
  require(cfg_.lambda >= 0.0, ErrorCode::InvalidSpec, "lambda must be >= 0");
  require(cfg_.max_iters >= 1, ErrorCode::InvalidSpec, "max_iters must be >= 1");
}

RealImage L1Reconstructor::reconstruct(const KSpaceVolume& y, const SamplingMask& mask,
                                       const CoilSensitivities& sens) const {
  return magnitude(l1_solve(y, mask, sens, cfg_).image);
}

// ---- un-trained decoder ---------------------------------------------------------

DecoderFitResult decoder_fit(const KSpaceVolume& y, const SamplingMask& mask, const DecoderConfig& cfg,
                             std::uint64_t seed) {
  check_shapes(y, mask, nullptr);
  require(y.height() == y.width(), ErrorCode::ShapeMismatch, "decoder expects square k-space");
  require(cfg.iterations >= 0, ErrorCode::InvalidSpec, "decoder iterations must be >= 0");
  nn::DecoderNet net(y.width(), cfg.layers, cfg.channels, 2 * y.n_coils(), cfg.upsample, seed);
  std::optional<nn::Adam> adam;
  if (cfg.optimizer == DecoderOptimizer::Adam) adam.emplace(net.params(), cfg.adam);
  const std::vector<double> target = to_channels(y);
  const ad::Shape shape = channel_shape(y);

  DecoderFitResult res;
  for (int it = 0; it <= cfg.iterations; ++it) {
    ad::Tape tape;
    auto bound = net.params().bind(tape);
    ad::Var g = net.forward(tape, bound);
    ad::Var resid = ad::sub(ad::column_mask(ad::fft2c(g), mask.keep), tape.constant(shape, target));
    ad::Var loss = ad::scale(ad::sum_squares(resid), 0.5);
    const double value = loss.value()[0];
    if (!std::isfinite(value))
      fail(ErrorCode::NumericalFailure, "decoder loss became non-finite at iteration " + std::to_string(it));
    res.losses.push_back(value);
    if (it == 0) res.initial_loss = value;
    if (it == 0 || value < res.best_loss) {
      res.best_loss = value;
      res.best_iteration = it;
      res.coil_output.assign(g.value().begin(), g.value().end());
    }
    if (it == cfg.iterations) break;

    tape.backward(loss);
    if (adam) {
      adam->step(net.params(), bound);
    } else {
      const double frac = cfg.iterations > 1 ? static_cast<double>(it) / (cfg.iterations - 1) : 0.0;
      const double lr = cfg.gd_lr_start + (cfg.gd_lr_end - cfg.gd_lr_start) * frac;
      for (std::size_t p = 0; p < net.params().size(); ++p) {
        auto grad = bound[p].grad();
        auto& v = net.params()[p].value;
        for (std::size_t j = 0; j < grad.size(); ++j) v[j] -= lr * grad[j];
      }
    }
  }

  const std::size_t plane = y.plane_size();
  res.image = RealImage(y.height(), y.width());
  for (std::size_t p = 0; p < plane; ++p) {
    double s = 0.0;
    for (int c = 0; c < 2 * y.n_coils(); ++c) s += res.coil_output[c * plane + p] * res.coil_output[c * plane + p];
    res.image[p] = std::sqrt(s);
  }
  return res;
}

DecoderReconstructor::DecoderReconstructor(std::string id, DecoderConfig cfg) : id_(std::move(id)), cfg_(cfg) {
  require(cfg_.layers >= 2, ErrorCode::InvalidSpec, "decoder needs at least 2 layers");
}

RealImage DecoderReconstructor::reconstruct(const KSpaceVolume& y, const SamplingMask& mask,
                                            const CoilSensitivities&) const {
  return decoder_fit(y, mask, cfg_, cfg_.seed).image;
}

// ---- trained CNN ------------------------------------------------------------------

std::vector<TrainingExample> make_training_set(const std::vector<Volume>& volumes, const SamplingMask& mask) {
  std::vector<TrainingExample> out;
  out.reserve(volumes.size());
  for (const auto& v : volumes) {
    require(v.target.same_shape(volumes.front().target) && v.kspace.same_shape(volumes.front().kspace),
            ErrorCode::ShapeMismatch, "training volumes have inconsistent shapes");
    out.push_back({zero_filled(v.kspace, mask), magnitude(v.target)});
  }
  return out;
}

ad::Var cnn_forward(const CnnModel& model, ad::Var input_image, const std::vector<ad::Var>& bound) {
  return nn::unet_forward(input_image, model.shape, bound);
}

RealImage cnn_apply(const CnnModel& model, const RealImage& input) {
  ad::Tape tape;
  std::vector<ad::Var> bound;
  for (const auto& p : model.params) bound.push_back(tape.constant(p.shape, p.value));
  ad::Var x = tape.constant({1, input.height(), input.width()},
                            std::vector<double>(input.values().begin(), input.values().end()));
  ad::Var out = cnn_forward(model, x, bound);
  RealImage img(input.height(), input.width());
  std::copy(out.value().begin(), out.value().end(), img.values().begin());
  return img;
}

CnnModel cnn_train(const std::vector<TrainingExample>& examples, const TrainedCnnConfig& cfg, std::uint64_t seed,
                   std::vector<double>* epoch_losses) {
  require(!examples.empty(), ErrorCode::InvalidSpec, "cnn training set is empty");
  require(cfg.epochs >= 0 && cfg.batch_size >= 1 && cfg.learning_rate > 0.0, ErrorCode::InvalidSpec,
          "cnn training needs epochs >= 0, batch_size >= 1 and a positive learning rate");
  const int h = examples.front().input.height(), w = examples.front().input.width();
  for (const auto& e : examples)
    require(e.input.height() == h && e.input.width() == w && e.target.same_shape(e.input), ErrorCode::ShapeMismatch,
            "training examples have inconsistent shapes");

  CnnModel model;
  model.shape = {cfg.depth, cfg.width};
  model.size = w;
  model.params = nn::make_unet_params(model.shape, seed);
  nn::Adam adam(model.params, {cfg.learning_rate, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      ad::Tape tape;
      auto bound = model.params.bind(tape);
      std::optional<ad::Var> loss;
      for (std::size_t b = start; b < end; ++b) {
        const auto& e = examples[order[b]];
        ad::Var x = tape.constant({1, h, w}, std::vector<double>(e.input.values().begin(), e.input.values().end()));
        ad::Var t = tape.constant({1, h, w}, std::vector<double>(e.target.values().begin(), e.target.values().end()));
        ad::Var l = ad::sum_squares(ad::sub(cnn_forward(model, x, bound), t));
        loss = loss ? ad::add(*loss, l) : l;
      }
      ad::Var mean = ad::scale(*loss, 1.0 / static_cast<double>(end - start));
      total += loss->value()[0];
      tape.backward(mean);
      adam.step(model.params, bound);
    }
    if (epoch_losses) epoch_losses->push_back(total / static_cast<double>(examples.size()));
  }
  model.params.round_to_float();
  return model;
}

CnnModel cnn_train(const DatasetManifest& manifest, const SamplingMask& mask, const TrainedCnnConfig& cfg,
                   std::uint64_t seed) {
  require(!manifest.volumes.empty(), ErrorCode::InvalidSpec, "cnn training manifest is empty");
  std::vector<Volume> volumes;
  for (const auto& e : manifest.volumes) volumes.push_back(read_volume(e.path));
  return cnn_train(make_training_set(volumes, mask), cfg, seed);
}

std::vector<std::uint8_t> encode_model(const CnnModel& model) {
  json layers = json::array();
  for (const auto& p : model.params) layers.push_back({{"name", p.name}, {"shape", p.shape}});
  json header = {{"size", model.size}, {"depth", model.shape.depth}, {"width", model.shape.width}, {"layers", layers}};
  const std::string text = header.dump();
  std::vector<std::uint8_t> out(kModelMagic, kModelMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  for (const auto& p : model.params)
    for (double v : p.value) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

CnnModel decode_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kModelMagic, 4) != 0)
    throw ParseError(0, "not a CNW1 model file (bad magic)");
  if (bytes.size() < 8) throw ParseError(4, "truncated model header length");
  const std::size_t len = get_u32(bytes, 4);
  if (bytes.size() < 8 + len) throw ParseError(bytes.size(), "truncated model header");
  json header;
  try {
    header = json::parse(bytes.begin() + 8, bytes.begin() + 8 + static_cast<std::ptrdiff_t>(len));
  } catch (const json::parse_error& e) {
    throw ParseError(8 + (e.byte > 0 ? e.byte - 1 : 0), std::string("model header is not valid JSON: ") + e.what());
  }
  CnnModel model;
  try {
    model.size = header.at("size").get<int>();
    model.shape.depth = header.at("depth").get<int>();
    model.shape.width = header.at("width").get<int>();
    std::size_t at = 8 + len;
    for (const auto& layer : header.at("layers")) {
      ad::Shape shape = layer.at("shape").get<ad::Shape>();
      const std::size_t count = ad::element_count(shape);
      if (bytes.size() < at + 4 * count)
        throw ParseError(bytes.size(), "model payload truncated in layer '" + layer.at("name").get<std::string>() + "'");
      std::vector<double> values(count);
      for (auto& v : values) {
        v = std::bit_cast<float>(get_u32(bytes, at));
        at += 4;
      }
      model.params.add(layer.at("name").get<std::string>(), std::move(shape), std::move(values));
    }
    if (at != bytes.size()) throw ParseError(at, "trailing bytes after model payload");
  } catch (const json::exception& e) {
    throw ParseError(8, std::string("model header has an unexpected layout: ") + e.what());
  }
  const auto expected = nn::make_unet_params(model.shape, 0);
  require(expected.size() == model.params.size(), ErrorCode::Schema, "model layer count does not match its depth");
  for (std::size_t i = 0; i < expected.size(); ++i)
    require(expected[i].shape == model.params[i].shape && expected[i].name == model.params[i].name, ErrorCode::Schema,
            "model layer '" + model.params[i].name + "' does not match the architecture");
  return model;
}

void save_model(const std::filesystem::path& path, const CnnModel& model) {
  write_file_bytes(path, encode_model(model));
}

CnnModel load_model(const std::filesystem::path& path) { return decode_model(read_file_bytes(path)); }

CnnReconstructor::CnnReconstructor(std::string id, std::shared_ptr<const CnnModel> model)
    : id_(std::move(id)), model_(std::move(model)) {
  require(model_ != nullptr, ErrorCode::InvalidSpec, "cnn reconstructor needs a model");
}

RealImage CnnReconstructor::reconstruct(const KSpaceVolume& y, const SamplingMask& mask,
                                        const CoilSensitivities&) const {
  require(y.width() == model_->size && y.height() == model_->size, ErrorCode::ShapeMismatch,
          "cnn model was trained for size " + std::to_string(model_->size));
  return cnn_apply(*model_, zero_filled(y, mask));
}

ad::Var CnnReconstructor::reconstruct(ad::Tape& tape, ad::Var y, const SamplingMask& mask,
                                      const CoilSensitivities&) const {
  std::vector<ad::Var> bound;
  for (const auto& p : model_->params) bound.push_back(tape.constant(p.shape, p.value));
  return cnn_forward(*model_, zero_filled(y, mask), bound);
}

}  // namespace csr
