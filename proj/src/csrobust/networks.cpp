#include "csrobust/networks.hpp"

#include <cmath>

namespace csr::nn {

Param& ParamSet::add(std::string name, ad::Shape shape, std::vector<double> value) {
  require(ad::element_count(shape) == value.size(), ErrorCode::ShapeMismatch,
          "parameter '" + name + "' value count does not match its shape");
  params_.push_back(Param{std::move(name), std::move(shape), std::move(value)});
  return params_.back();
}

std::size_t ParamSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

std::vector<ad::Var> ParamSet::bind(ad::Tape& tape) const {
  std::vector<ad::Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(tape.variable(p.shape, p.value));
  return out;
}

void ParamSet::round_to_float() {
  for (auto& p : params_)
    for (auto& v : p.value) v = static_cast<double>(static_cast<float>(v));
}

Adam::Adam(const ParamSet& params, AdamSettings settings) : s_(settings) {
  for (const auto& p : params) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(ParamSet& params, const std::vector<ad::Var>& bound) {
  ++t_;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto g = bound[i].grad();
    if (g.empty()) continue;
    step(params[i].value, g, i);
  }
}

void Adam::step(std::span<double> values, std::span<const double> grad, std::size_t slot) {
  if (slot >= m_.size()) {
    m_.resize(slot + 1);
    v_.resize(slot + 1);
  }
  if (m_[slot].empty()) {
    m_[slot].assign(values.size(), 0.0);
    v_[slot].assign(values.size(), 0.0);
  }
  const long t = std::max(t_, 1L);
  const double c1 = 1.0 - std::pow(s_.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(s_.beta2, static_cast<double>(t));
  auto& m = m_[slot];
  auto& v = v_[slot];
  for (std::size_t j = 0; j < values.size(); ++j) {
    m[j] = s_.beta1 * m[j] + (1.0 - s_.beta1) * grad[j];
    v[j] = s_.beta2 * v[j] + (1.0 - s_.beta2) * grad[j] * grad[j];
    values[j] -= s_.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + s_.eps);
  }
}

void add_conv(ParamSet& params, const std::string& name, int in, int out, int k, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (static_cast<double>(in) * k * k)));
  std::vector<double> w(static_cast<std::size_t>(out) * in * k * k);
  for (auto& v : w) v = normal(rng);
  params.add(name + ".w", {out, in, k, k}, std::move(w));
  params.add(name + ".b", {out}, std::vector<double>(out, 0.0));
}

DecoderNet::DecoderNet(int out_size, int layers, int channels, int out_channels, ad::Upsample upsample,
                       std::uint64_t seed)
    : layers_(layers), channels_(channels), out_channels_(out_channels), upsample_(upsample) {
  require(layers >= 2, ErrorCode::InvalidSpec, "decoder needs at least 2 layers");
  require(channels >= 1 && out_channels >= 1, ErrorCode::InvalidSpec, "decoder channel counts must be positive");
  const int factor = 1 << (layers - 1);
  require(out_size % factor == 0 && out_size / factor >= 1, ErrorCode::InvalidSpec,
          "decoder with " + std::to_string(layers) + " layers cannot reach size " + std::to_string(out_size) +
              " by 2x upsampling");
  seed_size_ = out_size / factor;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  input_.resize(static_cast<std::size_t>(channels) * seed_size_ * seed_size_);
  for (auto& v : input_) v = normal(rng);
  for (int l = 1; l < layers; ++l) {
    add_conv(params_, "block" + std::to_string(l) + ".conv", channels, channels, 3, rng);
    params_.add("block" + std::to_string(l) + ".gamma", {channels}, std::vector<double>(channels, 1.0));
    params_.add("block" + std::to_string(l) + ".beta", {channels}, std::vector<double>(channels, 0.0));
  }
  add_conv(params_, "out", channels, out_channels, 1, rng);
  for (auto& v : params_[params_.size() - 2].value) v *= 0.1;
}

ad::Var DecoderNet::forward(ad::Tape& tape, const std::vector<ad::Var>& bound) const {
  ad::Var h = tape.constant({channels_, seed_size_, seed_size_}, input_);
  std::size_t k = 0;
  for (int l = 1; l < layers_; ++l) {
    h = ad::upsample2x(h, upsample_);
    h = ad::conv2d(h, bound[k], bound[k + 1]);
    h = ad::relu(h);
    h = ad::channel_affine(h, bound[k + 2], bound[k + 3]);
    k += 4;
  }
  return ad::conv2d(h, bound[k], bound[k + 1]);
}

ParamSet make_unet_params(const UNetShape& shape, std::uint64_t seed) {
  require(shape.depth >= 1 && shape.width >= 1, ErrorCode::InvalidSpec, "cnn depth and width must be >= 1");
  std::mt19937_64 rng(seed);
  ParamSet p;
  int in = 1;
  for (int i = 0; i < shape.depth; ++i) {
    const int w = shape.width << i;
    add_conv(p, "enc" + std::to_string(i) + ".conv1", in, w, 3, rng);
    add_conv(p, "enc" + std::to_string(i) + ".conv2", w, w, 3, rng);
    in = w;
  }
  for (int i = shape.depth - 2; i >= 0; --i) {
    const int w = shape.width << i;
    add_conv(p, "dec" + std::to_string(i) + ".conv1", in + w, w, 3, rng);
    add_conv(p, "dec" + std::to_string(i) + ".conv2", w, w, 3, rng);
    in = w;
  }
  add_conv(p, "out", in, 1, 1, rng);
  for (auto& v : p[p.size() - 2].value) v *= 0.1;
  return p;
}

ad::Var unet_forward(ad::Var input, const UNetShape& shape, const std::vector<ad::Var>& bound) {
  const auto& s = input.shape();
  require(s.size() == 3 && s[0] == 1, ErrorCode::ShapeMismatch, "cnn input must be [1,H,W]");
  const int factor = 1 << (shape.depth - 1);
  require(s[1] % factor == 0 && s[2] % factor == 0, ErrorCode::ShapeMismatch,
          "cnn input size must be divisible by 2^(depth-1)");
  std::size_t k = 0;
  auto conv = [&](ad::Var h) {
    h = ad::relu(ad::conv2d(h, bound[k], bound[k + 1]));
    k += 2;
    return h;
  };
  std::vector<ad::Var> skips;
  ad::Var h = input;
  for (int i = 0; i < shape.depth; ++i) {
    if (i > 0) h = ad::avg_pool2x(h);
    h = conv(conv(h));
    skips.push_back(h);
  }
  for (int i = shape.depth - 2; i >= 0; --i) {
    h = ad::upsample2x(h, ad::Upsample::Nearest);
    h = ad::concat_channels(h, skips[i]);
    h = conv(conv(h));
  }
  ad::Var residual = ad::conv2d(h, bound[k], bound[k + 1]);
  return ad::relu(ad::add(input, residual));
}

}  // namespace csr::nn
