#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "csrobust/autodiff.hpp"

namespace csr::nn {

struct Param {
  std::string name;
  ad::Shape shape;
  std::vector<double> value;
};

class ParamSet {
 public:
  Param& add(std::string name, ad::Shape shape, std::vector<double> value);
  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Param& operator[](std::size_t i) { return params_[i]; }
  const Param& operator[](std::size_t i) const { return params_[i]; }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  // Registers every parameter as a differentiable leaf on the tape.
  std::vector<ad::Var> bind(ad::Tape& tape) const;
  // Rounds every value to float precision (the on-disk representation).
  void round_to_float();

 private:
  std::vector<Param> params_;
};

struct AdamSettings {
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam(const ParamSet& params, AdamSettings settings);
  void step(ParamSet& params, const std::vector<ad::Var>& bound);
  void step(std::span<double> values, std::span<const double> grad, std::size_t slot);

 private:
  AdamSettings s_;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

// He-normal conv weight [out, in, k, k] and zero bias.
void add_conv(ParamSet& params, const std::string& name, int in, int out, int k, std::mt19937_64& rng);

// Un-trained convolutional generator: a fixed random seed tensor passed through
// (upsample, 3x3 conv, ReLU, channel affine) blocks and a final 1x1 conv.
class DecoderNet {
 public:
  DecoderNet(int out_size, int layers, int channels, int out_channels, ad::Upsample upsample, std::uint64_t seed);

  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  int seed_size() const { return seed_size_; }
  // Output [out_channels, out_size, out_size].
  ad::Var forward(ad::Tape& tape, const std::vector<ad::Var>& bound) const;

 private:
  int layers_, channels_, out_channels_, seed_size_;
  ad::Upsample upsample_;
  ParamSet params_;
  std::vector<double> input_;
};

// Small encoder-decoder with skip connections mapping a magnitude image to a
// refined magnitude image: out = relu(x + net(x)).
struct UNetShape {
  int depth = 3;
  int width = 8;
};

ParamSet make_unet_params(const UNetShape& shape, std::uint64_t seed);
ad::Var unet_forward(ad::Var input, const UNetShape& shape, const std::vector<ad::Var>& bound);

}  // namespace csr::nn
