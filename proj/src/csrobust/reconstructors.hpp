#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "csrobust/autodiff.hpp"
#include "csrobust/fourier_model.hpp"
#include "csrobust/networks.hpp"
#include "csrobust/transforms.hpp"
#include "csrobust/volume_io.hpp"

namespace csr {

// k-space <-> [2 n_c, H, W] tensor with (re, im) channel pairs per coil.
std::vector<double> to_channels(const CoilStack& y);
KSpaceVolume kspace_from_channels(std::span<const double> v, int n_coils, int height, int width);
ad::Shape channel_shape(const CoilStack& y);

// Uniform interface Psi: (k-space, mask, coil maps) -> nonnegative magnitude image.
class Reconstructor {
 public:
  virtual ~Reconstructor() = default;

  virtual const std::string& id() const = 0;
  virtual std::string family() const = 0;
  virtual bool differentiable() const { return false; }

  virtual RealImage reconstruct(const KSpaceVolume& y, const SamplingMask& mask,
                                const CoilSensitivities& sens) const = 0;

  // Differentiable path: y is a [2 n_c, H, W] tensor, output is [1, H, W].
  // Throws Capability for optimization-based methods.
  virtual ad::Var reconstruct(ad::Tape& tape, ad::Var y, const SamplingMask& mask,
                              const CoilSensitivities& sens) const;
};

using ReconstructorPtr = std::shared_ptr<const Reconstructor>;

// rss over coil-wise inverse DFT of the masked data.
RealImage zero_filled(const KSpaceVolume& y, const SamplingMask& mask);
ad::Var zero_filled(ad::Var y, const SamplingMask& mask);

class ZeroFilled final : public Reconstructor {
 public:
  explicit ZeroFilled(std::string id = "zero_filled") : id_(std::move(id)) {}
  const std::string& id() const override { return id_; }
  std::string family() const override { return "zero_filled"; }
  bool differentiable() const override { return true; }
  RealImage reconstruct(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities& sens) const override;
  ad::Var reconstruct(ad::Tape& tape, ad::Var y, const SamplingMask& mask, const CoilSensitivities& sens) const override;

 private:
  std::string id_;
};

// ---- l1-regularized reconstruction -----------------------------------------

struct SparseReconConfig {
  double lambda = 1e-3;
  TransformSpec transform;
  int max_iters = 300;
  double tolerance = 1e-7;  // relative objective change
  double step_scale = 0.9;  // step = step_scale / L
  int power_iters = 20;
};

struct SparseReconResult {
  ComplexImage image;
  std::vector<double> objective;  // per iteration, starting with the initial point
  double step = 0.0;
  double lipschitz = 0.0;
  int iterations = 0;
};

// sum_i ||y_i - M F S_i x||^2 + lambda ||H x||_1
double l1_objective(const ComplexImage& x, const KSpaceVolume& y, const SamplingMask& mask,
                    const CoilSensitivities& sens, double lambda, const TransformSpec& transform);

// Largest eigenvalue of A^H A by power iteration from a fixed start.
double operator_norm_sq(const CoilSensitivities& sens, const SamplingMask& mask, int iterations);

// FISTA from x = 0. Returns the lowest-objective iterate.
SparseReconResult l1_solve(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities& sens,
                           const SparseReconConfig& cfg);

class L1Reconstructor final : public Reconstructor {
 public:
  L1Reconstructor(std::string id, SparseReconConfig cfg);
  const std::string& id() const override { return id_; }
  std::string family() const override { return "l1"; }
  const SparseReconConfig& config() const { return cfg_; }
  RealImage reconstruct(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities& sens) const override;

 private:
  std::string id_;
  SparseReconConfig cfg_;
};

// ---- un-trained decoder -----------------------------------------------------

enum class DecoderOptimizer { Adam, GradientDescent };

struct DecoderConfig {
  int layers = 5;
  int channels = 64;
  ad::Upsample upsample = ad::Upsample::Bilinear;
  DecoderOptimizer optimizer = DecoderOptimizer::Adam;
  nn::AdamSettings adam{0.01, 0.9, 0.999, 1e-8};
  // Gradient descent step grows linearly from gd_lr_start to gd_lr_end.
  double gd_lr_start = 3e-5;
  double gd_lr_end = 3e-4;
  int iterations = 1000;
  std::uint64_t seed = 0;
};

struct DecoderFitResult {
  RealImage image;                 // rss of the best-loss iterate's coil outputs
  std::vector<double> coil_output; // [2 n_c, H, W] of the best iterate
  double initial_loss = 0.0;
  double best_loss = 0.0;
  int best_iteration = 0;          // 0 is the random initialization
  std::vector<double> losses;      // loss of each evaluated iterate, initialization first
};

// 0.5 * sum_i ||y_i - M F G_i(C)||^2 over decoder parameters C.
DecoderFitResult decoder_fit(const KSpaceVolume& y, const SamplingMask& mask, const DecoderConfig& cfg,
                             std::uint64_t seed);

class DecoderReconstructor final : public Reconstructor {
 public:
  DecoderReconstructor(std::string id, DecoderConfig cfg);
  const std::string& id() const override { return id_; }
  std::string family() const override { return "decoder"; }
  const DecoderConfig& config() const { return cfg_; }
  RealImage reconstruct(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities& sens) const override;

 private:
  std::string id_;
  DecoderConfig cfg_;
};

// ---- trained CNN ------------------------------------------------------------

struct TrainedCnnConfig {
  int depth = 3;
  int width = 8;
  int epochs = 50;
  double learning_rate = 1e-3;
  int batch_size = 4;
};

struct CnnModel {
  nn::UNetShape shape;
  int size = 0;
  nn::ParamSet params;
};

struct TrainingExample {
  RealImage input;   // zero-filled magnitude
  RealImage target;  // ground-truth magnitude
};

// Zero-filled input / magnitude target pairs from fully sampled volumes.
std::vector<TrainingExample> make_training_set(const std::vector<Volume>& volumes, const SamplingMask& mask);

// Mini-batch Adam on (1/n) sum_j ||x_j - f(y_j)||^2. Weights are rounded to
// float precision on return so that a saved model behaves identically.
CnnModel cnn_train(const std::vector<TrainingExample>& examples, const TrainedCnnConfig& cfg, std::uint64_t seed,
                   std::vector<double>* epoch_losses = nullptr);
CnnModel cnn_train(const DatasetManifest& manifest, const SamplingMask& mask, const TrainedCnnConfig& cfg,
                   std::uint64_t seed);

ad::Var cnn_forward(const CnnModel& model, ad::Var input_image, const std::vector<ad::Var>& bound);
RealImage cnn_apply(const CnnModel& model, const RealImage& input);

// "CNW1" container: magic, u32 LE header length, JSON header with layer
// shapes, little-endian f32 payload in header order.
std::vector<std::uint8_t> encode_model(const CnnModel& model);
CnnModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const std::filesystem::path& path, const CnnModel& model);
CnnModel load_model(const std::filesystem::path& path);

class CnnReconstructor final : public Reconstructor {
 public:
  CnnReconstructor(std::string id, std::shared_ptr<const CnnModel> model);
  const std::string& id() const override { return id_; }
  std::string family() const override { return "cnn"; }
  bool differentiable() const override { return true; }
  const CnnModel& model() const { return *model_; }
  RealImage reconstruct(const KSpaceVolume& y, const SamplingMask& mask, const CoilSensitivities& sens) const override;
  ad::Var reconstruct(ad::Tape& tape, ad::Var y, const SamplingMask& mask, const CoilSensitivities& sens) const override;

 private:
  std::string id_;
  std::shared_ptr<const CnnModel> model_;
};

}  // namespace csr
