#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csrobust/metrics.hpp"
#include "csrobust/reconstructors.hpp"

namespace csr {

// Additive k-space perturbation. epsilon = ||z|| / reference_norm, where the
// reference is ||A x*|| of the attacked image.
struct Perturbation {
  KSpaceVolume z;
  double epsilon = 0.0;
  double reference_norm = 0.0;
  std::string source;  // attacked method id, or "random"
};

KSpaceVolume apply_perturbation(const KSpaceVolume& y, const Perturbation& p);

struct PgdConfig {
  double epsilon = 0.05;
  int iterations = 20;
  double step = 0.0;        // <= 0 selects 2 * radius / iterations
  double init_scale = 1.0;  // initial norm as a fraction of the radius (ball mode)
  bool sphere = true;       // project onto the sphere ||z|| = radius instead of the ball
  std::uint64_t seed = 0;
};

struct PgdTrace {
  std::vector<double> objective;  // objective of every evaluated iterate, init first
  std::vector<double> best;       // running best objective
};

// 0.5 * ||Psi(A x*) - Psi(A x* + z)||^2 evaluated through the autodiff path.
double attack_discrepancy(const Reconstructor& recon, const KSpaceVolume& y, const KSpaceVolume& z,
                          const SamplingMask& mask, const CoilSensitivities& sens);

// Projected gradient ascent on the discrepancy with normalized steps; z lives on
// the measured columns. Returns the best iterate.
Perturbation pgd_attack(const Reconstructor& recon, const ComplexImage& x_star, const CoilSensitivities& sens,
                        const SamplingMask& mask, const PgdConfig& cfg, PgdTrace* trace = nullptr);

struct JointAttackConfig {
  double epsilon = 0.05;
  std::optional<double> beta;                        // unset: largest bounded value of beta_grid
  std::vector<double> beta_grid{0.01, 0.1, 1.0, 10.0};
  int outer_iterations = 100;
  int block = 1;             // x-steps (and z-steps) per alternation block
  double x_step_scale = 0.9; // l1: x step = x_step_scale / L
  double z_step = 0.5;       // fraction of the way to the unconstrained z minimizer per step
  bool l1_prox = false;      // l1: proximal x-step instead of the subgradient step
  bool sphere = true;        // z on the sphere ||z|| = radius; false projects onto the ball
  bool warm_start = true;    // decoder: fit C to the clean measurement before the joint iterations
  double divergence_factor = 1e3;
  std::uint64_t seed = 0;
};

struct JointAttackResult {
  Perturbation perturbation;
  double beta = 0.0;
  std::vector<double> loss;  // step-1 loss after every outer iteration
};

// Step-1 loss for the l1 objective:
// ||A x - (A x* + z)||^2 + lambda ||H x||_1 - beta ||x - x*||^2
double joint_l1_loss(const ComplexImage& x, const KSpaceVolume& z, const ComplexImage& x_star,
                     const CoilSensitivities& sens, const SamplingMask& mask, double lambda,
                     const TransformSpec& transform, double beta);
// Its gradient with respect to (re, im) of z: 2 (z - A (x - x*)).
KSpaceVolume joint_l1_z_gradient(const ComplexImage& x, const KSpaceVolume& z, const ComplexImage& x_star,
                                 const CoilSensitivities& sens, const SamplingMask& mask);

// Two-step attack for optimization-based methods (l1 or decoder). Step 1 runs
// the alternating descent and discards its image; step 2 is the caller
// re-running the reconstructor on A x* + z.
JointAttackResult joint_attack(const Reconstructor& method, const ComplexImage& x_star,
                               const CoilSensitivities& sens, const SamplingMask& mask,
                               const JointAttackConfig& cfg);

// Gaussian direction scaled to exactly epsilon * reference_norm. With a mask,
// only measured columns are perturbed.
Perturbation random_perturbation(int n_coils, int height, int width, double epsilon, double reference_norm,
                                 std::uint64_t seed, const SamplingMask* mask = nullptr);

struct AttackSettings {
  PgdConfig pgd;
  JointAttackConfig joint;
};

// PGD for differentiable methods, the joint attack otherwise.
Perturbation attack(const Reconstructor& method, const ComplexImage& x_star, const CoilSensitivities& sens,
                    const SamplingMask& mask, double epsilon, const AttackSettings& settings, std::uint64_t seed);

struct AttackImage {
  std::string id;
  ComplexImage target;
  CoilSensitivities sens;
  KSpaceVolume measured;  // fully sampled stored data; empty means A x*
};

// Masked measurement that perturbations are added to during evaluation.
KSpaceVolume evaluation_measurement(const AttackImage& img, const SamplingMask& mask);

// perturbations[source][image][epsilon index]
using PerturbationSet = std::vector<std::vector<std::vector<Perturbation>>>;

PerturbationSet compute_perturbations(const std::vector<ReconstructorPtr>& methods,
                                      const std::vector<AttackImage>& images, const SamplingMask& mask,
                                      const std::vector<double>& epsilons, const AttackSettings& settings,
                                      std::uint64_t seed, int jobs);

struct TransferRow {
  std::string source;
  std::string target;
  double epsilon = 0.0;
  MetricReport psnr;
  std::size_t failures = 0;  // images whose reconstruction failed
};

// Every source perturbation applied to every image and reconstructed by every
// method; rows ordered by (source, target, epsilon).
std::vector<TransferRow> transfer_evaluate(const PerturbationSet& perturbations,
                                           const std::vector<ReconstructorPtr>& methods,
                                           const std::vector<AttackImage>& images, const SamplingMask& mask,
                                           const std::vector<double>& epsilons, std::uint64_t seed, int jobs);

std::string transfer_csv(const std::vector<TransferRow>& rows);

struct AttackCurveRow {
  std::string method;
  double epsilon = 0.0;
  std::string kind;  // "adversarial" or "random"
  MetricReport psnr;
  std::vector<double> per_image;  // PSNR per image, image order
  std::size_t failures = 0;
};

// PSNR against |x*| under adversarial and equal-norm random perturbations.
std::vector<AttackCurveRow> attack_curve(const Reconstructor& method, const std::vector<AttackImage>& images,
                                         const SamplingMask& mask, const std::vector<double>& epsilons,
                                         const AttackSettings& settings, std::uint64_t seed, int jobs);

std::string attack_curve_csv(const std::vector<AttackCurveRow>& rows);

}  // namespace csr
