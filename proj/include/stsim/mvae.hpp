#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "stsim/core.hpp"

namespace stsim {

enum class Modality { kVisual = 0, kTactile = 1, kPose = 2 };
inline constexpr std::size_t kModalityCount = 3;
inline constexpr std::size_t kPoseDim = 7;

std::string to_string(Modality m);

/// Bit i set = Modality(i) present.
using ModalitySet = unsigned;
inline constexpr ModalitySet bit(Modality m) { return 1u << static_cast<unsigned>(m); }
inline constexpr ModalitySet kAllModalities = 0b111;
inline constexpr bool has(ModalitySet s, Modality m) { return (s & bit(m)) != 0; }

/// Non-empty subsets of `available`, in increasing bit order.
std::vector<ModalitySet> nonempty_subsets(ModalitySet available);

struct GaussianBelief {
  Eigen::VectorXd mean;
  Eigen::VectorXd var;

  std::size_t dim() const { return static_cast<std::size_t>(mean.size()); }
  /// Throws InvalidInput on size mismatch or a non-positive variance.
  void validate() const;
};

/// Product of the experts with a standard Gaussian prior.
GaussianBelief poe_fuse(const std::vector<GaussianBelief>& experts, std::size_t latent_dim);

/// KL(q || N(0, I)).
double gaussian_kl(const GaussianBelief& q);

/// Mean over elements of softplus(l) - y*l. Targets must lie in [0,1].
double bce_logits(const Eigen::MatrixXd& logits, const Eigen::MatrixXd& targets);

Eigen::VectorXd reparameterize(const GaussianBelief& q, const Eigen::VectorXd& noise);

double beta_schedule(double epoch, double anneal_epochs);

struct AdamParams {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  std::uint64_t step = 0;
};

/// Bias-corrected Adam. Returns false, leaving params and state untouched,
/// when any gradient is non-finite.
bool adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grads, AdamState& state, const AdamParams& p);

/// Portable seeded sampling (independent of the standard library's
/// distribution implementations).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform();  // [0, 1)
  double normal();
  std::uint64_t next() { return engine_(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Dense network over column batches (features x samples). Hidden layers use
// Swish, the output layer is linear.
struct DenseLayout {
  std::size_t offset = 0;
  std::size_t in = 0;
  std::size_t out = 0;

  std::size_t size() const { return out * in + out; }
};

struct MlpCache {
  std::vector<Eigen::MatrixXd> pre;   // per layer pre-activation
  std::vector<Eigen::MatrixXd> post;  // per layer input (post[0] = network input)
};

class Mlp {
 public:
  Mlp() = default;
  /// Appends layers to a parameter layout starting at `offset`.
  Mlp(const std::vector<std::size_t>& widths, std::size_t& offset);

  std::size_t input_dim() const { return layers_.empty() ? 0 : layers_.front().in; }
  std::size_t output_dim() const { return layers_.empty() ? 0 : layers_.back().out; }
  const std::vector<DenseLayout>& layers() const { return layers_; }

  Eigen::MatrixXd forward(const Eigen::VectorXd& params, const Eigen::MatrixXd& x, MlpCache* cache) const;
  /// Accumulates parameter gradients into `grads`; returns d loss / d input.
  Eigen::MatrixXd backward(const Eigen::VectorXd& params, const MlpCache& cache, const Eigen::MatrixXd& d_out,
                           Eigen::VectorXd& grads) const;

 private:
  std::vector<DenseLayout> layers_;
};

double swish(double x);
double swish_grad(double x);

struct ModelConfig {
  ModalitySet modalities = kAllModalities;
  std::size_t image_side = 16;
  std::size_t latent_dim = 16;
  std::vector<std::size_t> hidden{256, 128};
  std::size_t condition_dim = 0;
  std::array<double, kModalityCount> lambda{1.0, 1.0, 1000.0};
  double logvar_limit = 10.0;
  std::uint64_t seed = 1;

  std::size_t modality_dim(Modality m) const;
  void validate() const;
};

/// Column batch: inputs at t, targets at T, per-sample availability.
struct Batch {
  std::array<Eigen::MatrixXd, kModalityCount> input;
  std::array<Eigen::MatrixXd, kModalityCount> target;
  std::vector<ModalitySet> available;
  Eigen::MatrixXd condition;  // condition_dim x B

  std::size_t size() const { return available.size(); }
};

struct LossBreakdown {
  double total = 0.0;
  double kl = 0.0;                                  // summed over subsets, batch mean
  std::array<double, kModalityCount> recon{};       // unweighted, summed over subsets, batch mean
  std::size_t terms = 0;                            // (sample, subset) ELBO terms
  std::size_t clamped_logvars = 0;
};

struct Prediction {
  std::array<Eigen::MatrixXd, kModalityCount> logits;  // images: logits; pose: values
  std::array<Eigen::MatrixXd, kModalityCount> value;   // images: sigmoid(logits); pose: values
  std::vector<bool> prior_only;                        // sample had no usable input
};

class MvaeModel {
 public:
  MvaeModel() = default;
  explicit MvaeModel(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::size_t parameter_count() const { return static_cast<std::size_t>(params_.size()); }
  Eigen::VectorXd& parameters() { return params_; }
  const Eigen::VectorXd& parameters() const { return params_; }
  bool has_modality(Modality m) const { return has(cfg_.modalities, m); }

  const Mlp& encoder(Modality m) const { return encoders_[static_cast<std::size_t>(m)]; }
  const Mlp& decoder(Modality m) const { return decoders_[static_cast<std::size_t>(m)]; }

  /// Per-sample posterior of one modality's encoder.
  std::vector<GaussianBelief> encode(Modality m, const Eigen::MatrixXd& x, const Eigen::MatrixXd& condition) const;

  /// Sum over every subset in `subsets` of the time-lagged ELBO, restricted
  /// per sample to subsets of its available modalities, averaged over the
  /// batch. `noise` (latent x B) is shared by all subsets. Accumulates the
  /// gradient into `grad` when non-null.
  LossBreakdown loss(const Batch& batch, const std::vector<ModalitySet>& subsets, double beta,
                     const Eigen::MatrixXd& noise, Eigen::VectorXd* grad) const;

  /// Powerset loss over all non-empty subsets of the model's modalities.
  LossBreakdown subset_loss(const Batch& batch, double beta, const Eigen::MatrixXd& noise,
                            Eigen::VectorXd* grad) const;

  /// ELBO for one input subset. Throws InvalidInput for the empty set.
  LossBreakdown elbo(const Batch& batch, ModalitySet inputs, double beta, const Eigen::MatrixXd& noise,
                     Eigen::VectorXd* grad) const;

  /// Fuses whatever each sample has available (restricted to `use`), then
  /// decodes every head. With `noise` empty the posterior mean is used.
  /// Samples with nothing available decode the prior mean.
  Prediction predict(const Batch& batch, ModalitySet use, const Eigen::MatrixXd& noise = {}) const;

 private:
  ModelConfig cfg_;
  Eigen::VectorXd params_;
  std::array<Mlp, kModalityCount> encoders_;
  std::array<Mlp, kModalityCount> decoders_;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

/// Central differences on `samples` distinct randomly chosen parameters against the
/// analytic subset-loss gradient, with `noise` frozen. Relative error is
/// |a - n| / max(|a|, |n|, floor * max(1, |loss|)): components below the
/// floor are beneath what a float64 central difference can resolve.
GradCheckResult gradient_check(const MvaeModel& model, const Batch& batch, double beta, const Eigen::MatrixXd& noise,
                               std::size_t samples = 200, double h = 1e-5, std::uint64_t seed = 7,
                               double floor = 1e-6);

/// Fresh standard-normal noise (latent x B).
Eigen::MatrixXd sample_noise(Rng& rng, std::size_t latent_dim, std::size_t batch);

}  // namespace stsim
