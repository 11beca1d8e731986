// ============================================================
// MINT-RVAE: recurrent variational autoencoder over 59-dim
// pose+emotion+label frames.
//
// Encoder: shared per-frame MLP 256 -> 128 -> 64 (Linear, BatchNorm,
// ReLU, Dropout per stage) -> GRU(64) -> parallel linear heads for
// mu and logvar (latent dim 32, sigma = exp(0.5 * logvar)).
// Decoder: GRU(64) whose initial hidden state is a linear map of the
// latent code; each step consumes [previous frame; latent] (91 dims)
// and emits pose (linear, 51), emotion (softmax, 7), label (sigmoid).
// Training is next-step prediction over 15-frame windows with
// scheduled sampling, a confidence-weighted smooth-L1 pose loss, a
// KL emotion loss, a BCE label loss, and a free-bits KL regularizer
// under a linear warm-up weight.
// ============================================================
#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "mint/checkpoint.hpp"
#include "mint/classifier.hpp"
#include "mint/features.hpp"
#include "mint/types.hpp"

namespace mint {

struct RvaeConfig {
  int input_dim = kFrameDim;  // 59
  int encoder_mlp0 = 256;
  int encoder_mlp1 = 128;
  int encoder_mlp2 = 64;      // also the encoder GRU width
  int latent_dim = 32;
  int decoder_hidden = 64;
  int window = 15;
  int window_stride = 1;

  // Loss weights and shaping constants.
  double lambda_pose = 20.0;
  double lambda_emotion = 10.0;
  double lambda_intent = 1.0;
  double eta_max = 0.8;        // KL weight cap
  int warmup_epochs = 5000;    // KL warm-up horizon (epoch units)
  double free_bits = 0.1;      // per-dimension KL floor
  double huber_delta = 1.0;
  double confidence_offset = 0.1;  // epsilon_0 added to target confidences
  double xi_coord = 0.8;       // pose coordinate sub-weight
  double xi_conf = 0.2;        // pose confidence sub-weight
  double dropout = 0.1;

  int epochs = 700;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-5;

  void validate() const;  // weights >= 0, xi_coord + xi_conf == 1, dims > 0
};

// ------------------------------------------------------------
// Loss formulas, scalar reference form (double precision).
// The tensor training path must agree with these to float tolerance;
// they also serve the CLI's loss reporting.
// ------------------------------------------------------------

// Smooth-L1 on the residual norm: r^2/(2*delta) for r <= delta,
// else r - delta/2.
double huber_value(double r, double delta);

// Confidence-weighted smooth-L1 pose loss over `steps` aligned frame
// pairs; `pred` and `target` are steps x 51 row-major. Per joint the
// residual is the (du, dv) 2-vector; its weight is the target
// confidence + confidence_offset. Coordinate term and confidence MSE
// combine with weights xi_coord / xi_conf.
double pose_loss_value(const std::vector<double>& pred,
                       const std::vector<double>& target, int steps,
                       const RvaeConfig& config);

// KL(target || pred) summed over the 7 classes, mean over steps;
// predictions clamped at 1e-7.
double emotion_loss_value(const std::vector<double>& pred,
                          const std::vector<double>& target, int steps);

// Mean binary cross-entropy of label probabilities vs 0/1 targets.
double intent_loss_value(const std::vector<double>& pred,
                         const std::vector<double>& target, int steps);

// Free-bits KL: sum_d max(KL_d, free_bits) with
// KL_d = (mu_d^2 + sigma_d^2 - log sigma_d^2 - 1) / 2.
double kl_regularizer_value(const std::vector<double>& mu,
                            const std::vector<double>& sigma,
                            double free_bits);

// Linear warm-up: eta_max * min(epoch / warmup_epochs, 1).
double kl_weight(int epoch, const RvaeConfig& config);

// Teacher-forcing ratio: 1 - epoch / (total_epochs - 1), clamped to [0, 1];
// 1 when total_epochs == 1.
double teacher_forcing_ratio(int epoch, int total_epochs);

// lambda_p * pose + lambda_e * emotion + lambda_y * intent
// + kl_weight(epoch) * kl.
double total_loss_value(double pose, double emotion, double intent, double kl,
                        int epoch, const RvaeConfig& config);

// ------------------------------------------------------------
// The model.
// ------------------------------------------------------------

class MintRvae {
 public:
  MintRvae();

  static MintRvae create(const RvaeConfig& config, uint64_t seed);

  const RvaeConfig& config() const;
  const StandardizationStats& stats() const;
  void set_stats(const StandardizationStats& stats);

  // Posterior parameters for one labeled window (row-major
  // window x 59 standardized floats). Deterministic; evaluation mode.
  std::pair<std::vector<double>, std::vector<double>> encode_window(
      const std::vector<float>& frames, int steps) const;

  // Fully autoregressive prior sampling: `count` sequences of `length`
  // frames from latent draws h ~ N(0, I), starting from a zero frame.
  // Outputs live in standardized feature space; emotions are softmax
  // simplex vectors, labels are thresholded at 0.5, confidence channels
  // are clamped to [0, 1]. environment_id = synthetic.
  std::vector<SequenceRecord> sample(int count, int length,
                                     uint64_t seed) const;

  ModelCheckpoint to_checkpoint() const;
  static MintRvae from_checkpoint(const ModelCheckpoint& ckpt);

  struct Impl;
  Impl& impl() { return *impl_; }
  const Impl& impl() const { return *impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

// ------------------------------------------------------------
// Training.
// ------------------------------------------------------------

struct RvaeEpochRow {
  int epoch = 0;
  double pose = 0.0;
  double emotion = 0.0;
  double intent = 0.0;
  double kl = 0.0;
  double eta = 0.0;       // KL weight at this epoch
  double tf_ratio = 0.0;  // teacher-forcing ratio at this epoch
  double total = 0.0;     // weighted combination
};

struct RvaeTrainResult {
  MintRvae model;
  std::vector<RvaeEpochRow> log;
};

// Windows the training sequences (labeled frames required), fits
// standardization stats on them, and trains. NaN in any loss component
// aborts with a NumericalError naming the component.
RvaeTrainResult train_rvae(const std::vector<SequenceRecord>& train,
                           const RvaeConfig& config, uint64_t seed);

// Same training loop on pre-built windows with externally fit stats
// (the per-fold augmentation path).
RvaeTrainResult train_rvae_windows(const std::vector<Window>& train_windows,
                                   const StandardizationStats& stats,
                                   const RvaeConfig& config, uint64_t seed);

// Loss log CSV: epoch, J_pose, J_emotion, J_intent, J_KL, eta, tf_ratio,
// total.
void write_rvae_log_csv(const std::string& path,
                        const std::vector<RvaeEpochRow>& log);

// ------------------------------------------------------------
// Minority-class rebalancing.
// ------------------------------------------------------------

// Appends model-sampled sequences whose window label is positive until
// the positive-window fraction reaches `target_ratio` (in (0, 1]).
// Synthetic negatives are discarded. Fails with "generator cannot
// rebalance" when fewer than 1% of sampled windows are positive within
// a 10x oversampling budget.
std::vector<SequenceRecord> rebalance(const std::vector<SequenceRecord>& dataset,
                                      const MintRvae& model,
                                      double target_ratio, uint64_t seed,
                                      int min_positive = 7);

// Window-level counterpart used inside classifier training: trains an
// RVAE on the given training windows and returns synthetic positive
// windows lifting the positive fraction to `target_ratio`.
WindowAugmenter make_rebalance_augmenter(const RvaeConfig& config,
                                         double target_ratio,
                                         int min_positive = 7);

}  // namespace mint
