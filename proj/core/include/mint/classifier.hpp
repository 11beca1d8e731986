// ============================================================
// Supervised temporal intent classifiers over 15-frame windows:
// GRU, LSTM, and a lightweight pre-norm Transformer, each with a
// per-frame linear head.  Training minimizes the mean per-frame
// cross-entropy; inference emits per-frame intent probabilities
// plus their window mean.
// ============================================================
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mint/checkpoint.hpp"
#include "mint/features.hpp"
#include "mint/types.hpp"

namespace mint {

enum class Backbone { gru, lstm, transformer };

std::string to_string(Backbone b);
Backbone backbone_from_string(const std::string& name);

struct ClassifierConfig {
  Backbone backbone = Backbone::gru;
  FeatureSet features = FeatureSet::fused;
  int hidden = 0;          // 0 selects the per-feature-set default below
  int window = 15;
  int heads = 4;           // transformer only
  int ff_multiplier = 2;   // transformer feed-forward width = multiplier * hidden
  int epochs = 100;
  int batch_size = 64;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  bool class_weighting = false;   // inverse-frequency frame weights
  bool early_stopping = false;    // on validation frame AUROC
  int patience = 20;

  // Defaults: pose_only 256, emotion_only 16, fused 96 for gru/lstm and
  // 256 for the transformer.
  int resolved_hidden() const;
  void validate() const;
};

struct IntentOutput {
  std::vector<double> frame_probs;  // one per window position, in (0, 1)
  double window_prob = 0.0;         // mean of frame_probs
};

class IntentClassifier {
 public:
  IntentClassifier();

  // Fresh model with randomly initialized parameters.
  static IntentClassifier create(const ClassifierConfig& config, uint64_t seed);

  const ClassifierConfig& config() const;
  const StandardizationStats& stats() const;
  void set_stats(const StandardizationStats& stats);

  // Inference on one standardized window feature matrix (row-major,
  // window x feature_dim floats, as produced by window_feature_matrix).
  IntentOutput forward_window(const std::vector<float>& features) const;

  // Batched inference: `features` holds `count` windows back to back;
  // returns count*window frame probabilities in the same order.
  std::vector<double> forward_frame_probs(const std::vector<float>& features,
                                          int count) const;

  // One recurrent step for streaming with carried state (gru/lstm only;
  // transformer models throw). Advances `hidden` (and `cell` for lstm)
  // in place; empty vectors start from the zero state. The returned
  // probability conditions on every frame fed so far, not on a sliding
  // window.
  double step_prob(const std::vector<float>& frame_features,
                   std::vector<float>& hidden, std::vector<float>& cell) const;

  ModelCheckpoint to_checkpoint() const;
  static IntentClassifier from_checkpoint(const ModelCheckpoint& ckpt);

  // Deep copy of all parameters (checkpoint snapshots during training).
  IntentClassifier clone() const;

  struct Impl;
  Impl& impl() { return *impl_; }
  const Impl& impl() const { return *impl_; }

 private:
  std::shared_ptr<Impl> impl_;
};

// ------------------------------------------------------------
// Training.
// ------------------------------------------------------------

struct TrainHistoryRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_frame_auroc = 0.0;  // NaN when no validation set / single class
  double val_seq_auroc = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  IntentClassifier model;
  std::vector<TrainHistoryRow> history;
  int best_epoch = 0;                  // epoch whose parameters were kept
  double train_positive_fraction = 0;  // window-level, after augmentation
};

// Hook for minority-class augmentation: receives the real training
// windows and the standardization stats fit on them, returns extra
// synthetic windows (marked synthetic, already in standardized space).
// Validation data never passes through the augmenter.
using WindowAugmenter = std::function<std::vector<Window>(
    const std::vector<Window>& train_windows, const StandardizationStats& stats,
    uint64_t seed)>;

// Trains on windows of the training sequences (stride 1).  Standardization
// stats are fit on the training sequences only and stored in the model.
// `val` may be empty: validation columns are then NaN and the final epoch's
// parameters are kept.  A single-class training set is an error.
TrainResult train_classifier(const std::vector<SequenceRecord>& train,
                             const std::vector<SequenceRecord>& val,
                             const ClassifierConfig& config, uint64_t seed,
                             const WindowAugmenter* augmenter = nullptr);

// History CSV: epoch, train_loss, val_frame_auroc, val_seq_auroc, lr,
// tf_ratio (always n/a for classifiers; the column keeps log formats
// aligned with the generative trainer).
void write_history_csv(const std::string& path,
                       const std::vector<TrainHistoryRow>& history);

}  // namespace mint
