// ============================================================
// Evaluation protocols: participant-grouped cross-subject folds,
// cross-scene holdout, leakage assertions, the protocol runner with
// mean +/- SD aggregation, onset-aligned probability trajectories,
// threshold sweeps, deployment-trial scoring, and the real-vs-
// synthetic discriminative realism score.
// ============================================================
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mint/classifier.hpp"
#include "mint/metrics.hpp"
#include "mint/rvae.hpp"
#include "mint/types.hpp"

namespace mint {

// ------------------------------------------------------------
// Splits.
// ------------------------------------------------------------

enum class ProtocolKind { cross_subject, cross_scene };

std::string to_string(ProtocolKind k);
ProtocolKind protocol_kind_from_string(const std::string& name);

struct FoldSpec {
  std::vector<size_t> train_idx;  // indices into the dataset
  std::vector<size_t> test_idx;
};

struct ProtocolSplit {
  ProtocolKind kind = ProtocolKind::cross_subject;
  std::vector<FoldSpec> folds;
};

// Groups sequences by participant, then assigns participants to folds
// greedily: participants in decreasing frame count (seeded shuffle breaks
// ties), each placed where the spread of positive and negative frame
// counts across folds grows least, smaller fold first on ties. This
// balances fold sizes and label mix together. Every participant tests
// exactly once; synthetic records are rejected.
ProtocolSplit cross_subject_split(const std::vector<SequenceRecord>& dataset,
                                  int n_folds, uint64_t seed);

// Environments 1-2 train, environment 3 tests; `n_repeats` folds with
// identical membership (variation across repeats comes from training
// seeds). Synthetic records are rejected.
ProtocolSplit cross_scene_split(const std::vector<SequenceRecord>& dataset,
                                int n_repeats);

// Aborts (ValidationError) on participant overlap (cross-subject),
// environment overlap or non-env3 test data (cross-scene), synthetic
// records in any test fold, or out-of-range indices.
void assert_no_leakage(const std::vector<SequenceRecord>& dataset,
                       const ProtocolSplit& split);

// ------------------------------------------------------------
// Evaluation of a trained classifier on held-out sequences.
// Frame metrics pool every frame probability; sequence metrics apply
// the k-run rule to each 15-frame window (ground truth: at least
// `min_positive` positive frames).
// ------------------------------------------------------------

struct EvalMetrics {
  double frame_macro_f1 = 0.0;
  double frame_balanced_accuracy = 0.0;
  double frame_auroc = 0.0;
  double seq_macro_f1 = 0.0;
  double seq_balanced_accuracy = 0.0;
  double seq_auroc = 0.0;
};

EvalMetrics evaluate_classifier(const IntentClassifier& model,
                                const std::vector<SequenceRecord>& test,
                                double decision_threshold = 0.5, int k_run = 7,
                                int min_positive = 7);

// Per-frame probabilities for one sequence: frame t carries the last
// position of the window ending at t; the first window-1 frames have
// no probability. Each window is forwarded alone, so the values match
// the streaming engine bit for bit.
std::vector<std::optional<double>> sequence_frame_probs(
    const IntentClassifier& model, const SequenceRecord& seq);

// ------------------------------------------------------------
// Protocol runner.
// ------------------------------------------------------------

struct VariantSpec {
  std::string name;
  ClassifierConfig config;
  bool augment = false;          // per-fold MINT-RVAE rebalancing
  RvaeConfig rvae;               // used when augment is set
  double augment_target = 0.5;   // positive-window fraction target
};

struct VariantResult {
  std::string name;
  std::vector<EvalMetrics> per_fold;
  EvalMetrics mean;
  EvalMetrics sd;  // sample SD over folds (0 for a single fold)
};

// Trains and evaluates every variant on every fold. Leakage assertions
// run first; the RVAE for augmented variants is fit per fold on that
// fold's training windows only. Fold f of variant v trains with seed
// fork(seed, v * folds + f).
std::vector<VariantResult> run_protocol(
    const std::vector<SequenceRecord>& dataset, const ProtocolSplit& split,
    const std::vector<VariantSpec>& variants, uint64_t seed,
    double decision_threshold = 0.5, int k_run = 7);

// CSV: variant, n_folds, then mean and sd columns for all six metrics.
void write_results_csv(const std::string& path,
                       const std::vector<VariantResult>& results);

// ------------------------------------------------------------
// Onset-aligned trajectories (median and quartiles of per-frame
// probabilities, time re-indexed so ground-truth onset is 0).
// ------------------------------------------------------------

struct TrajectoryPoint {
  int t_rel = 0;       // frames relative to onset
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
  int count = 0;       // sequences contributing at this index
};

struct TrajectoryResult {
  std::vector<TrajectoryPoint> points;
  int skipped = 0;  // sequences without an onset
};

TrajectoryResult onset_aligned_trajectories(
    const IntentClassifier& model, const std::vector<SequenceRecord>& seqs,
    int horizon = 30);

// CSV: t_rel, median, q25, q75, count.
void write_trajectories_csv(const std::string& path,
                            const TrajectoryResult& result);

// Sweep CSV: threshold, precision, precision_defined, recall,
// recall_defined.
void write_sweep_csv(const std::string& path,
                     const std::vector<SweepPoint>& sweep);

// ------------------------------------------------------------
// Deployment-trial scoring.
// ------------------------------------------------------------

struct DeploymentTrial {
  int verdict = 0;  // system decision, 0/1
  int truth = 0;    // ground-truth intent, 0/1
};

struct DeploymentReport {
  ConfusionCounts counts;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

DeploymentReport score_deployment_trials(
    const std::vector<DeploymentTrial>& trials);
DeploymentReport score_deployment_counts(const ConfusionCounts& counts);

// ------------------------------------------------------------
// Realism (discriminative) score.
// ------------------------------------------------------------

struct RealismScore {
  double accuracy = 0.0;  // held-out real-vs-synthetic accuracy
  double d_score = 0.0;   // |0.5 - accuracy|, in [0, 0.5]
};

// Trains a single-layer GRU discriminator (H=32, sigmoid head, 30
// epochs, Adam lr 1e-3) on an 80-20 stratified split of the two pools.
// Pools differing in size by more than 10% are subsampled to balance;
// each pool must hold at least 20 windows. Real windows are
// standardized with `stats`; synthetic windows are consumed as-is.
RealismScore discriminative_score(const std::vector<Window>& real_windows,
                                  const std::vector<Window>& synth_windows,
                                  const StandardizationStats& stats,
                                  uint64_t seed, int epochs = 30,
                                  int hidden = 32);

}  // namespace mint
