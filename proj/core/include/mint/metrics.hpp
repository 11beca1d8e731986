// ============================================================
// Evaluation primitives: confusion counts, threshold metrics,
// rank-based AUROC, the k-consecutive-frame decision rule, and
// precision/recall threshold sweeps.
// ============================================================
#pragma once

#include <cstdint>
#include <vector>

namespace mint {

// ------------------------------------------------------------
// Confusion counts over binary predictions.
// ------------------------------------------------------------

struct ConfusionCounts {
  int64_t tp = 0;
  int64_t fp = 0;
  int64_t fn = 0;
  int64_t tn = 0;

  int64_t total() const { return tp + fp + fn + tn; }
};

// Predictions and ground truth must be the same length, entries in {0, 1}.
ConfusionCounts confusion(const std::vector<int>& predicted,
                          const std::vector<int>& truth);

// A metric value together with a flag for zero-division cases.  When the
// denominator is zero the value is reported as 0.0 and `undefined` is set,
// so downstream aggregation never silently divides by zero.
struct MetricValue {
  double value = 0.0;
  bool undefined = false;
};

double accuracy(const ConfusionCounts& c);
MetricValue precision(const ConfusionCounts& c);
MetricValue recall(const ConfusionCounts& c);
MetricValue f1(const ConfusionCounts& c);

// Macro F1 over the two classes: mean of F1 for the positive class and F1
// for the negative class (computed on the label-swapped counts).  Undefined
// per-class F1 contributes 0.
double macro_f1(const ConfusionCounts& c);

// Mean of the true positive rate and the true negative rate.  A missing
// class makes the corresponding rate 0 and sets `undefined`.
MetricValue balanced_accuracy(const ConfusionCounts& c);

// ------------------------------------------------------------
// AUROC, rank based (Mann-Whitney U with midrank tie handling).
// Throws ValidationError when only one class is present.
// ------------------------------------------------------------
double auroc(const std::vector<double>& scores, const std::vector<int>& labels);

// ------------------------------------------------------------
// Sequence-level decision rule: positive when at least `k` consecutive
// frame probabilities reach `threshold`.  `run_score` is the thresholdless
// counterpart: the maximum over all length-k sub-runs of the minimum
// probability inside the run, so that (run_score(p, k) >= tau) is exactly
// the k-run decision at threshold tau.  Requires 1 <= k <= probs.size().
// ------------------------------------------------------------
int sequence_decision(const std::vector<double>& frame_probs, double threshold,
                      int k);
double run_score(const std::vector<double>& frame_probs, int k);

// ------------------------------------------------------------
// Precision/recall sweep over thresholds 0.00, 0.01, ..., 1.00.
// At each threshold a score s counts as positive when s >= tau.
// ------------------------------------------------------------
struct SweepPoint {
  double threshold = 0.0;
  double precision = 0.0;
  bool precision_undefined = false;
  double recall = 0.0;
  bool recall_undefined = false;
};

std::vector<SweepPoint> pr_sweep(const std::vector<double>& scores,
                                 const std::vector<int>& labels);

// Nearest-rank percentile of a sample (q in [0, 1]); used for latency
// reporting.  Throws ValidationError on an empty sample.
double percentile(std::vector<double> sample, double q);

}  // namespace mint
