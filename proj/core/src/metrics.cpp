#include "mint/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <string>

#include "mint/types.hpp"

namespace mint {

namespace {

void check_binary(const std::vector<int>& v, const char* what) {
  for (int x : v) {
    if (x != 0 && x != 1) {
      throw ValidationError(std::string(what) + " entries must be 0 or 1");
    }
  }
}

}  // namespace

ConfusionCounts confusion(const std::vector<int>& predicted,
                          const std::vector<int>& truth) {
  if (predicted.size() != truth.size()) {
    throw ValidationError("confusion: prediction and truth lengths differ");
  }
  check_binary(predicted, "confusion: prediction");
  check_binary(truth, "confusion: truth");
  ConfusionCounts c;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (truth[i] == 1) {
      (predicted[i] == 1 ? c.tp : c.fn) += 1;
    } else {
      (predicted[i] == 1 ? c.fp : c.tn) += 1;
    }
  }
  return c;
}

double accuracy(const ConfusionCounts& c) {
  const int64_t n = c.total();
  if (n == 0) throw ValidationError("accuracy: empty confusion counts");
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
}

MetricValue precision(const ConfusionCounts& c) {
  const int64_t denom = c.tp + c.fp;
  if (denom == 0) return {0.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

MetricValue recall(const ConfusionCounts& c) {
  const int64_t denom = c.tp + c.fn;
  if (denom == 0) return {0.0, true};
  return {static_cast<double>(c.tp) / static_cast<double>(denom), false};
}

MetricValue f1(const ConfusionCounts& c) {
  const MetricValue p = precision(c);
  const MetricValue r = recall(c);
  if (p.undefined || r.undefined || p.value + r.value == 0.0) {
    return {0.0, true};
  }
  return {2.0 * p.value * r.value / (p.value + r.value), false};
}

double macro_f1(const ConfusionCounts& c) {
  // F1 of the negative class equals F1 on the label-swapped counts.
  const ConfusionCounts swapped{c.tn, c.fn, c.fp, c.tp};
  return 0.5 * (f1(c).value + f1(swapped).value);
}

MetricValue balanced_accuracy(const ConfusionCounts& c) {
  const int64_t pos = c.tp + c.fn;
  const int64_t neg = c.tn + c.fp;
  const double tpr = pos > 0 ? static_cast<double>(c.tp) / pos : 0.0;
  const double tnr = neg > 0 ? static_cast<double>(c.tn) / neg : 0.0;
  return {0.5 * (tpr + tnr), pos == 0 || neg == 0};
}

double auroc(const std::vector<double>& scores,
             const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("auroc: score and label lengths differ");
  }
  if (scores.empty()) throw ValidationError("auroc: empty input");
  check_binary(labels, "auroc: label");
  for (double s : scores) {
    if (!std::isfinite(s)) throw NumericalError("auroc: non-finite score");
  }

  int64_t n_pos = 0;
  for (int y : labels) n_pos += y;
  const int64_t n_neg = static_cast<int64_t>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw ValidationError("auroc: needs both classes present");
  }

  // Midrank assignment: ties share the average of the ranks they span.
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return scores[a] < scores[b];
  });

  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // 1-based ranks i+1 .. j share the midrank.
    const double midrank = 0.5 * (static_cast<double>(i + 1) +
                                  static_cast<double>(j));
    for (size_t t = i; t < j; ++t) {
      if (labels[order[t]] == 1) rank_sum_pos += midrank;
    }
    i = j;
  }

  const double u = rank_sum_pos -
                   static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

double run_score(const std::vector<double>& frame_probs, int k) {
  const int n = static_cast<int>(frame_probs.size());
  if (k < 1) throw ValidationError("run_score: k must be at least 1");
  if (k > n) {
    throw ValidationError("run_score: k exceeds the number of frames (" +
                          std::to_string(k) + " > " + std::to_string(n) + ")");
  }
  // Sliding-window minimum with a monotone deque, then max over windows.
  std::deque<int> dq;
  double best = -1.0;
  for (int i = 0; i < n; ++i) {
    while (!dq.empty() && frame_probs[dq.back()] >= frame_probs[i]) {
      dq.pop_back();
    }
    dq.push_back(i);
    if (dq.front() <= i - k) dq.pop_front();
    if (i >= k - 1) best = std::max(best, frame_probs[dq.front()]);
  }
  return best;
}

int sequence_decision(const std::vector<double>& frame_probs, double threshold,
                      int k) {
  return run_score(frame_probs, k) >= threshold ? 1 : 0;
}

std::vector<SweepPoint> pr_sweep(const std::vector<double>& scores,
                                 const std::vector<int>& labels) {
  if (scores.size() != labels.size()) {
    throw ValidationError("pr_sweep: score and label lengths differ");
  }
  if (scores.empty()) throw ValidationError("pr_sweep: empty input");
  check_binary(labels, "pr_sweep: label");

  std::vector<SweepPoint> out;
  out.reserve(101);
  for (int step = 0; step <= 100; ++step) {
    const double tau = static_cast<double>(step) / 100.0;
    ConfusionCounts c;
    for (size_t i = 0; i < scores.size(); ++i) {
      const int pred = scores[i] >= tau ? 1 : 0;
      if (labels[i] == 1) {
        (pred ? c.tp : c.fn) += 1;
      } else {
        (pred ? c.fp : c.tn) += 1;
      }
    }
    const MetricValue p = precision(c);
    const MetricValue r = recall(c);
    out.push_back({tau, p.value, p.undefined, r.value, r.undefined});
  }
  return out;
}

double percentile(std::vector<double> sample, double q) {
  if (sample.empty()) throw ValidationError("percentile: empty sample");
  if (q < 0.0 || q > 1.0) throw ValidationError("percentile: q outside [0, 1]");
  std::sort(sample.begin(), sample.end());
  // Nearest-rank: smallest index i with (i + 1) / n >= q.
  const size_t n = sample.size();
  size_t rank = static_cast<size_t>(std::ceil(q * static_cast<double>(n)));
  if (rank == 0) rank = 1;
  if (rank > n) rank = n;
  return sample[rank - 1];
}

}  // namespace mint
