#include "mint/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include "mint/dataset.hpp"
#include "mint/neuro/adam.hpp"
#include "mint/neuro/layers.hpp"
#include "mint/neuro/losses.hpp"
#include "mint/rng.hpp"
#include "text_util.hpp"

namespace mint {

using TensorF = neuro::TensorT<float>;

std::string to_string(ProtocolKind k) {
  switch (k) {
    case ProtocolKind::cross_subject: return "cross_subject";
    case ProtocolKind::cross_scene: return "cross_scene";
  }
  throw ValidationError("unknown protocol kind");
}

ProtocolKind protocol_kind_from_string(const std::string& name) {
  if (name == "cross_subject") return ProtocolKind::cross_subject;
  if (name == "cross_scene") return ProtocolKind::cross_scene;
  throw ValidationError("unknown protocol '" + name +
                        "' (expected cross_subject or cross_scene)");
}

// ------------------------------------------------------------
// Splits.
// ------------------------------------------------------------

namespace {

struct ParticipantGroup {
  std::string id;
  std::vector<size_t> idx;
  int64_t frames = 0;
  int64_t positive = 0;
};

int64_t count_positive(const SequenceRecord& rec) {
  int64_t pos = 0;
  for (const MultimodalFrame& f : rec.frames) pos += f.label.value_or(0);
  return pos;
}

}  // namespace

ProtocolSplit cross_subject_split(const std::vector<SequenceRecord>& dataset,
                                  int n_folds, uint64_t seed) {
  if (dataset.empty()) throw ValidationError("cross_subject_split: empty dataset");
  if (n_folds < 2) {
    throw ValidationError("cross_subject_split: need at least 2 folds");
  }

  std::map<std::string, ParticipantGroup> by_participant;
  int64_t total_frames = 0;
  int64_t total_positive = 0;
  for (size_t i = 0; i < dataset.size(); ++i) {
    const SequenceRecord& rec = dataset[i];
    if (rec.environment == EnvironmentId::synthetic) {
      throw ValidationError(
          "cross_subject_split: synthetic records cannot enter a protocol "
          "split; augment inside the protocol runner instead");
    }
    ParticipantGroup& g = by_participant[rec.participant_id];
    g.id = rec.participant_id;
    g.idx.push_back(i);
    g.frames += static_cast<int64_t>(rec.frames.size());
    g.positive += count_positive(rec);
    total_frames += static_cast<int64_t>(rec.frames.size());
    total_positive += count_positive(rec);
  }
  if (static_cast<int>(by_participant.size()) < n_folds) {
    throw ValidationError("cross_subject_split: " +
                          std::to_string(by_participant.size()) +
                          " participants cannot fill " +
                          std::to_string(n_folds) + " folds");
  }
  if (total_frames == 0) {
    throw ValidationError("cross_subject_split: dataset has no frames");
  }

  // Seeded shuffle breaks frame-count ties, then largest first.
  std::vector<const ParticipantGroup*> order;
  order.reserve(by_participant.size());
  for (const auto& [id, g] : by_participant) order.push_back(&g);
  Rng rng(seed);
  rng.shuffle(order);
  std::stable_sort(order.begin(), order.end(),
                   [](const ParticipantGroup* a, const ParticipantGroup* b) {
                     return a->frames > b->frames;
                   });

  struct FoldState {
    int64_t frames = 0;
    int64_t positive = 0;
    std::vector<size_t> test_idx;
  };
  std::vector<FoldState> folds(static_cast<size_t>(n_folds));

  auto place = [&](const ParticipantGroup& g, size_t f) {
    folds[f].frames += g.frames;
    folds[f].positive += g.positive;
    folds[f].test_idx.insert(folds[f].test_idx.end(), g.idx.begin(),
                             g.idx.end());
  };

  // Each participant goes where the spread of positive and negative
  // frame counts across folds grows least, so fold sizes and label mix
  // stay balanced together; ties go to the currently smallest fold.
  auto spread_with = [&](size_t candidate, const ParticipantGroup& g) {
    double mean_pos = 0, mean_neg = 0;
    std::vector<double> pos(folds.size()), neg(folds.size());
    for (size_t f = 0; f < folds.size(); ++f) {
      int64_t fp = folds[f].positive;
      int64_t fn = folds[f].frames - folds[f].positive;
      if (f == candidate) {
        fp += g.positive;
        fn += g.frames - g.positive;
      }
      pos[f] = static_cast<double>(fp);
      neg[f] = static_cast<double>(fn);
      mean_pos += pos[f];
      mean_neg += neg[f];
    }
    mean_pos /= static_cast<double>(folds.size());
    mean_neg /= static_cast<double>(folds.size());
    double ss = 0;
    for (size_t f = 0; f < folds.size(); ++f) {
      ss += (pos[f] - mean_pos) * (pos[f] - mean_pos) +
            (neg[f] - mean_neg) * (neg[f] - mean_neg);
    }
    return ss;
  };
  for (const ParticipantGroup* g : order) {
    size_t best = 0;
    double best_spread = std::numeric_limits<double>::infinity();
    int64_t best_frames = 0;
    for (size_t f = 0; f < folds.size(); ++f) {
      const double s = spread_with(f, *g);
      if (s < best_spread ||
          (s == best_spread && folds[f].frames < best_frames)) {
        best = f;
        best_spread = s;
        best_frames = folds[f].frames;
      }
    }
    place(*g, best);
  }

  ProtocolSplit split;
  split.kind = ProtocolKind::cross_subject;
  split.folds.resize(static_cast<size_t>(n_folds));
  for (size_t f = 0; f < folds.size(); ++f) {
    std::sort(folds[f].test_idx.begin(), folds[f].test_idx.end());
    split.folds[f].test_idx = folds[f].test_idx;
    std::set<size_t> test_set(folds[f].test_idx.begin(),
                              folds[f].test_idx.end());
    for (size_t i = 0; i < dataset.size(); ++i) {
      if (!test_set.count(i)) split.folds[f].train_idx.push_back(i);
    }
  }
  return split;
}

ProtocolSplit cross_scene_split(const std::vector<SequenceRecord>& dataset,
                                int n_repeats) {
  if (dataset.empty()) throw ValidationError("cross_scene_split: empty dataset");
  if (n_repeats < 1) {
    throw ValidationError("cross_scene_split: need at least 1 repeat");
  }
  FoldSpec fold;
  for (size_t i = 0; i < dataset.size(); ++i) {
    switch (dataset[i].environment) {
      case EnvironmentId::env1:
      case EnvironmentId::env2:
        fold.train_idx.push_back(i);
        break;
      case EnvironmentId::env3:
        fold.test_idx.push_back(i);
        break;
      case EnvironmentId::synthetic:
        throw ValidationError(
            "cross_scene_split: synthetic records cannot enter a protocol "
            "split; augment inside the protocol runner instead");
    }
  }
  if (fold.train_idx.empty()) {
    throw ValidationError(
        "cross_scene_split: no environment 1/2 sequences to train on");
  }
  if (fold.test_idx.empty()) {
    throw ValidationError(
        "cross_scene_split: no environment 3 sequences to test on");
  }
  ProtocolSplit split;
  split.kind = ProtocolKind::cross_scene;
  split.folds.assign(static_cast<size_t>(n_repeats), fold);
  return split;
}

void assert_no_leakage(const std::vector<SequenceRecord>& dataset,
                       const ProtocolSplit& split) {
  if (split.folds.empty()) throw ValidationError("protocol split has no folds");
  for (size_t f = 0; f < split.folds.size(); ++f) {
    const FoldSpec& fold = split.folds[f];
    const std::string tag = "fold " + std::to_string(f);
    if (fold.train_idx.empty() || fold.test_idx.empty()) {
      throw ValidationError("leakage check: " + tag +
                            " has an empty train or test side");
    }
    std::set<size_t> train_set;
    for (size_t i : fold.train_idx) {
      if (i >= dataset.size()) {
        throw ValidationError("leakage check: " + tag +
                              " holds an out-of-range train index");
      }
      train_set.insert(i);
    }
    std::set<std::string> train_participants;
    std::set<EnvironmentId> train_envs;
    for (size_t i : fold.train_idx) {
      train_participants.insert(dataset[i].participant_id);
      train_envs.insert(dataset[i].environment);
    }
    for (size_t i : fold.test_idx) {
      if (i >= dataset.size()) {
        throw ValidationError("leakage check: " + tag +
                              " holds an out-of-range test index");
      }
      if (train_set.count(i)) {
        throw ValidationError("leakage check: sequence '" +
                              dataset[i].sequence_id + "' appears on both " +
                              "sides of " + tag);
      }
      if (dataset[i].environment == EnvironmentId::synthetic) {
        throw ValidationError("leakage check: synthetic sequence '" +
                              dataset[i].sequence_id + "' in the test side of " +
                              tag);
      }
      if (split.kind == ProtocolKind::cross_subject &&
          train_participants.count(dataset[i].participant_id)) {
        throw ValidationError("leakage check: participant '" +
                              dataset[i].participant_id +
                              "' appears on both sides of " + tag);
      }
      if (split.kind == ProtocolKind::cross_scene &&
          dataset[i].environment != EnvironmentId::env3) {
        throw ValidationError(
            "leakage check: cross-scene test data must come from "
            "environment 3 (" +
            tag + ")");
      }
    }
    if (split.kind == ProtocolKind::cross_scene) {
      if (train_envs.count(EnvironmentId::env3)) {
        throw ValidationError(
            "leakage check: environment 3 leaked into the training side of " +
            tag);
      }
      if (train_envs.count(EnvironmentId::synthetic)) {
        throw ValidationError(
            "leakage check: synthetic records in the training side of " + tag);
      }
    }
  }
}

// ------------------------------------------------------------
// Evaluation.
// ------------------------------------------------------------

namespace {

// Frame probabilities for every stride-1 window of one sequence,
// window-major (count * W values). Empty when the sequence is shorter
// than the model window. `batched` forwards all windows in one call
// (faster); otherwise each window is forwarded alone, which reproduces
// the streaming engine's arithmetic bit for bit (GEMM reduction order
// depends on the batch row count, so batch size changes last-bit
// rounding).
std::vector<double> window_probs_for_sequence(const IntentClassifier& model,
                                              const SequenceRecord& seq,
                                              std::vector<Window>* wins_out,
                                              bool batched) {
  const ClassifierConfig& cfg = model.config();
  std::vector<Window> wins = windows(seq, cfg.window, 1);
  std::vector<double> probs;
  if (!wins.empty()) {
    const int dim = feature_dim(cfg.features);
    if (batched) {
      std::vector<float> buf;
      buf.reserve(wins.size() * static_cast<size_t>(cfg.window) *
                  static_cast<size_t>(dim));
      for (const Window& w : wins) {
        std::vector<float> m =
            window_feature_matrix(w, model.stats(), cfg.features);
        buf.insert(buf.end(), m.begin(), m.end());
      }
      probs = model.forward_frame_probs(buf, static_cast<int>(wins.size()));
    } else {
      probs.reserve(wins.size() * static_cast<size_t>(cfg.window));
      for (const Window& w : wins) {
        const std::vector<double> one = model.forward_frame_probs(
            window_feature_matrix(w, model.stats(), cfg.features), 1);
        probs.insert(probs.end(), one.begin(), one.end());
      }
    }
  }
  if (wins_out) *wins_out = std::move(wins);
  return probs;
}

}  // namespace

std::vector<std::optional<double>> sequence_frame_probs(
    const IntentClassifier& model, const SequenceRecord& seq) {
  const int W = model.config().window;
  std::vector<std::optional<double>> out(seq.frames.size());
  std::vector<Window> wins;
  std::vector<double> probs =
      window_probs_for_sequence(model, seq, &wins, /*batched=*/false);
  for (size_t i = 0; i < wins.size(); ++i) {
    // The window starting at `start` ends at frame start + W - 1; that
    // frame takes the probability of the window's last position.
    out[static_cast<size_t>(wins[i].start + W - 1)] =
        probs[i * static_cast<size_t>(W) + static_cast<size_t>(W) - 1];
  }
  return out;
}

EvalMetrics evaluate_classifier(const IntentClassifier& model,
                                const std::vector<SequenceRecord>& test,
                                double decision_threshold, int k_run,
                                int min_positive) {
  if (test.empty()) throw ValidationError("evaluate: empty test set");
  if (k_run < 1 || k_run > model.config().window) {
    throw ValidationError("evaluate: k_run must lie in [1, window]");
  }
  const int W = model.config().window;

  std::vector<double> frame_scores, win_scores;
  std::vector<int> frame_pred, frame_truth, win_pred, win_truth;

  for (const SequenceRecord& seq : test) {
    std::vector<Window> wins;
    std::vector<double> probs =
        window_probs_for_sequence(model, seq, &wins, /*batched=*/true);
    for (size_t i = 0; i < wins.size(); ++i) {
      const std::vector<double> span(
          probs.begin() + static_cast<int64_t>(i) * W,
          probs.begin() + static_cast<int64_t>(i + 1) * W);
      win_truth.push_back(window_label(wins[i], min_positive));
      win_pred.push_back(sequence_decision(span, decision_threshold, k_run));
      win_scores.push_back(run_score(span, k_run));

      const double p = span.back();
      frame_scores.push_back(p);
      frame_pred.push_back(p >= decision_threshold ? 1 : 0);
      frame_truth.push_back(wins[i].frames.back().label.value());
    }
  }
  if (frame_truth.empty()) {
    throw ValidationError(
        "evaluate: no windows (every test sequence is shorter than the model "
        "window)");
  }

  EvalMetrics m;
  const ConfusionCounts fc = confusion(frame_pred, frame_truth);
  m.frame_macro_f1 = macro_f1(fc);
  m.frame_balanced_accuracy = balanced_accuracy(fc).value;
  m.frame_auroc = auroc(frame_scores, frame_truth);
  const ConfusionCounts wc = confusion(win_pred, win_truth);
  m.seq_macro_f1 = macro_f1(wc);
  m.seq_balanced_accuracy = balanced_accuracy(wc).value;
  m.seq_auroc = auroc(win_scores, win_truth);
  return m;
}

// ------------------------------------------------------------
// Protocol runner.
// ------------------------------------------------------------

namespace {

uint64_t fold_seed(uint64_t seed, uint64_t label) {
  Rng base(seed);
  Rng forked = base.fork(label);
  return static_cast<uint64_t>(
      forked.uniform_int(0, std::numeric_limits<int64_t>::max() - 1));
}

std::vector<SequenceRecord> gather(const std::vector<SequenceRecord>& dataset,
                                   const std::vector<size_t>& idx) {
  std::vector<SequenceRecord> out;
  out.reserve(idx.size());
  for (size_t i : idx) out.push_back(dataset[i]);
  return out;
}

EvalMetrics metrics_mean(const std::vector<EvalMetrics>& rows) {
  EvalMetrics m;
  const double n = static_cast<double>(rows.size());
  for (const EvalMetrics& r : rows) {
    m.frame_macro_f1 += r.frame_macro_f1 / n;
    m.frame_balanced_accuracy += r.frame_balanced_accuracy / n;
    m.frame_auroc += r.frame_auroc / n;
    m.seq_macro_f1 += r.seq_macro_f1 / n;
    m.seq_balanced_accuracy += r.seq_balanced_accuracy / n;
    m.seq_auroc += r.seq_auroc / n;
  }
  return m;
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

EvalMetrics metrics_sd(const std::vector<EvalMetrics>& rows,
                       const EvalMetrics& mean) {
  auto col = [&](double EvalMetrics::* field) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const EvalMetrics& r : rows) v.push_back(r.*field);
    return sample_sd(v, mean.*field);
  };
  EvalMetrics m;
  m.frame_macro_f1 = col(&EvalMetrics::frame_macro_f1);
  m.frame_balanced_accuracy = col(&EvalMetrics::frame_balanced_accuracy);
  m.frame_auroc = col(&EvalMetrics::frame_auroc);
  m.seq_macro_f1 = col(&EvalMetrics::seq_macro_f1);
  m.seq_balanced_accuracy = col(&EvalMetrics::seq_balanced_accuracy);
  m.seq_auroc = col(&EvalMetrics::seq_auroc);
  return m;
}

}  // namespace

std::vector<VariantResult> run_protocol(
    const std::vector<SequenceRecord>& dataset, const ProtocolSplit& split,
    const std::vector<VariantSpec>& variants, uint64_t seed,
    double decision_threshold, int k_run) {
  if (variants.empty()) throw ValidationError("run_protocol: no variants");
  assert_no_leakage(dataset, split);

  const size_t n_folds = split.folds.size();
  std::vector<VariantResult> results;
  results.reserve(variants.size());
  for (size_t v = 0; v < variants.size(); ++v) {
    const VariantSpec& spec = variants[v];
    spec.config.validate();
    VariantResult result;
    result.name = spec.name;
    result.per_fold.reserve(n_folds);
    for (size_t f = 0; f < n_folds; ++f) {
      const std::vector<SequenceRecord> train =
          gather(dataset, split.folds[f].train_idx);
      const std::vector<SequenceRecord> test =
          gather(dataset, split.folds[f].test_idx);

      WindowAugmenter augmenter;
      const WindowAugmenter* augmenter_ptr = nullptr;
      if (spec.augment) {
        augmenter =
            make_rebalance_augmenter(spec.rvae, spec.augment_target);
        augmenter_ptr = &augmenter;
      }
      TrainResult trained =
          train_classifier(train, {}, spec.config,
                           fold_seed(seed, v * n_folds + f), augmenter_ptr);
      result.per_fold.push_back(evaluate_classifier(
          trained.model, test, decision_threshold, k_run));
    }
    result.mean = metrics_mean(result.per_fold);
    result.sd = metrics_sd(result.per_fold, result.mean);
    results.push_back(std::move(result));
  }
  return results;
}

void write_results_csv(const std::string& path,
                       const std::vector<VariantResult>& results) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "variant,n_folds"
         ",frame_macro_f1_mean,frame_macro_f1_sd"
         ",frame_balanced_accuracy_mean,frame_balanced_accuracy_sd"
         ",frame_auroc_mean,frame_auroc_sd"
         ",seq_macro_f1_mean,seq_macro_f1_sd"
         ",seq_balanced_accuracy_mean,seq_balanced_accuracy_sd"
         ",seq_auroc_mean,seq_auroc_sd\n";
  for (const VariantResult& r : results) {
    out << r.name << ',' << detail::format_int(static_cast<int64_t>(r.per_fold.size()))
        << ',' << detail::format_double(r.mean.frame_macro_f1)
        << ',' << detail::format_double(r.sd.frame_macro_f1)
        << ',' << detail::format_double(r.mean.frame_balanced_accuracy)
        << ',' << detail::format_double(r.sd.frame_balanced_accuracy)
        << ',' << detail::format_double(r.mean.frame_auroc)
        << ',' << detail::format_double(r.sd.frame_auroc)
        << ',' << detail::format_double(r.mean.seq_macro_f1)
        << ',' << detail::format_double(r.sd.seq_macro_f1)
        << ',' << detail::format_double(r.mean.seq_balanced_accuracy)
        << ',' << detail::format_double(r.sd.seq_balanced_accuracy)
        << ',' << detail::format_double(r.mean.seq_auroc)
        << ',' << detail::format_double(r.sd.seq_auroc) << '\n';
  }
  if (!out.good()) throw ValidationError("failed writing '" + path + "'");
}

// ------------------------------------------------------------
// Onset-aligned trajectories.
// ------------------------------------------------------------

TrajectoryResult onset_aligned_trajectories(
    const IntentClassifier& model, const std::vector<SequenceRecord>& seqs,
    int horizon) {
  if (horizon < 0) throw ValidationError("trajectories: horizon must be >= 0");
  std::map<int, std::vector<double>> buckets;
  TrajectoryResult result;
  for (const SequenceRecord& seq : seqs) {
    int onset = -1;
    for (size_t t = 0; t < seq.frames.size(); ++t) {
      if (!seq.frames[t].label.has_value()) {
        throw ValidationError("trajectories: sequence '" + seq.sequence_id +
                              "' contains unlabeled frames");
      }
      if (*seq.frames[t].label == 1) {
        onset = static_cast<int>(t);
        break;
      }
    }
    if (onset < 0) {
      ++result.skipped;
      continue;
    }
    const std::vector<std::optional<double>> probs =
        sequence_frame_probs(model, seq);
    for (int t_rel = -horizon; t_rel <= horizon; ++t_rel) {
      const int t = onset + t_rel;
      if (t < 0 || t >= static_cast<int>(probs.size())) continue;
      if (!probs[static_cast<size_t>(t)].has_value()) continue;
      buckets[t_rel].push_back(*probs[static_cast<size_t>(t)]);
    }
  }
  for (const auto& [t_rel, values] : buckets) {
    TrajectoryPoint p;
    p.t_rel = t_rel;
    p.median = percentile(values, 0.5);
    p.q25 = percentile(values, 0.25);
    p.q75 = percentile(values, 0.75);
    p.count = static_cast<int>(values.size());
    result.points.push_back(p);
  }
  return result;
}

void write_trajectories_csv(const std::string& path,
                            const TrajectoryResult& result) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "t_rel,median,q25,q75,count\n";
  for (const TrajectoryPoint& p : result.points) {
    out << detail::format_int(p.t_rel) << ','
        << detail::format_double(p.median) << ','
        << detail::format_double(p.q25) << ','
        << detail::format_double(p.q75) << ','
        << detail::format_int(p.count) << '\n';
  }
  if (!out.good()) throw ValidationError("failed writing '" + path + "'");
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepPoint>& sweep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "threshold,precision,precision_defined,recall,recall_defined\n";
  for (const SweepPoint& p : sweep) {
    out << detail::format_double(p.threshold) << ','
        << detail::format_double(p.precision) << ','
        << (p.precision_undefined ? '0' : '1') << ','
        << detail::format_double(p.recall) << ','
        << (p.recall_undefined ? '0' : '1') << '\n';
  }
  if (!out.good()) throw ValidationError("failed writing '" + path + "'");
}

// ------------------------------------------------------------
// Deployment-trial scoring.
// ------------------------------------------------------------

DeploymentReport score_deployment_trials(
    const std::vector<DeploymentTrial>& trials) {
  if (trials.empty()) throw ValidationError("deployment: no trials");
  ConfusionCounts c;
  for (const DeploymentTrial& t : trials) {
    if ((t.verdict != 0 && t.verdict != 1) || (t.truth != 0 && t.truth != 1)) {
      throw ValidationError("deployment: verdicts and truths must be 0 or 1");
    }
    if (t.verdict == 1 && t.truth == 1) ++c.tp;
    else if (t.verdict == 1 && t.truth == 0) ++c.fp;
    else if (t.verdict == 0 && t.truth == 1) ++c.fn;
    else ++c.tn;
  }
  return score_deployment_counts(c);
}

DeploymentReport score_deployment_counts(const ConfusionCounts& counts) {
  if (counts.total() == 0) throw ValidationError("deployment: empty counts");
  DeploymentReport r;
  r.counts = counts;
  r.accuracy = accuracy(counts);
  r.precision = precision(counts).value;
  r.recall = recall(counts).value;
  r.f1 = f1(counts).value;
  return r;
}

// ------------------------------------------------------------
// Realism (discriminative) score.
// ------------------------------------------------------------

namespace {

struct DiscriminatorBatchView {
  std::vector<float> features;  // count * W rows of `dim` floats
  std::vector<float> targets;   // count values
};

}  // namespace

RealismScore discriminative_score(const std::vector<Window>& real_windows,
                                  const std::vector<Window>& synth_windows,
                                  const StandardizationStats& stats,
                                  uint64_t seed, int epochs, int hidden) {
  if (real_windows.size() < 20 || synth_windows.size() < 20) {
    throw ValidationError(
        "realism: each pool needs at least 20 windows (got " +
        std::to_string(real_windows.size()) + " real, " +
        std::to_string(synth_windows.size()) + " synthetic)");
  }
  if (epochs < 1) throw ValidationError("realism: epochs must be >= 1");
  if (hidden < 1) throw ValidationError("realism: hidden must be >= 1");

  const size_t W = real_windows.front().frames.size();
  for (const Window& w : real_windows) {
    if (w.frames.size() != W) {
      throw ValidationError("realism: window lengths differ inside the real pool");
    }
  }
  for (const Window& w : synth_windows) {
    if (w.frames.size() != W) {
      throw ValidationError("realism: window lengths differ across pools");
    }
  }

  Rng master(seed);
  Rng subsample_rng = master.fork(0);
  Rng split_rng = master.fork(1);
  Rng init_rng = master.fork(2);
  Rng train_rng = master.fork(3);

  // Balance the pools when they differ by more than 10%.
  auto select = [&](const std::vector<Window>& pool, size_t keep) {
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) idx[i] = i;
    subsample_rng.shuffle(idx);
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  const size_t smaller = std::min(real_windows.size(), synth_windows.size());
  const size_t larger = std::max(real_windows.size(), synth_windows.size());
  size_t keep_real = real_windows.size();
  size_t keep_synth = synth_windows.size();
  if (static_cast<double>(larger - smaller) > 0.10 * static_cast<double>(larger)) {
    keep_real = std::min(keep_real, smaller);
    keep_synth = std::min(keep_synth, smaller);
  }
  const std::vector<size_t> real_idx = select(real_windows, keep_real);
  const std::vector<size_t> synth_idx = select(synth_windows, keep_synth);

  // The discriminator sees the 58-dim fused view: pose and emotion, no
  // label channel. Real windows are standardized; synthetic windows pass
  // through untouched.
  const int dim = feature_dim(FeatureSet::fused);
  auto features_of = [&](const Window& w, bool synthetic) {
    Window view = w;
    view.synthetic = synthetic;
    return window_feature_matrix(view, stats, FeatureSet::fused);
  };

  struct Example {
    std::vector<float> features;
    float target = 0.0f;
  };
  std::vector<Example> pool_real, pool_synth;
  pool_real.reserve(real_idx.size());
  for (size_t i : real_idx) {
    pool_real.push_back({features_of(real_windows[i], false), 1.0f});
  }
  pool_synth.reserve(synth_idx.size());
  for (size_t i : synth_idx) {
    pool_synth.push_back({features_of(synth_windows[i], true), 0.0f});
  }

  // Stratified 80-20 split.
  std::vector<const Example*> train, test;
  auto split_pool = [&](std::vector<Example>& pool) {
    std::vector<size_t> idx(pool.size());
    for (size_t i = 0; i < pool.size(); ++i) idx[i] = i;
    split_rng.shuffle(idx);
    const size_t n_test = std::max<size_t>(
        1, static_cast<size_t>(std::llround(0.2 * static_cast<double>(pool.size()))));
    for (size_t i = 0; i < idx.size(); ++i) {
      (i < n_test ? test : train).push_back(&pool[idx[i]]);
    }
  };
  split_pool(pool_real);
  split_pool(pool_synth);

  // Single-layer GRU, final hidden state, sigmoid head.
  neuro::GruCellT<float> gru;
  neuro::LinearT<float> head;
  gru.init(dim, hidden, init_rng, "disc.gru");
  head.init(hidden, 1, init_rng, "disc.head");
  neuro::ParamList<float> params;
  gru.collect(params);
  head.collect(params);

  neuro::AdamConfig adam_cfg;
  adam_cfg.lr = 1e-3;
  neuro::AdamT<float> adam(adam_cfg);

  auto forward_probs = [&](const std::vector<const Example*>& batch) {
    const int64_t B = static_cast<int64_t>(batch.size());
    std::vector<float> buf;
    buf.reserve(static_cast<size_t>(B) * W * static_cast<size_t>(dim));
    for (const Example* e : batch) {
      buf.insert(buf.end(), e->features.begin(), e->features.end());
    }
    TensorF x = TensorF::from(B * static_cast<int64_t>(W), dim, std::move(buf));
    TensorF h = gru.initial_state(B);
    for (size_t t = 0; t < W; ++t) {
      std::vector<int64_t> rows(static_cast<size_t>(B));
      for (int64_t b = 0; b < B; ++b) {
        rows[static_cast<size_t>(b)] =
            b * static_cast<int64_t>(W) + static_cast<int64_t>(t);
      }
      h = gru.step(gather_rows(x, std::move(rows)), h);
    }
    return sigmoid_t(head.forward(h));
  };

  const int batch_size = 64;
  std::vector<size_t> order(train.size());
  for (size_t i = 0; i < train.size(); ++i) order[i] = i;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    train_rng.shuffle(order);
    for (size_t at = 0; at < order.size();
         at += static_cast<size_t>(batch_size)) {
      const size_t end = std::min(order.size(), at + batch_size);
      std::vector<const Example*> batch;
      std::vector<float> targets;
      batch.reserve(end - at);
      targets.reserve(end - at);
      for (size_t i = at; i < end; ++i) {
        batch.push_back(train[order[i]]);
        targets.push_back(train[order[i]]->target);
      }
      TensorF prob = forward_probs(batch);
      TensorF loss = neuro::bce_loss(
          prob, TensorF::from(static_cast<int64_t>(batch.size()), 1,
                              std::move(targets)));
      if (!std::isfinite(static_cast<double>(loss.item()))) {
        throw NumericalError("realism: non-finite discriminator loss");
      }
      loss.backward();
      adam.step(params);
      neuro::AdamT<float>::zero_grad(params);
    }
  }

  int64_t correct = 0;
  {
    neuro::NoGradGuard guard;
    TensorF prob = forward_probs(test);
    const float* p = prob.data();
    for (size_t i = 0; i < test.size(); ++i) {
      const int pred = p[i] >= 0.5f ? 1 : 0;
      const int truth = test[i]->target >= 0.5f ? 1 : 0;
      correct += pred == truth;
    }
  }
  RealismScore score;
  score.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  score.d_score = std::abs(0.5 - score.accuracy);
  return score;
}

}  // namespace mint
