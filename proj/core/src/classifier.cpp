#include "mint/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "mint/dataset.hpp"
#include "mint/metrics.hpp"
#include "mint/neuro/adam.hpp"
#include "mint/rng.hpp"
#include "text_util.hpp"

namespace mint {

using neuro::TensorT;
using TensorF = neuro::TensorT<float>;

std::string to_string(Backbone b) {
  switch (b) {
    case Backbone::gru: return "gru";
    case Backbone::lstm: return "lstm";
    case Backbone::transformer: return "transformer";
  }
  throw ValidationError("unknown backbone value");
}

Backbone backbone_from_string(const std::string& name) {
  if (name == "gru") return Backbone::gru;
  if (name == "lstm") return Backbone::lstm;
  if (name == "transformer") return Backbone::transformer;
  throw ValidationError("unknown backbone '" + name +
                        "' (expected gru, lstm, or transformer)");
}

int ClassifierConfig::resolved_hidden() const {
  if (hidden > 0) return hidden;
  switch (features) {
    case FeatureSet::pose_only: return 256;
    case FeatureSet::emotion_only: return 16;
    case FeatureSet::fused:
      return backbone == Backbone::transformer ? 256 : 96;
  }
  throw ValidationError("unknown feature set value");
}

void ClassifierConfig::validate() const {
  if (window < 1) throw ValidationError("classifier: window must be >= 1");
  if (resolved_hidden() < 1) throw ValidationError("classifier: hidden must be >= 1");
  if (backbone == Backbone::transformer) {
    if (heads < 1) throw ValidationError("classifier: heads must be >= 1");
    if (resolved_hidden() % heads != 0) {
      throw ValidationError("classifier: hidden must be divisible by heads");
    }
    if (ff_multiplier < 1) {
      throw ValidationError("classifier: ff_multiplier must be >= 1");
    }
  }
  if (epochs < 1) throw ValidationError("classifier: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("classifier: batch_size must be >= 1");
  if (!(lr > 0)) throw ValidationError("classifier: lr must be positive");
  if (weight_decay < 0) {
    throw ValidationError("classifier: weight_decay must be >= 0");
  }
  if (early_stopping && patience < 1) {
    throw ValidationError("classifier: patience must be >= 1");
  }
}

// ------------------------------------------------------------
// Model internals.
// ------------------------------------------------------------

struct IntentClassifier::Impl {
  ClassifierConfig cfg;
  StandardizationStats stats = StandardizationStats::identity();

  neuro::GruCellT<float> gru;
  neuro::LstmCellT<float> lstm;
  neuro::LinearT<float> embed;
  neuro::PositionalTableT<float> pos;
  neuro::TransformerBlockT<float> block;
  neuro::LayerNormT<float> final_ln;
  neuro::LinearT<float> head;
  neuro::ParamList<float> params;

  void build(const ClassifierConfig& config, Rng& rng) {
    cfg = config;
    cfg.hidden = config.resolved_hidden();
    const int64_t in = feature_dim(cfg.features);
    const int64_t h = cfg.hidden;
    params.clear();
    switch (cfg.backbone) {
      case Backbone::gru:
        gru.init(in, h, rng, "gru");
        gru.collect(params);
        break;
      case Backbone::lstm:
        lstm.init(in, h, rng, "lstm");
        lstm.collect(params);
        break;
      case Backbone::transformer:
        embed.init(in, h, rng, "embed");
        pos.init(cfg.window, h, "pos");
        block.init(h, cfg.heads, static_cast<int64_t>(cfg.ff_multiplier) * h,
                   rng, "block");
        final_ln.init(h, "final_ln");
        embed.collect(params);
        pos.collect(params);
        block.collect(params);
        final_ln.collect(params);
        break;
    }
    head.init(h, 2, rng, "head");
    head.collect(params);
  }

  // x is (count * window, feature_dim), windows back to back; the result
  // keeps that row order with one 2-class logit row per frame.
  TensorF forward_logits(const TensorF& x, int64_t count) const {
    const int64_t W = cfg.window;
    if (x.rows() != count * W) {
      throw ValidationError("classifier forward: row count mismatch");
    }
    if (x.cols() != feature_dim(cfg.features)) {
      throw ValidationError(
          "classifier forward: feature dimension mismatch (got " +
          std::to_string(x.cols()) + ", model expects " +
          std::to_string(feature_dim(cfg.features)) + ")");
    }
    if (cfg.backbone == Backbone::transformer) {
      TensorF e = pos.forward(embed.forward(x), count, W);
      TensorF enc = final_ln.forward(block.forward(e, count, W));
      return head.forward(enc);
    }

    // Recurrent backbones step over time; rows are re-gathered into the
    // batch-major layout afterwards.
    std::vector<TensorF> per_step;
    per_step.reserve(static_cast<size_t>(W));
    TensorF h = cfg.backbone == Backbone::gru ? gru.initial_state(count)
                                              : lstm.initial_state(count);
    TensorF c = lstm.initial_state(count);
    for (int64_t t = 0; t < W; ++t) {
      std::vector<int64_t> idx(static_cast<size_t>(count));
      for (int64_t b = 0; b < count; ++b) idx[static_cast<size_t>(b)] = b * W + t;
      TensorF xt = gather_rows(x, std::move(idx));
      if (cfg.backbone == Backbone::gru) {
        h = gru.step(xt, h);
      } else {
        auto hc = lstm.step(xt, h, c);
        h = hc.first;
        c = hc.second;
      }
      per_step.push_back(head.forward(h));
    }
    TensorF step_major = concat_rows(per_step);
    std::vector<int64_t> perm(static_cast<size_t>(count * W));
    for (int64_t b = 0; b < count; ++b) {
      for (int64_t t = 0; t < W; ++t) {
        perm[static_cast<size_t>(b * W + t)] = t * count + b;
      }
    }
    return gather_rows(step_major, std::move(perm));
  }
};

IntentClassifier::IntentClassifier() : impl_(std::make_shared<Impl>()) {}

IntentClassifier IntentClassifier::create(const ClassifierConfig& config,
                                          uint64_t seed) {
  config.validate();
  IntentClassifier m;
  Rng rng(seed);
  m.impl_->build(config, rng);
  return m;
}

const ClassifierConfig& IntentClassifier::config() const { return impl_->cfg; }
const StandardizationStats& IntentClassifier::stats() const {
  return impl_->stats;
}

void IntentClassifier::set_stats(const StandardizationStats& stats) {
  if (!stats.valid()) {
    throw ValidationError("classifier: invalid standardization stats");
  }
  impl_->stats = stats;
}

std::vector<double> IntentClassifier::forward_frame_probs(
    const std::vector<float>& features, int count) const {
  const int64_t W = impl_->cfg.window;
  const int64_t F = feature_dim(impl_->cfg.features);
  if (count < 0 ||
      static_cast<int64_t>(features.size()) != static_cast<int64_t>(count) * W * F) {
    throw ValidationError("classifier forward: feature buffer size mismatch");
  }
  neuro::NoGradGuard guard;
  std::vector<double> probs;
  probs.reserve(static_cast<size_t>(count) * static_cast<size_t>(W));
  constexpr int64_t kChunk = 512;  // windows per forward, bounds peak memory
  for (int64_t at = 0; at < count; at += kChunk) {
    const int64_t n = std::min<int64_t>(kChunk, count - at);
    std::vector<float> buf(features.begin() + at * W * F,
                           features.begin() + (at + n) * W * F);
    TensorF x = TensorF::from(n * W, F, std::move(buf));
    TensorF logits = impl_->forward_logits(x, n);
    const float* pl = logits.data();
    for (int64_t r = 0; r < logits.rows(); ++r) {
      // Two-class softmax, stable form.
      const double diff = static_cast<double>(pl[2 * r]) -
                          static_cast<double>(pl[2 * r + 1]);
      probs.push_back(1.0 / (1.0 + std::exp(diff)));
    }
  }
  return probs;
}

IntentOutput IntentClassifier::forward_window(
    const std::vector<float>& features) const {
  IntentOutput out;
  out.frame_probs = forward_frame_probs(features, 1);
  double sum = 0.0;
  for (double p : out.frame_probs) sum += p;
  out.window_prob = sum / static_cast<double>(out.frame_probs.size());
  return out;
}

double IntentClassifier::step_prob(const std::vector<float>& frame_features,
                                   std::vector<float>& hidden,
                                   std::vector<float>& cell) const {
  const Impl& im = *impl_;
  if (im.cfg.backbone == Backbone::transformer) {
    throw ValidationError(
        "step_prob: carried-state streaming needs a gru or lstm backbone");
  }
  const size_t dim = static_cast<size_t>(feature_dim(im.cfg.features));
  if (frame_features.size() != dim) {
    throw ValidationError("step_prob: feature dimension mismatch");
  }
  const size_t h = static_cast<size_t>(im.cfg.hidden);
  if (hidden.empty()) hidden.assign(h, 0.0f);
  if (hidden.size() != h) {
    throw ValidationError("step_prob: hidden state size mismatch");
  }
  const bool is_lstm = im.cfg.backbone == Backbone::lstm;
  if (is_lstm) {
    if (cell.empty()) cell.assign(h, 0.0f);
    if (cell.size() != h) {
      throw ValidationError("step_prob: cell state size mismatch");
    }
  }

  neuro::NoGradGuard guard;
  TensorF x = TensorF::from(1, static_cast<int64_t>(dim), frame_features);
  TensorF hprev = TensorF::from(1, static_cast<int64_t>(h), hidden);
  TensorF hnext;
  if (is_lstm) {
    TensorF cprev = TensorF::from(1, static_cast<int64_t>(h), cell);
    auto hc = im.lstm.step(x, hprev, cprev);
    hnext = hc.first;
    std::copy(hc.second.data(), hc.second.data() + h, cell.begin());
  } else {
    hnext = im.gru.step(x, hprev);
  }
  std::copy(hnext.data(), hnext.data() + h, hidden.begin());
  TensorF logits = im.head.forward(hnext);
  const float* l = logits.data();
  const double diff = static_cast<double>(l[0]) - static_cast<double>(l[1]);
  return 1.0 / (1.0 + std::exp(diff));
}

ModelCheckpoint IntentClassifier::to_checkpoint() const {
  const Impl& im = *impl_;
  ModelCheckpoint ckpt;
  ckpt.model_kind = to_string(im.cfg.backbone);
  ckpt.set_config("backbone", to_string(im.cfg.backbone));
  ckpt.set_config("features", to_string(im.cfg.features));
  ckpt.set_config("hidden", static_cast<int64_t>(im.cfg.hidden));
  ckpt.set_config("window", static_cast<int64_t>(im.cfg.window));
  ckpt.set_config("heads", static_cast<int64_t>(im.cfg.heads));
  ckpt.set_config("ff_multiplier", static_cast<int64_t>(im.cfg.ff_multiplier));
  ckpt.set_config("epochs", static_cast<int64_t>(im.cfg.epochs));
  ckpt.set_config("batch_size", static_cast<int64_t>(im.cfg.batch_size));
  ckpt.set_config("lr", im.cfg.lr);
  ckpt.set_config("weight_decay", im.cfg.weight_decay);
  ckpt.set_config("class_weighting",
                  static_cast<int64_t>(im.cfg.class_weighting ? 1 : 0));
  ckpt.set_config("early_stopping",
                  static_cast<int64_t>(im.cfg.early_stopping ? 1 : 0));
  ckpt.set_config("patience", static_cast<int64_t>(im.cfg.patience));
  for (const neuro::ParamT<float>* p : im.params) {
    NamedArray arr;
    arr.name = p->name;
    arr.shape = {p->tensor.rows(), p->tensor.cols()};
    arr.data = p->tensor.values();
    ckpt.arrays.push_back(std::move(arr));
  }
  if (!im.stats.is_identity()) {
    ckpt.has_stats = true;
    ckpt.stats_mean.assign(im.stats.mean.begin(), im.stats.mean.end());
    ckpt.stats_std.assign(im.stats.std.begin(), im.stats.std.end());
  }
  return ckpt;
}

IntentClassifier IntentClassifier::from_checkpoint(const ModelCheckpoint& ckpt) {
  ClassifierConfig cfg;
  cfg.backbone = backbone_from_string(ckpt.config_str("backbone"));
  cfg.features = feature_set_from_string(ckpt.config_str("features"));
  cfg.hidden = static_cast<int>(ckpt.config_int("hidden"));
  cfg.window = static_cast<int>(ckpt.config_int("window"));
  cfg.heads = static_cast<int>(ckpt.config_int("heads"));
  cfg.ff_multiplier = static_cast<int>(ckpt.config_int("ff_multiplier"));
  cfg.epochs = static_cast<int>(ckpt.config_int("epochs"));
  cfg.batch_size = static_cast<int>(ckpt.config_int("batch_size"));
  cfg.lr = ckpt.config_float("lr");
  cfg.weight_decay = ckpt.config_float("weight_decay");
  cfg.class_weighting = ckpt.config_int("class_weighting") != 0;
  cfg.early_stopping = ckpt.config_int("early_stopping") != 0;
  cfg.patience = static_cast<int>(ckpt.config_int("patience"));

  IntentClassifier m = create(cfg, 0);
  Impl& im = *m.impl_;
  if (ckpt.arrays.size() != im.params.size()) {
    throw ValidationError("checkpoint: expected " +
                          std::to_string(im.params.size()) + " arrays, found " +
                          std::to_string(ckpt.arrays.size()));
  }
  for (size_t i = 0; i < im.params.size(); ++i) {
    const NamedArray& arr = ckpt.arrays[i];
    neuro::ParamT<float>* p = im.params[i];
    if (arr.name != p->name) {
      throw ValidationError("checkpoint: array '" + arr.name +
                            "' where '" + p->name + "' was expected");
    }
    if (arr.size() != p->tensor.size()) {
      throw ValidationError("checkpoint: array '" + arr.name +
                            "' has the wrong element count");
    }
    std::copy(arr.data.begin(), arr.data.end(), p->tensor.data());
  }
  if (ckpt.has_stats) {
    StandardizationStats stats;
    if (ckpt.stats_mean.size() != stats.mean.size() ||
        ckpt.stats_std.size() != stats.std.size()) {
      throw ValidationError("checkpoint: stats blocks must hold 51 values");
    }
    std::copy(ckpt.stats_mean.begin(), ckpt.stats_mean.end(),
              stats.mean.begin());
    std::copy(ckpt.stats_std.begin(), ckpt.stats_std.end(),
              stats.std.begin());
    m.set_stats(stats);
  }
  return m;
}

IntentClassifier IntentClassifier::clone() const {
  return from_checkpoint(to_checkpoint());
}

// ------------------------------------------------------------
// Training.
// ------------------------------------------------------------

namespace {

struct WindowTensors {
  std::vector<float> features;   // n_windows * window * feature_dim
  std::vector<int> frame_labels; // n_windows * window
  std::vector<int> window_truth; // n_windows, >= min_positive positive frames
  int64_t count = 0;
};

WindowTensors build_window_tensors(const std::vector<Window>& wins,
                                   const StandardizationStats& stats,
                                   FeatureSet set, int min_positive) {
  WindowTensors out;
  out.count = static_cast<int64_t>(wins.size());
  for (const Window& w : wins) {
    std::vector<float> feats = window_feature_matrix(w, stats, set);
    out.features.insert(out.features.end(), feats.begin(), feats.end());
    int positives = 0;
    for (const MultimodalFrame& f : w.frames) {
      if (!f.label.has_value()) {
        throw ValidationError("training window in sequence '" + w.sequence_id +
                              "' contains unlabeled frames");
      }
      out.frame_labels.push_back(*f.label);
      positives += *f.label;
    }
    out.window_truth.push_back(positives >= min_positive ? 1 : 0);
  }
  return out;
}

struct ValMetrics {
  double frame_auroc = std::numeric_limits<double>::quiet_NaN();
  double seq_auroc = std::numeric_limits<double>::quiet_NaN();
};

ValMetrics eval_on_windows(const IntentClassifier& model,
                           const WindowTensors& wt, int k_run) {
  ValMetrics vm;
  if (wt.count == 0) return vm;
  const int W = model.config().window;
  std::vector<double> probs =
      model.forward_frame_probs(wt.features, static_cast<int>(wt.count));
  try {
    vm.frame_auroc = auroc(probs, wt.frame_labels);
  } catch (const ValidationError&) {
    // single-class pool: leave NaN
  }
  std::vector<double> scores(static_cast<size_t>(wt.count));
  for (int64_t i = 0; i < wt.count; ++i) {
    std::vector<double> wp(probs.begin() + i * W, probs.begin() + (i + 1) * W);
    scores[static_cast<size_t>(i)] = run_score(wp, k_run);
  }
  try {
    vm.seq_auroc = auroc(scores, wt.window_truth);
  } catch (const ValidationError&) {
  }
  return vm;
}

}  // namespace

TrainResult train_classifier(const std::vector<SequenceRecord>& train,
                             const std::vector<SequenceRecord>& val,
                             const ClassifierConfig& config, uint64_t seed,
                             const WindowAugmenter* augmenter) {
  config.validate();
  if (train.empty()) throw ValidationError("train_classifier: empty training set");

  constexpr int kMinPositive = 7;
  Rng master(seed);
  Rng init_rng = master.fork(0);
  Rng shuffle_rng = master.fork(1);
  Rng aug_rng = master.fork(2);

  std::vector<Window> train_windows = windows(train, config.window, 1);
  if (train_windows.empty()) {
    throw ValidationError("train_classifier: no training windows (sequences "
                          "shorter than the window length)");
  }
  StandardizationStats stats = fit_standardization(train);

  if (augmenter != nullptr) {
    const uint64_t aug_seed = static_cast<uint64_t>(aug_rng.uniform_int(
        0, std::numeric_limits<int64_t>::max() - 1));
    std::vector<Window> extra = (*augmenter)(train_windows, stats, aug_seed);
    for (Window& w : extra) train_windows.push_back(std::move(w));
  }

  WindowTensors wt = build_window_tensors(train_windows, stats,
                                          config.features, kMinPositive);
  int64_t n_pos_frames = 0;
  for (int y : wt.frame_labels) n_pos_frames += y;
  if (n_pos_frames == 0 ||
      n_pos_frames == static_cast<int64_t>(wt.frame_labels.size())) {
    throw ValidationError("train_classifier: single-class training set");
  }

  std::vector<float> class_weights;
  if (config.class_weighting) {
    const double n = static_cast<double>(wt.frame_labels.size());
    const double n_pos = static_cast<double>(n_pos_frames);
    class_weights = {static_cast<float>(n / (2.0 * (n - n_pos))),
                     static_cast<float>(n / (2.0 * n_pos))};
  }

  WindowTensors val_wt;
  if (!val.empty()) {
    std::vector<Window> val_windows = windows(val, config.window, 1);
    val_wt = build_window_tensors(val_windows, stats, config.features,
                                  kMinPositive);
  }

  TrainResult result;
  result.model = IntentClassifier::create(config, 0);
  result.model.impl().build(config, init_rng);  // seeded parameter draw
  result.model.set_stats(stats);
  {
    int64_t pos_windows = 0;
    for (int v : wt.window_truth) pos_windows += v;
    result.train_positive_fraction =
        static_cast<double>(pos_windows) / static_cast<double>(wt.count);
  }

  neuro::AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  adam_cfg.weight_decay = config.weight_decay;
  neuro::AdamT<float> adam(adam_cfg);
  neuro::ParamList<float>& params = result.model.impl().params;

  const int64_t W = config.window;
  const int64_t F = feature_dim(config.features);
  std::vector<int64_t> order(static_cast<size_t>(wt.count));
  for (int64_t i = 0; i < wt.count; ++i) order[static_cast<size_t>(i)] = i;

  double best_auroc = -1.0;
  int best_epoch = -1;
  int since_best = 0;
  std::vector<std::vector<float>> best_params;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (int64_t at = 0; at < wt.count; at += config.batch_size) {
      const int64_t n = std::min<int64_t>(config.batch_size, wt.count - at);
      std::vector<float> xbuf(static_cast<size_t>(n * W * F));
      std::vector<int> ybuf(static_cast<size_t>(n * W));
      for (int64_t b = 0; b < n; ++b) {
        const int64_t src = order[static_cast<size_t>(at + b)];
        std::copy(wt.features.begin() + src * W * F,
                  wt.features.begin() + (src + 1) * W * F,
                  xbuf.begin() + b * W * F);
        std::copy(wt.frame_labels.begin() + src * W,
                  wt.frame_labels.begin() + (src + 1) * W,
                  ybuf.begin() + b * W);
      }
      TensorF x = TensorF::from(n * W, F, std::move(xbuf));
      TensorF logits = result.model.impl().forward_logits(x, n);
      TensorF loss = neuro::ce_with_logits(logits, ybuf, class_weights);
      loss.backward();
      adam.step(params);
      neuro::AdamT<float>::zero_grad(params);
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(n);
    }
    const double train_loss = loss_sum / static_cast<double>(wt.count);
    if (!std::isfinite(train_loss)) {
      throw NumericalError("classifier training: non-finite loss at epoch " +
                           std::to_string(epoch));
    }

    ValMetrics vm = eval_on_windows(result.model, val_wt, kMinPositive);
    result.history.push_back(
        {epoch, train_loss, vm.frame_auroc, vm.seq_auroc, config.lr});

    if (std::isfinite(vm.frame_auroc)) {
      if (vm.frame_auroc > best_auroc) {
        best_auroc = vm.frame_auroc;
        best_epoch = epoch;
        since_best = 0;
        best_params.clear();
        for (const neuro::ParamT<float>* p : params) {
          best_params.push_back(p->tensor.values());
        }
      } else {
        ++since_best;
        if (config.early_stopping && since_best >= config.patience) break;
      }
    }
  }

  if (best_epoch >= 0) {
    for (size_t i = 0; i < params.size(); ++i) {
      std::copy(best_params[i].begin(), best_params[i].end(),
                params[i]->tensor.data());
    }
    result.best_epoch = best_epoch;
  } else {
    result.best_epoch = result.history.empty()
                            ? 0
                            : result.history.back().epoch;
  }
  return result;
}

void write_history_csv(const std::string& path,
                       const std::vector<TrainHistoryRow>& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "epoch,train_loss,val_frame_auroc,val_seq_auroc,lr,tf_ratio\n";
  for (const TrainHistoryRow& row : history) {
    out << detail::format_int(row.epoch) << ','
        << detail::format_double(row.train_loss) << ',';
    if (std::isfinite(row.val_frame_auroc)) {
      out << detail::format_double(row.val_frame_auroc);
    } else {
      out << "n/a";
    }
    out << ',';
    if (std::isfinite(row.val_seq_auroc)) {
      out << detail::format_double(row.val_seq_auroc);
    } else {
      out << "n/a";
    }
    out << ',' << detail::format_double(row.lr) << ",n/a\n";
  }
  if (!out.good()) throw ValidationError("failed writing '" + path + "'");
}

}  // namespace mint
