#include "mint/rvae.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "mint/dataset.hpp"
#include "mint/neuro/adam.hpp"
#include "mint/neuro/losses.hpp"
#include "mint/rng.hpp"
#include "text_util.hpp"

namespace mint {

using TensorF = neuro::TensorT<float>;

void RvaeConfig::validate() const {
  if (input_dim != kFrameDim) {
    throw ValidationError("rvae: input_dim must be 59 (pose+emotion+label)");
  }
  if (encoder_mlp0 < 1 || encoder_mlp1 < 1 || encoder_mlp2 < 1 ||
      latent_dim < 1 || decoder_hidden < 1) {
    throw ValidationError("rvae: layer widths must be positive");
  }
  if (window < 2) {
    throw ValidationError("rvae: window must be >= 2 (next-step prediction)");
  }
  if (window_stride < 1) throw ValidationError("rvae: window_stride must be >= 1");
  if (lambda_pose < 0 || lambda_emotion < 0 || lambda_intent < 0 ||
      eta_max < 0 || free_bits < 0 || confidence_offset < 0) {
    throw ValidationError("rvae: loss weights must be >= 0");
  }
  if (warmup_epochs < 1) throw ValidationError("rvae: warmup_epochs must be >= 1");
  if (!(huber_delta > 0)) throw ValidationError("rvae: huber_delta must be positive");
  if (xi_coord < 0 || xi_conf < 0 ||
      std::abs(xi_coord + xi_conf - 1.0) > 1e-9) {
    throw ValidationError("rvae: pose sub-weights must be >= 0 and sum to 1");
  }
  if (dropout < 0 || dropout >= 1) {
    throw ValidationError("rvae: dropout must lie in [0, 1)");
  }
  if (epochs < 1) throw ValidationError("rvae: epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("rvae: batch_size must be >= 1");
  if (!(lr > 0)) throw ValidationError("rvae: lr must be positive");
  if (weight_decay < 0) throw ValidationError("rvae: weight_decay must be >= 0");
}

// ------------------------------------------------------------
// Scalar reference formulas.
// ------------------------------------------------------------

double huber_value(double r, double delta) {
  if (!(delta > 0)) throw ValidationError("huber: delta must be positive");
  r = std::abs(r);
  return r <= delta ? r * r / (2.0 * delta) : r - delta / 2.0;
}

double pose_loss_value(const std::vector<double>& pred,
                       const std::vector<double>& target, int steps,
                       const RvaeConfig& config) {
  if (steps < 1) throw ValidationError("pose_loss: steps must be >= 1");
  const size_t need = static_cast<size_t>(steps) * kPoseDim;
  if (pred.size() != need || target.size() != need) {
    throw ValidationError("pose_loss: buffers must hold steps x 51 values");
  }
  double coord = 0.0;
  double conf = 0.0;
  for (int s = 0; s < steps; ++s) {
    for (int j = 0; j < kNumKeypoints; ++j) {
      const size_t at = static_cast<size_t>(s) * kPoseDim +
                        3 * static_cast<size_t>(j);
      const double du = pred[at] - target[at];
      const double dv = pred[at + 1] - target[at + 1];
      const double weight = target[at + 2] + config.confidence_offset;
      coord += weight * huber_value(std::hypot(du, dv), config.huber_delta);
      const double dc = pred[at + 2] - target[at + 2];
      conf += dc * dc;
    }
  }
  const double denom = static_cast<double>(steps) * kNumKeypoints;
  return config.xi_coord * coord / denom + config.xi_conf * conf / denom;
}

double emotion_loss_value(const std::vector<double>& pred,
                          const std::vector<double>& target, int steps) {
  if (steps < 1) throw ValidationError("emotion_loss: steps must be >= 1");
  const size_t need = static_cast<size_t>(steps) * kNumEmotions;
  if (pred.size() != need || target.size() != need) {
    throw ValidationError("emotion_loss: buffers must hold steps x 7 values");
  }
  double sum = 0.0;
  for (size_t i = 0; i < need; ++i) {
    const double t = target[i];
    if (t <= 0.0) continue;  // 0 log 0 = 0
    sum += t * (std::log(t) - std::log(std::max(pred[i], neuro::kProbFloor)));
  }
  return sum / static_cast<double>(steps);
}

double intent_loss_value(const std::vector<double>& pred,
                         const std::vector<double>& target, int steps) {
  if (steps < 1) throw ValidationError("intent_loss: steps must be >= 1");
  if (pred.size() != static_cast<size_t>(steps) ||
      target.size() != static_cast<size_t>(steps)) {
    throw ValidationError("intent_loss: buffers must hold one value per step");
  }
  double sum = 0.0;
  for (int s = 0; s < steps; ++s) {
    const double p = std::clamp(pred[static_cast<size_t>(s)],
                                neuro::kProbFloor, 1.0 - neuro::kProbFloor);
    const double y = target[static_cast<size_t>(s)];
    sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
  }
  return sum / static_cast<double>(steps);
}

double kl_regularizer_value(const std::vector<double>& mu,
                            const std::vector<double>& sigma,
                            double free_bits) {
  if (mu.size() != sigma.size()) {
    throw ValidationError("kl_regularizer: mu and sigma lengths differ");
  }
  double sum = 0.0;
  for (size_t d = 0; d < mu.size(); ++d) {
    if (!(sigma[d] > 0)) {
      throw ValidationError("kl_regularizer: sigma must be positive");
    }
    const double s2 = sigma[d] * sigma[d];
    const double kl = 0.5 * (mu[d] * mu[d] + s2 - std::log(s2) - 1.0);
    sum += std::max(kl, free_bits);
  }
  return sum;
}

double kl_weight(int epoch, const RvaeConfig& config) {
  if (epoch < 0) throw ValidationError("kl_weight: epoch must be >= 0");
  const double ramp = static_cast<double>(epoch) /
                      static_cast<double>(config.warmup_epochs);
  return config.eta_max * std::min(ramp, 1.0);
}

double teacher_forcing_ratio(int epoch, int total_epochs) {
  if (total_epochs < 1) {
    throw ValidationError("teacher_forcing_ratio: total_epochs must be >= 1");
  }
  if (total_epochs == 1) return 1.0;
  const double tau = 1.0 - static_cast<double>(epoch) /
                               static_cast<double>(total_epochs - 1);
  return std::clamp(tau, 0.0, 1.0);
}

double total_loss_value(double pose, double emotion, double intent, double kl,
                        int epoch, const RvaeConfig& config) {
  return config.lambda_pose * pose + config.lambda_emotion * emotion +
         config.lambda_intent * intent + kl_weight(epoch, config) * kl;
}

// ------------------------------------------------------------
// Model internals.
// ------------------------------------------------------------

struct MintRvae::Impl {
  RvaeConfig cfg;
  StandardizationStats stats = StandardizationStats::identity();

  // Encoder: per-frame MLP, then GRU over time, then Gaussian heads.
  neuro::LinearT<float> l1, l2, l3;
  neuro::BatchNormT<float> bn1, bn2, bn3;
  neuro::DropoutT<float> drop;
  neuro::GruCellT<float> enc_gru;
  neuro::LinearT<float> mu_head, logvar_head;

  // Decoder: hidden init from the latent, GRU over [prev; latent], heads.
  neuro::LinearT<float> dec_init;
  neuro::GruCellT<float> dec_gru;
  neuro::LinearT<float> pose_head, emo_head, label_head;

  neuro::ParamList<float> params;

  void build(const RvaeConfig& config, Rng& rng) {
    cfg = config;
    drop.p = static_cast<float>(cfg.dropout);
    l1.init(cfg.input_dim, cfg.encoder_mlp0, rng, "enc.l1");
    bn1.init(cfg.encoder_mlp0, "enc.bn1");
    l2.init(cfg.encoder_mlp0, cfg.encoder_mlp1, rng, "enc.l2");
    bn2.init(cfg.encoder_mlp1, "enc.bn2");
    l3.init(cfg.encoder_mlp1, cfg.encoder_mlp2, rng, "enc.l3");
    bn3.init(cfg.encoder_mlp2, "enc.bn3");
    enc_gru.init(cfg.encoder_mlp2, cfg.encoder_mlp2, rng, "enc.gru");
    mu_head.init(cfg.encoder_mlp2, cfg.latent_dim, rng, "enc.mu");
    logvar_head.init(cfg.encoder_mlp2, cfg.latent_dim, rng, "enc.logvar");
    dec_init.init(cfg.latent_dim, cfg.decoder_hidden, rng, "dec.init");
    dec_gru.init(cfg.input_dim + cfg.latent_dim, cfg.decoder_hidden, rng,
                 "dec.gru");
    pose_head.init(cfg.decoder_hidden, kPoseDim, rng, "dec.pose");
    emo_head.init(cfg.decoder_hidden, kNumEmotions, rng, "dec.emo");
    label_head.init(cfg.decoder_hidden, 1, rng, "dec.label");

    params.clear();
    l1.collect(params);
    bn1.collect(params);
    l2.collect(params);
    bn2.collect(params);
    l3.collect(params);
    bn3.collect(params);
    enc_gru.collect(params);
    mu_head.collect(params);
    logvar_head.collect(params);
    dec_init.collect(params);
    dec_gru.collect(params);
    pose_head.collect(params);
    emo_head.collect(params);
    label_head.collect(params);
  }

  TensorF encode_mlp(const TensorF& x, bool train, Rng& rng) {
    TensorF h = drop.forward(relu_t(bn1.forward(l1.forward(x), train)), train, rng);
    h = drop.forward(relu_t(bn2.forward(l2.forward(h), train)), train, rng);
    return drop.forward(relu_t(bn3.forward(l3.forward(h), train)), train, rng);
  }

  // x is (count * window, 59) batch-major; returns (mu, logvar), each
  // (count, latent_dim).
  std::pair<TensorF, TensorF> encode(const TensorF& x, int64_t count,
                                     bool train, Rng& rng) {
    const int64_t W = cfg.window;
    TensorF emb = encode_mlp(x, train, rng);
    TensorF h = enc_gru.initial_state(count);
    for (int64_t t = 0; t < W; ++t) {
      std::vector<int64_t> idx(static_cast<size_t>(count));
      for (int64_t b = 0; b < count; ++b) {
        idx[static_cast<size_t>(b)] = b * W + t;
      }
      h = enc_gru.step(gather_rows(emb, std::move(idx)), h);
    }
    return {mu_head.forward(h), logvar_head.forward(h)};
  }

  struct DecodedStep {
    TensorF pose;   // (count, 51), linear
    TensorF emo;    // (count, 7), softmax rows
    TensorF label;  // (count, 1), sigmoid
  };

  DecodedStep decode_step(const TensorF& prev, const TensorF& latent,
                          TensorF& hidden) const {
    TensorF input = neuro::concat_cols<float>({prev, latent});
    hidden = dec_gru.step(input, hidden);
    DecodedStep out;
    out.pose = pose_head.forward(hidden);
    out.emo = neuro::softmax_rows(emo_head.forward(hidden));
    out.label = sigmoid_t(label_head.forward(hidden));
    return out;
  }
};

MintRvae::MintRvae() : impl_(std::make_shared<Impl>()) {}

MintRvae MintRvae::create(const RvaeConfig& config, uint64_t seed) {
  config.validate();
  MintRvae m;
  Rng rng(seed);
  m.impl_->build(config, rng);
  return m;
}

const RvaeConfig& MintRvae::config() const { return impl_->cfg; }
const StandardizationStats& MintRvae::stats() const { return impl_->stats; }

void MintRvae::set_stats(const StandardizationStats& stats) {
  if (!stats.valid()) throw ValidationError("rvae: invalid standardization stats");
  impl_->stats = stats;
}

std::pair<std::vector<double>, std::vector<double>> MintRvae::encode_window(
    const std::vector<float>& frames, int steps) const {
  const RvaeConfig& cfg = impl_->cfg;
  if (steps != cfg.window) {
    throw ValidationError("encode_window: expected exactly " +
                          std::to_string(cfg.window) + " frames");
  }
  if (frames.size() != static_cast<size_t>(steps) * kFrameDim) {
    throw ValidationError("encode_window: buffer must hold steps x 59 values");
  }
  neuro::NoGradGuard guard;
  Rng unused(0);
  TensorF x = TensorF::from(steps, kFrameDim, frames);
  auto [mu, logvar] = impl_->encode(x, 1, false, unused);
  std::vector<double> mu_out(static_cast<size_t>(cfg.latent_dim));
  std::vector<double> sigma_out(static_cast<size_t>(cfg.latent_dim));
  for (int d = 0; d < cfg.latent_dim; ++d) {
    mu_out[static_cast<size_t>(d)] = static_cast<double>(mu.data()[d]);
    sigma_out[static_cast<size_t>(d)] =
        std::exp(0.5 * static_cast<double>(logvar.data()[d]));
  }
  return {std::move(mu_out), std::move(sigma_out)};
}

std::vector<SequenceRecord> MintRvae::sample(int count, int length,
                                             uint64_t seed) const {
  if (count < 0) throw ValidationError("sample: count must be >= 0");
  if (length < 1) throw ValidationError("sample: length must be >= 1");
  const RvaeConfig& cfg = impl_->cfg;
  std::vector<SequenceRecord> out;
  if (count == 0) return out;

  neuro::NoGradGuard guard;
  Rng rng(seed);

  // Prior draws.
  std::vector<float> hbuf(static_cast<size_t>(count) *
                          static_cast<size_t>(cfg.latent_dim));
  for (float& v : hbuf) v = static_cast<float>(rng.normal(0.0, 1.0));
  TensorF latent = TensorF::from(count, cfg.latent_dim, std::move(hbuf));

  TensorF hidden = impl_->dec_init.forward(latent);
  // Fully autoregressive rollout from a zero start frame; the raw head
  // outputs (label thresholded) feed back as the next step's input.
  std::vector<float> prev(static_cast<size_t>(count) * kFrameDim, 0.0f);
  std::vector<std::vector<float>> frames_raw(
      static_cast<size_t>(count),
      std::vector<float>(static_cast<size_t>(length) * kFrameDim));

  for (int t = 0; t < length; ++t) {
    TensorF prev_t = TensorF::from(count, kFrameDim, prev);
    Impl::DecodedStep step =
        impl_->decode_step(prev_t, latent, hidden);
    const float* pp = step.pose.data();
    const float* pe = step.emo.data();
    const float* pl = step.label.data();
    for (int b = 0; b < count; ++b) {
      float* dst = prev.data() + static_cast<size_t>(b) * kFrameDim;
      for (int i = 0; i < kPoseDim; ++i) dst[i] = pp[b * kPoseDim + i];
      for (int e = 0; e < kNumEmotions; ++e) {
        dst[kPoseDim + e] = pe[b * kNumEmotions + e];
      }
      dst[kPoseDim + kNumEmotions] = pl[b] >= 0.5f ? 1.0f : 0.0f;
      std::copy(dst, dst + kFrameDim,
                frames_raw[static_cast<size_t>(b)].begin() +
                    static_cast<size_t>(t) * kFrameDim);
    }
  }

  out.reserve(static_cast<size_t>(count));
  for (int b = 0; b < count; ++b) {
    SequenceRecord rec;
    char idbuf[48];
    std::snprintf(idbuf, sizeof(idbuf), "rvae-%llu-%04d",
                  static_cast<unsigned long long>(seed), b);
    rec.sequence_id = idbuf;
    rec.participant_id = "synthetic";
    rec.environment = EnvironmentId::synthetic;
    rec.frames.reserve(static_cast<size_t>(length));
    const std::vector<float>& raw = frames_raw[static_cast<size_t>(b)];
    for (int t = 0; t < length; ++t) {
      const float* src = raw.data() + static_cast<size_t>(t) * kFrameDim;
      MultimodalFrame f;
      for (int i = 0; i < kPoseDim; ++i) {
        double v = static_cast<double>(src[i]);
        // Confidence channels stay probabilities in exported records.
        if (i % 3 == 2) v = std::clamp(v, 0.0, 1.0);
        f.pose.values[static_cast<size_t>(i)] = v;
      }
      double esum = 0.0;
      for (int e = 0; e < kNumEmotions; ++e) {
        const double p =
            std::max(static_cast<double>(src[kPoseDim + e]), 1e-12);
        f.emotion.p[static_cast<size_t>(e)] = p;
        esum += p;
      }
      for (int e = 0; e < kNumEmotions; ++e) {
        f.emotion.p[static_cast<size_t>(e)] /= esum;
      }
      f.label = src[kPoseDim + kNumEmotions] >= 0.5f ? 1 : 0;
      rec.frames.push_back(std::move(f));
    }
    out.push_back(std::move(rec));
  }
  return out;
}

// ------------------------------------------------------------
// Checkpointing.
// ------------------------------------------------------------

namespace {

NamedArray running_array(const std::string& name, const std::vector<float>& v) {
  NamedArray arr;
  arr.name = name;
  arr.shape = {1, static_cast<int64_t>(v.size())};
  arr.data = v;
  return arr;
}

}  // namespace

ModelCheckpoint MintRvae::to_checkpoint() const {
  const Impl& im = *impl_;
  ModelCheckpoint ckpt;
  ckpt.model_kind = "mintrvae";
  ckpt.set_config("input_dim", static_cast<int64_t>(im.cfg.input_dim));
  ckpt.set_config("encoder_mlp0", static_cast<int64_t>(im.cfg.encoder_mlp0));
  ckpt.set_config("encoder_mlp1", static_cast<int64_t>(im.cfg.encoder_mlp1));
  ckpt.set_config("encoder_mlp2", static_cast<int64_t>(im.cfg.encoder_mlp2));
  ckpt.set_config("latent_dim", static_cast<int64_t>(im.cfg.latent_dim));
  ckpt.set_config("decoder_hidden", static_cast<int64_t>(im.cfg.decoder_hidden));
  ckpt.set_config("window", static_cast<int64_t>(im.cfg.window));
  ckpt.set_config("window_stride", static_cast<int64_t>(im.cfg.window_stride));
  ckpt.set_config("lambda_pose", im.cfg.lambda_pose);
  ckpt.set_config("lambda_emotion", im.cfg.lambda_emotion);
  ckpt.set_config("lambda_intent", im.cfg.lambda_intent);
  ckpt.set_config("eta_max", im.cfg.eta_max);
  ckpt.set_config("warmup_epochs", static_cast<int64_t>(im.cfg.warmup_epochs));
  ckpt.set_config("free_bits", im.cfg.free_bits);
  ckpt.set_config("huber_delta", im.cfg.huber_delta);
  ckpt.set_config("confidence_offset", im.cfg.confidence_offset);
  ckpt.set_config("xi_coord", im.cfg.xi_coord);
  ckpt.set_config("xi_conf", im.cfg.xi_conf);
  ckpt.set_config("dropout", im.cfg.dropout);
  ckpt.set_config("epochs", static_cast<int64_t>(im.cfg.epochs));
  ckpt.set_config("batch_size", static_cast<int64_t>(im.cfg.batch_size));
  ckpt.set_config("lr", im.cfg.lr);
  ckpt.set_config("weight_decay", im.cfg.weight_decay);
  for (const neuro::ParamT<float>* p : im.params) {
    NamedArray arr;
    arr.name = p->name;
    arr.shape = {p->tensor.rows(), p->tensor.cols()};
    arr.data = p->tensor.values();
    ckpt.arrays.push_back(std::move(arr));
  }
  ckpt.arrays.push_back(running_array("enc.bn1.running_mean", im.bn1.running_mean));
  ckpt.arrays.push_back(running_array("enc.bn1.running_var", im.bn1.running_var));
  ckpt.arrays.push_back(running_array("enc.bn2.running_mean", im.bn2.running_mean));
  ckpt.arrays.push_back(running_array("enc.bn2.running_var", im.bn2.running_var));
  ckpt.arrays.push_back(running_array("enc.bn3.running_mean", im.bn3.running_mean));
  ckpt.arrays.push_back(running_array("enc.bn3.running_var", im.bn3.running_var));
  if (!im.stats.is_identity()) {
    ckpt.has_stats = true;
    ckpt.stats_mean.assign(im.stats.mean.begin(), im.stats.mean.end());
    ckpt.stats_std.assign(im.stats.std.begin(), im.stats.std.end());
  }
  return ckpt;
}

MintRvae MintRvae::from_checkpoint(const ModelCheckpoint& ckpt) {
  RvaeConfig cfg;
  cfg.input_dim = static_cast<int>(ckpt.config_int("input_dim"));
  cfg.encoder_mlp0 = static_cast<int>(ckpt.config_int("encoder_mlp0"));
  cfg.encoder_mlp1 = static_cast<int>(ckpt.config_int("encoder_mlp1"));
  cfg.encoder_mlp2 = static_cast<int>(ckpt.config_int("encoder_mlp2"));
  cfg.latent_dim = static_cast<int>(ckpt.config_int("latent_dim"));
  cfg.decoder_hidden = static_cast<int>(ckpt.config_int("decoder_hidden"));
  cfg.window = static_cast<int>(ckpt.config_int("window"));
  cfg.window_stride = static_cast<int>(ckpt.config_int("window_stride"));
  cfg.lambda_pose = ckpt.config_float("lambda_pose");
  cfg.lambda_emotion = ckpt.config_float("lambda_emotion");
  cfg.lambda_intent = ckpt.config_float("lambda_intent");
  cfg.eta_max = ckpt.config_float("eta_max");
  cfg.warmup_epochs = static_cast<int>(ckpt.config_int("warmup_epochs"));
  cfg.free_bits = ckpt.config_float("free_bits");
  cfg.huber_delta = ckpt.config_float("huber_delta");
  cfg.confidence_offset = ckpt.config_float("confidence_offset");
  cfg.xi_coord = ckpt.config_float("xi_coord");
  cfg.xi_conf = ckpt.config_float("xi_conf");
  cfg.dropout = ckpt.config_float("dropout");
  cfg.epochs = static_cast<int>(ckpt.config_int("epochs"));
  cfg.batch_size = static_cast<int>(ckpt.config_int("batch_size"));
  cfg.lr = ckpt.config_float("lr");
  cfg.weight_decay = ckpt.config_float("weight_decay");

  MintRvae m = create(cfg, 0);
  Impl& im = *m.impl_;
  const size_t n_params = im.params.size();
  if (ckpt.arrays.size() != n_params + 6) {
    throw ValidationError("checkpoint: expected " +
                          std::to_string(n_params + 6) + " arrays, found " +
                          std::to_string(ckpt.arrays.size()));
  }
  for (size_t i = 0; i < n_params; ++i) {
    const NamedArray& arr = ckpt.arrays[i];
    neuro::ParamT<float>* p = im.params[i];
    if (arr.name != p->name) {
      throw ValidationError("checkpoint: array '" + arr.name + "' where '" +
                            p->name + "' was expected");
    }
    if (arr.size() != p->tensor.size()) {
      throw ValidationError("checkpoint: array '" + arr.name +
                            "' has the wrong element count");
    }
    std::copy(arr.data.begin(), arr.data.end(), p->tensor.data());
  }
  std::vector<float>* running[6] = {
      &im.bn1.running_mean, &im.bn1.running_var, &im.bn2.running_mean,
      &im.bn2.running_var,  &im.bn3.running_mean, &im.bn3.running_var};
  const char* running_names[6] = {
      "enc.bn1.running_mean", "enc.bn1.running_var", "enc.bn2.running_mean",
      "enc.bn2.running_var",  "enc.bn3.running_mean", "enc.bn3.running_var"};
  for (size_t i = 0; i < 6; ++i) {
    const NamedArray& arr = ckpt.arrays[n_params + i];
    if (arr.name != running_names[i]) {
      throw ValidationError("checkpoint: array '" + arr.name + "' where '" +
                            std::string(running_names[i]) + "' was expected");
    }
    if (arr.data.size() != running[i]->size()) {
      throw ValidationError("checkpoint: array '" + arr.name +
                            "' has the wrong element count");
    }
    *running[i] = arr.data;
  }
  if (ckpt.has_stats) {
    StandardizationStats stats;
    if (ckpt.stats_mean.size() != stats.mean.size() ||
        ckpt.stats_std.size() != stats.std.size()) {
      throw ValidationError("checkpoint: stats blocks must hold 51 values");
    }
    std::copy(ckpt.stats_mean.begin(), ckpt.stats_mean.end(),
              stats.mean.begin());
    std::copy(ckpt.stats_std.begin(), ckpt.stats_std.end(), stats.std.begin());
    m.set_stats(stats);
  }
  return m;
}

// ------------------------------------------------------------
// Training.
// ------------------------------------------------------------

namespace {

void check_component(double v, const char* name, int epoch) {
  if (!std::isfinite(v)) {
    throw NumericalError(std::string("rvae training: non-finite ") + name +
                         " at epoch " + std::to_string(epoch));
  }
}

}  // namespace

RvaeTrainResult train_rvae_windows(const std::vector<Window>& train_windows,
                                   const StandardizationStats& stats,
                                   const RvaeConfig& config, uint64_t seed) {
  config.validate();
  if (train_windows.empty()) {
    throw ValidationError("train_rvae: no training windows");
  }
  const int64_t W = config.window;
  for (const Window& w : train_windows) {
    if (static_cast<int64_t>(w.frames.size()) != W) {
      throw ValidationError("train_rvae: window length mismatch in sequence '" +
                            w.sequence_id + "'");
    }
  }

  Rng master(seed);
  Rng init_rng = master.fork(0);
  Rng shuffle_rng = master.fork(1);
  Rng train_rng = master.fork(2);

  // All windows as 59-dim generative matrices, batch-major.
  const int64_t n_windows = static_cast<int64_t>(train_windows.size());
  std::vector<float> all(static_cast<size_t>(n_windows) *
                         static_cast<size_t>(W) * kFrameDim);
  for (int64_t i = 0; i < n_windows; ++i) {
    std::vector<float> m = window_generative_matrix(
        train_windows[static_cast<size_t>(i)], stats);
    std::copy(m.begin(), m.end(), all.begin() + i * W * kFrameDim);
  }

  RvaeTrainResult result;
  result.model.impl().build(config, init_rng);
  result.model.set_stats(stats);
  MintRvae::Impl& im = result.model.impl();

  neuro::AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  adam_cfg.weight_decay = config.weight_decay;
  neuro::AdamT<float> adam(adam_cfg);

  // Column index sets for the pose loss.
  std::vector<int> coord_idx, conf_idx;
  for (int j = 0; j < kNumKeypoints; ++j) {
    coord_idx.push_back(3 * j);
    coord_idx.push_back(3 * j + 1);
    conf_idx.push_back(3 * j + 2);
  }

  std::vector<int64_t> order(static_cast<size_t>(n_windows));
  for (int64_t i = 0; i < n_windows; ++i) order[static_cast<size_t>(i)] = i;

  result.log.reserve(static_cast<size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double tau = teacher_forcing_ratio(epoch, config.epochs);
    const double eta = kl_weight(epoch, config);
    shuffle_rng.shuffle(order);

    double pose_sum = 0, emo_sum = 0, intent_sum = 0, kl_sum = 0, total_sum = 0;

    for (int64_t at = 0; at < n_windows; at += config.batch_size) {
      const int64_t B = std::min<int64_t>(config.batch_size, n_windows - at);
      std::vector<float> xbuf(static_cast<size_t>(B * W * kFrameDim));
      for (int64_t b = 0; b < B; ++b) {
        const int64_t src = order[static_cast<size_t>(at + b)];
        std::copy(all.begin() + src * W * kFrameDim,
                  all.begin() + (src + 1) * W * kFrameDim,
                  xbuf.begin() + b * W * kFrameDim);
      }
      TensorF x = TensorF::from(B * W, kFrameDim, xbuf);

      auto [mu, logvar] = im.encode(x, B, true, train_rng);
      TensorF sigma = exp_t(neuro::scale(logvar, 0.5f));
      std::vector<float> eps(static_cast<size_t>(B * config.latent_dim));
      for (float& v : eps) v = static_cast<float>(train_rng.normal(0.0, 1.0));
      TensorF latent = neuro::add(
          mu, neuro::mul(sigma, TensorF::from(B, config.latent_dim,
                                              std::move(eps))));

      // Teacher-forced / scheduled-sampling decoding. Fed-back values are
      // detached: gradients reach earlier steps through the hidden state
      // and the latent code only.
      TensorF hidden = im.dec_init.forward(latent);
      std::vector<float> prev(static_cast<size_t>(B) * kFrameDim);
      for (int64_t b = 0; b < B; ++b) {
        std::copy(xbuf.begin() + b * W * kFrameDim,
                  xbuf.begin() + b * W * kFrameDim + kFrameDim,
                  prev.begin() + b * kFrameDim);
      }

      std::vector<TensorF> pose_steps, emo_steps, label_steps;
      pose_steps.reserve(static_cast<size_t>(W - 1));
      emo_steps.reserve(static_cast<size_t>(W - 1));
      label_steps.reserve(static_cast<size_t>(W - 1));

      for (int64_t t = 1; t < W; ++t) {
        TensorF prev_t = TensorF::from(B, kFrameDim, prev);
        MintRvae::Impl::DecodedStep step = im.decode_step(prev_t, latent, hidden);
        pose_steps.push_back(step.pose);
        emo_steps.push_back(step.emo);
        label_steps.push_back(step.label);

        if (t + 1 < W) {
          const float* pp = step.pose.data();
          const float* pe = step.emo.data();
          const float* pl = step.label.data();
          for (int64_t b = 0; b < B; ++b) {
            float* dst = prev.data() + b * kFrameDim;
            if (train_rng.bernoulli(tau)) {
              const float* truth = xbuf.data() + (b * W + t) * kFrameDim;
              std::copy(truth, truth + kFrameDim, dst);
            } else {
              for (int i = 0; i < kPoseDim; ++i) dst[i] = pp[b * kPoseDim + i];
              for (int e = 0; e < kNumEmotions; ++e) {
                dst[kPoseDim + e] = pe[b * kNumEmotions + e];
              }
              dst[kPoseDim + kNumEmotions] = pl[b] >= 0.5f ? 1.0f : 0.0f;
            }
          }
        }
      }

      // Step-major prediction stacks and matching targets.
      TensorF pose_all = neuro::concat_rows(pose_steps);
      TensorF emo_all = neuro::concat_rows(emo_steps);
      TensorF label_all = neuro::concat_rows(label_steps);

      const int64_t R = (W - 1) * B;
      std::vector<float> pose_tgt(static_cast<size_t>(R) * kPoseDim);
      std::vector<float> emo_tgt(static_cast<size_t>(R) * kNumEmotions);
      std::vector<float> label_tgt(static_cast<size_t>(R));
      std::vector<float> coord_w(static_cast<size_t>(R) * kNumKeypoints);
      for (int64_t t = 1; t < W; ++t) {
        for (int64_t b = 0; b < B; ++b) {
          const float* truth = xbuf.data() + (b * W + t) * kFrameDim;
          const int64_t row = (t - 1) * B + b;
          std::copy(truth, truth + kPoseDim,
                    pose_tgt.begin() + row * kPoseDim);
          std::copy(truth + kPoseDim, truth + kPoseDim + kNumEmotions,
                    emo_tgt.begin() + row * kNumEmotions);
          label_tgt[static_cast<size_t>(row)] = truth[kPoseDim + kNumEmotions];
          for (int j = 0; j < kNumKeypoints; ++j) {
            coord_w[static_cast<size_t>(row * kNumKeypoints + j)] =
                truth[3 * j + 2] + static_cast<float>(config.confidence_offset);
          }
        }
      }

      TensorF diff = neuro::sub(gather_cols(pose_all, coord_idx),
                                TensorF::from(R, 2 * kNumKeypoints, [&] {
                                  std::vector<float> v(
                                      static_cast<size_t>(R) * 2 * kNumKeypoints);
                                  for (int64_t r = 0; r < R; ++r) {
                                    for (int j = 0; j < kNumKeypoints; ++j) {
                                      v[static_cast<size_t>(
                                          r * 2 * kNumKeypoints + 2 * j)] =
                                          pose_tgt[static_cast<size_t>(
                                              r * kPoseDim + 3 * j)];
                                      v[static_cast<size_t>(
                                          r * 2 * kNumKeypoints + 2 * j + 1)] =
                                          pose_tgt[static_cast<size_t>(
                                              r * kPoseDim + 3 * j + 1)];
                                    }
                                  }
                                  return v;
                                }()));
      TensorF psi =
          neuro::huber_pairs(diff, static_cast<float>(config.huber_delta));
      TensorF coord_term = neuro::mean_all(
          neuro::mul(psi, TensorF::from(R, kNumKeypoints, std::move(coord_w))));

      TensorF conf_pred = gather_cols(pose_all, conf_idx);
      std::vector<float> conf_tgt(static_cast<size_t>(R) * kNumKeypoints);
      for (int64_t r = 0; r < R; ++r) {
        for (int j = 0; j < kNumKeypoints; ++j) {
          conf_tgt[static_cast<size_t>(r * kNumKeypoints + j)] =
              pose_tgt[static_cast<size_t>(r * kPoseDim + 3 * j + 2)];
        }
      }
      TensorF conf_term = neuro::mse_loss(
          conf_pred, TensorF::from(R, kNumKeypoints, std::move(conf_tgt)));

      TensorF j_pose =
          neuro::add(neuro::scale(coord_term, static_cast<float>(config.xi_coord)),
                     neuro::scale(conf_term, static_cast<float>(config.xi_conf)));
      TensorF j_emotion = neuro::kl_rows_loss(
          emo_all, TensorF::from(R, kNumEmotions, std::move(emo_tgt)));
      TensorF j_intent = neuro::bce_loss(
          label_all, TensorF::from(R, 1, std::move(label_tgt)));

      TensorF kl_mat = neuro::scale(
          neuro::add_scalar(
              neuro::sub(neuro::add(neuro::square_t(mu), exp_t(logvar)), logvar),
              -1.0f),
          0.5f);
      TensorF j_kl = neuro::scale(
          neuro::sum_all(neuro::clamp_min_t(kl_mat,
                                            static_cast<float>(config.free_bits))),
          1.0f / static_cast<float>(B));

      TensorF total = neuro::add(
          neuro::add(neuro::scale(j_pose, static_cast<float>(config.lambda_pose)),
                     neuro::scale(j_emotion,
                                  static_cast<float>(config.lambda_emotion))),
          neuro::add(
              neuro::scale(j_intent, static_cast<float>(config.lambda_intent)),
              neuro::scale(j_kl, static_cast<float>(eta))));

      check_component(j_pose.item(), "J_pose", epoch);
      check_component(j_emotion.item(), "J_emotion", epoch);
      check_component(j_intent.item(), "J_intent", epoch);
      check_component(j_kl.item(), "J_KL", epoch);

      total.backward();
      adam.step(im.params);
      neuro::AdamT<float>::zero_grad(im.params);

      const double bw = static_cast<double>(B);
      pose_sum += static_cast<double>(j_pose.item()) * bw;
      emo_sum += static_cast<double>(j_emotion.item()) * bw;
      intent_sum += static_cast<double>(j_intent.item()) * bw;
      kl_sum += static_cast<double>(j_kl.item()) * bw;
      total_sum += static_cast<double>(total.item()) * bw;
    }

    const double n = static_cast<double>(n_windows);
    RvaeEpochRow row;
    row.epoch = epoch;
    row.pose = pose_sum / n;
    row.emotion = emo_sum / n;
    row.intent = intent_sum / n;
    row.kl = kl_sum / n;
    row.eta = eta;
    row.tf_ratio = tau;
    row.total = total_sum / n;
    check_component(row.total, "total", epoch);
    result.log.push_back(row);
  }
  return result;
}

RvaeTrainResult train_rvae(const std::vector<SequenceRecord>& train,
                           const RvaeConfig& config, uint64_t seed) {
  config.validate();
  if (train.empty()) throw ValidationError("train_rvae: empty training set");
  std::vector<Window> wins = windows(train, config.window, config.window_stride);
  if (wins.empty()) {
    throw ValidationError("train_rvae: no training windows (sequences shorter "
                          "than the window length)");
  }
  for (const Window& w : wins) {
    for (const MultimodalFrame& f : w.frames) {
      if (!f.label.has_value()) {
        throw ValidationError("train_rvae: sequence '" + w.sequence_id +
                              "' contains unlabeled frames");
      }
    }
  }
  StandardizationStats stats = fit_standardization(train);
  return train_rvae_windows(wins, stats, config, seed);
}

void write_rvae_log_csv(const std::string& path,
                        const std::vector<RvaeEpochRow>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << "epoch,J_pose,J_emotion,J_intent,J_KL,eta,tf_ratio,total\n";
  for (const RvaeEpochRow& row : log) {
    out << detail::format_int(row.epoch) << ','
        << detail::format_double(row.pose) << ','
        << detail::format_double(row.emotion) << ','
        << detail::format_double(row.intent) << ','
        << detail::format_double(row.kl) << ','
        << detail::format_double(row.eta) << ','
        << detail::format_double(row.tf_ratio) << ','
        << detail::format_double(row.total) << '\n';
  }
  if (!out.good()) throw ValidationError("failed writing '" + path + "'");
}

// ------------------------------------------------------------
// Rebalancing.
// ------------------------------------------------------------

namespace {

struct WindowBalance {
  int64_t total = 0;
  int64_t positive = 0;
  double fraction() const {
    return total == 0 ? 0.0
                      : static_cast<double>(positive) / static_cast<double>(total);
  }
};

WindowBalance window_balance(const std::vector<Window>& wins, int min_positive) {
  WindowBalance b;
  b.total = static_cast<int64_t>(wins.size());
  for (const Window& w : wins) b.positive += window_label(w, min_positive);
  return b;
}

int64_t positives_needed(const WindowBalance& b, double target) {
  // Appending k positive windows moves the fraction to (p + k) / (t + k).
  const double num = target * static_cast<double>(b.total) -
                     static_cast<double>(b.positive);
  return static_cast<int64_t>(std::ceil(num / (1.0 - target)));
}

// Samples length-`window` sequences and keeps those whose single window is
// positive, enforcing the 1% yield rule within a 10x oversampling budget.
std::vector<SequenceRecord> sample_positive_sequences(const MintRvae& model,
                                                      int64_t needed,
                                                      int min_positive,
                                                      uint64_t seed) {
  const int W = model.config().window;
  std::vector<SequenceRecord> kept;
  kept.reserve(static_cast<size_t>(needed));
  int64_t candidates = 0;
  const int64_t budget = std::max<int64_t>(200, 10 * needed);
  const int64_t hard_cap = 200 * needed + 10000;
  Rng seeder(seed);

  while (static_cast<int64_t>(kept.size()) < needed) {
    const int chunk = static_cast<int>(
        std::min<int64_t>(512, std::max<int64_t>(64, needed - static_cast<int64_t>(kept.size()))));
    const uint64_t batch_seed = static_cast<uint64_t>(
        seeder.uniform_int(0, std::numeric_limits<int64_t>::max() - 1));
    std::vector<SequenceRecord> sampled = model.sample(chunk, W, batch_seed);
    candidates += chunk;
    for (SequenceRecord& rec : sampled) {
      int positives = 0;
      for (const MultimodalFrame& f : rec.frames) positives += f.label.value_or(0);
      if (positives >= min_positive) {
        kept.push_back(std::move(rec));
        if (static_cast<int64_t>(kept.size()) == needed) break;
      }
    }
    if (candidates >= budget &&
        static_cast<double>(kept.size()) < 0.01 * static_cast<double>(candidates)) {
      throw ValidationError(
          "generator cannot rebalance: under 1% positive windows after the "
          "oversampling budget (" +
          std::to_string(kept.size()) + " positives in " +
          std::to_string(candidates) + " samples)");
    }
    if (candidates > hard_cap) {
      throw ValidationError(
          "generator cannot rebalance: positive yield too low to reach the "
          "target within a bounded budget");
    }
  }
  return kept;
}

}  // namespace

std::vector<SequenceRecord> rebalance(const std::vector<SequenceRecord>& dataset,
                                      const MintRvae& model,
                                      double target_ratio, uint64_t seed,
                                      int min_positive) {
  if (!(target_ratio > 0.0) || target_ratio > 1.0) {
    throw ValidationError("rebalance: target_ratio must lie in (0, 1]");
  }
  const int W = model.config().window;
  std::vector<Window> wins = windows(dataset, W, 1);
  WindowBalance balance = window_balance(wins, min_positive);
  if (balance.total == 0) throw ValidationError("rebalance: dataset has no windows");
  if (balance.fraction() >= target_ratio) return dataset;
  if (target_ratio >= 1.0) {
    throw ValidationError(
        "rebalance: target 1.0 is unreachable while negative windows exist");
  }

  const int64_t needed = positives_needed(balance, target_ratio);
  std::vector<SequenceRecord> synthetic =
      sample_positive_sequences(model, needed, min_positive, seed);

  std::vector<SequenceRecord> out = dataset;
  int serial = 0;
  for (SequenceRecord& rec : synthetic) {
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "synthaug-%05d", serial++);
    rec.sequence_id = idbuf;
    out.push_back(std::move(rec));
  }
  return out;
}

WindowAugmenter make_rebalance_augmenter(const RvaeConfig& config,
                                         double target_ratio,
                                         int min_positive) {
  if (!(target_ratio > 0.0) || target_ratio >= 1.0) {
    throw ValidationError("augmenter: target_ratio must lie in (0, 1)");
  }
  return [config, target_ratio, min_positive](
             const std::vector<Window>& train_windows,
             const StandardizationStats& stats,
             uint64_t seed) -> std::vector<Window> {
    WindowBalance balance = window_balance(train_windows, min_positive);
    if (balance.total == 0) {
      throw ValidationError("augmenter: no training windows");
    }
    if (balance.fraction() >= target_ratio) return {};

    RvaeTrainResult trained =
        train_rvae_windows(train_windows, stats, config, seed);
    const int64_t needed = positives_needed(balance, target_ratio);
    std::vector<SequenceRecord> synthetic = sample_positive_sequences(
        trained.model, needed, min_positive, seed ^ 0x5deece66dULL);

    std::vector<Window> out;
    out.reserve(synthetic.size());
    for (const SequenceRecord& rec : synthetic) {
      std::vector<Window> w = windows(rec, config.window, 1);
      for (Window& win : w) out.push_back(std::move(win));
    }
    return out;
  };
}

}  // namespace mint
