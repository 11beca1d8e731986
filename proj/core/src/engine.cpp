#include "mint/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mint/metrics.hpp"

namespace mint {

std::string to_string(EngagementBand b) {
  switch (b) {
    case EngagementBand::no_intent: return "no_intent";
    case EngagementBand::transitional: return "transitional";
    case EngagementBand::engaged: return "engaged";
  }
  throw ValidationError("unknown engagement band");
}

void EngineConfig::validate() const {
  if (decision_threshold < 0.0 || decision_threshold > 1.0) {
    throw ValidationError("engine: decision_threshold must lie in [0, 1]");
  }
  if (k_run < 1) throw ValidationError("engine: k_run must be >= 1");
  if (low_band < 0.0 || low_band > decision_threshold) {
    throw ValidationError(
        "engine: low_band must lie in [0, decision_threshold]");
  }
  if (disengage_frames < 1) {
    throw ValidationError("engine: disengage_frames must be >= 1");
  }
}

namespace {

bool frame_is_finite(const MultimodalFrame& frame) {
  for (double v : frame.pose.values) {
    if (!std::isfinite(v)) return false;
  }
  for (double v : frame.emotion.p) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

EngagementEngine::EngagementEngine(IntentClassifier model, EngineConfig config)
    : model_(std::move(model)), config_(config) {
  config_.validate();
  const ClassifierConfig& mc = model_.config();
  if (config_.k_run > mc.window) {
    throw ValidationError("engine: k_run exceeds the model window");
  }
  if (config_.recurrent_carry && mc.backbone == Backbone::transformer) {
    throw ValidationError(
        "engine: the recurrent-carry fast path needs a gru or lstm backbone");
  }
}

void EngagementEngine::reset() {
  buffer_.clear();
  band_ = EngagementBand::no_intent;
  run_length_ = 0;
  fired_ = false;
  frames_since_fire_ = 0;
  frames_ = 0;
  dropped_ = 0;
  latencies_ms_.clear();
  carry_hidden_.clear();
  carry_cell_.clear();
}

double EngagementEngine::window_probability() {
  Window w;
  w.synthetic = config_.pre_standardized;
  w.frames.assign(buffer_.begin(), buffer_.end());
  const std::vector<float> features =
      window_feature_matrix(w, model_.stats(), model_.config().features);
  return model_.forward_frame_probs(features, 1).back();
}

PushResult EngagementEngine::push_frame(const MultimodalFrame& frame) {
  PushResult result;
  if (!frame_is_finite(frame)) {
    ++dropped_;
    result.state = band_;
    return result;
  }
  const auto t0 = std::chrono::steady_clock::now();
  ++frames_;

  const int W = model_.config().window;
  buffer_.push_back(frame);
  if (static_cast<int>(buffer_.size()) > W) buffer_.pop_front();

  if (config_.recurrent_carry) {
    Window single;
    single.synthetic = config_.pre_standardized;
    single.frames.push_back(frame);
    const std::vector<float> features = window_feature_matrix(
        single, model_.stats(), model_.config().features);
    result.prob = model_.step_prob(features, carry_hidden_, carry_cell_);
  } else if (static_cast<int>(buffer_.size()) == W) {
    result.prob = window_probability();
  }

  if (result.prob.has_value()) {
    const double p = *result.prob;
    if (p >= config_.decision_threshold) {
      ++run_length_;
    } else {
      run_length_ = 0;
    }
    if (run_length_ >= config_.k_run) {
      band_ = EngagementBand::engaged;
      fired_ = true;
      frames_since_fire_ = 0;
    } else {
      if (frames_since_fire_ < config_.disengage_frames) ++frames_since_fire_;
      if (band_ == EngagementBand::engaged &&
          frames_since_fire_ >= config_.disengage_frames) {
        band_ = EngagementBand::no_intent;
        fired_ = false;
      }
      if (band_ != EngagementBand::engaged) {
        band_ = p >= config_.low_band ? EngagementBand::transitional
                                      : EngagementBand::no_intent;
      }
    }
    const auto t1 = std::chrono::steady_clock::now();
    result.latency_ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
    latencies_ms_.push_back(result.latency_ms);
  }
  result.state = band_;
  return result;
}

StreamStats EngagementEngine::stats() const {
  StreamStats s;
  s.frames = frames_;
  s.dropped = dropped_;
  if (!latencies_ms_.empty()) {
    s.p50_ms = percentile(latencies_ms_, 0.5);
    s.p95_ms = percentile(latencies_ms_, 0.95);
    s.max_ms = *std::max_element(latencies_ms_.begin(), latencies_ms_.end());
  }
  return s;
}

ReplayResult replay(const IntentClassifier& model, const SequenceRecord& seq,
                    const EngineConfig& config) {
  EngineConfig effective = config;
  effective.pre_standardized =
      config.pre_standardized ||
      seq.environment == EnvironmentId::synthetic;
  EngagementEngine engine(model, effective);
  ReplayResult out;
  out.trace.reserve(seq.frames.size());
  for (size_t t = 0; t < seq.frames.size(); ++t) {
    const PushResult r = engine.push_frame(seq.frames[t]);
    ReplayFrame row;
    row.frame_idx = static_cast<int>(t);
    row.prob = r.prob;
    row.state = r.state;
    row.latency_ms = r.latency_ms;
    out.trace.push_back(row);
  }
  out.stats = engine.stats();
  return out;
}

}  // namespace mint
