// ============================================================
// Real-time streaming inference engine: a 15-frame sliding window
// over pushed frames, full-window model forward each frame, and the
// engagement state machine (no_intent / transitional / engaged)
// driven by the k-consecutive-frames rule.
//
// The engine recomputes the full window every frame, so streaming
// probabilities are bit-identical to batch windowing of the same
// sequence (the primary correctness property). An optional
// recurrent-carry fast path for GRU/LSTM backbones carries hidden
// state across frames instead; its probability at frame t then
// conditions on the whole history, not the last 15 frames, which
// coincides with windowed output only while t < window length.
// ============================================================
#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "mint/classifier.hpp"
#include "mint/types.hpp"

namespace mint {

enum class EngagementBand { no_intent, transitional, engaged };

std::string to_string(EngagementBand b);

struct EngineConfig {
  double decision_threshold = 0.5;  // per-frame probability threshold
  int k_run = 7;                    // consecutive frames to engage
  double low_band = 0.4;            // below: no_intent; between: transitional
  int disengage_frames = 15;        // frames without a k-run before dropping
  bool recurrent_carry = false;     // GRU/LSTM fast path (see header note)
  bool pre_standardized = false;    // pushed frames already live in the
                                    // standardized feature space

  void validate() const;
};

struct PushResult {
  std::optional<double> prob;  // absent during warm-up
  EngagementBand state = EngagementBand::no_intent;
  double latency_ms = 0.0;
};

struct StreamStats {
  int64_t frames = 0;
  double p50_ms = 0.0;
  double p95_ms = 0.0;
  double max_ms = 0.0;
  int64_t dropped = 0;  // frames rejected (dimension mismatch)
};

class EngagementEngine {
 public:
  EngagementEngine(IntentClassifier model, EngineConfig config);

  // Buffers the frame; once 15 frames are buffered, runs the model on
  // the current window and advances the state machine. Engagement fires
  // when k_run consecutive probabilities reach decision_threshold and
  // holds until no run has fired for disengage_frames frames.
  PushResult push_frame(const MultimodalFrame& frame);

  void reset();  // clears buffer, state machine, and latency stats

  EngagementBand state() const { return band_; }
  int run_length() const { return run_length_; }
  const IntentClassifier& model() const { return model_; }
  const EngineConfig& engine_config() const { return config_; }

  StreamStats stats() const;

 private:
  double window_probability();

  IntentClassifier model_;
  EngineConfig config_;
  std::deque<MultimodalFrame> buffer_;
  EngagementBand band_ = EngagementBand::no_intent;
  int run_length_ = 0;
  bool fired_ = false;
  int frames_since_fire_ = 0;
  int64_t frames_ = 0;
  int64_t dropped_ = 0;
  std::vector<double> latencies_ms_;
  std::vector<float> carry_hidden_;  // recurrent fast path state
  std::vector<float> carry_cell_;    // LSTM cell state
};

// ------------------------------------------------------------
// Replay: run a stored sequence through a fresh engine.
// ------------------------------------------------------------

struct ReplayFrame {
  int frame_idx = 0;
  std::optional<double> prob;
  EngagementBand state = EngagementBand::no_intent;
  double latency_ms = 0.0;
};

struct ReplayResult {
  std::vector<ReplayFrame> trace;
  StreamStats stats;
};

ReplayResult replay(const IntentClassifier& model, const SequenceRecord& seq,
                    const EngineConfig& config);

}  // namespace mint
