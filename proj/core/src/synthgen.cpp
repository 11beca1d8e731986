#include "mint/synthgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "mint/rng.hpp"

namespace mint {

namespace {

// Nominal camera frame.
constexpr double kFrameW = 1280.0;
constexpr double kFrameH = 720.0;

// COCO-17 template offsets in body-height units, origin at the nose,
// u to the right, v down. Index order: nose, eyes, ears, shoulders,
// elbows, wrists, hips, knees, ankles (left/right pairs).
struct TemplateOffset {
  double u;
  double v;
};

constexpr TemplateOffset kSkeleton[kNumKeypoints] = {
    {0.000, 0.000},    // 0  nose
    {0.035, -0.035},   // 1  left eye
    {-0.035, -0.035},  // 2  right eye
    {0.075, -0.020},   // 3  left ear
    {-0.075, -0.020},  // 4  right ear
    {0.160, 0.140},    // 5  left shoulder
    {-0.160, 0.140},   // 6  right shoulder
    {0.210, 0.330},    // 7  left elbow
    {-0.210, 0.330},   // 8  right elbow
    {0.230, 0.500},    // 9  left wrist
    {-0.230, 0.500},   // 10 right wrist
    {0.100, 0.540},    // 11 left hip
    {-0.100, 0.540},   // 12 right hip
    {0.110, 0.790},    // 13 left knee
    {-0.110, 0.790},   // 14 right knee
    {0.120, 1.030},    // 15 left ankle
    {-0.120, 1.030},   // 16 right ankle
};

constexpr int kLeftElbow = 7;
constexpr int kLeftWrist = 9;
constexpr double kMaxBodyHeight = 520.0;
constexpr int kOnsetRampFrames = 18;
constexpr int kArmRaiseFrames = 12;
constexpr double kDropSpanExitProb = 1.0 / 8.0;  // mean low-confidence span 8

bool is_face_keypoint(int k) { return k < 5; }

// Baseline (idle) and post-onset emotion mixtures; per-sequence noise
// perturbs the baseline in log space.
constexpr double kIdlePrior[kNumEmotions] = {0.10, 0.06, 0.68, 0.06,
                                             0.04, 0.03, 0.03};
constexpr double kIntentTarget[kNumEmotions] = {0.52, 0.04, 0.26, 0.12,
                                                0.02, 0.02, 0.02};

void renormalize(std::array<double, kNumEmotions>& p) {
  double sum = 0.0;
  for (double& x : p) {
    if (x < 1e-4) x = 1e-4;
    sum += x;
  }
  for (double& x : p) x /= sum;
}

struct EnvProfile {
  EnvironmentId id;
  double kinematics;  // scales growth and arm raise (scene variation)
};

EnvProfile env_profile(int seq_index) {
  switch (seq_index % 3) {
    case 0:
      return {EnvironmentId::env1, 1.00};
    case 1:
      return {EnvironmentId::env2, 1.05};
    default:
      return {EnvironmentId::env3, 0.92};
  }
}

RawSequenceRecord synthesize_sequence(const ScenarioConfig& cfg, int index,
                                      bool intent, Rng rng) {
  const EnvProfile env = env_profile(index);
  const int length = static_cast<int>(
      rng.uniform_int(cfg.length_min, cfg.length_max));

  // Onset uniform over the middle 60% of the sequence.
  int onset = -1;
  if (intent) {
    const int lo = static_cast<int>(std::ceil(0.2 * length));
    const int hi = std::max(lo, static_cast<int>(std::floor(0.8 * length)) - 1);
    onset = static_cast<int>(rng.uniform_int(lo, hi));
  }

  // Per-sequence body, path, and appearance draws.
  const double body0 = rng.uniform(130.0, 180.0);
  const int dir = rng.bernoulli(0.5) ? 1 : -1;
  double u_center = (dir > 0 ? rng.uniform(0.10, 0.24)
                             : rng.uniform(0.76, 0.90)) * kFrameW;
  const double v_nose0 = rng.uniform(0.30, 0.40) * kFrameH;
  const double lateral_speed = rng.uniform(2.2, 3.4) * (body0 / 160.0);
  double span = rng.uniform(0.34, 0.50);  // sideways silhouette
  const double span_target = rng.uniform(0.88, 1.00);
  const double bob_phase = rng.uniform(0.0, 6.2831853);
  const double bob_amp = 0.012;

  std::array<double, kNumEmotions> emotion;
  for (int e = 0; e < kNumEmotions; ++e) {
    emotion[e] = kIdlePrior[e] * std::exp(rng.uniform(-0.3, 0.3));
  }
  renormalize(emotion);

  std::array<double, kNumKeypoints> base_conf;
  for (int k = 0; k < kNumKeypoints; ++k) {
    base_conf[k] = rng.uniform(0.55, 0.95);
  }

  // Transient growth burst for pass-by sequences (a feint toward the
  // desk that defeats single-feature growth detectors).
  int feint_start = -1;
  int feint_len = 0;
  if (!intent && rng.bernoulli(cfg.feint_prob)) {
    feint_start = static_cast<int>(rng.uniform_int(
        static_cast<int64_t>(0.15 * length),
        std::max<int64_t>(1, static_cast<int64_t>(0.70 * length))));
    feint_len = static_cast<int>(rng.uniform_int(10, 16));
  }

  // Markov duty cycle for post-onset growth bursts.
  bool growing = true;
  const double duty = std::clamp(cfg.growth_duty, 0.0, 1.0);
  const double duty_off = kDropSpanExitProb;
  const double duty_on =
      duty >= 1.0 ? 1.0 : duty_off * duty / std::max(1e-9, 1.0 - duty);

  // Low-confidence span chains, one per keypoint.
  std::array<bool, kNumKeypoints> dropped{};
  const double d = cfg.conf_dropout;
  const double drop_enter =
      d <= 0.0 ? 0.0 : kDropSpanExitProb * d / std::max(1e-9, 1.0 - d);
  for (int k = 0; k < kNumKeypoints; ++k) {
    dropped[k] = d > 0.0 && rng.bernoulli(d);
  }

  const double growth = cfg.growth_rate * env.kinematics;
  double log_body = std::log(body0);
  double lift = 0.0;

  RawSequenceRecord rec;
  char idbuf[32];
  std::snprintf(idbuf, sizeof(idbuf), "synth-%04d", index);
  rec.sequence_id = idbuf;
  std::snprintf(idbuf, sizeof(idbuf), "p%02d", index % cfg.n_participants + 1);
  rec.participant_id = idbuf;
  rec.environment = env.id;
  rec.detections.reserve(static_cast<size_t>(length));
  rec.labels.reserve(static_cast<size_t>(length));

  for (int t = 0; t < length; ++t) {
    const bool post = intent && t >= onset;
    const double progress =
        post ? std::min(1.0, static_cast<double>(t - onset) / kOnsetRampFrames)
             : 0.0;

    // Scale process: sustained growth after onset, transient feint
    // bursts for pass-bys, small wobble everywhere.
    double g = 0.0;
    if (post) {
      if (duty >= 1.0) {
        growing = true;
      } else if (growing) {
        if (rng.bernoulli(duty_off)) growing = false;
      } else {
        if (rng.bernoulli(duty_on)) growing = true;
      }
      if (growing) g = growth;
    } else if (feint_start >= 0 && t >= feint_start &&
               t < feint_start + feint_len) {
      g = growth * cfg.feint_scale;
    }
    log_body += g + rng.normal(0.0, 0.0012);
    log_body = std::min(log_body, std::log(kMaxBodyHeight));
    const double body = std::exp(log_body);

    // Path: lateral walk, decelerating and centering after onset.
    const double speed = lateral_speed * (1.0 - progress);
    u_center += dir * speed;
    if (post) {
      u_center += cfg.center_pull * 0.06 * progress * (0.5 * kFrameW - u_center);
    }
    u_center = std::clamp(u_center, 0.05 * kFrameW, 0.95 * kFrameW);
    const double v_nose =
        v_nose0 + bob_amp * body * std::sin(bob_phase + 0.5236 * t);

    // Orientation: post-onset turn toward the camera widens the span.
    if (post) span += 0.12 * progress * (span_target - span);
    const double span_norm = std::clamp((span - 0.30) / 0.70, 0.0, 1.0);

    // One arm raises toward the desk after onset.
    if (post) {
      lift = cfg.arm_raise * env.kinematics *
             std::min(1.0, static_cast<double>(t - onset) / kArmRaiseFrames);
    }

    RawDetection det;
    det.person_missing = false;
    double u_min = 1e30, u_max = -1e30, v_min = 1e30, v_max = -1e30;
    for (int k = 0; k < kNumKeypoints; ++k) {
      double off_u = kSkeleton[k].u * span;
      double off_v = kSkeleton[k].v;
      if (k == kLeftWrist) {
        off_v -= lift;
        off_u *= 1.0 - 0.3 * (lift / std::max(1e-9, cfg.arm_raise));
      } else if (k == kLeftElbow) {
        off_v -= 0.55 * lift;
      }

      if (d > 0.0) {
        if (dropped[k]) {
          if (rng.bernoulli(kDropSpanExitProb)) dropped[k] = false;
        } else if (rng.bernoulli(drop_enter)) {
          dropped[k] = true;
        }
      }
      const double jitter_scale =
          cfg.jitter_sigma * body * (dropped[k] ? 3.0 : 1.0);
      double u = u_center + off_u * body + rng.normal(0.0, jitter_scale);
      double v = v_nose + off_v * body + rng.normal(0.0, jitter_scale);

      double conf = base_conf[k] + rng.uniform(-0.03, 0.03);
      if (is_face_keypoint(k)) conf *= 0.30 + 0.70 * span_norm;
      if (v > kFrameH) {  // below the frame edge: clamped and unreliable
        v = kFrameH;
        conf *= 0.15;
      }
      u = std::clamp(u, 0.0, kFrameW);
      if (dropped[k]) conf = rng.uniform(0.03, 0.15);
      conf = std::clamp(conf, 0.01, 0.99);

      det.keypoints[static_cast<size_t>(k)] = Keypoint{u, v, conf};
      u_min = std::min(u_min, u);
      u_max = std::max(u_max, u);
      v_min = std::min(v_min, v);
      v_max = std::max(v_max, v);
    }
    const double pad = 0.05 * body;
    det.bbox =
        BoundingBox{u_min - pad, v_min - pad, (u_max - u_min) + 2.0 * pad,
                    (v_max - v_min) + 2.0 * pad};

    // Emotion dynamics: pull toward the intent mix after onset, noise
    // and renormalization everywhere.
    if (post) {
      for (int e = 0; e < kNumEmotions; ++e) {
        emotion[e] += cfg.emotion_drift_rate * (kIntentTarget[e] - emotion[e]);
      }
    }
    for (int e = 0; e < kNumEmotions; ++e) {
      emotion[e] += rng.uniform(-cfg.emotion_noise, cfg.emotion_noise);
    }
    renormalize(emotion);
    EmotionDistribution face;
    face.p = emotion;
    det.face_emotion = face;

    rec.detections.push_back(det);
    rec.labels.push_back(post ? 1 : 0);
  }
  return rec;
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_sequences < 1) throw ValidationError("scenario: n_sequences must be >= 1");
  if (length_min < 15) {
    throw ValidationError("scenario: length_min must be >= 15 (window length)");
  }
  if (length_max < length_min) {
    throw ValidationError("scenario: length_max below length_min");
  }
  if (intent_fraction < 0.0 || intent_fraction > 1.0) {
    throw ValidationError("scenario: intent_fraction outside [0, 1]");
  }
  if (n_participants < 1) {
    throw ValidationError("scenario: n_participants must be >= 1");
  }
  if (growth_rate < 0 || growth_duty < 0 || growth_duty > 1 || feint_prob < 0 ||
      feint_prob > 1 || feint_scale < 0 || arm_raise < 0 || frontness_gain < 0 ||
      frontness_gain > 1 || center_pull < 0 || center_pull > 1) {
    throw ValidationError("scenario: kinematic parameters out of range");
  }
  if (emotion_drift_rate < 0 || emotion_drift_rate > 1 || emotion_noise < 0) {
    throw ValidationError("scenario: emotion parameters out of range");
  }
  if (jitter_sigma < 0 || conf_dropout < 0 || conf_dropout > 0.9) {
    throw ValidationError("scenario: noise parameters out of range");
  }
}

ScenarioConfig preset_separable() {
  ScenarioConfig c;
  // Growth is kept low enough that the frame-height cap never binds
  // inside the longest default sequences, so every positive window
  // carries growth and a bbox-growth stump separates cleanly.
  c.growth_rate = 0.008;
  c.growth_duty = 1.0;
  c.feint_prob = 0.0;
  c.arm_raise = 0.30;
  c.frontness_gain = 0.95;
  c.emotion_drift_rate = 0.14;
  c.emotion_noise = 0.004;
  c.jitter_sigma = 0.0;
  c.conf_dropout = 0.0;
  return c;
}

ScenarioConfig preset_standard() {
  ScenarioConfig c;
  c.growth_rate = 0.011;
  c.growth_duty = 0.65;
  c.feint_prob = 0.55;
  c.feint_scale = 0.95;
  c.arm_raise = 0.24;
  c.frontness_gain = 0.85;
  c.emotion_drift_rate = 0.10;
  c.emotion_noise = 0.010;
  c.jitter_sigma = 0.02;
  c.conf_dropout = 0.10;
  return c;
}

ScenarioConfig preset_hard() {
  ScenarioConfig c;
  c.growth_rate = 0.009;
  c.growth_duty = 0.38;
  c.feint_prob = 1.0;
  c.feint_scale = 1.15;
  c.arm_raise = 0.14;
  c.frontness_gain = 0.55;
  c.emotion_drift_rate = 0.05;
  c.emotion_noise = 0.022;
  c.jitter_sigma = 0.04;
  c.conf_dropout = 0.30;
  return c;
}

ScenarioConfig preset_by_name(const std::string& name) {
  if (name == "separable") return preset_separable();
  if (name == "standard") return preset_standard();
  if (name == "hard") return preset_hard();
  throw ValidationError("unknown difficulty preset '" + name +
                        "' (expected separable, standard, or hard)");
}

std::vector<RawSequenceRecord> generate_raw(const ScenarioConfig& config) {
  config.validate();
  Rng master(config.seed);

  // Exact intent count; assignment shuffled so classes mix across
  // participants and environments.
  const int n = config.n_sequences;
  const int n_intent = static_cast<int>(std::llround(config.intent_fraction * n));
  std::vector<int> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  master.shuffle(order);
  std::vector<bool> intent(static_cast<size_t>(n), false);
  for (int i = 0; i < n_intent; ++i) intent[static_cast<size_t>(order[i])] = true;

  // Independent per-sequence streams, forked in index order.
  std::vector<RawSequenceRecord> out;
  out.reserve(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    Rng child = master.fork(static_cast<uint64_t>(i));
    out.push_back(synthesize_sequence(config, i, intent[static_cast<size_t>(i)],
                                      std::move(child)));
  }
  return out;
}

SequenceRecord to_sequence_record(const RawSequenceRecord& raw) {
  if (raw.detections.size() != raw.labels.size()) {
    throw ValidationError("raw sequence '" + raw.sequence_id +
                          "': detection and label counts differ");
  }
  SequenceRecord rec;
  rec.sequence_id = raw.sequence_id;
  rec.participant_id = raw.participant_id;
  rec.environment = raw.environment;
  rec.frames.reserve(raw.detections.size());
  const StandardizationStats identity = StandardizationStats::identity();
  for (size_t t = 0; t < raw.detections.size(); ++t) {
    rec.frames.push_back(
        build_frame(raw.detections[t], identity, raw.labels[t]));
  }
  return rec;
}

std::vector<SequenceRecord> generate(const ScenarioConfig& config) {
  const std::vector<RawSequenceRecord> raw = generate_raw(config);
  std::vector<SequenceRecord> out;
  out.reserve(raw.size());
  for (const RawSequenceRecord& r : raw) out.push_back(to_sequence_record(r));
  return out;
}

}  // namespace mint
