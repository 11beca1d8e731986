// ============================================================
// Procedural generator of desk-scale approach / pass-by scenes.
//
// Sequences are synthesized in raw pixel space (COCO-17 keypoints,
// person bounding box, face emotion distribution, intent labels) and
// then routed through the real pose-normalization pipeline, so every
// generated dataset exercises the same feature path as live input.
//
// Intent sequences approach the camera: the bounding box grows, the
// body turns frontal (shoulder span widens, face confidence rises),
// one arm raises, the nose drifts toward the image center, and the
// emotion mix drifts toward a happy/neutral blend after onset.
// No-intent sequences translate laterally across the frame with no
// sustained growth.  Labels flip 0 -> 1 exactly once, at the onset.
// ============================================================
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mint/features.hpp"
#include "mint/types.hpp"

namespace mint {

// ------------------------------------------------------------
// Scenario configuration.  Presets below give three difficulty
// tiers; every knob can also be set directly.
// ------------------------------------------------------------

struct ScenarioConfig {
  int n_sequences = 60;
  int length_min = 90;            // frames; must be >= 15
  int length_max = 150;
  double intent_fraction = 0.5;   // exact count by construction
  int n_participants = 12;

  // Approach kinematics.
  double growth_rate = 0.012;     // per-frame bbox scale growth after onset
  double growth_duty = 1.0;       // fraction of post-onset frames that grow
  double feint_prob = 0.0;        // no-intent: chance of a transient growth burst
  double feint_scale = 1.0;       // burst growth relative to growth_rate
  double arm_raise = 0.24;        // wrist lift amplitude, body-height units
  double frontness_gain = 0.85;   // post-onset turn toward the camera (0..1)
  double center_pull = 0.55;      // nose drift toward image center (0..1)

  // Emotion dynamics.
  double emotion_drift_rate = 0.10;  // per-frame pull toward the intent mix
  double emotion_noise = 0.01;

  // Noise model.
  double jitter_sigma = 0.0;      // coordinate jitter, body-height units
  double conf_dropout = 0.0;      // stationary fraction of low-confidence spans

  uint64_t seed = 1234;

  void validate() const;
};

// Difficulty presets:
//   separable - large kinematic gap, no noise; sanity tier.
//   standard  - jitter sigma 0.02, 10% confidence dropout, growth bursts
//               and pass-by feints that defeat single-feature stumps.
//   hard      - overlapping kinematics, 30% dropout; stress tier.
ScenarioConfig preset_separable();
ScenarioConfig preset_standard();
ScenarioConfig preset_hard();
ScenarioConfig preset_by_name(const std::string& name);

// ------------------------------------------------------------
// Raw (pixel-space) form, before pose normalization.
// ------------------------------------------------------------

struct RawSequenceRecord {
  std::string sequence_id;
  std::string participant_id;
  EnvironmentId environment = EnvironmentId::env1;
  std::vector<RawDetection> detections;  // one per frame
  std::vector<int> labels;               // 0/1 per frame, single 0->1 transition
};

// Generation is pure in the config (which carries the seed): two calls
// with equal configs produce identical output.
std::vector<RawSequenceRecord> generate_raw(const ScenarioConfig& config);

// Raw record -> datamodel record via the real normalization path
// (bounding-box-relative pose, no standardization).
SequenceRecord to_sequence_record(const RawSequenceRecord& raw);

// generate_raw + to_sequence_record over the whole scenario.
std::vector<SequenceRecord> generate(const ScenarioConfig& config);

}  // namespace mint
