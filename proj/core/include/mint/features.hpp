#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mint/types.hpp"

namespace mint {

// ============================================================================
// Raw detections (pixel space)
// ============================================================================

struct RawDetection {
  std::array<Keypoint, kNumKeypoints> keypoints{};
  BoundingBox bbox;
  std::optional<EmotionDistribution> face_emotion;  // absent when no face found
  bool person_missing = false;                      // no detection this frame
};

// Box normalization. Coordinates map to (u - u_min) / width and
// (v - v_min) / height; scores pass through untouched. Keypoints with score 0
// are extractor placeholders and stay at (0, 0, 0). A degenerate box raises
// ValidationError; a missing person yields the all-zero descriptor.
PoseDescriptor normalize_pose(const RawDetection& det);

// ============================================================================
// Channel standardization
// ============================================================================

// Per-channel affine parameters for the 51 pose values. Score channels keep
// identity (mean 0, std 1) so confidences survive bit for bit.
struct StandardizationStats {
  std::array<double, kPoseDim> mean{};
  std::array<double, kPoseDim> std{};

  static StandardizationStats identity();
  bool valid() const;
  bool is_identity() const;
};

// Population statistics over the coordinate channels of every training frame.
// Channels with zero variance are clamped to std 1e-6 and reported through the
// warning sink. Requires at least two frames.
StandardizationStats fit_standardization(const std::vector<SequenceRecord>& train,
                                         std::vector<std::string>* warnings = nullptr);

PoseDescriptor apply_standardization(const PoseDescriptor& pose,
                                     const StandardizationStats& stats);
PoseDescriptor invert_standardization(const PoseDescriptor& pose,
                                      const StandardizationStats& stats);

// ============================================================================
// Frame assembly and model views
// ============================================================================

// Normalizes, standardizes and attaches the emotion distribution (neutral
// one-hot when the face was not detected).
MultimodalFrame build_frame(const RawDetection& det, const StandardizationStats& stats,
                            std::optional<int> label = std::nullopt);

enum class FeatureSet { pose_only, emotion_only, fused };

int feature_dim(FeatureSet set);
FeatureSet feature_set_from_string(const std::string& s);
std::string to_string(FeatureSet set);

// Flat per-frame vector for the chosen view: pose 51, emotion 7 or both 58.
std::vector<double> feature_select(const MultimodalFrame& frame, FeatureSet set);

// Stacked float32 matrix (frames x feature_dim) for a window of frames, the
// exact layout consumed by the classifiers. Standardization is applied here
// unless the window is synthetic (generated frames already live in the
// standardized space).
std::vector<float> window_feature_matrix(const Window& window,
                                         const StandardizationStats& stats,
                                         FeatureSet set);

// 59-dim generative view: standardized pose, emotion, label.
std::vector<float> window_generative_matrix(const Window& window,
                                            const StandardizationStats& stats);

// ============================================================================
// Adapter stream
// ============================================================================
//
// Pixel-space JSONL, one frame per line:
//   {"frame_idx": int, "kp_px": [51 floats] | null, "bbox": [u_min, v_min, w, h]
//    | null, "emo": [7 floats] (optional), "label": 0/1 (optional),
//    "seq_id": string (optional), "participant_id": string (optional),
//    "env_id": 1|2|3|"synthetic" (optional)}
// A null kp_px or bbox marks a missing person detection.

struct AdapterFrame {
  int frame_idx = 0;
  RawDetection detection;
  std::optional<int> label;
  std::string sequence_id;
  std::string participant_id;
  EnvironmentId environment = EnvironmentId::env1;
};

AdapterFrame parse_adapter_line(const std::string& line);
std::string format_adapter_line(const AdapterFrame& frame);

}  // namespace mint
