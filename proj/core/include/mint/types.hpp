#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace mint {

// ============================================================================
// Errors
// ============================================================================

// Raised for malformed inputs, contract violations and bad configuration.
// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised when training or inference produces non-finite values.
// The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// ============================================================================
// Dimensions and emotion vocabulary
// ============================================================================

inline constexpr int kNumKeypoints = 17;
inline constexpr int kPoseDim = 3 * kNumKeypoints;  // (u, v, score) per keypoint
inline constexpr int kNumEmotions = 7;
inline constexpr int kClassifierDim = kPoseDim + kNumEmotions;  // 58
inline constexpr int kFrameDim = kClassifierDim + 1;            // 59, label appended

// Fixed category order for every emotion vector in the toolkit.
enum class Emotion : int {
  happy = 0,
  sad = 1,
  neutral = 2,
  surprise = 3,
  angry = 4,
  fear = 5,
  disgust = 6,
};

inline const std::array<std::string, kNumEmotions>& emotion_names() {
  static const std::array<std::string, kNumEmotions> names = {
      "happy", "sad", "neutral", "surprise", "angry", "fear", "disgust"};
  return names;
}

// ============================================================================
// Geometry
// ============================================================================

struct Keypoint {
  double u = 0.0;      // horizontal image coordinate
  double v = 0.0;      // vertical image coordinate
  double score = 0.0;  // detector confidence in [0, 1]
};

struct BoundingBox {
  double u_min = 0.0;
  double v_min = 0.0;
  double width = 0.0;
  double height = 0.0;

  bool degenerate() const { return !(width > 0.0) || !(height > 0.0); }
};

// ============================================================================
// Per-frame modalities
// ============================================================================

// 51 values, keypoint-major: (u, v, score) for each of the 17 keypoints.
// After box normalization u and v live in [0, 1] up to jitter; scores always
// stay in [0, 1].
struct PoseDescriptor {
  std::array<double, kPoseDim> values{};

  double& at(int keypoint, int channel) { return values[3 * keypoint + channel]; }
  double at(int keypoint, int channel) const { return values[3 * keypoint + channel]; }
  double score(int keypoint) const { return values[3 * keypoint + 2]; }

  bool all_zero() const {
    for (double x : values)
      if (x != 0.0) return false;
    return true;
  }
};

// Probability simplex over the seven emotion categories.
struct EmotionDistribution {
  std::array<double, kNumEmotions> p{};

  double sum() const {
    double s = 0.0;
    for (double x : p) s += x;
    return s;
  }

  // The stored vector must sum to one within 1e-6 and have entries in [0, 1].
  bool valid(double tol = 1e-6) const {
    for (double x : p)
      if (!(x >= 0.0) || !(x <= 1.0) || !std::isfinite(x)) return false;
    return std::abs(sum() - 1.0) <= tol;
  }

  static EmotionDistribution neutral() {
    EmotionDistribution e;
    e.p[static_cast<int>(Emotion::neutral)] = 1.0;
    return e;
  }
};

struct MultimodalFrame {
  PoseDescriptor pose;
  EmotionDistribution emotion;
  std::optional<int> label;  // 0 or 1 when present; intent ground truth
};

// ============================================================================
// Sequences and windows
// ============================================================================

enum class EnvironmentId : int {
  env1 = 1,
  env2 = 2,
  env3 = 3,
  synthetic = 0,  // generated footage, never allowed in evaluation folds
};

std::string to_string(EnvironmentId env);
EnvironmentId environment_from_string(const std::string& s);

struct SequenceRecord {
  std::string sequence_id;
  std::string participant_id;
  EnvironmentId environment = EnvironmentId::env1;
  std::vector<MultimodalFrame> frames;
  double frame_rate = 30.0;  // Hz; not stored in dataset files

  bool labeled() const {
    for (const auto& f : frames)
      if (!f.label.has_value()) return false;
    return !frames.empty();
  }

  // Index of the first 0 -> 1 label transition, if any.
  std::optional<int> onset_index() const;
};

// A fixed-length slice of a sequence. Windows own their frames so synthetic
// windows without a backing record are representable.
struct Window {
  std::string sequence_id;
  std::string participant_id;
  EnvironmentId environment = EnvironmentId::env1;
  int start = 0;
  std::vector<MultimodalFrame> frames;
  bool synthetic = false;
};

// Positive window rule: at least `min_positive` of the frames carry label 1.
// Throws ValidationError when any frame is unlabeled.
int window_label(const Window& window, int min_positive = 7);

}  // namespace mint
