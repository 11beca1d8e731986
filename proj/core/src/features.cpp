#include "mint/features.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

#include "text_util.hpp"

namespace mint {

using json = nlohmann::json;

// ============================================================================
// Box normalization
// ============================================================================

PoseDescriptor normalize_pose(const RawDetection& det) {
  PoseDescriptor out;
  if (det.person_missing) return out;  // all-zero placeholder frame
  if (det.bbox.degenerate())
    throw ValidationError("normalize_pose: degenerate bounding box (width=" +
                          detail::format_double(det.bbox.width) + ", height=" +
                          detail::format_double(det.bbox.height) + ")");
  for (int k = 0; k < kNumKeypoints; ++k) {
    const Keypoint& kp = det.keypoints[k];
    if (kp.score < 0.0 || kp.score > 1.0)
      throw ValidationError("normalize_pose: keypoint score outside [0, 1]");
    if (kp.score == 0.0) continue;  // extractor placeholder stays at (0, 0, 0)
    out.at(k, 0) = (kp.u - det.bbox.u_min) / det.bbox.width;
    out.at(k, 1) = (kp.v - det.bbox.v_min) / det.bbox.height;
    out.at(k, 2) = kp.score;
  }
  return out;
}

// ============================================================================
// Standardization
// ============================================================================

namespace {
inline bool is_score_channel(int i) { return i % 3 == 2; }
}  // namespace

StandardizationStats StandardizationStats::identity() {
  StandardizationStats s;
  s.mean.fill(0.0);
  s.std.fill(1.0);
  return s;
}

bool StandardizationStats::valid() const {
  for (int i = 0; i < kPoseDim; ++i) {
    if (!std::isfinite(mean[i]) || !std::isfinite(std[i]) || !(std[i] > 0.0)) return false;
    if (is_score_channel(i) && (mean[i] != 0.0 || std[i] != 1.0)) return false;
  }
  return true;
}

bool StandardizationStats::is_identity() const {
  for (int i = 0; i < kPoseDim; ++i) {
    if (mean[i] != 0.0 || std[i] != 1.0) return false;
  }
  return true;
}

StandardizationStats fit_standardization(const std::vector<SequenceRecord>& train,
                                         std::vector<std::string>* warnings) {
  size_t n = 0;
  for (const auto& seq : train) n += seq.frames.size();
  if (n < 2)
    throw ValidationError("fit_standardization: need at least 2 training frames, have " +
                          std::to_string(n));

  StandardizationStats stats = StandardizationStats::identity();
  // Two passes keep the variance numerically clean.
  std::array<double, kPoseDim> mean{};
  for (const auto& seq : train)
    for (const auto& f : seq.frames)
      for (int i = 0; i < kPoseDim; ++i) mean[i] += f.pose.values[i];
  for (int i = 0; i < kPoseDim; ++i) mean[i] /= static_cast<double>(n);

  std::array<double, kPoseDim> var{};
  for (const auto& seq : train)
    for (const auto& f : seq.frames)
      for (int i = 0; i < kPoseDim; ++i) {
        double d = f.pose.values[i] - mean[i];
        var[i] += d * d;
      }
  for (int i = 0; i < kPoseDim; ++i) var[i] /= static_cast<double>(n);  // population

  for (int i = 0; i < kPoseDim; ++i) {
    if (is_score_channel(i)) continue;  // confidences pass through untouched
    stats.mean[i] = mean[i];
    double sd = std::sqrt(var[i]);
    if (sd <= 0.0) {
      sd = 1e-6;
      if (warnings)
        warnings->push_back("standardization: channel " + std::to_string(i) +
                            " has zero variance, std clamped to 1e-6");
    }
    stats.std[i] = sd;
  }
  return stats;
}

PoseDescriptor apply_standardization(const PoseDescriptor& pose,
                                     const StandardizationStats& stats) {
  PoseDescriptor out = pose;
  for (int i = 0; i < kPoseDim; ++i) {
    if (is_score_channel(i)) continue;
    out.values[i] = (pose.values[i] - stats.mean[i]) / stats.std[i];
  }
  return out;
}

PoseDescriptor invert_standardization(const PoseDescriptor& pose,
                                      const StandardizationStats& stats) {
  PoseDescriptor out = pose;
  for (int i = 0; i < kPoseDim; ++i) {
    if (is_score_channel(i)) continue;
    out.values[i] = pose.values[i] * stats.std[i] + stats.mean[i];
  }
  return out;
}

// ============================================================================
// Frame assembly and views
// ============================================================================

MultimodalFrame build_frame(const RawDetection& det, const StandardizationStats& stats,
                            std::optional<int> label) {
  MultimodalFrame frame;
  frame.pose = apply_standardization(normalize_pose(det), stats);
  if (det.face_emotion.has_value()) {
    if (!det.face_emotion->valid(1e-3))
      throw ValidationError("build_frame: emotion distribution off the simplex");
    frame.emotion = *det.face_emotion;
    double s = frame.emotion.sum();
    if (std::abs(s - 1.0) > 1e-6)
      for (double& x : frame.emotion.p) x /= s;
  } else {
    frame.emotion = EmotionDistribution::neutral();
  }
  if (label.has_value() && *label != 0 && *label != 1)
    throw ValidationError("build_frame: label must be 0 or 1");
  frame.label = label;
  return frame;
}

int feature_dim(FeatureSet set) {
  switch (set) {
    case FeatureSet::pose_only: return kPoseDim;
    case FeatureSet::emotion_only: return kNumEmotions;
    case FeatureSet::fused: return kClassifierDim;
  }
  throw ValidationError("unknown feature set");
}

FeatureSet feature_set_from_string(const std::string& s) {
  if (s == "pose" || s == "pose_only") return FeatureSet::pose_only;
  if (s == "emotion" || s == "emotion_only") return FeatureSet::emotion_only;
  if (s == "fused") return FeatureSet::fused;
  throw ValidationError("unknown feature set '" + s + "' (pose|emotion|fused)");
}

std::string to_string(FeatureSet set) {
  switch (set) {
    case FeatureSet::pose_only: return "pose";
    case FeatureSet::emotion_only: return "emotion";
    case FeatureSet::fused: return "fused";
  }
  throw ValidationError("unknown feature set");
}

std::vector<double> feature_select(const MultimodalFrame& frame, FeatureSet set) {
  std::vector<double> out;
  out.reserve(feature_dim(set));
  if (set == FeatureSet::pose_only || set == FeatureSet::fused)
    out.insert(out.end(), frame.pose.values.begin(), frame.pose.values.end());
  if (set == FeatureSet::emotion_only || set == FeatureSet::fused)
    out.insert(out.end(), frame.emotion.p.begin(), frame.emotion.p.end());
  return out;
}

namespace {

// Single assembly path shared by batch evaluation and the streaming engine so
// both produce bit-identical inputs.
void append_frame_features(std::vector<float>& out, const MultimodalFrame& frame,
                           const StandardizationStats& stats, FeatureSet set,
                           bool already_standardized, bool with_label) {
  PoseDescriptor pose =
      already_standardized ? frame.pose : apply_standardization(frame.pose, stats);
  if (set == FeatureSet::pose_only || set == FeatureSet::fused)
    for (double v : pose.values) out.push_back(static_cast<float>(v));
  if (set == FeatureSet::emotion_only || set == FeatureSet::fused)
    for (double v : frame.emotion.p) out.push_back(static_cast<float>(v));
  if (with_label) {
    if (!frame.label.has_value())
      throw ValidationError("generative view requires labeled frames");
    out.push_back(static_cast<float>(*frame.label));
  }
}

}  // namespace

std::vector<float> window_feature_matrix(const Window& window,
                                         const StandardizationStats& stats, FeatureSet set) {
  std::vector<float> out;
  out.reserve(window.frames.size() * static_cast<size_t>(feature_dim(set)));
  for (const auto& f : window.frames)
    append_frame_features(out, f, stats, set, window.synthetic, false);
  return out;
}

std::vector<float> window_generative_matrix(const Window& window,
                                            const StandardizationStats& stats) {
  std::vector<float> out;
  out.reserve(window.frames.size() * static_cast<size_t>(kFrameDim));
  for (const auto& f : window.frames)
    append_frame_features(out, f, stats, FeatureSet::fused, window.synthetic, true);
  return out;
}

// ============================================================================
// Adapter stream
// ============================================================================

AdapterFrame parse_adapter_line(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("adapter: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("adapter: expected a JSON object");
  AdapterFrame out;
  try {
    out.frame_idx = j.value("frame_idx", 0);
    out.sequence_id = j.value("seq_id", std::string("stream"));
    out.participant_id = j.value("participant_id", std::string("unknown"));
    if (j.contains("env_id")) {
      const json& env = j.at("env_id");
      out.environment = env.is_string()
                            ? environment_from_string(env.get<std::string>())
                            : static_cast<EnvironmentId>(env.get<int>());
    }
    bool kp_missing = !j.contains("kp_px") || j.at("kp_px").is_null();
    bool bbox_missing = !j.contains("bbox") || j.at("bbox").is_null();
    if (kp_missing || bbox_missing) {
      out.detection.person_missing = true;
    } else {
      const json& kp = j.at("kp_px");
      if (!kp.is_array() || kp.size() != static_cast<size_t>(kPoseDim))
        throw ValidationError("adapter: kp_px must hold 51 numbers");
      for (int k = 0; k < kNumKeypoints; ++k) {
        out.detection.keypoints[k].u = kp[3 * k].get<double>();
        out.detection.keypoints[k].v = kp[3 * k + 1].get<double>();
        out.detection.keypoints[k].score = kp[3 * k + 2].get<double>();
      }
      const json& bb = j.at("bbox");
      if (!bb.is_array() || bb.size() != 4)
        throw ValidationError("adapter: bbox must hold [u_min, v_min, width, height]");
      out.detection.bbox = {bb[0].get<double>(), bb[1].get<double>(), bb[2].get<double>(),
                            bb[3].get<double>()};
    }
    if (j.contains("emo") && !j.at("emo").is_null()) {
      const json& emo = j.at("emo");
      if (!emo.is_array() || emo.size() != static_cast<size_t>(kNumEmotions))
        throw ValidationError("adapter: emo must hold 7 numbers");
      EmotionDistribution e;
      for (int i = 0; i < kNumEmotions; ++i) e.p[i] = emo[i].get<double>();
      if (!e.valid(1e-3)) throw ValidationError("adapter: emotion simplex violation");
      out.detection.face_emotion = e;
    }
    if (j.contains("label") && !j.at("label").is_null()) {
      int lab = j.at("label").get<int>();
      if (lab != 0 && lab != 1) throw ValidationError("adapter: label must be 0 or 1");
      out.label = lab;
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("adapter: bad field type: ") + e.what());
  }
  return out;
}

std::string format_adapter_line(const AdapterFrame& frame) {
  using detail::format_double;
  using detail::format_int;
  using detail::json_escape;
  std::string line = "{\"seq_id\":\"" + json_escape(frame.sequence_id) + "\"";
  line += ",\"frame_idx\":" + format_int(frame.frame_idx);
  line += ",\"participant_id\":\"" + json_escape(frame.participant_id) + "\"";
  line += ",\"env_id\":";
  line += frame.environment == EnvironmentId::synthetic ? "\"synthetic\""
                                                        : to_string(frame.environment);
  if (frame.detection.person_missing) {
    line += ",\"kp_px\":null,\"bbox\":null";
  } else {
    line += ",\"kp_px\":[";
    for (int k = 0; k < kNumKeypoints; ++k) {
      if (k) line += ",";
      line += format_double(frame.detection.keypoints[k].u) + "," +
              format_double(frame.detection.keypoints[k].v) + "," +
              format_double(frame.detection.keypoints[k].score);
    }
    line += "],\"bbox\":[" + format_double(frame.detection.bbox.u_min) + "," +
            format_double(frame.detection.bbox.v_min) + "," +
            format_double(frame.detection.bbox.width) + "," +
            format_double(frame.detection.bbox.height) + "]";
  }
  if (frame.detection.face_emotion.has_value()) {
    line += ",\"emo\":[";
    for (int i = 0; i < kNumEmotions; ++i) {
      if (i) line += ",";
      line += format_double(frame.detection.face_emotion->p[i]);
    }
    line += "]";
  }
  if (frame.label.has_value()) line += ",\"label\":" + format_int(*frame.label);
  line += "}";
  return line;
}

}  // namespace mint
