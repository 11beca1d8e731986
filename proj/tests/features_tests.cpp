// ============================================================
// Feature pipeline tests: box normalization and its camera
// invariance, standardization against a two-pass oracle, frame
// assembly, feature views and the adapter line format.
// ============================================================
#include <doctest.h>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <mint/dataset.hpp>
#include <mint/features.hpp>
#include <mint/rng.hpp>
#include <mint/synthgen.hpp>
#include <mint/types.hpp>

using namespace mint;

namespace {

RawDetection make_detection(Rng& rng) {
  RawDetection det;
  det.bbox.u_min = rng.uniform(0, 500);
  det.bbox.v_min = rng.uniform(0, 300);
  det.bbox.width = rng.uniform(40, 400);
  det.bbox.height = rng.uniform(80, 600);
  for (int k = 0; k < kNumKeypoints; ++k) {
    det.keypoints[k].u = det.bbox.u_min + rng.uniform(-0.2, 1.2) * det.bbox.width;
    det.keypoints[k].v = det.bbox.v_min + rng.uniform(-0.2, 1.2) * det.bbox.height;
    det.keypoints[k].score = rng.uniform(0.05, 1.0);
  }
  EmotionDistribution e;
  double sum = 0;
  for (int m = 0; m < kNumEmotions; ++m) {
    e.p[m] = rng.uniform(0.01, 1.0);
    sum += e.p[m];
  }
  for (int m = 0; m < kNumEmotions; ++m) e.p[m] /= sum;
  det.face_emotion = e;
  return det;
}

}  // namespace

// ------------------------------------------------------------
// Box normalization.
// ------------------------------------------------------------

TEST_CASE("normalize_pose maps the box midpoint to one half") {
  RawDetection det;
  det.bbox = {100, 200, 40, 80};
  det.keypoints[0] = {120, 240, 0.9};
  det.keypoints[1] = {100, 200, 0.4};  // box corner
  for (int k = 2; k < kNumKeypoints; ++k) det.keypoints[k] = {110, 220, 0.5};

  PoseDescriptor p = normalize_pose(det);
  CHECK(p.at(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p.at(0, 2) == 0.9);
  CHECK(p.at(1, 0) == 0.0);
  CHECK(p.at(1, 1) == 0.0);
  CHECK(p.at(1, 2) == 0.4);
}

TEST_CASE("normalize_pose edge behavior") {
  Rng rng(31);
  RawDetection det = make_detection(rng);

  // Zero-score keypoints are placeholders and stay at the origin.
  det.keypoints[3] = {det.bbox.u_min + 10, det.bbox.v_min + 10, 0.0};
  PoseDescriptor p = normalize_pose(det);
  CHECK(p.at(3, 0) == 0.0);
  CHECK(p.at(3, 1) == 0.0);
  CHECK(p.at(3, 2) == 0.0);

  // Missing person gives the all-zero descriptor.
  RawDetection missing;
  missing.person_missing = true;
  CHECK(normalize_pose(missing).all_zero());

  // Degenerate boxes are rejected.
  RawDetection degenerate = make_detection(rng);
  degenerate.bbox.width = 0.0;
  CHECK_THROWS_AS(normalize_pose(degenerate), ValidationError);
  degenerate.bbox.width = 10.0;
  degenerate.bbox.height = -3.0;
  CHECK_THROWS_AS(normalize_pose(degenerate), ValidationError);

  // Keypoints outside the box are allowed and fall outside [0, 1].
  RawDetection outside = make_detection(rng);
  outside.keypoints[0] = {outside.bbox.u_min - outside.bbox.width, outside.bbox.v_min, 0.8};
  PoseDescriptor q = normalize_pose(outside);
  CHECK(q.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("normalize_pose is invariant under camera scale and translation") {
  // 1000 random (scale, translation) pairs over random detections; the
  // normalized output must match to 1e-9 per coordinate.
  Rng rng(2024);
  double max_dev = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    RawDetection det = make_detection(rng);
    PoseDescriptor base = normalize_pose(det);

    double sigma = std::exp(rng.uniform(-2.0, 2.0));  // scales in [0.135, 7.39]
    double a = rng.uniform(-2000, 2000);
    double b = rng.uniform(-2000, 2000);

    RawDetection moved = det;
    moved.bbox.u_min = sigma * det.bbox.u_min + a;
    moved.bbox.v_min = sigma * det.bbox.v_min + b;
    moved.bbox.width = sigma * det.bbox.width;
    moved.bbox.height = sigma * det.bbox.height;
    for (int k = 0; k < kNumKeypoints; ++k) {
      moved.keypoints[k].u = sigma * det.keypoints[k].u + a;
      moved.keypoints[k].v = sigma * det.keypoints[k].v + b;
    }

    PoseDescriptor shifted = normalize_pose(moved);
    for (int c = 0; c < kPoseDim; ++c)
      max_dev = std::max(max_dev, std::abs(shifted.values[c] - base.values[c]));
  }
  CHECK(max_dev <= 1e-9);
}

TEST_CASE("camera invariance holds on generated scenes end to end") {
  ScenarioConfig cfg = preset_standard();
  cfg.n_sequences = 4;
  cfg.length_min = 20;
  cfg.length_max = 30;
  cfg.seed = 77;
  std::vector<RawSequenceRecord> raw = generate_raw(cfg);
  REQUIRE(!raw.empty());

  Rng rng(555);
  for (const RawSequenceRecord& seq : raw) {
    double sigma = std::exp(rng.uniform(-1.5, 1.5));
    double a = rng.uniform(-800, 800);
    double b = rng.uniform(-800, 800);
    for (const RawDetection& det : seq.detections) {
      if (det.person_missing) continue;
      RawDetection moved = det;
      moved.bbox.u_min = sigma * det.bbox.u_min + a;
      moved.bbox.v_min = sigma * det.bbox.v_min + b;
      moved.bbox.width = sigma * det.bbox.width;
      moved.bbox.height = sigma * det.bbox.height;
      for (int k = 0; k < kNumKeypoints; ++k) {
        moved.keypoints[k].u = sigma * det.keypoints[k].u + a;
        moved.keypoints[k].v = sigma * det.keypoints[k].v + b;
      }
      PoseDescriptor p0 = normalize_pose(det);
      PoseDescriptor p1 = normalize_pose(moved);
      for (int c = 0; c < kPoseDim; ++c)
        CHECK(std::abs(p1.values[c] - p0.values[c]) <= 1e-9);
    }
  }
}

// ------------------------------------------------------------
// Standardization.
// ------------------------------------------------------------

TEST_CASE("fit_standardization matches two-point arithmetic") {
  SequenceRecord seq;
  seq.sequence_id = "s";
  seq.participant_id = "p";
  MultimodalFrame f1, f2;
  f1.emotion = EmotionDistribution::neutral();
  f2.emotion = EmotionDistribution::neutral();
  f1.pose.at(0, 0) = 0.2;
  f2.pose.at(0, 0) = 0.4;
  // Give a second channel some variance so only deliberate channels clamp.
  f1.pose.at(0, 1) = 1.0;
  f2.pose.at(0, 1) = 3.0;
  seq.frames = {f1, f2};

  std::vector<std::string> warnings;
  StandardizationStats st = fit_standardization({seq}, &warnings);
  CHECK(st.mean[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(st.std[0] == doctest::Approx(0.1).epsilon(1e-9));
  CHECK(st.mean[1] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(st.std[1] == doctest::Approx(1.0).epsilon(1e-9));

  // Constant coordinate channels clamp to 1e-6 and warn.
  CHECK(!warnings.empty());
  bool clamped = false;
  for (int c = 0; c < kPoseDim; ++c)
    if (c % 3 != 2 && st.std[c] == 1e-6) clamped = true;
  CHECK(clamped);

  // Confidence channels always carry the identity transform.
  for (int c = 2; c < kPoseDim; c += 3) {
    CHECK(st.mean[c] == 0.0);
    CHECK(st.std[c] == 1.0);
  }
}

TEST_CASE("fit_standardization matches a brute-force two-pass oracle") {
  ScenarioConfig cfg = preset_standard();
  cfg.n_sequences = 10;
  cfg.length_min = 40;
  cfg.length_max = 60;
  cfg.seed = 99;
  std::vector<SequenceRecord> ds = generate(cfg);

  StandardizationStats st = fit_standardization(ds);

  size_t n = 0;
  std::array<double, kPoseDim> mean{}, var{};
  for (const auto& seq : ds)
    for (const auto& f : seq.frames) {
      ++n;
      for (int c = 0; c < kPoseDim; ++c) mean[c] += f.pose.values[c];
    }
  for (int c = 0; c < kPoseDim; ++c) mean[c] /= static_cast<double>(n);
  for (const auto& seq : ds)
    for (const auto& f : seq.frames)
      for (int c = 0; c < kPoseDim; ++c) {
        double d = f.pose.values[c] - mean[c];
        var[c] += d * d;
      }
  REQUIRE(n >= 2);
  for (int c = 0; c < kPoseDim; ++c) {
    if (c % 3 == 2) continue;  // confidence channels stay identity
    CHECK(st.mean[c] == doctest::Approx(mean[c]).epsilon(1e-9));
    CHECK(st.std[c] ==
          doctest::Approx(std::sqrt(var[c] / static_cast<double>(n))).epsilon(1e-9));
  }

  CHECK_THROWS_AS(fit_standardization({}), ValidationError);
}

TEST_CASE("apply and invert standardization are inverse maps") {
  ScenarioConfig cfg = preset_standard();
  cfg.n_sequences = 4;
  cfg.length_min = 20;
  cfg.length_max = 25;
  cfg.seed = 5;
  std::vector<SequenceRecord> ds = generate(cfg);
  StandardizationStats st = fit_standardization(ds);

  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    PoseDescriptor p;
    for (int c = 0; c < kPoseDim; ++c)
      p.values[c] = c % 3 == 2 ? rng.uniform(0.0, 1.0) : rng.uniform(-2.0, 2.0);
    PoseDescriptor z = apply_standardization(p, st);
    PoseDescriptor back = invert_standardization(z, st);
    for (int c = 0; c < kPoseDim; ++c)
      CHECK(back.values[c] == doctest::Approx(p.values[c]).epsilon(1e-6));
    // Confidence channels pass through bit for bit.
    for (int c = 2; c < kPoseDim; c += 3) CHECK(z.values[c] == p.values[c]);
  }

  // Mean maps to zero; identity stats change nothing.
  PoseDescriptor at_mean;
  for (int c = 0; c < kPoseDim; ++c) at_mean.values[c] = c % 3 == 2 ? 0.7 : st.mean[c];
  PoseDescriptor z = apply_standardization(at_mean, st);
  for (int c = 0; c < kPoseDim; ++c) {
    if (c % 3 == 2) continue;
    CHECK(z.values[c] == doctest::Approx(0.0).epsilon(1e-9));
  }
  StandardizationStats ident = StandardizationStats::identity();
  CHECK(ident.is_identity());
  PoseDescriptor same = apply_standardization(at_mean, ident);
  for (int c = 0; c < kPoseDim; ++c) CHECK(same.values[c] == at_mean.values[c]);
}

// ------------------------------------------------------------
// Frame assembly and views.
// ------------------------------------------------------------

TEST_CASE("build_frame assembles pose, emotion and label") {
  Rng rng(7);
  RawDetection det = make_detection(rng);
  StandardizationStats ident = StandardizationStats::identity();

  MultimodalFrame f = build_frame(det, ident, 1);
  REQUIRE(f.label.has_value());
  CHECK(*f.label == 1);
  CHECK(f.emotion.valid());
  PoseDescriptor direct = normalize_pose(det);
  for (int c = 0; c < kPoseDim; ++c) CHECK(f.pose.values[c] == direct.values[c]);

  // Absent face gives the neutral one-hot.
  det.face_emotion.reset();
  MultimodalFrame g = build_frame(det, ident);
  CHECK_FALSE(g.label.has_value());
  CHECK(g.emotion.p[static_cast<int>(Emotion::neutral)] == 1.0);

  // Uniform emotion carries through untouched.
  EmotionDistribution uniform;
  for (int m = 0; m < kNumEmotions; ++m) uniform.p[m] = 1.0 / kNumEmotions;
  det.face_emotion = uniform;
  MultimodalFrame h = build_frame(det, ident);
  for (int m = 0; m < kNumEmotions; ++m)
    CHECK(h.emotion.p[m] == doctest::Approx(1.0 / 7).epsilon(1e-12));
}

TEST_CASE("feature views select the right channels") {
  CHECK(feature_dim(FeatureSet::pose_only) == 51);
  CHECK(feature_dim(FeatureSet::emotion_only) == 7);
  CHECK(feature_dim(FeatureSet::fused) == 58);
  for (FeatureSet s : {FeatureSet::pose_only, FeatureSet::emotion_only, FeatureSet::fused})
    CHECK(feature_set_from_string(to_string(s)) == s);
  CHECK_THROWS_AS(feature_set_from_string("both"), ValidationError);

  Rng rng(9);
  RawDetection det = make_detection(rng);
  MultimodalFrame f = build_frame(det, StandardizationStats::identity(), 0);

  std::vector<double> pose = feature_select(f, FeatureSet::pose_only);
  std::vector<double> emo = feature_select(f, FeatureSet::emotion_only);
  std::vector<double> fused = feature_select(f, FeatureSet::fused);
  REQUIRE(pose.size() == 51);
  REQUIRE(emo.size() == 7);
  REQUIRE(fused.size() == 58);
  for (int c = 0; c < 51; ++c) {
    CHECK(pose[c] == f.pose.values[c]);
    CHECK(fused[c] == pose[c]);
  }
  for (int m = 0; m < 7; ++m) {
    CHECK(emo[m] == f.emotion.p[m]);
    CHECK(fused[51 + m] == emo[m]);
  }
}

TEST_CASE("window matrices standardize real windows and pass synthetic through") {
  ScenarioConfig cfg = preset_standard();
  cfg.n_sequences = 3;
  cfg.length_min = 20;
  cfg.length_max = 24;
  cfg.seed = 21;
  std::vector<SequenceRecord> ds = generate(cfg);
  StandardizationStats st = fit_standardization(ds);
  std::vector<Window> wins = windows(ds, 15, 15);
  REQUIRE(!wins.empty());

  Window w = wins[0];
  std::vector<float> m = window_feature_matrix(w, st, FeatureSet::fused);
  REQUIRE(m.size() == 15u * 58u);
  // Row 0 equals the standardized frame features.
  PoseDescriptor z = apply_standardization(w.frames[0].pose, st);
  for (int c = 0; c < kPoseDim; ++c)
    CHECK(m[c] == doctest::Approx(static_cast<float>(z.values[c])).epsilon(1e-6));
  for (int e = 0; e < kNumEmotions; ++e)
    CHECK(m[51 + e] == doctest::Approx(static_cast<float>(w.frames[0].emotion.p[e])));

  // Synthetic windows skip standardization: their values are already in
  // standardized space.
  Window synth = w;
  synth.synthetic = true;
  std::vector<float> ms = window_feature_matrix(synth, st, FeatureSet::fused);
  for (int c = 0; c < kPoseDim; ++c)
    CHECK(ms[c] == doctest::Approx(static_cast<float>(w.frames[0].pose.values[c])));

  // Generative view appends the label channel.
  std::vector<float> g = window_generative_matrix(w, st);
  REQUIRE(g.size() == 15u * 59u);
  for (int c = 0; c < 58; ++c) CHECK(g[c] == m[c]);
  CHECK(g[58] == static_cast<float>(*w.frames[0].label));

  Window unlabeled = w;
  unlabeled.frames[3].label.reset();
  CHECK_THROWS_AS(window_generative_matrix(unlabeled, st), ValidationError);
}

// ------------------------------------------------------------
// Adapter line format.
// ------------------------------------------------------------

TEST_CASE("adapter lines round-trip detections") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    AdapterFrame f;
    f.frame_idx = static_cast<int>(rng.uniform_int(0, 5000));
    f.detection = make_detection(rng);
    f.label = rng.bernoulli(0.5) ? std::optional<int>(1) : std::nullopt;
    f.sequence_id = "seq" + std::to_string(trial);
    f.participant_id = "p" + std::to_string(trial % 3);
    f.environment = trial % 2 ? EnvironmentId::env2 : EnvironmentId::env3;

    AdapterFrame back = parse_adapter_line(format_adapter_line(f));
    CHECK(back.frame_idx == f.frame_idx);
    CHECK(back.label == f.label);
    CHECK(back.sequence_id == f.sequence_id);
    CHECK(back.participant_id == f.participant_id);
    CHECK(back.environment == f.environment);
    CHECK(back.detection.person_missing == f.detection.person_missing);
    CHECK(back.detection.bbox.u_min == f.detection.bbox.u_min);
    CHECK(back.detection.bbox.height == f.detection.bbox.height);
    for (int k = 0; k < kNumKeypoints; ++k) {
      CHECK(back.detection.keypoints[k].u == f.detection.keypoints[k].u);
      CHECK(back.detection.keypoints[k].v == f.detection.keypoints[k].v);
      CHECK(back.detection.keypoints[k].score == f.detection.keypoints[k].score);
    }
    REQUIRE(back.detection.face_emotion.has_value());
    for (int m = 0; m < kNumEmotions; ++m)
      CHECK(back.detection.face_emotion->p[m] == f.detection.face_emotion->p[m]);
  }

  // Missing person encodes as null keypoints and bbox.
  AdapterFrame missing;
  missing.frame_idx = 3;
  missing.detection.person_missing = true;
  std::string line = format_adapter_line(missing);
  CHECK(line.find("null") != std::string::npos);
  AdapterFrame back = parse_adapter_line(line);
  CHECK(back.detection.person_missing);

  CHECK_THROWS_AS(parse_adapter_line("not json"), ValidationError);
  CHECK_THROWS_AS(
      parse_adapter_line("{\"frame_idx\":0,\"kp_px\":[1,2],\"bbox\":[0,0,10,10]}"),
      ValidationError);
  // A null bbox marks the person missing even when keypoints are present.
  CHECK(parse_adapter_line("{\"frame_idx\":0,\"kp_px\":[1,2],\"bbox\":null}")
            .detection.person_missing);
}
