// ============================================================
// Dataset container, file formats, windowing and checkpoint
// persistence. File round trips are byte-compared; windowing
// counts are checked against the closed form; checkpoints are
// verified bit-exact over randomized payloads.
// ============================================================
#include <doctest.h>

#include <unistd.h>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <mint/checkpoint.hpp>
#include <mint/dataset.hpp>
#include <mint/rng.hpp>
#include <mint/types.hpp>

using namespace mint;

namespace {

// Unique path under the system temp dir; the uniquifier goes before the
// extension so format inference keeps working.
std::filesystem::path temp_file(const std::string& name) {
  static int counter = 0;
  std::string stem = name, ext;
  if (size_t dot = name.rfind('.'); dot != std::string::npos) {
    stem = name.substr(0, dot);
    ext = name.substr(dot);
  }
  return std::filesystem::temp_directory_path() /
         (stem + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ext);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

MultimodalFrame make_frame(Rng& rng, std::optional<int> label) {
  MultimodalFrame f;
  for (int k = 0; k < kNumKeypoints; ++k) {
    f.pose.at(k, 0) = rng.uniform(0.0, 1.0);
    f.pose.at(k, 1) = rng.uniform(0.0, 1.0);
    f.pose.at(k, 2) = rng.uniform(0.0, 1.0);
  }
  double sum = 0.0;
  for (int m = 0; m < kNumEmotions; ++m) {
    f.emotion.p[m] = rng.uniform(0.01, 1.0);
    sum += f.emotion.p[m];
  }
  for (int m = 0; m < kNumEmotions; ++m) f.emotion.p[m] /= sum;
  f.label = label;
  return f;
}

SequenceRecord make_sequence(const std::string& id, const std::string& participant,
                             int frames, uint64_t seed, bool labeled = true) {
  SequenceRecord seq;
  seq.sequence_id = id;
  seq.participant_id = participant;
  seq.environment = EnvironmentId::env2;
  Rng rng(seed);
  for (int i = 0; i < frames; ++i)
    seq.frames.push_back(
        make_frame(rng, labeled ? std::optional<int>(rng.bernoulli(0.3) ? 1 : 0)
                                : std::nullopt));
  return seq;
}

Window labeled_window(const std::vector<int>& labels) {
  Window w;
  w.sequence_id = "seq";
  Rng rng(7);
  for (int y : labels) w.frames.push_back(make_frame(rng, y));
  return w;
}

}  // namespace

// ------------------------------------------------------------
// Loading and saving datasets.
// ------------------------------------------------------------

TEST_CASE("load_dataset groups sequences and sorts frames by index") {
  auto path = temp_file("two_seqs.jsonl");
  // Frames written deliberately out of order and interleaved across sequences.
  std::ofstream out(path);
  auto line = [&](const std::string& seq, int idx, const std::string& part, int label) {
    out << "{\"seq_id\":\"" << seq << "\",\"frame_idx\":" << idx
        << ",\"participant_id\":\"" << part << "\",\"env_id\":\"1\",\"kp\":[";
    for (int i = 0; i < kPoseDim; ++i) out << (i ? "," : "") << 0.25;
    out << "],\"emo\":[1,0,0,0,0,0,0],\"label\":" << label << "}\n";
  };
  for (int i = 19; i >= 0; --i) line("b", i, "p1", i % 2);
  for (int i = 0; i < 15; ++i) line("a", 14 - i, "p2", 0);
  out.close();

  std::vector<SequenceRecord> ds = load_dataset(path.string());
  REQUIRE(ds.size() == 2);
  // Order follows first appearance in the file.
  CHECK(ds[0].sequence_id == "b");
  CHECK(ds[0].participant_id == "p1");
  CHECK(ds[0].frames.size() == 20);
  CHECK(ds[1].sequence_id == "a");
  CHECK(ds[1].frames.size() == 15);
  // Frames re-sorted: labels recover the parity pattern.
  for (int i = 0; i < 20; ++i) CHECK(*ds[0].frames[i].label == i % 2);
  std::filesystem::remove(path);
}

TEST_CASE("dataset save/load round-trips byte for byte in both formats") {
  std::vector<SequenceRecord> ds;
  for (int s = 0; s < 4; ++s)
    ds.push_back(make_sequence("seq" + std::to_string(s), "p" + std::to_string(s % 2),
                               16 + 3 * s, 900 + s));

  for (DatasetFormat fmt : {DatasetFormat::jsonl, DatasetFormat::csv}) {
    auto p1 = temp_file(fmt == DatasetFormat::jsonl ? "rt1.jsonl" : "rt1.csv");
    auto p2 = temp_file(fmt == DatasetFormat::jsonl ? "rt2.jsonl" : "rt2.csv");
    save_dataset(p1.string(), ds, fmt);
    std::vector<SequenceRecord> loaded = load_dataset(p1.string(), fmt);
    save_dataset(p2.string(), loaded, fmt);
    CHECK(slurp(p1) == slurp(p2));

    // Values survive exactly, not just to a tolerance.
    REQUIRE(loaded.size() == ds.size());
    for (size_t s = 0; s < ds.size(); ++s) {
      REQUIRE(loaded[s].frames.size() == ds[s].frames.size());
      CHECK(loaded[s].participant_id == ds[s].participant_id);
      CHECK(loaded[s].environment == ds[s].environment);
      for (size_t i = 0; i < ds[s].frames.size(); ++i) {
        for (int c = 0; c < kPoseDim; ++c)
          CHECK(loaded[s].frames[i].pose.values[c] == ds[s].frames[i].pose.values[c]);
        for (int m = 0; m < kNumEmotions; ++m)
          CHECK(loaded[s].frames[i].emotion.p[m] == ds[s].frames[i].emotion.p[m]);
        CHECK(loaded[s].frames[i].label == ds[s].frames[i].label);
      }
    }
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }
}

TEST_CASE("unlabeled sequences round-trip with null labels") {
  std::vector<SequenceRecord> ds{make_sequence("u", "p", 15, 55, false)};
  for (DatasetFormat fmt : {DatasetFormat::jsonl, DatasetFormat::csv}) {
    auto p = temp_file(fmt == DatasetFormat::jsonl ? "null.jsonl" : "null.csv");
    save_dataset(p.string(), ds, fmt);
    std::vector<SequenceRecord> loaded = load_dataset(p.string(), fmt);
    REQUIRE(loaded.size() == 1);
    for (const auto& f : loaded[0].frames) CHECK_FALSE(f.label.has_value());
    std::filesystem::remove(p);
  }
}

TEST_CASE("malformed dataset rows are rejected with the offending line") {
  auto write_and_expect = [](const std::string& body, const std::string& needle) {
    auto path = temp_file("bad.jsonl");
    std::ofstream(path) << body;
    try {
      load_dataset(path.string());
      FAIL_CHECK("expected ValidationError for: " << needle);
    } catch (const ValidationError& e) {
      CAPTURE(e.what());
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
    std::filesystem::remove(path);
  };

  std::string good_kp = "[";
  for (int i = 0; i < kPoseDim; ++i) good_kp += (i ? ",0.5" : "0.5");
  good_kp += "]";
  auto row = [&](const std::string& emo, int idx) {
    return "{\"seq_id\":\"s\",\"frame_idx\":" + std::to_string(idx) +
           ",\"participant_id\":\"p\",\"env_id\":\"1\",\"kp\":" + good_kp +
           ",\"emo\":" + emo + ",\"label\":0}\n";
  };

  // Emotion vector off the simplex by more than 1e-3.
  write_and_expect(row("[0.6,0.6,0,0,0,0,0]", 0), "simplex");
  // Duplicate (seq_id, frame_idx).
  write_and_expect(row("[1,0,0,0,0,0,0]", 0) + row("[1,0,0,0,0,0,0]", 0), "duplicate");
  // Wrong keypoint arity, reported with the file line prefix.
  write_and_expect(
      "{\"seq_id\":\"s\",\"frame_idx\":0,\"participant_id\":\"p\",\"env_id\":\"1\","
      "\"kp\":[1,2,3],\"emo\":[1,0,0,0,0,0,0],\"label\":0}\n",
      ":1: kp");
  // Unparsable JSON names its line.
  write_and_expect(row("[1,0,0,0,0,0,0]", 0) + "not json\n", ":2: invalid JSON");
  // A sequence mixing labeled and unlabeled frames.
  std::string mixed = row("[1,0,0,0,0,0,0]", 0);
  mixed += "{\"seq_id\":\"s\",\"frame_idx\":1,\"participant_id\":\"p\",\"env_id\":\"1\","
           "\"kp\":" + good_kp + ",\"emo\":[1,0,0,0,0,0,0],\"label\":null}\n";
  write_and_expect(mixed, "label");
}

TEST_CASE("dataset format is inferred from the extension") {
  CHECK(dataset_format_for_path("x/y/data.jsonl") == DatasetFormat::jsonl);
  CHECK(dataset_format_for_path("x/y/data.csv") == DatasetFormat::csv);
  CHECK_THROWS_AS(dataset_format_for_path("data.txt"), ValidationError);
}

// ------------------------------------------------------------
// Windowing.
// ------------------------------------------------------------

TEST_CASE("window counts follow the closed form") {
  SequenceRecord t20 = make_sequence("s", "p", 20, 1);
  std::vector<Window> w = windows(t20, 15, 1);
  REQUIRE(w.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(w[i].start == i);
    CHECK(w[i].frames.size() == 15);
    CHECK(w[i].sequence_id == "s");
    // Contiguity: window frames equal the source slice.
    for (int j = 0; j < 15; ++j)
      CHECK(w[i].frames[j].pose.values == t20.frames[i + j].pose.values);
  }

  CHECK(windows(make_sequence("s", "p", 15, 2), 15, 1).size() == 1);

  std::vector<std::string> warnings;
  CHECK(windows(make_sequence("s", "p", 14, 3), 15, 1, &warnings).empty());
  CHECK(warnings.size() == 1);

  // Property: for random lengths and strides the count matches
  // floor((T - W) / stride) + 1.
  Rng rng(88);
  for (int trial = 0; trial < 50; ++trial) {
    int T = static_cast<int>(rng.uniform_int(15, 120));
    int stride = static_cast<int>(rng.uniform_int(1, 20));
    SequenceRecord seq = make_sequence("s", "p", T, 1000 + trial);
    size_t expect = static_cast<size_t>((T - 15) / stride) + 1;
    CHECK(windows(seq, 15, stride).size() == expect);
  }
}

TEST_CASE("dataset-level windowing concatenates per-sequence windows") {
  std::vector<SequenceRecord> ds{make_sequence("a", "p", 20, 1),
                                 make_sequence("b", "q", 14, 2),
                                 make_sequence("c", "p", 16, 3)};
  std::vector<std::string> warnings;
  std::vector<Window> w = windows(ds, 15, 1, &warnings);
  CHECK(w.size() == 6 + 0 + 2);
  CHECK(warnings.size() == 1);  // the too-short sequence
  CHECK(w.front().sequence_id == "a");
  CHECK(w.back().sequence_id == "c");
}

// ------------------------------------------------------------
// Window labels.
// ------------------------------------------------------------

TEST_CASE("window_label thresholds at 7 positive frames") {
  std::vector<int> labels(15, 0);
  for (int i = 0; i < 7; ++i) labels[2 * i] = 1;
  CHECK(window_label(labeled_window(labels)) == 1);

  std::vector<int> six(15, 0);
  for (int i = 0; i < 6; ++i) six[i] = 1;
  CHECK(window_label(labeled_window(six)) == 0);

  CHECK(window_label(labeled_window(std::vector<int>(15, 1))) == 1);

  // Configurable threshold.
  CHECK(window_label(labeled_window(six), 6) == 1);
  CHECK(window_label(labeled_window(six), 7) == 0);
  CHECK_THROWS_AS(window_label(labeled_window(six), 0), ValidationError);
}

TEST_CASE("window_label rejects unlabeled frames") {
  Window w = labeled_window(std::vector<int>(15, 1));
  w.frames[4].label.reset();
  CHECK_THROWS_AS(window_label(w), ValidationError);
}

TEST_CASE("window_label is monotone under 0 to 1 label flips") {
  Rng rng(404);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> labels(15);
    for (int& y : labels) y = rng.bernoulli(0.45) ? 1 : 0;
    Window w = labeled_window(labels);
    int before = window_label(w);
    // Flip one random zero (if any) to one; verdict must not drop.
    std::vector<int> zero_idx;
    for (int i = 0; i < 15; ++i)
      if (labels[i] == 0) zero_idx.push_back(i);
    if (zero_idx.empty()) continue;
    int pick = zero_idx[static_cast<size_t>(rng.uniform_int(
        0, static_cast<int64_t>(zero_idx.size()) - 1))];
    w.frames[pick].label = 1;
    CHECK(window_label(w) >= before);
  }
}

TEST_CASE("positive_window_fraction counts positives") {
  std::vector<Window> wins;
  int positives = 0;
  Rng rng(11);
  for (int i = 0; i < 40; ++i) {
    std::vector<int> labels(15);
    for (int& y : labels) y = rng.bernoulli(0.4) ? 1 : 0;
    wins.push_back(labeled_window(labels));
    positives += window_label(wins.back());
  }
  CHECK(positive_window_fraction(wins) ==
        doctest::Approx(static_cast<double>(positives) / 40.0));
  CHECK_THROWS_AS(positive_window_fraction({}), ValidationError);
}

TEST_CASE("onset_index finds the first 0 to 1 transition") {
  SequenceRecord seq = make_sequence("s", "p", 10, 5);
  for (int i = 0; i < 10; ++i) seq.frames[i].label = i >= 6 ? 1 : 0;
  REQUIRE(seq.onset_index().has_value());
  CHECK(*seq.onset_index() == 6);

  for (auto& f : seq.frames) f.label = 0;
  CHECK_FALSE(seq.onset_index().has_value());

  SequenceRecord unlabeled = make_sequence("u", "p", 10, 6, false);
  CHECK_FALSE(unlabeled.onset_index().has_value());
}

// ------------------------------------------------------------
// Emotion simplex and frame views.
// ------------------------------------------------------------

TEST_CASE("emotion distribution validity matches its contract") {
  EmotionDistribution e = EmotionDistribution::neutral();
  CHECK(e.valid());
  CHECK(e.p[static_cast<int>(Emotion::neutral)] == 1.0);

  e.p[0] = 0.5;  // now sums to 1.5
  CHECK_FALSE(e.valid());

  EmotionDistribution bad;
  bad.p = {0.5, 0.6, -0.1, 0, 0, 0, 0};
  CHECK_FALSE(bad.valid());

  CHECK(kClassifierDim == 58);
  CHECK(kFrameDim == 59);
  CHECK(emotion_names()[0] == "happy");
  CHECK(emotion_names()[6] == "disgust");
}

TEST_CASE("environment ids round-trip through text") {
  for (EnvironmentId env : {EnvironmentId::env1, EnvironmentId::env2,
                            EnvironmentId::env3, EnvironmentId::synthetic}) {
    CHECK(environment_from_string(to_string(env)) == env);
  }
  CHECK_THROWS_AS(environment_from_string("env9"), ValidationError);
}

// ------------------------------------------------------------
// Checkpoints.
// ------------------------------------------------------------

TEST_CASE("checkpoint payload size is the product of shapes times four") {
  ModelCheckpoint ckpt;
  ckpt.model_kind = "gru";
  ckpt.arrays.push_back({"w", {2, 3}, std::vector<float>(6, 0.0f)});
  auto path = temp_file("size.ckpt");
  save_checkpoint(path.string(), ckpt);

  std::string blob = slurp(path);
  REQUIRE(blob.size() > 9);
  uint32_t header_len = static_cast<uint8_t>(blob[5]) |
                        (static_cast<uint8_t>(blob[6]) << 8) |
                        (static_cast<uint8_t>(blob[7]) << 16) |
                        (static_cast<uint8_t>(blob[8]) << 24);
  CHECK(blob.size() - 9 - header_len == 24);
  CHECK(blob.substr(0, 5) == "MINT1");
  std::filesystem::remove(path);
}

TEST_CASE("checkpoints round-trip bit-exactly over random payloads") {
  Rng rng(2023);
  for (int trial = 0; trial < 100; ++trial) {
    ModelCheckpoint ckpt;
    ckpt.model_kind = trial % 2 ? "mintrvae" : "transformer";
    ckpt.set_config("hidden", static_cast<int64_t>(rng.uniform_int(1, 512)));
    ckpt.set_config("lr", rng.uniform(1e-5, 1.0));
    ckpt.set_config("backbone", std::string("gru"));
    int n_arrays = static_cast<int>(rng.uniform_int(1, 5));
    for (int a = 0; a < n_arrays; ++a) {
      NamedArray arr;
      arr.name = "arr" + std::to_string(a);
      arr.shape = {rng.uniform_int(1, 7), rng.uniform_int(1, 7)};
      arr.data.resize(static_cast<size_t>(arr.size()));
      for (float& x : arr.data) x = static_cast<float>(rng.uniform(-1e6, 1e6));
      ckpt.arrays.push_back(std::move(arr));
    }
    if (trial % 3 == 0) {
      ckpt.has_stats = true;
      for (int i = 0; i < kClassifierDim; ++i) {
        ckpt.stats_mean.push_back(static_cast<float>(rng.uniform(-5, 5)));
        ckpt.stats_std.push_back(static_cast<float>(rng.uniform(0.1, 5)));
      }
    }

    auto p1 = temp_file("rt.ckpt");
    auto p2 = temp_file("rt2.ckpt");
    save_checkpoint(p1.string(), ckpt);
    ModelCheckpoint loaded = load_checkpoint(p1.string());
    save_checkpoint(p2.string(), loaded);
    CHECK(slurp(p1) == slurp(p2));

    REQUIRE(loaded.arrays.size() == ckpt.arrays.size());
    for (size_t a = 0; a < ckpt.arrays.size(); ++a) {
      CHECK(loaded.arrays[a].name == ckpt.arrays[a].name);
      CHECK(loaded.arrays[a].shape == ckpt.arrays[a].shape);
      // Bit-exact float comparison.
      REQUIRE(loaded.arrays[a].data.size() == ckpt.arrays[a].data.size());
      for (size_t i = 0; i < ckpt.arrays[a].data.size(); ++i)
        CHECK(loaded.arrays[a].data[i] == ckpt.arrays[a].data[i]);
    }
    CHECK(loaded.config == ckpt.config);
    CHECK(loaded.has_stats == ckpt.has_stats);
    std::filesystem::remove(p1);
    std::filesystem::remove(p2);
  }
}

TEST_CASE("checkpoint errors name the problem") {
  ModelCheckpoint bad;
  bad.model_kind = "gru";
  bad.arrays.push_back({"w", {2, 3}, std::vector<float>(5, 0.0f)});  // 5 != 6
  auto path = temp_file("bad.ckpt");
  CHECK_THROWS_AS(save_checkpoint(path.string(), bad), ValidationError);

  // Truncated payload names the offending array.
  ModelCheckpoint ok;
  ok.model_kind = "gru";
  ok.arrays.push_back({"weights", {4, 4}, std::vector<float>(16, 1.0f)});
  save_checkpoint(path.string(), ok);
  std::string blob = slurp(path);
  std::ofstream(path, std::ios::binary) << blob.substr(0, blob.size() - 8);
  try {
    load_checkpoint(path.string());
    FAIL_CHECK("expected truncation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("weights") != std::string::npos);
  }

  // Bad magic.
  std::ofstream(path, std::ios::binary) << "NOPE!" << blob.substr(5);
  CHECK_THROWS_AS(load_checkpoint(path.string()), ValidationError);

  // Unsupported schema version.
  std::string v2 = blob;
  size_t pos = v2.find("\"schema_version\":1");
  REQUIRE(pos != std::string::npos);
  v2.replace(pos, 18, "\"schema_version\":2");
  std::ofstream(path, std::ios::binary) << v2;
  CHECK_THROWS_AS(load_checkpoint(path.string()), ValidationError);

  CHECK_THROWS_AS(load_checkpoint("/nonexistent/file.ckpt"), ValidationError);
  std::filesystem::remove(path);
}
