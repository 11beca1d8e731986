// ============================================================
// mint: command line front end for the intent-detection toolkit.
//
// One subcommand per module operation:
//   synth         scenario generator (separable / standard / hard presets)
//   train-rvae    fit the MINT-RVAE generative model
//   generate      sample sequences from a trained MINT-RVAE
//   rebalance     oversample minority windows with a trained MINT-RVAE
//   train         fit a GRU / LSTM / Transformer intent classifier
//   evaluate      cross-subject or cross-scene protocol runner
//   sweep         precision/recall threshold sweep
//   trajectories  onset-aligned probability trajectories
//   realism       real-vs-synthetic discriminative score
//   stream        adapter JSONL on stdin -> per-frame JSONL on stdout
//   replay        run a stored sequence file through the engine
//
// Exit codes: 0 success, 2 validation error, 3 numerical abort.
// ============================================================
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <mint/checkpoint.hpp>
#include <mint/classifier.hpp>
#include <mint/dataset.hpp>
#include <mint/engine.hpp>
#include <mint/features.hpp>
#include <mint/metrics.hpp>
#include <mint/protocol.hpp>
#include <mint/rvae.hpp>
#include <mint/synthgen.hpp>
#include <mint/types.hpp>

namespace {

using nlohmann::json;

// ------------------------------------------------------------
// Config file handling. --config points at a JSON object whose keys
// mirror the relevant config struct; CLI flags override file values.
// ------------------------------------------------------------

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw mint::ValidationError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw mint::ValidationError("config file " + path + ": " + e.what());
  }
  if (!j.is_object())
    throw mint::ValidationError("config file must hold a JSON object: " + path);
  return j;
}

template <typename T>
void assign_key(const json& j, const std::string& key, T& out) {
  auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->get<T>();
  } catch (const json::exception&) {
    throw mint::ValidationError("config key '" + key + "' has the wrong type");
  }
}

void reject_unknown_keys(const json& j, const std::vector<std::string>& known) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const std::string& k : known)
      if (it.key() == k) ok = true;
    if (!ok) throw mint::ValidationError("unknown config key: " + it.key());
  }
}

mint::RvaeConfig rvae_config_from_json(const json& j) {
  mint::RvaeConfig c;
  reject_unknown_keys(
      j, {"input_dim", "encoder_mlp0", "encoder_mlp1", "encoder_mlp2",
          "latent_dim", "decoder_hidden", "window", "window_stride",
          "lambda_pose", "lambda_emotion", "lambda_intent", "eta_max",
          "warmup_epochs", "free_bits", "huber_delta", "confidence_offset",
          "xi_coord", "xi_conf", "dropout", "epochs", "batch_size", "lr",
          "weight_decay"});
  assign_key(j, "input_dim", c.input_dim);
  assign_key(j, "encoder_mlp0", c.encoder_mlp0);
  assign_key(j, "encoder_mlp1", c.encoder_mlp1);
  assign_key(j, "encoder_mlp2", c.encoder_mlp2);
  assign_key(j, "latent_dim", c.latent_dim);
  assign_key(j, "decoder_hidden", c.decoder_hidden);
  assign_key(j, "window", c.window);
  assign_key(j, "window_stride", c.window_stride);
  assign_key(j, "lambda_pose", c.lambda_pose);
  assign_key(j, "lambda_emotion", c.lambda_emotion);
  assign_key(j, "lambda_intent", c.lambda_intent);
  assign_key(j, "eta_max", c.eta_max);
  assign_key(j, "warmup_epochs", c.warmup_epochs);
  assign_key(j, "free_bits", c.free_bits);
  assign_key(j, "huber_delta", c.huber_delta);
  assign_key(j, "confidence_offset", c.confidence_offset);
  assign_key(j, "xi_coord", c.xi_coord);
  assign_key(j, "xi_conf", c.xi_conf);
  assign_key(j, "dropout", c.dropout);
  assign_key(j, "epochs", c.epochs);
  assign_key(j, "batch_size", c.batch_size);
  assign_key(j, "lr", c.lr);
  assign_key(j, "weight_decay", c.weight_decay);
  return c;
}

mint::ClassifierConfig classifier_config_from_json(const json& j) {
  mint::ClassifierConfig c;
  reject_unknown_keys(j, {"backbone", "features", "hidden", "window", "heads",
                          "ff_multiplier", "epochs", "batch_size", "lr",
                          "weight_decay", "class_weighting", "early_stopping",
                          "patience"});
  if (j.contains("backbone"))
    c.backbone = mint::backbone_from_string(j["backbone"].get<std::string>());
  if (j.contains("features"))
    c.features = mint::feature_set_from_string(j["features"].get<std::string>());
  assign_key(j, "hidden", c.hidden);
  assign_key(j, "window", c.window);
  assign_key(j, "heads", c.heads);
  assign_key(j, "ff_multiplier", c.ff_multiplier);
  assign_key(j, "epochs", c.epochs);
  assign_key(j, "batch_size", c.batch_size);
  assign_key(j, "lr", c.lr);
  assign_key(j, "weight_decay", c.weight_decay);
  assign_key(j, "class_weighting", c.class_weighting);
  assign_key(j, "early_stopping", c.early_stopping);
  assign_key(j, "patience", c.patience);
  return c;
}

mint::EngineConfig engine_config_from_json(const json& j) {
  mint::EngineConfig c;
  reject_unknown_keys(j, {"decision_threshold", "k_run", "low_band",
                          "disengage_frames", "recurrent_carry",
                          "pre_standardized"});
  assign_key(j, "decision_threshold", c.decision_threshold);
  assign_key(j, "k_run", c.k_run);
  assign_key(j, "low_band", c.low_band);
  assign_key(j, "disengage_frames", c.disengage_frames);
  assign_key(j, "recurrent_carry", c.recurrent_carry);
  assign_key(j, "pre_standardized", c.pre_standardized);
  return c;
}

// ------------------------------------------------------------
// Shared file helpers.
// ------------------------------------------------------------

mint::DatasetFormat format_from_path(const std::string& path) {
  if (path.size() >= 4 && path.substr(path.size() - 4) == ".csv")
    return mint::DatasetFormat::csv;
  return mint::DatasetFormat::jsonl;
}

std::vector<mint::SequenceRecord> load_sequences(const std::string& path) {
  return mint::load_dataset(path, format_from_path(path));
}

std::string default_sibling(const std::string& path, const std::string& suffix) {
  size_t dot = path.find_last_of('.');
  size_t slash = path.find_last_of('/');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + suffix;
  return path.substr(0, dot) + suffix;
}

mint::IntentClassifier load_classifier(const std::string& path) {
  return mint::IntentClassifier::from_checkpoint(mint::load_checkpoint(path));
}

mint::MintRvae load_rvae(const std::string& path) {
  return mint::MintRvae::from_checkpoint(mint::load_checkpoint(path));
}

// ------------------------------------------------------------
// Command payloads. Every command throws on failure; main() maps
// exception type to the exit code.
// ------------------------------------------------------------

struct CommonArgs {
  uint64_t seed = 1234;
  std::string config_path;
  std::string out;
};

int cmd_synth(const CommonArgs& common, const std::string& preset, int n,
              int length_min, int length_max) {
  mint::ScenarioConfig sc = mint::preset_by_name(preset);
  if (n > 0) sc.n_sequences = n;
  if (length_min > 0) sc.length_min = length_min;
  if (length_max > 0) sc.length_max = length_max;
  sc.seed = common.seed;
  if (common.out.empty())
    throw mint::ValidationError("synth: --out is required");
  std::vector<mint::SequenceRecord> data = mint::generate(sc);
  mint::save_dataset(common.out, data, format_from_path(common.out));
  std::fprintf(stderr, "wrote %zu sequences to %s\n", data.size(),
               common.out.c_str());
  return 0;
}

int cmd_train_rvae(const CommonArgs& common, const std::string& data_path,
                   std::string log_path, int epochs_override,
                   double lr_override) {
  mint::RvaeConfig rc = rvae_config_from_json(load_config_file(common.config_path));
  if (epochs_override > 0) rc.epochs = epochs_override;
  if (lr_override > 0) rc.lr = lr_override;
  std::string out = common.out.empty() ? "rvae.ckpt" : common.out;
  if (log_path.empty()) log_path = default_sibling(out, ".log.csv");

  std::vector<mint::SequenceRecord> data = load_sequences(data_path);
  mint::RvaeTrainResult result = mint::train_rvae(data, rc, common.seed);
  mint::save_checkpoint(out, result.model.to_checkpoint());
  mint::write_rvae_log_csv(log_path, result.log);
  std::fprintf(stderr, "epochs %zu, total loss %.4f -> %.4f\n",
               result.log.size(), result.log.front().total,
               result.log.back().total);
  std::fprintf(stderr, "checkpoint %s, loss log %s\n", out.c_str(),
               log_path.c_str());
  return 0;
}

int cmd_generate(const CommonArgs& common, const std::string& model_path,
                 int n, int length) {
  if (common.out.empty())
    throw mint::ValidationError("generate: --out is required");
  mint::MintRvae model = load_rvae(model_path);
  std::vector<mint::SequenceRecord> data = model.sample(n, length, common.seed);
  mint::save_dataset(common.out, data, format_from_path(common.out));
  std::fprintf(stderr, "sampled %zu sequences to %s\n", data.size(),
               common.out.c_str());
  return 0;
}

int cmd_rebalance(const CommonArgs& common, const std::string& data_path,
                  const std::string& model_path, double target,
                  int min_positive) {
  if (common.out.empty())
    throw mint::ValidationError("rebalance: --out is required");
  std::vector<mint::SequenceRecord> data = load_sequences(data_path);
  mint::MintRvae model = load_rvae(model_path);
  std::vector<mint::SequenceRecord> balanced =
      mint::rebalance(data, model, target, common.seed, min_positive);
  mint::save_dataset(common.out, balanced, format_from_path(common.out));
  std::fprintf(stderr, "%zu sequences in, %zu out\n", data.size(),
               balanced.size());
  return 0;
}

int cmd_train(const CommonArgs& common, const std::string& data_path,
              const std::string& val_path, const std::string& backbone,
              const std::string& features, int hidden, int epochs,
              std::string history_path) {
  mint::ClassifierConfig cc =
      classifier_config_from_json(load_config_file(common.config_path));
  if (!backbone.empty()) cc.backbone = mint::backbone_from_string(backbone);
  if (!features.empty()) cc.features = mint::feature_set_from_string(features);
  if (hidden > 0) cc.hidden = hidden;
  if (epochs > 0) cc.epochs = epochs;
  std::string out = common.out.empty() ? "model.ckpt" : common.out;
  if (history_path.empty()) history_path = default_sibling(out, ".history.csv");

  std::vector<mint::SequenceRecord> train = load_sequences(data_path);
  std::vector<mint::SequenceRecord> val;
  if (!val_path.empty()) val = load_sequences(val_path);

  mint::TrainResult result = mint::train_classifier(train, val, cc, common.seed);
  mint::save_checkpoint(out, result.model.to_checkpoint());
  mint::write_history_csv(history_path, result.history);
  std::fprintf(stderr, "epochs %zu, best epoch %d, train loss %.4f -> %.4f\n",
               result.history.size(), result.best_epoch,
               result.history.front().train_loss,
               result.history.back().train_loss);
  std::fprintf(stderr, "checkpoint %s, history %s\n", out.c_str(),
               history_path.c_str());
  return 0;
}

int cmd_evaluate(const CommonArgs& common, const std::string& data_path,
                 const std::string& protocol, int folds,
                 const std::string& backbones, const std::string& features,
                 bool augment, int epochs, double threshold, int k_run) {
  json file_cfg = load_config_file(common.config_path);
  reject_unknown_keys(file_cfg, {"classifier", "rvae"});
  mint::ClassifierConfig base =
      classifier_config_from_json(file_cfg.value("classifier", json::object()));
  mint::RvaeConfig rvae_cfg =
      rvae_config_from_json(file_cfg.value("rvae", json::object()));
  if (!features.empty())
    base.features = mint::feature_set_from_string(features);
  if (epochs > 0) base.epochs = epochs;

  std::vector<mint::SequenceRecord> data = load_sequences(data_path);
  mint::ProtocolKind kind = mint::protocol_kind_from_string(protocol);
  mint::ProtocolSplit split =
      kind == mint::ProtocolKind::cross_subject
          ? mint::cross_subject_split(data, folds, common.seed)
          : mint::cross_scene_split(data, folds);

  std::vector<mint::VariantSpec> variants;
  std::stringstream names(backbones);
  std::string name;
  while (std::getline(names, name, ',')) {
    if (name.empty()) continue;
    mint::VariantSpec v;
    v.config = base;
    v.config.backbone = mint::backbone_from_string(name);
    v.name = name + "-" + mint::to_string(v.config.features);
    variants.push_back(v);
    if (augment) {
      v.name += "+vae";
      v.augment = true;
      v.rvae = rvae_cfg;
      variants.push_back(v);
    }
  }

  std::vector<mint::VariantResult> results =
      mint::run_protocol(data, split, variants, common.seed, threshold, k_run);
  std::string out = common.out.empty() ? "results.csv" : common.out;
  mint::write_results_csv(out, results);
  for (const mint::VariantResult& r : results) {
    std::fprintf(stderr,
                 "%-24s frame auroc %.4f +- %.4f, seq macro-F1 %.4f +- %.4f\n",
                 r.name.c_str(), r.mean.frame_auroc, r.sd.frame_auroc,
                 r.mean.seq_macro_f1, r.sd.seq_macro_f1);
  }
  std::fprintf(stderr, "results %s\n", out.c_str());
  return 0;
}

int cmd_sweep(const CommonArgs& common, const std::string& model_path,
              const std::string& data_path, const std::string& level,
              int k_run, int min_positive) {
  if (common.out.empty()) throw mint::ValidationError("sweep: --out is required");
  mint::IntentClassifier model = load_classifier(model_path);
  std::vector<mint::SequenceRecord> data = load_sequences(data_path);

  std::vector<double> scores;
  std::vector<int> labels;
  if (level == "frame") {
    for (const mint::SequenceRecord& seq : data) {
      std::vector<std::optional<double>> probs =
          mint::sequence_frame_probs(model, seq);
      for (size_t t = 0; t < probs.size(); ++t) {
        if (!probs[t].has_value()) continue;
        if (!seq.frames[t].label.has_value())
          throw mint::ValidationError("sweep: unlabeled frame in " +
                                      seq.sequence_id);
        scores.push_back(*probs[t]);
        labels.push_back(*seq.frames[t].label);
      }
    }
  } else if (level == "sequence") {
    const int window = model.config().window;
    for (const mint::SequenceRecord& seq : data) {
      for (const mint::Window& w : mint::windows(seq, window, 1)) {
        std::vector<float> feats = mint::window_feature_matrix(
            w, model.stats(), model.config().features);
        mint::IntentOutput out = model.forward_window(feats);
        scores.push_back(mint::run_score(out.frame_probs, k_run));
        labels.push_back(mint::window_label(w, min_positive));
      }
    }
  } else {
    throw mint::ValidationError("sweep: --level must be frame or sequence");
  }

  std::vector<mint::SweepPoint> sweep = mint::pr_sweep(scores, labels);
  mint::write_sweep_csv(common.out, sweep);
  std::fprintf(stderr, "%zu scores, sweep %s\n", scores.size(),
               common.out.c_str());
  return 0;
}

int cmd_trajectories(const CommonArgs& common, const std::string& model_path,
                     const std::string& data_path, int horizon) {
  if (common.out.empty())
    throw mint::ValidationError("trajectories: --out is required");
  mint::IntentClassifier model = load_classifier(model_path);
  std::vector<mint::SequenceRecord> data = load_sequences(data_path);
  mint::TrajectoryResult result =
      mint::onset_aligned_trajectories(model, data, horizon);
  mint::write_trajectories_csv(common.out, result);
  std::fprintf(stderr, "%zu points, %d sequences without onset, %s\n",
               result.points.size(), result.skipped, common.out.c_str());
  return 0;
}

int cmd_realism(const CommonArgs& common, const std::string& real_path,
                const std::string& synth_path, int window, int stride) {
  std::vector<mint::SequenceRecord> real = load_sequences(real_path);
  std::vector<mint::SequenceRecord> synth = load_sequences(synth_path);
  if (stride <= 0) stride = window;
  std::vector<mint::Window> real_pool = mint::windows(real, window, stride);
  std::vector<mint::Window> synth_pool = mint::windows(synth, window, stride);
  mint::StandardizationStats stats = mint::fit_standardization(real);
  mint::RealismScore score =
      mint::discriminative_score(real_pool, synth_pool, stats, common.seed);
  json j = {{"accuracy", score.accuracy},
            {"d_score", score.d_score},
            {"real_windows", real_pool.size()},
            {"synth_windows", synth_pool.size()}};
  if (!common.out.empty()) {
    std::ofstream out(common.out);
    if (!out) throw mint::ValidationError("cannot write " + common.out);
    out << j.dump(2) << "\n";
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

json replay_frame_json(const mint::ReplayFrame& f) {
  json j;
  j["frame_idx"] = f.frame_idx;
  if (f.prob.has_value())
    j["prob"] = *f.prob;
  else
    j["prob"] = nullptr;
  j["state"] = mint::to_string(f.state);
  j["latency_ms"] = f.latency_ms;
  return j;
}

int cmd_stream(const CommonArgs& common, const std::string& model_path,
               double threshold, int k_run, double low_band, int disengage,
               bool carry) {
  mint::EngineConfig ec = engine_config_from_json(load_config_file(common.config_path));
  if (threshold >= 0) ec.decision_threshold = threshold;
  if (k_run > 0) ec.k_run = k_run;
  if (low_band >= 0) ec.low_band = low_band;
  if (disengage > 0) ec.disengage_frames = disengage;
  if (carry) ec.recurrent_carry = true;
  // build_frame output below is already standardized with the model stats.
  ec.pre_standardized = true;

  mint::IntentClassifier model = load_classifier(model_path);
  mint::EngagementEngine engine(model, ec);

  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    mint::AdapterFrame af = mint::parse_adapter_line(line);
    mint::MultimodalFrame frame =
        mint::build_frame(af.detection, model.stats(), af.label);
    mint::PushResult r = engine.push_frame(frame);
    mint::ReplayFrame rf;
    rf.frame_idx = af.frame_idx;
    rf.prob = r.prob;
    rf.state = r.state;
    rf.latency_ms = r.latency_ms;
    std::cout << replay_frame_json(rf).dump() << "\n";
  }
  mint::StreamStats stats = engine.stats();
  std::fprintf(stderr, "frames %lld, p50 %.3f ms, p95 %.3f ms, dropped %lld\n",
               static_cast<long long>(stats.frames), stats.p50_ms, stats.p95_ms,
               static_cast<long long>(stats.dropped));
  return 0;
}

int cmd_replay(const CommonArgs& common, const std::string& model_path,
               const std::string& data_path, bool print_stats,
               double threshold, int k_run) {
  mint::EngineConfig ec = engine_config_from_json(load_config_file(common.config_path));
  if (threshold >= 0) ec.decision_threshold = threshold;
  if (k_run > 0) ec.k_run = k_run;

  mint::IntentClassifier model = load_classifier(model_path);
  std::vector<mint::SequenceRecord> data = load_sequences(data_path);

  std::ofstream trace_out;
  if (!common.out.empty()) {
    trace_out.open(common.out);
    if (!trace_out) throw mint::ValidationError("cannot write " + common.out);
  }

  int64_t frames = 0, dropped = 0;
  std::vector<double> latencies;
  for (const mint::SequenceRecord& seq : data) {
    mint::ReplayResult result = mint::replay(model, seq, ec);
    frames += result.stats.frames;
    dropped += result.stats.dropped;
    for (const mint::ReplayFrame& f : result.trace) {
      latencies.push_back(f.latency_ms);
      if (trace_out) {
        json j = replay_frame_json(f);
        j["seq_id"] = seq.sequence_id;
        trace_out << j.dump() << "\n";
      }
    }
  }

  if (print_stats) {
    json j;
    j["frames"] = frames;
    j["dropped"] = dropped;
    j["sequences"] = data.size();
    if (!latencies.empty()) {
      j["p50_ms"] = mint::percentile(latencies, 0.5);
      j["p95_ms"] = mint::percentile(latencies, 0.95);
      j["max_ms"] = mint::percentile(latencies, 1.0);
    }
    std::cout << j.dump(2) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"intent detection toolkit"};
  app.require_subcommand(1);

  CommonArgs common;

  // Global flags, inherited by every subcommand.
  app.add_option("--seed", common.seed, "master random seed")->capture_default_str();
  app.add_option("--config", common.config_path, "JSON config file");
  app.add_option("--out", common.out, "output path");
  app.fallthrough();

  // synth
  std::string preset = "standard";
  int synth_n = 0, synth_len_min = 0, synth_len_max = 0;
  CLI::App* synth = app.add_subcommand("synth", "generate scripted scenario data");
  synth->add_option("--preset", preset, "separable | standard | hard")
      ->capture_default_str();
  synth->add_option("--n", synth_n, "number of sequences");
  synth->add_option("--length-min", synth_len_min, "shortest sequence, frames");
  synth->add_option("--length-max", synth_len_max, "longest sequence, frames");

  // train-rvae
  std::string tr_data, tr_log;
  int tr_epochs = 0;
  double tr_lr = 0;
  CLI::App* train_rvae = app.add_subcommand("train-rvae", "fit the MINT-RVAE");
  train_rvae->add_option("--data", tr_data, "training sequences")->required();
  train_rvae->add_option("--log", tr_log, "loss log CSV path");
  train_rvae->add_option("--epochs", tr_epochs, "override config epochs");
  train_rvae->add_option("--lr", tr_lr, "override config learning rate");

  // generate
  std::string gen_model;
  int gen_n = 32, gen_length = 80;
  CLI::App* gen = app.add_subcommand("generate", "sample from a trained MINT-RVAE");
  gen->add_option("--model", gen_model, "MINT-RVAE checkpoint")->required();
  gen->add_option("--n", gen_n, "sequences to sample")->capture_default_str();
  gen->add_option("--length", gen_length, "frames per sequence")
      ->capture_default_str();

  // rebalance
  std::string rb_data, rb_model;
  double rb_target = 0.5;
  int rb_min_positive = 7;
  CLI::App* rb = app.add_subcommand("rebalance", "oversample minority windows");
  rb->add_option("--data", rb_data, "dataset to rebalance")->required();
  rb->add_option("--model", rb_model, "MINT-RVAE checkpoint")->required();
  rb->add_option("--target", rb_target, "positive window fraction target")
      ->capture_default_str();
  rb->add_option("--min-positive", rb_min_positive,
                 "positive frames for a positive window")
      ->capture_default_str();

  // train
  std::string cl_data, cl_val, cl_backbone, cl_features, cl_history;
  int cl_hidden = 0, cl_epochs = 0;
  CLI::App* train = app.add_subcommand("train", "fit an intent classifier");
  train->add_option("--data", cl_data, "training sequences")->required();
  train->add_option("--val", cl_val, "validation sequences");
  train->add_option("--backbone", cl_backbone, "gru | lstm | transformer");
  train->add_option("--features", cl_features, "pose_only | emotion_only | fused");
  train->add_option("--hidden", cl_hidden, "hidden width (0 = default)");
  train->add_option("--epochs", cl_epochs, "override config epochs");
  train->add_option("--history", cl_history, "history CSV path");

  // evaluate
  std::string ev_data, ev_protocol = "cross_subject";
  std::string ev_backbones = "gru,lstm,transformer", ev_features;
  int ev_folds = 5, ev_epochs = 0, ev_k_run = 7;
  double ev_threshold = 0.5;
  bool ev_augment = false;
  CLI::App* ev = app.add_subcommand("evaluate", "run an evaluation protocol");
  ev->add_option("--data", ev_data, "dataset")->required();
  ev->add_option("--protocol", ev_protocol, "cross_subject | cross_scene")
      ->capture_default_str();
  ev->add_option("--folds", ev_folds, "folds (repeats for cross_scene)")
      ->capture_default_str();
  ev->add_option("--backbones", ev_backbones, "comma-separated backbone list")
      ->capture_default_str();
  ev->add_option("--features", ev_features, "feature set for every variant");
  ev->add_flag("--augment", ev_augment, "add a +vae rebalanced twin per variant");
  ev->add_option("--epochs", ev_epochs, "override classifier epochs");
  ev->add_option("--threshold", ev_threshold, "sequence decision threshold")
      ->capture_default_str();
  ev->add_option("--k-run", ev_k_run, "consecutive frames for the k-run rule")
      ->capture_default_str();

  // sweep
  std::string sw_model, sw_data, sw_level = "sequence";
  int sw_k_run = 7, sw_min_positive = 7;
  CLI::App* sw = app.add_subcommand("sweep", "precision/recall threshold sweep");
  sw->add_option("--model", sw_model, "classifier checkpoint")->required();
  sw->add_option("--data", sw_data, "dataset")->required();
  sw->add_option("--level", sw_level, "frame | sequence")->capture_default_str();
  sw->add_option("--k-run", sw_k_run, "k for sequence-level run scores")
      ->capture_default_str();
  sw->add_option("--min-positive", sw_min_positive,
                 "positive frames for a positive window")
      ->capture_default_str();

  // trajectories
  std::string tj_model, tj_data;
  int tj_horizon = 30;
  CLI::App* tj = app.add_subcommand("trajectories",
                                    "onset-aligned probability trajectories");
  tj->add_option("--model", tj_model, "classifier checkpoint")->required();
  tj->add_option("--data", tj_data, "dataset")->required();
  tj->add_option("--horizon", tj_horizon, "frames either side of onset")
      ->capture_default_str();

  // realism
  std::string re_real, re_synth;
  int re_window = 15, re_stride = 0;
  CLI::App* re = app.add_subcommand("realism", "real-vs-synthetic discriminative score");
  re->add_option("--real", re_real, "real sequences")->required();
  re->add_option("--synth", re_synth, "synthetic sequences")->required();
  re->add_option("--window", re_window, "window length")->capture_default_str();
  re->add_option("--stride", re_stride, "window stride (0 = window length)");

  // stream
  std::string st_model;
  double st_threshold = -1, st_low_band = -1;
  int st_k_run = 0, st_disengage = 0;
  bool st_carry = false;
  CLI::App* st = app.add_subcommand("stream",
                                    "adapter JSONL on stdin -> JSONL on stdout");
  st->add_option("--model", st_model, "classifier checkpoint")->required();
  st->add_option("--threshold", st_threshold, "decision threshold");
  st->add_option("--k-run", st_k_run, "consecutive frames to engage");
  st->add_option("--low-band", st_low_band, "transitional band floor");
  st->add_option("--disengage", st_disengage, "frames without a run before dropping");
  st->add_flag("--carry", st_carry, "recurrent fast path (gru/lstm)");

  // replay
  std::string rp_model, rp_data;
  bool rp_stats = false;
  double rp_threshold = -1;
  int rp_k_run = 0;
  CLI::App* rp = app.add_subcommand("replay", "run stored sequences through the engine");
  rp->add_option("--model", rp_model, "classifier checkpoint")->required();
  rp->add_option("--data", rp_data, "dataset")->required();
  rp->add_flag("--stats", rp_stats, "print latency stats JSON to stdout");
  rp->add_option("--threshold", rp_threshold, "decision threshold");
  rp->add_option("--k-run", rp_k_run, "consecutive frames to engage");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (synth->parsed())
      return cmd_synth(common, preset, synth_n, synth_len_min, synth_len_max);
    if (train_rvae->parsed())
      return cmd_train_rvae(common, tr_data, tr_log, tr_epochs, tr_lr);
    if (gen->parsed()) return cmd_generate(common, gen_model, gen_n, gen_length);
    if (rb->parsed())
      return cmd_rebalance(common, rb_data, rb_model, rb_target, rb_min_positive);
    if (train->parsed())
      return cmd_train(common, cl_data, cl_val, cl_backbone, cl_features,
                       cl_hidden, cl_epochs, cl_history);
    if (ev->parsed())
      return cmd_evaluate(common, ev_data, ev_protocol, ev_folds, ev_backbones,
                          ev_features, ev_augment, ev_epochs, ev_threshold,
                          ev_k_run);
    if (sw->parsed())
      return cmd_sweep(common, sw_model, sw_data, sw_level, sw_k_run,
                       sw_min_positive);
    if (tj->parsed()) return cmd_trajectories(common, tj_model, tj_data, tj_horizon);
    if (re->parsed())
      return cmd_realism(common, re_real, re_synth, re_window, re_stride);
    if (st->parsed())
      return cmd_stream(common, st_model, st_threshold, st_k_run, st_low_band,
                        st_disengage, st_carry);
    if (rp->parsed())
      return cmd_replay(common, rp_model, rp_data, rp_stats, rp_threshold,
                        rp_k_run);
  } catch (const mint::ValidationError& e) {
    std::fprintf(stderr, "validation error: %s\n", e.what());
    return 2;
  } catch (const mint::NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 3;
  }
  return 0;
}
