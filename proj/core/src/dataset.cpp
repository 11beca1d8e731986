#include "mint/dataset.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "text_util.hpp"

namespace mint {

using json = nlohmann::json;
using detail::format_double;
using detail::format_int;
using detail::json_escape;

// ============================================================================
// Shared type helpers
// ============================================================================

std::string to_string(EnvironmentId env) {
  switch (env) {
    case EnvironmentId::env1: return "1";
    case EnvironmentId::env2: return "2";
    case EnvironmentId::env3: return "3";
    case EnvironmentId::synthetic: return "synthetic";
  }
  throw ValidationError("unknown environment id");
}

EnvironmentId environment_from_string(const std::string& s) {
  if (s == "1") return EnvironmentId::env1;
  if (s == "2") return EnvironmentId::env2;
  if (s == "3") return EnvironmentId::env3;
  if (s == "synthetic") return EnvironmentId::synthetic;
  throw ValidationError("unknown environment id '" + s + "'");
}

std::optional<int> SequenceRecord::onset_index() const {
  if (!labeled()) return std::nullopt;
  for (size_t i = 1; i < frames.size(); ++i) {
    if (*frames[i - 1].label == 0 && *frames[i].label == 1) return static_cast<int>(i);
  }
  return std::nullopt;
}

int window_label(const Window& window, int min_positive) {
  if (min_positive < 1) throw ValidationError("window_label: min_positive must be >= 1");
  if (window.frames.empty()) throw ValidationError("window_label: empty window");
  int positives = 0;
  for (const auto& f : window.frames) {
    if (!f.label.has_value())
      throw ValidationError("window_label: unlabeled frame in window of sequence '" +
                            window.sequence_id + "'");
    positives += (*f.label == 1) ? 1 : 0;
  }
  return positives >= min_positive ? 1 : 0;
}

// ============================================================================
// Loading
// ============================================================================

namespace {

struct ParsedRow {
  std::string seq_id;
  int64_t frame_idx = 0;
  std::string participant_id;
  EnvironmentId env = EnvironmentId::env1;
  MultimodalFrame frame;
};

[[noreturn]] void line_error(const std::string& path, size_t line_no, const std::string& what) {
  throw ValidationError(path + ":" + std::to_string(line_no) + ": " + what);
}

void validate_emotion(EmotionDistribution& emo, const std::string& path, size_t line_no,
                      std::vector<std::string>* warnings) {
  for (double x : emo.p) {
    if (!std::isfinite(x) || x < 0.0 || x > 1.0)
      line_error(path, line_no, "emotion simplex violation: entry out of [0, 1]");
  }
  double s = emo.sum();
  if (std::abs(s - 1.0) > 1e-3)
    line_error(path, line_no,
               "emotion simplex violation: probabilities sum to " + format_double(s));
  if (std::abs(s - 1.0) > 1e-6) {
    // Mild drift from a foreign writer; renormalize and note it.
    for (double& x : emo.p) x /= s;
    if (warnings)
      warnings->push_back(path + ":" + std::to_string(line_no) +
                          ": renormalized emotion row (sum was " + format_double(s) + ")");
  }
}

ParsedRow parse_jsonl_row(const std::string& path, size_t line_no, const std::string& line,
                          std::vector<std::string>* warnings) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    line_error(path, line_no, std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) line_error(path, line_no, "expected a JSON object");
  for (const char* key : {"seq_id", "frame_idx", "participant_id", "env_id", "kp", "emo"}) {
    if (!j.contains(key)) line_error(path, line_no, std::string("missing key '") + key + "'");
  }
  ParsedRow row;
  try {
    row.seq_id = j.at("seq_id").get<std::string>();
    row.frame_idx = j.at("frame_idx").get<int64_t>();
    row.participant_id = j.at("participant_id").get<std::string>();
    const json& env = j.at("env_id");
    if (env.is_number_integer()) {
      int64_t e = env.get<int64_t>();
      if (e < 1 || e > 3) line_error(path, line_no, "env_id must be 1, 2, 3 or \"synthetic\"");
      row.env = static_cast<EnvironmentId>(e);
    } else if (env.is_string()) {
      row.env = environment_from_string(env.get<std::string>());
    } else {
      line_error(path, line_no, "env_id must be 1, 2, 3 or \"synthetic\"");
    }
    const json& kp = j.at("kp");
    if (!kp.is_array() || kp.size() != static_cast<size_t>(kPoseDim))
      line_error(path, line_no, "kp must be an array of 51 numbers");
    for (int i = 0; i < kPoseDim; ++i) row.frame.pose.values[i] = kp[i].get<double>();
    const json& emo = j.at("emo");
    if (!emo.is_array() || emo.size() != static_cast<size_t>(kNumEmotions))
      line_error(path, line_no, "emo must be an array of 7 numbers");
    for (int i = 0; i < kNumEmotions; ++i) row.frame.emotion.p[i] = emo[i].get<double>();
    if (j.contains("label") && !j.at("label").is_null()) {
      int64_t lab = j.at("label").get<int64_t>();
      if (lab != 0 && lab != 1) line_error(path, line_no, "label must be 0, 1 or null");
      row.frame.label = static_cast<int>(lab);
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const json::exception& e) {
    line_error(path, line_no, std::string("bad field type: ") + e.what());
  }
  validate_emotion(row.frame.emotion, path, line_no, warnings);
  return row;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string csv_header() {
  std::string h = "seq_id,frame_idx,participant_id,env_id";
  for (int i = 0; i < kPoseDim; ++i) {
    char buf[8];
    std::snprintf(buf, sizeof(buf), "kp_%02d", i);
    h += ",";
    h += buf;
  }
  for (int i = 0; i < kNumEmotions; ++i) h += ",emo_" + std::to_string(i);
  h += ",label";
  return h;
}

ParsedRow parse_csv_row(const std::string& path, size_t line_no, const std::string& line,
                        std::vector<std::string>* warnings) {
  std::vector<std::string> cells = split_csv(line);
  const size_t expected = 4 + kPoseDim + kNumEmotions + 1;
  if (cells.size() != expected)
    line_error(path, line_no,
               "expected " + std::to_string(expected) + " columns, found " +
                   std::to_string(cells.size()));
  ParsedRow row;
  row.seq_id = cells[0];
  row.frame_idx = detail::parse_int(cells[1], "frame_idx");
  row.participant_id = cells[2];
  row.env = environment_from_string(cells[3]);
  for (int i = 0; i < kPoseDim; ++i)
    row.frame.pose.values[i] = detail::parse_double(cells[4 + i], "kp");
  for (int i = 0; i < kNumEmotions; ++i)
    row.frame.emotion.p[i] = detail::parse_double(cells[4 + kPoseDim + i], "emo");
  const std::string& lab = cells.back();
  if (!lab.empty()) {
    int64_t v = detail::parse_int(lab, "label");
    if (v != 0 && v != 1) line_error(path, line_no, "label must be 0, 1 or empty");
    row.frame.label = static_cast<int>(v);
  }
  validate_emotion(row.frame.emotion, path, line_no, warnings);
  return row;
}

}  // namespace

DatasetFormat dataset_format_for_path(const std::string& path) {
  auto ends_with = [&](const std::string& suffix) {
    return path.size() >= suffix.size() &&
           path.compare(path.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(".jsonl")) return DatasetFormat::jsonl;
  if (ends_with(".csv")) return DatasetFormat::csv;
  throw ValidationError("cannot infer dataset format from path '" + path +
                        "' (expected .jsonl or .csv)");
}

std::vector<SequenceRecord> load_dataset(const std::string& path,
                                         std::vector<std::string>* warnings) {
  return load_dataset(path, dataset_format_for_path(path), warnings);
}

std::vector<SequenceRecord> load_dataset(const std::string& path, DatasetFormat format,
                                         std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open dataset file '" + path + "'");

  struct SeqBuilder {
    SequenceRecord record;
    std::vector<std::pair<int64_t, MultimodalFrame>> rows;
    std::set<int64_t> seen;
  };
  std::vector<std::string> order;
  std::map<std::string, SeqBuilder> builders;

  std::string line;
  size_t line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (format == DatasetFormat::csv && !saw_header) {
      if (line != csv_header())
        line_error(path, line_no, "unexpected CSV header (expected '" + csv_header() + "')");
      saw_header = true;
      continue;
    }
    ParsedRow row = format == DatasetFormat::jsonl
                        ? parse_jsonl_row(path, line_no, line, warnings)
                        : parse_csv_row(path, line_no, line, warnings);
    auto it = builders.find(row.seq_id);
    if (it == builders.end()) {
      SeqBuilder b;
      b.record.sequence_id = row.seq_id;
      b.record.participant_id = row.participant_id;
      b.record.environment = row.env;
      it = builders.emplace(row.seq_id, std::move(b)).first;
      order.push_back(row.seq_id);
    } else {
      if (it->second.record.participant_id != row.participant_id)
        line_error(path, line_no,
                   "inconsistent participant_id for sequence '" + row.seq_id + "'");
      if (it->second.record.environment != row.env)
        line_error(path, line_no, "inconsistent env_id for sequence '" + row.seq_id + "'");
    }
    if (!it->second.seen.insert(row.frame_idx).second)
      line_error(path, line_no,
                 "duplicate frame_idx " + std::to_string(row.frame_idx) + " in sequence '" +
                     row.seq_id + "'");
    it->second.rows.emplace_back(row.frame_idx, std::move(row.frame));
  }
  if (format == DatasetFormat::csv && !saw_header)
    throw ValidationError(path + ": empty CSV dataset (missing header)");

  std::vector<SequenceRecord> out;
  out.reserve(order.size());
  for (const std::string& id : order) {
    SeqBuilder& b = builders.at(id);
    std::sort(b.rows.begin(), b.rows.end(),
              [](const auto& a, const auto& c) { return a.first < c.first; });
    bool gap = false;
    for (size_t i = 0; i < b.rows.size(); ++i) {
      if (b.rows[i].first != static_cast<int64_t>(i)) gap = true;
      b.record.frames.push_back(std::move(b.rows[i].second));
    }
    if (gap && warnings)
      warnings->push_back("sequence '" + id + "': frame indices are not 0-based consecutive");
    size_t labeled = 0;
    for (const auto& f : b.record.frames) labeled += f.label.has_value() ? 1 : 0;
    if (labeled != 0 && labeled != b.record.frames.size())
      throw ValidationError(path + ": sequence '" + id +
                            "' mixes labeled and unlabeled frames");
    out.push_back(std::move(b.record));
  }
  return out;
}

// ============================================================================
// Saving
// ============================================================================

namespace {

void check_id(const std::string& id, const char* what) {
  if (id.empty()) throw ValidationError(std::string(what) + " must not be empty");
  if (id.find(',') != std::string::npos || id.find('\n') != std::string::npos)
    throw ValidationError(std::string(what) + " '" + id + "' contains a separator character");
}

std::string jsonl_row(const SequenceRecord& seq, size_t idx) {
  const MultimodalFrame& f = seq.frames[idx];
  std::string line = "{\"seq_id\":\"" + json_escape(seq.sequence_id) + "\"";
  line += ",\"frame_idx\":" + format_int(static_cast<int64_t>(idx));
  line += ",\"participant_id\":\"" + json_escape(seq.participant_id) + "\"";
  line += ",\"env_id\":";
  if (seq.environment == EnvironmentId::synthetic)
    line += "\"synthetic\"";
  else
    line += to_string(seq.environment);
  line += ",\"kp\":[";
  for (int i = 0; i < kPoseDim; ++i) {
    if (i) line += ",";
    line += format_double(f.pose.values[i]);
  }
  line += "],\"emo\":[";
  for (int i = 0; i < kNumEmotions; ++i) {
    if (i) line += ",";
    line += format_double(f.emotion.p[i]);
  }
  line += "],\"label\":";
  line += f.label.has_value() ? format_int(*f.label) : "null";
  line += "}";
  return line;
}

std::string csv_row(const SequenceRecord& seq, size_t idx) {
  const MultimodalFrame& f = seq.frames[idx];
  std::string line = seq.sequence_id + "," + format_int(static_cast<int64_t>(idx)) + "," +
                     seq.participant_id + "," + to_string(seq.environment);
  for (int i = 0; i < kPoseDim; ++i) line += "," + format_double(f.pose.values[i]);
  for (int i = 0; i < kNumEmotions; ++i) line += "," + format_double(f.emotion.p[i]);
  line += ",";
  if (f.label.has_value()) line += format_int(*f.label);
  return line;
}

}  // namespace

void save_dataset(const std::string& path, const std::vector<SequenceRecord>& dataset) {
  save_dataset(path, dataset, dataset_format_for_path(path));
}

void save_dataset(const std::string& path, const std::vector<SequenceRecord>& dataset,
                  DatasetFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  if (format == DatasetFormat::csv) out << csv_header() << "\n";
  for (const SequenceRecord& seq : dataset) {
    check_id(seq.sequence_id, "sequence_id");
    check_id(seq.participant_id, "participant_id");
    for (size_t i = 0; i < seq.frames.size(); ++i) {
      if (!seq.frames[i].emotion.valid())
        throw ValidationError("sequence '" + seq.sequence_id +
                              "': emotion row off the simplex at frame " + std::to_string(i));
      out << (format == DatasetFormat::jsonl ? jsonl_row(seq, i) : csv_row(seq, i)) << "\n";
    }
  }
  if (!out) throw ValidationError("I/O failure while writing '" + path + "'");
}

// ============================================================================
// Windowing
// ============================================================================

std::vector<Window> windows(const SequenceRecord& seq, int length, int stride,
                            std::vector<std::string>* warnings) {
  if (length < 1) throw ValidationError("windows: length must be >= 1");
  if (stride < 1) throw ValidationError("windows: stride must be >= 1");
  std::vector<Window> out;
  const int T = static_cast<int>(seq.frames.size());
  if (T < length) {
    if (warnings)
      warnings->push_back("sequence '" + seq.sequence_id + "' has " + std::to_string(T) +
                          " frames, shorter than window length " + std::to_string(length));
    return out;
  }
  for (int start = 0; start + length <= T; start += stride) {
    Window w;
    w.sequence_id = seq.sequence_id;
    w.participant_id = seq.participant_id;
    w.environment = seq.environment;
    w.start = start;
    w.synthetic = seq.environment == EnvironmentId::synthetic;
    w.frames.assign(seq.frames.begin() + start, seq.frames.begin() + start + length);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<Window> windows(const std::vector<SequenceRecord>& dataset, int length, int stride,
                            std::vector<std::string>* warnings) {
  std::vector<Window> out;
  for (const auto& seq : dataset) {
    auto w = windows(seq, length, stride, warnings);
    out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
  }
  return out;
}

double positive_window_fraction(const std::vector<Window>& wins, int min_positive) {
  if (wins.empty()) throw ValidationError("positive_window_fraction: no windows");
  size_t pos = 0;
  for (const auto& w : wins) pos += window_label(w, min_positive) == 1 ? 1 : 0;
  return static_cast<double>(pos) / static_cast<double>(wins.size());
}

}  // namespace mint
