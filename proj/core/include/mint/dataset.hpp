#pragma once

#include <string>
#include <vector>

#include "mint/types.hpp"

namespace mint {

enum class DatasetFormat { jsonl, csv };

// Infers the format from the file extension (".jsonl" / ".csv").
DatasetFormat dataset_format_for_path(const std::string& path);

// ============================================================================
// Dataset files
// ============================================================================
//
// JSONL flavor: one frame per line with keys
//   seq_id, frame_idx, participant_id, env_id, kp (51 floats), emo (7 floats),
//   label (0 / 1 / null)
// CSV flavor: header
//   seq_id,frame_idx,participant_id,env_id,kp_00..kp_50,emo_0..emo_6,label
// Floats are written as shortest round-trip decimals. Frames may appear out of
// order inside a file; they are re-sorted by frame_idx per sequence. Sequence
// order follows first appearance. Duplicate (seq_id, frame_idx) pairs,
// malformed rows, emotion rows off the simplex by more than 1e-3 and sequences
// mixing labeled with unlabeled frames are rejected with the offending line
// number in the message.

std::vector<SequenceRecord> load_dataset(const std::string& path,
                                         std::vector<std::string>* warnings = nullptr);
std::vector<SequenceRecord> load_dataset(const std::string& path, DatasetFormat format,
                                         std::vector<std::string>* warnings = nullptr);

void save_dataset(const std::string& path, const std::vector<SequenceRecord>& dataset);
void save_dataset(const std::string& path, const std::vector<SequenceRecord>& dataset,
                  DatasetFormat format);

// ============================================================================
// Windowing
// ============================================================================

// Sliding windows of `length` frames. Sequences shorter than `length` yield no
// windows and append a warning when a sink is provided.
std::vector<Window> windows(const SequenceRecord& seq, int length = 15, int stride = 1,
                            std::vector<std::string>* warnings = nullptr);
std::vector<Window> windows(const std::vector<SequenceRecord>& dataset, int length = 15,
                            int stride = 1, std::vector<std::string>* warnings = nullptr);

// Fraction of windows whose window_label is 1.
double positive_window_fraction(const std::vector<Window>& wins, int min_positive = 7);

}  // namespace mint
