#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace mint {

// ============================================================================
// Checkpoint container
// ============================================================================
//
// Binary layout:
//   bytes 0..4   magic "MINT1"
//   bytes 5..8   little-endian uint32, byte length of the JSON header
//   header       UTF-8 JSON: schema_version, model_kind, config (object),
//                arrays (ordered list of {name, shape, offset}), and optional
//                standardization stats
//   payload      contiguous little-endian float32 tensors, in directory order
//
// Offsets are relative to the start of the payload section. Loading then
// saving a checkpoint reproduces the file byte for byte.

struct NamedArray {
  std::string name;
  std::vector<int64_t> shape;
  std::vector<float> data;

  int64_t size() const {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
  }
};

struct ModelCheckpoint {
  int schema_version = 1;
  std::string model_kind;  // "gru", "lstm", "transformer", "mintrvae", "discriminator"
  std::map<std::string, std::string> config;  // scalar values serialized as text
  std::vector<NamedArray> arrays;

  // Per-feature standardization parameters captured at training time.
  bool has_stats = false;
  std::vector<float> stats_mean;
  std::vector<float> stats_std;

  const NamedArray* find(const std::string& name) const;

  // Typed config accessors; throw ValidationError on missing keys / bad text.
  std::string config_str(const std::string& key) const;
  int64_t config_int(const std::string& key) const;
  double config_float(const std::string& key) const;
  void set_config(const std::string& key, const std::string& v);
  void set_config(const std::string& key, int64_t v);
  void set_config(const std::string& key, double v);
};

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt);
ModelCheckpoint load_checkpoint(const std::string& path);

}  // namespace mint
