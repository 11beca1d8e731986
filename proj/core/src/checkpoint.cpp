#include "mint/checkpoint.hpp"

#include <nlohmann/json.hpp>

#include <bit>
#include <cstring>
#include <fstream>

#include "mint/types.hpp"
#include "text_util.hpp"

namespace mint {

using json = nlohmann::json;

namespace {

constexpr char kMagic[5] = {'M', 'I', 'N', 'T', '1'};

void append_u32_le(std::string& out, uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

uint32_t read_u32_le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

void append_f32_le(std::string& out, const std::vector<float>& data) {
  static_assert(sizeof(float) == 4);
  if constexpr (std::endian::native == std::endian::little) {
    size_t off = out.size();
    out.resize(off + data.size() * 4);
    std::memcpy(out.data() + off, data.data(), data.size() * 4);
  } else {
    for (float f : data) {
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      append_u32_le(out, bits);
    }
  }
}

std::vector<float> read_f32_le(const unsigned char* p, size_t count) {
  std::vector<float> out(count);
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(out.data(), p, count * 4);
  } else {
    for (size_t i = 0; i < count; ++i) {
      uint32_t bits = read_u32_le(p + 4 * i);
      std::memcpy(&out[i], &bits, 4);
    }
  }
  return out;
}

json header_json(const ModelCheckpoint& ckpt) {
  json arrays = json::array();
  int64_t offset = 0;
  for (const NamedArray& a : ckpt.arrays) {
    json entry;
    entry["name"] = a.name;
    entry["shape"] = a.shape;
    entry["offset"] = offset;
    arrays.push_back(entry);
    offset += a.size() * 4;
  }
  json h;
  h["schema_version"] = ckpt.schema_version;
  h["model_kind"] = ckpt.model_kind;
  h["config"] = ckpt.config;
  h["arrays"] = arrays;
  if (ckpt.has_stats) {
    h["stats"] = {{"mean", ckpt.stats_mean}, {"std", ckpt.stats_std}};
  }
  return h;
}

}  // namespace

const NamedArray* ModelCheckpoint::find(const std::string& name) const {
  for (const NamedArray& a : arrays)
    if (a.name == name) return &a;
  return nullptr;
}

std::string ModelCheckpoint::config_str(const std::string& key) const {
  auto it = config.find(key);
  if (it == config.end()) throw ValidationError("checkpoint config missing key '" + key + "'");
  return it->second;
}

int64_t ModelCheckpoint::config_int(const std::string& key) const {
  return detail::parse_int(config_str(key), "config key '" + key + "'");
}

double ModelCheckpoint::config_float(const std::string& key) const {
  return detail::parse_double(config_str(key), "config key '" + key + "'");
}

void ModelCheckpoint::set_config(const std::string& key, const std::string& v) {
  config[key] = v;
}
void ModelCheckpoint::set_config(const std::string& key, int64_t v) {
  config[key] = detail::format_int(v);
}
void ModelCheckpoint::set_config(const std::string& key, double v) {
  config[key] = detail::format_double(v);
}

void save_checkpoint(const std::string& path, const ModelCheckpoint& ckpt) {
  for (const NamedArray& a : ckpt.arrays) {
    if (a.name.empty()) throw ValidationError("checkpoint array with empty name");
    if (a.size() != static_cast<int64_t>(a.data.size()))
      throw ValidationError("checkpoint array '" + a.name +
                            "': shape does not match element count");
  }
  if (ckpt.has_stats && ckpt.stats_mean.size() != ckpt.stats_std.size())
    throw ValidationError("checkpoint stats: mean/std length mismatch");

  std::string header = header_json(ckpt).dump();
  std::string blob;
  blob.reserve(9 + header.size());
  blob.append(kMagic, sizeof(kMagic));
  append_u32_le(blob, static_cast<uint32_t>(header.size()));
  blob += header;
  for (const NamedArray& a : ckpt.arrays) append_f32_le(blob, a.data);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw ValidationError("I/O failure while writing '" + path + "'");
}

ModelCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint file '" + path + "'");
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (blob.size() < 9 || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw ValidationError("'" + path + "' is not a checkpoint file (bad magic)");
  uint32_t header_len = read_u32_le(reinterpret_cast<const unsigned char*>(blob.data()) + 5);
  if (blob.size() < 9 + static_cast<size_t>(header_len))
    throw ValidationError("'" + path + "': truncated header");

  json h;
  try {
    h = json::parse(blob.substr(9, header_len));
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "': invalid header JSON: " + e.what());
  }

  ModelCheckpoint ckpt;
  try {
    ckpt.schema_version = h.at("schema_version").get<int>();
    if (ckpt.schema_version != 1)
      throw ValidationError("'" + path + "': unsupported schema_version " +
                            std::to_string(ckpt.schema_version));
    ckpt.model_kind = h.at("model_kind").get<std::string>();
    ckpt.config = h.at("config").get<std::map<std::string, std::string>>();
    if (h.contains("stats")) {
      ckpt.has_stats = true;
      ckpt.stats_mean = h.at("stats").at("mean").get<std::vector<float>>();
      ckpt.stats_std = h.at("stats").at("std").get<std::vector<float>>();
    }
    const unsigned char* payload =
        reinterpret_cast<const unsigned char*>(blob.data()) + 9 + header_len;
    size_t payload_bytes = blob.size() - 9 - header_len;
    for (const json& entry : h.at("arrays")) {
      NamedArray a;
      a.name = entry.at("name").get<std::string>();
      a.shape = entry.at("shape").get<std::vector<int64_t>>();
      int64_t offset = entry.at("offset").get<int64_t>();
      int64_t bytes = a.size() * 4;
      if (offset < 0 || offset + bytes > static_cast<int64_t>(payload_bytes))
        throw ValidationError("'" + path + "': payload truncated for array '" + a.name + "'");
      a.data = read_f32_le(payload + offset, static_cast<size_t>(a.size()));
      ckpt.arrays.push_back(std::move(a));
    }
  } catch (const ValidationError&) {
    throw;
  } catch (const json::exception& e) {
    throw ValidationError("'" + path + "': malformed header: " + e.what());
  }
  return ckpt;
}

}  // namespace mint
