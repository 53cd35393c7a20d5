#pragma once

// Weight archive: a directory with `manifest.json` (array of
// {name, shape, offset, length, crc32}) and `weights.bin` (little-endian
// IEEE-754 float32, row-major, tensors back to back in manifest order).
// Optional sidecars: `model.json` (size knobs) and `provenance.json`.

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "mric/model.hpp"

namespace mric {

namespace fs = std::filesystem;

inline std::uint32_t byteswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

struct ArchiveEntry {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;  // bytes into weights.bin
  std::uint64_t length = 0;  // bytes
  std::uint32_t crc32 = 0;
};

struct WeightArchive {
  std::vector<ArchiveEntry> manifest;
  std::vector<unsigned char> blob;

  const ArchiveEntry* find(const std::string& name) const {
    for (const auto& e : manifest) {
      if (e.name == name) return &e;
    }
    return nullptr;
  }

  /// Decoded floats of one entry.
  std::vector<float> values(const ArchiveEntry& e) const {
    std::vector<float> out(e.length / sizeof(float));
    for (std::size_t i = 0; i < out.size(); ++i) {
      std::uint32_t bits;
      std::memcpy(&bits, blob.data() + e.offset + i * 4, 4);
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      out[i] = std::bit_cast<float>(bits);
    }
    return out;
  }
};

enum class LoadPolicy { kStrict, kBaseOnly };

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < n; off += kChunk) {
    crc = ::crc32(crc, data + off, static_cast<uInt>(std::min(kChunk, n - off)));
  }
  return static_cast<std::uint32_t>(crc);
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"input_size", c.input_size},
       {"width_divisor", c.width_divisor},
       {"base_dropout", c.base_dropout},
       {"head_dropout", c.head_dropout}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.input_size = j.value("input_size", std::size_t{224});
  c.width_divisor = j.value("width_divisor", std::size_t{1});
  c.base_dropout = j.value("base_dropout", 0.5);
  c.head_dropout = j.value("head_dropout", 0.1);
}

/// Packs every parameter of `model` into an in-memory archive.
inline WeightArchive pack_weights(const ModelGraph& model) {
  WeightArchive a;
  for (const auto& p : model.parameters()) {
    ArchiveEntry e;
    e.name = p.name;
    e.shape = p.tensor.shape();
    e.offset = a.blob.size();
    e.length = p.tensor.numel() * sizeof(float);
    a.blob.resize(a.blob.size() + e.length);
    unsigned char* dst = a.blob.data() + e.offset;
    for (std::size_t i = 0; i < p.tensor.numel(); ++i) {
      auto bits = std::bit_cast<std::uint32_t>(p.tensor[i]);
      if constexpr (std::endian::native == std::endian::big) bits = byteswap32(bits);
      std::memcpy(dst + i * 4, &bits, 4);
    }
    e.crc32 = crc32_of(dst, e.length);
    a.manifest.push_back(std::move(e));
  }
  return a;
}

inline void save_weights(const ModelGraph& model, const fs::path& dir) {
  const WeightArchive a = pack_weights(model);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& e : a.manifest) {
    manifest.push_back({{"name", e.name},
                        {"shape", e.shape},
                        {"offset", e.offset},
                        {"length", e.length},
                        {"crc32", e.crc32}});
  }
  auto write_text = [](const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out << text;
    if (!out) throw IoError("cannot write " + p.string());
  };
  write_text(dir / "manifest.json", manifest.dump(1) + "\n");
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(a.blob.data()),
              static_cast<std::streamsize>(a.blob.size()));
    if (!out) throw IoError("cannot write " + (dir / "weights.bin").string());
  }
  write_text(dir / "model.json", nlohmann::json(model.config).dump(1) + "\n");
  const nlohmann::json prov = {{"source_domain", model.provenance.source_domain},
                               {"target_domain", model.provenance.target_domain},
                               {"frozen_layer_names", model.provenance.frozen_layer_names}};
  write_text(dir / "provenance.json", prov.dump(1) + "\n");
}

/// Reads an archive and verifies layout and checksums.
inline WeightArchive read_archive(const fs::path& dir) {
  WeightArchive a;
  nlohmann::json manifest;
  {
    std::ifstream in(dir / "manifest.json");
    if (!in) throw IoError("cannot open " + (dir / "manifest.json").string());
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw ValueError("malformed " + (dir / "manifest.json").string() + ": " + e.what());
    }
  }
  {
    std::ifstream in(dir / "weights.bin", std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + (dir / "weights.bin").string());
    a.blob.resize(static_cast<std::size_t>(in.tellg()));
    in.seekg(0);
    in.read(reinterpret_cast<char*>(a.blob.data()), static_cast<std::streamsize>(a.blob.size()));
    if (!in) throw IoError("cannot read " + (dir / "weights.bin").string());
  }
  try {
    for (const auto& j : manifest) {
      ArchiveEntry e;
      e.name = j.at("name").get<std::string>();
      e.shape = j.at("shape").get<Shape>();
      e.offset = j.at("offset").get<std::uint64_t>();
      e.length = j.at("length").get<std::uint64_t>();
      e.crc32 = j.at("crc32").get<std::uint32_t>();
      a.manifest.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValueError("malformed manifest entry: " + std::string(e.what()));
  }

  std::vector<const ArchiveEntry*> sorted;
  for (const auto& e : a.manifest) {
    if (e.length != numel(e.shape) * sizeof(float)) {
      throw ValueError("manifest entry " + e.name + ": length does not match shape");
    }
    if (e.offset + e.length > a.blob.size()) {
      throw ValueError("manifest entry " + e.name + " extends past end of weights.bin");
    }
    sorted.push_back(&e);
  }
  std::sort(sorted.begin(), sorted.end(),
            [](auto* x, auto* y) { return x->offset < y->offset; });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i - 1]->offset + sorted[i - 1]->length > sorted[i]->offset) {
      throw ValueError("manifest entries " + sorted[i - 1]->name + " and " + sorted[i]->name +
                       " overlap");
    }
  }
  for (const auto& e : a.manifest) {
    if (crc32_of(a.blob.data() + e.offset, e.length) != e.crc32) {
      throw ChecksumError("checksum mismatch for " + e.name + " in " + dir.string());
    }
  }
  return a;
}

/// Model size knobs stored next to the weights; full size when absent.
inline ModelConfig read_model_config(const fs::path& dir) {
  std::ifstream in(dir / "model.json");
  if (!in) return ModelConfig::full();
  try {
    return nlohmann::json::parse(in).get<ModelConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw ValueError("malformed " + (dir / "model.json").string() + ": " + e.what());
  }
}

/// Copies archive values into the model. kStrict requires an exact match
/// for every parameter; kBaseOnly loads layers before the head and leaves
/// the head untouched.
inline void load_weights(ModelGraph& model, const WeightArchive& archive, LoadPolicy policy) {
  std::map<std::string, const ArchiveEntry*> by_name;
  for (const auto& e : archive.manifest) by_name[e.name] = &e;

  std::vector<std::pair<Tensor, const ArchiveEntry*>> plan;
  std::set<std::string> used;
  for (const auto& p : model.parameters()) {
    if (policy == LoadPolicy::kBaseOnly && model.is_head_layer(p.layer)) continue;
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ValueError("archive is missing layer " + p.layer + " (" + p.name + ")");
    if (it->second->shape != p.tensor.shape()) {
      throw ShapeError("shape mismatch for layer " + p.layer + ": archive " +
                       to_string(it->second->shape) + ", model " + to_string(p.tensor.shape()));
    }
    plan.emplace_back(p.tensor, it->second);
    used.insert(p.name);
  }
  if (policy == LoadPolicy::kStrict) {
    for (const auto& e : archive.manifest) {
      if (!used.count(e.name)) throw ValueError("archive has unknown layer " + e.name);
    }
  }
  for (auto& [tensor, entry] : plan) {
    const auto values = archive.values(*entry);
    auto dst = tensor.data();
    std::copy(values.begin(), values.end(), dst.begin());
  }
}

inline void load_weights(ModelGraph& model, const fs::path& dir, LoadPolicy policy) {
  load_weights(model, read_archive(dir), policy);
  std::ifstream in(dir / "provenance.json");
  if (in && policy == LoadPolicy::kBaseOnly) {
    try {
      auto j = nlohmann::json::parse(in);
      model.provenance.source_domain = j.value("target_domain", dir.string());
    } catch (const nlohmann::json::exception&) {
      model.provenance.source_domain = dir.string();
    }
  } else if (policy == LoadPolicy::kBaseOnly) {
    model.provenance.source_domain = dir.string();
  }
}

}  // namespace mric
