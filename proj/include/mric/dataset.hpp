#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "mric/augment.hpp"
#include "mric/image.hpp"
#include "mric/random.hpp"

namespace mric {

namespace fs = std::filesystem;

// Tumor is the positive class throughout.
enum class Label { kTumor, kHealthy };
enum class Split { kTrain, kVal, kTest, kUnassigned };

inline const char* to_string(Label l) { return l == Label::kTumor ? "tumor" : "healthy"; }
inline int to_int(Label l) { return l == Label::kTumor ? 1 : 0; }

inline Label parse_label(const std::string& s) {
  if (s == "tumor") return Label::kTumor;
  if (s == "healthy") return Label::kHealthy;
  throw ValueError("unknown label: " + s);
}

inline const char* to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kUnassigned: return "unassigned";
  }
  return "?";
}

inline Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  if (s == "unassigned") return Split::kUnassigned;
  throw ValueError("unknown split: " + s);
}

struct SampleRecord {
  std::string id;
  std::string origin_id;
  std::string path;
  Label label = Label::kTumor;
  Split split = Split::kUnassigned;
  std::optional<AugmentParams> augmentation;

  bool is_augmented() const { return augmentation.has_value(); }
  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct ClassCounts {
  std::size_t tumor = 0;
  std::size_t healthy = 0;
  std::size_t total() const { return tumor + healthy; }
  friend bool operator==(const ClassCounts&, const ClassCounts&) = default;
};

struct DatasetManifest {
  std::vector<SampleRecord> records;
  std::string provenance;

  /// Per-label totals, optionally restricted by augmentation status / split.
  ClassCounts class_counts(std::optional<bool> augmented = std::nullopt,
                           std::optional<Split> split = std::nullopt) const {
    ClassCounts c;
    for (const auto& r : records) {
      if (augmented && r.is_augmented() != *augmented) continue;
      if (split && r.split != *split) continue;
      (r.label == Label::kTumor ? c.tumor : c.healthy)++;
    }
    return c;
  }
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

inline SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValueError("bad ratio value: '" + item + "'");
    }
  }
  if (v.size() != 3) throw ValueError("expected three ratios train,val,test; got '" + text + "'");
  return {v[0], v[1], v[2]};
}

inline void validate_ratios(const SplitRatios& r) {
  if (r.train < 0 || r.val < 0 || r.test < 0) throw ValueError("split ratios must be non-negative");
  if (std::abs(r.train + r.val + r.test - 1.0) > 1e-9) throw ValueError("split ratios must sum to 1");
}

// ---------------------------------------------------------------------------
// JSON lines

inline nlohmann::ordered_json to_json(const SampleRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["origin_id"] = r.origin_id;
  j["path"] = r.path;
  j["label"] = to_string(r.label);
  j["split"] = to_string(r.split);
  if (r.augmentation) {
    const auto& a = *r.augmentation;
    nlohmann::ordered_json aj;
    aj["kind"] = to_string(a.kind);
    aj["dx"] = a.dx;
    aj["dy"] = a.dy;
    aj["angle"] = a.angle;
    aj["seed"] = a.seed;
    j["augmentation"] = aj;
  } else {
    j["augmentation"] = nullptr;
  }
  return j;
}

inline SampleRecord record_from_json(const nlohmann::json& j) {
  SampleRecord r;
  r.id = j.at("id").get<std::string>();
  r.origin_id = j.at("origin_id").get<std::string>();
  r.path = j.at("path").get<std::string>();
  r.label = parse_label(j.at("label").get<std::string>());
  r.split = parse_split(j.at("split").get<std::string>());
  const auto& a = j.at("augmentation");
  if (!a.is_null()) {
    AugmentParams p;
    p.kind = parse_augment_kind(a.at("kind").get<std::string>());
    p.dx = a.at("dx").get<int>();
    p.dy = a.at("dy").get<int>();
    p.angle = a.at("angle").get<double>();
    p.seed = a.at("seed").get<std::uint64_t>();
    r.augmentation = p;
  }
  return r;
}

/// Checks id uniqueness, origin links and group integrity.
inline void validate_manifest(const DatasetManifest& m) {
  std::map<std::string, const SampleRecord*> by_id;
  for (const auto& r : m.records) {
    if (!by_id.emplace(r.id, &r).second) throw ValueError("duplicate record id: " + r.id);
  }
  for (const auto& r : m.records) {
    if ((r.origin_id == r.id) == r.is_augmented()) {
      throw ValueError("record " + r.id + ": origin_id must equal id exactly when not augmented");
    }
    if (!r.is_augmented()) continue;
    auto it = by_id.find(r.origin_id);
    if (it == by_id.end()) throw ValueError("record " + r.id + " references missing origin " + r.origin_id);
    if (it->second->split != r.split) {
      throw ValueError("record " + r.id + " is in split " + to_string(r.split) +
                       " but its origin is in " + to_string(it->second->split));
    }
    if (it->second->label != r.label) throw ValueError("record " + r.id + " label differs from origin");
  }
}

inline void write_manifest(const fs::path& path, const DatasetManifest& m) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    for (const auto& r : m.records) out << to_json(r).dump() << '\n';
    if (!out) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

inline DatasetManifest read_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open manifest " + path.string());
  DatasetManifest m;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      m.records.push_back(record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValueError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  validate_manifest(m);
  return m;
}

// ---------------------------------------------------------------------------
// Ingest / augment / split

inline bool has_image_extension(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

/// Inventories `<root>/tumor` and `<root>/healthy`. Files are ordered by
/// relative path so repeated runs produce identical manifests.
inline DatasetManifest ingest(const fs::path& root) {
  DatasetManifest m;
  m.provenance = "ingested from " + root.generic_string();
  for (Label label : {Label::kTumor, Label::kHealthy}) {
    const fs::path dir = root / to_string(label);
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw IoError("missing class directory " + dir.string());
    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(dir, ec); it != fs::recursive_directory_iterator();
         it.increment(ec)) {
      if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
      if (it->is_regular_file() && has_image_extension(it->path())) {
        files.push_back(fs::relative(it->path(), dir));
      }
    }
    if (ec) throw IoError("cannot list " + dir.string() + ": " + ec.message());
    if (files.empty()) throw IoError("empty class directory " + dir.string());
    std::sort(files.begin(), files.end());
    for (const auto& rel : files) {
      SampleRecord r;
      r.id = std::string(to_string(label)) + "/" + rel.generic_string();
      r.origin_id = r.id;
      r.path = (dir / rel).generic_string();
      r.label = label;
      m.records.push_back(std::move(r));
    }
  }
  return m;
}

/// Replaces any existing augmented records with k per original, appended
/// after the originals in origin order. Augmented records inherit the
/// origin's split.
inline DatasetManifest augment_manifest(const DatasetManifest& in, std::size_t k, std::uint64_t seed,
                                        const AugmentOptions& opts = {}) {
  DatasetManifest out;
  out.provenance = in.provenance;
  for (const auto& r : in.records) {
    if (!r.is_augmented()) out.records.push_back(r);
  }
  const std::size_t originals = out.records.size();
  out.records.reserve(originals * (k + 1));
  for (std::size_t i = 0; i < originals; ++i) {
    const SampleRecord origin = out.records[i];
    const std::uint64_t record_seed = derive_key_seed(seed, "augment", origin.id);
    for (std::size_t j = 0; j < k; ++j) {
      SampleRecord r;
      r.id = origin.id + "#aug" + std::to_string(j);
      r.origin_id = origin.id;
      r.path = origin.path;
      r.label = origin.label;
      r.split = origin.split;
      r.augmentation = draw_augmentation(record_seed, j, opts);
      out.records.push_back(std::move(r));
    }
  }
  return out;
}

/// Stratified split over origin groups: an original and all of its
/// augmentations land in the same split. Per class, group counts are
/// round(ratio * n) for train and val with the remainder in test.
inline DatasetManifest stratified_group_split(const DatasetManifest& in, const SplitRatios& ratios,
                                              std::uint64_t seed) {
  validate_ratios(ratios);
  DatasetManifest out = in;
  std::map<std::string, Label> origins;
  for (const auto& r : in.records) {
    if (!r.is_augmented()) origins.emplace(r.id, r.label);
  }
  for (const auto& r : in.records) {
    if (r.is_augmented() && !origins.count(r.origin_id)) {
      throw ValueError("record " + r.id + " references missing origin " + r.origin_id);
    }
  }

  std::map<std::string, Split> assignment;
  for (Label label : {Label::kTumor, Label::kHealthy}) {
    std::vector<std::string> groups;
    for (const auto& [id, l] : origins) {
      if (l == label) groups.push_back(id);
    }
    if (groups.empty()) throw ValueError(std::string("empty class: ") + to_string(label));
    Rng rng(derive_seed(seed, "split", static_cast<std::uint64_t>(to_int(label))));
    rng.shuffle(groups);
    const auto n = static_cast<double>(groups.size());
    std::size_t n_train = static_cast<std::size_t>(std::llround(ratios.train * n));
    std::size_t n_val = static_cast<std::size_t>(std::llround(ratios.val * n));
    n_train = std::min(n_train, groups.size());
    n_val = std::min(n_val, groups.size() - n_train);
    for (std::size_t i = 0; i < groups.size(); ++i) {
      assignment[groups[i]] = i < n_train ? Split::kTrain : i < n_train + n_val ? Split::kVal : Split::kTest;
    }
  }
  for (auto& r : out.records) r.split = assignment.at(r.origin_id);
  return out;
}

/// Origin ids whose records span more than one split.
inline std::vector<std::string> find_leaks(const DatasetManifest& m) {
  std::map<std::string, std::set<Split>> seen;
  for (const auto& r : m.records) seen[r.origin_id].insert(r.split);
  std::vector<std::string> leaks;
  for (const auto& [id, splits] : seen) {
    if (splits.size() > 1) leaks.push_back(id);
  }
  return leaks;
}

// ---------------------------------------------------------------------------
// Pixels

/// Base resolution at which augmentation parameters are expressed.
inline constexpr std::size_t kAugmentResolution = 224;

/// Decode, resize to 224, apply the record's augmentation, resize to the
/// model input size if it differs, and scale to [0, 1].
inline Tensor load_sample(const SampleRecord& r, std::size_t input_size = kAugmentResolution) {
  Tensor img = decode_image(r.path);
  img = resize_bilinear(img, kAugmentResolution, kAugmentResolution);
  if (r.augmentation) img = apply_augmentation(img, *r.augmentation);
  if (input_size != kAugmentResolution) img = resize_bilinear(img, input_size, input_size);
  return normalize(img);
}

}  // namespace mric
