#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "reid/error.hpp"
#include "reid/numerics.hpp"
#include "reid/rng.hpp"

namespace reid {

enum class Split { train, query, gallery };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::query: return "query";
    case Split::gallery: return "gallery";
  }
  return "train";
}

inline std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "query") return Split::query;
  if (s == "gallery") return Split::gallery;
  return std::nullopt;
}

inline constexpr int kUnknownIdentity = -1;

struct Instance {
  std::size_t index = 0;
  Vec raw;
  int camera = 0;
  int true_identity = kUnknownIdentity;
  Split split = Split::train;

  friend bool operator==(const Instance&, const Instance&) = default;
};

struct Dataset {
  std::vector<Instance> instances;
  int n_cam = 0;
  std::size_t d_in = 0;

  std::size_t size() const noexcept { return instances.size(); }
  std::size_t count(Split s) const {
    std::size_t n = 0;
    for (const auto& inst : instances) n += inst.split == s;
    return n;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Unsupervised view over one split: raw inputs and cameras only. Position i
/// in the view is the "local" index used by memories and labelings; index(i)
/// maps back to the dataset-wide instance index.
class TrainView {
 public:
  TrainView(const Dataset& ds, Split split) : ds_(&ds) {
    for (const auto& inst : ds.instances) {
      if (inst.split == split) members_.push_back(inst.index);
    }
  }

  /// View over every instance regardless of split.
  explicit TrainView(const Dataset& ds) : ds_(&ds) {
    for (const auto& inst : ds.instances) members_.push_back(inst.index);
  }

  std::size_t size() const noexcept { return members_.size(); }
  bool empty() const noexcept { return members_.empty(); }
  std::size_t index(std::size_t i) const { return members_[i]; }
  std::span<const double> raw(std::size_t i) const { return ds_->instances[members_[i]].raw; }
  int camera(std::size_t i) const { return ds_->instances[members_[i]].camera; }
  int n_cam() const noexcept { return ds_->n_cam; }
  std::size_t d_in() const noexcept { return ds_->d_in; }
  std::size_t dataset_size() const noexcept { return ds_->size(); }

  std::vector<int> cameras() const {
    std::vector<int> c(size());
    for (std::size_t i = 0; i < size(); ++i) c[i] = camera(i);
    return c;
  }

 private:
  friend std::vector<int> ground_truth(const TrainView& view);
  const Dataset* ds_;
  std::vector<std::size_t> members_;
};

/// Hidden identities of a view, for evaluation and reporting only.
inline std::vector<int> ground_truth(const TrainView& view) {
  std::vector<int> ids(view.size());
  for (std::size_t i = 0; i < view.size(); ++i) {
    ids[i] = view.ds_->instances[view.members_[i]].true_identity;
  }
  return ids;
}

struct GenConfig {
  std::size_t n_identities = 200;
  int n_cameras = 6;
  std::size_t images_per_id_per_cam = 4;
  std::size_t d_in = 64;
  double camera_shift = 0.8;
  double noise_sigma = 0.15;
  std::uint64_t seed = 0;
};

struct GeneratedDataset {
  Dataset dataset;
  std::vector<Vec> prototypes;
  std::vector<Vec> camera_offsets;
};

namespace detail {

inline Vec random_unit(Rng& rng, std::size_t d) {
  Vec v(d);
  for (;;) {
    for (double& x : v) x = rng.normal();
    if (norm2(v) > 1e-6) return l2_normalize(v);
  }
}

}  // namespace detail

inline void validate(const GenConfig& cfg) {
  if (cfg.n_identities < 1) throw Error(Errc::invalid_config, "n_identities must be >= 1");
  if (cfg.n_cameras < 1) throw Error(Errc::invalid_config, "n_cameras must be >= 1");
  if (cfg.images_per_id_per_cam < 1) {
    throw Error(Errc::invalid_config, "images_per_id_per_cam must be >= 1");
  }
  if (cfg.d_in < 1) throw Error(Errc::invalid_config, "d_in must be >= 1");
  if (!(cfg.camera_shift >= 0.0)) throw Error(Errc::invalid_config, "camera_shift must be >= 0");
  if (!(cfg.noise_sigma >= 0.0)) throw Error(Errc::invalid_config, "noise_sigma must be >= 0");
}

/// Identity prototypes uniform on the unit sphere, one additive offset of norm
/// camera_shift per camera, isotropic gaussian noise, then renormalization.
///
/// Within each (identity, camera) group the first image goes to query, the
/// second to gallery and the rest to train.
inline GeneratedDataset generate_with_truth(const GenConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  GeneratedDataset out;
  out.prototypes.reserve(cfg.n_identities);
  for (std::size_t p = 0; p < cfg.n_identities; ++p) {
    out.prototypes.push_back(detail::random_unit(rng, cfg.d_in));
  }
  for (int c = 0; c < cfg.n_cameras; ++c) {
    Vec o = detail::random_unit(rng, cfg.d_in);
    for (double& x : o) x *= cfg.camera_shift;
    out.camera_offsets.push_back(std::move(o));
  }

  Dataset& ds = out.dataset;
  ds.n_cam = cfg.n_cameras;
  ds.d_in = cfg.d_in;
  Vec buf(cfg.d_in);
  for (std::size_t id = 0; id < cfg.n_identities; ++id) {
    for (int c = 0; c < cfg.n_cameras; ++c) {
      for (std::size_t k = 0; k < cfg.images_per_id_per_cam; ++k) {
        for (std::size_t t = 0; t < cfg.d_in; ++t) {
          buf[t] = out.prototypes[id][t] + out.camera_offsets[c][t] + cfg.noise_sigma * rng.normal();
        }
        Instance inst;
        inst.index = ds.instances.size();
        inst.raw = l2_normalize(buf);
        inst.camera = c;
        inst.true_identity = static_cast<int>(id);
        inst.split = k == 0 ? Split::query : (k == 1 ? Split::gallery : Split::train);
        ds.instances.push_back(std::move(inst));
      }
    }
  }
  return out;
}

inline Dataset generate(const GenConfig& cfg) { return generate_with_truth(cfg).dataset; }

// ---------------------------------------------------------------------------
// CSV ingestion and export

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    std::string_view f = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                          : comma - start);
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
    out.push_back(f);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, const std::string& where) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  if (!field.empty() && field.front() == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (field.empty() || ec != std::errc() || ptr != last) {
    throw Error(Errc::parse_error, where + ": cannot parse '" + std::string(field) + "'");
  }
  return value;
}

inline std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

}  // namespace detail

/// Reads a features CSV (one row of d_in reals per instance, no header) and a
/// labels CSV with rows "index,camera[,identity[,split]]".
inline Dataset ingest(const std::filesystem::path& features_path,
                      const std::filesystem::path& labels_path) {
  const auto feature_lines = detail::read_lines(features_path);
  const auto label_lines = detail::read_lines(labels_path);
  if (feature_lines.empty()) throw Error(Errc::parse_error, features_path.string() + ": no rows");
  if (feature_lines.size() != label_lines.size()) {
    throw Error(Errc::parse_error, "features has " + std::to_string(feature_lines.size()) +
                                       " rows but labels has " + std::to_string(label_lines.size()));
  }

  Dataset ds;
  int max_cam = -1;
  for (std::size_t r = 0; r < feature_lines.size(); ++r) {
    const std::string where_f = features_path.filename().string() + " row " + std::to_string(r + 1);
    const auto fields = detail::split_fields(feature_lines[r]);
    if (r == 0) ds.d_in = fields.size();
    if (fields.size() != ds.d_in) {
      throw Error(Errc::parse_error, where_f + ": expected " + std::to_string(ds.d_in) +
                                         " fields, got " + std::to_string(fields.size()));
    }
    Instance inst;
    inst.raw.reserve(fields.size());
    for (auto f : fields) {
      const double x = detail::parse_number<double>(f, where_f);
      if (!std::isfinite(x)) throw Error(Errc::parse_error, where_f + ": non-finite value");
      inst.raw.push_back(x);
    }

    const std::string where_l = labels_path.filename().string() + " row " + std::to_string(r + 1);
    const auto lf = detail::split_fields(label_lines[r]);
    if (lf.size() < 2 || lf.size() > 4) {
      throw Error(Errc::parse_error, where_l + ": expected index,camera[,identity[,split]]");
    }
    inst.index = detail::parse_number<std::size_t>(lf[0], where_l);
    if (inst.index != r) {
      throw Error(Errc::parse_error, where_l + ": index " + std::to_string(inst.index) +
                                         " is not contiguous (expected " + std::to_string(r) + ")");
    }
    inst.camera = detail::parse_number<int>(lf[1], where_l);
    if (inst.camera < 0) throw Error(Errc::parse_error, where_l + ": negative camera id");
    if (lf.size() >= 3 && !lf[2].empty()) inst.true_identity = detail::parse_number<int>(lf[2], where_l);
    if (lf.size() == 4) {
      const auto s = parse_split(lf[3]);
      if (!s) throw Error(Errc::parse_error, where_l + ": unknown split '" + std::string(lf[3]) + "'");
      inst.split = *s;
    }
    max_cam = std::max(max_cam, inst.camera);
    ds.instances.push_back(std::move(inst));
  }
  ds.n_cam = max_cam + 1;
  std::vector<bool> seen(static_cast<std::size_t>(ds.n_cam), false);
  for (const auto& inst : ds.instances) seen[static_cast<std::size_t>(inst.camera)] = true;
  for (int c = 0; c < ds.n_cam; ++c) {
    if (!seen[static_cast<std::size_t>(c)]) {
      throw Error(Errc::parse_error, labels_path.filename().string() + ": camera " +
                                         std::to_string(c) + " has no instances");
    }
  }
  return ds;
}

/// Writes features.csv, labels.csv and manifest.json into dir.
inline void export_dataset(const Dataset& ds, const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  std::ofstream feat(dir / "features.csv");
  std::ofstream lab(dir / "labels.csv");
  if (!feat || !lab) throw Error(Errc::io_error, "cannot write dataset into " + dir.string());
  for (const auto& inst : ds.instances) {
    for (std::size_t k = 0; k < inst.raw.size(); ++k) {
      if (k) feat << ',';
      feat << detail::format_double(inst.raw[k]);
    }
    feat << '\n';
    lab << inst.index << ',' << inst.camera << ',';
    if (inst.true_identity != kUnknownIdentity) lab << inst.true_identity;
    lab << ',' << split_name(inst.split) << '\n';
  }
  nlohmann::ordered_json m;
  m["n_cam"] = ds.n_cam;
  m["d_in"] = ds.d_in;
  m["counts"] = {{"total", ds.size()},
                 {"train", ds.count(Split::train)},
                 {"query", ds.count(Split::query)},
                 {"gallery", ds.count(Split::gallery)}};
  m["seed"] = seed;
  std::ofstream(dir / "manifest.json") << m.dump(2) << '\n';
}

/// Ingests a directory written by export_dataset. The manifest is optional;
/// when present its n_cam and d_in must agree with the CSVs.
inline Dataset ingest_dir(const std::filesystem::path& dir) {
  Dataset ds = ingest(dir / "features.csv", dir / "labels.csv");
  const auto manifest = dir / "manifest.json";
  if (std::filesystem::exists(manifest)) {
    std::ifstream in(manifest);
    nlohmann::json m;
    try {
      in >> m;
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::parse_error, manifest.string() + ": " + e.what());
    }
    if (m.contains("d_in") && m["d_in"].get<std::size_t>() != ds.d_in) {
      throw Error(Errc::dim_mismatch, "manifest d_in disagrees with features.csv");
    }
    if (m.contains("n_cam")) {
      if (m["n_cam"].get<int>() != ds.n_cam) {
        throw Error(Errc::parse_error, "manifest n_cam disagrees with labels.csv");
      }
    }
  }
  return ds;
}

}  // namespace reid
