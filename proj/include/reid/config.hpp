#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reid/dataset.hpp"
#include "reid/error.hpp"
#include "reid/experiment.hpp"
#include "reid/trainer.hpp"

namespace reid {

using json = nlohmann::json;

/// One cell of an ablation: a name plus a fully resolved training config.
struct AblationCell {
  std::string name;
  TrainConfig train;
};

struct AblationConfig {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationCell> cells;
};

/// Parsed form of the shared JSON config file. Each command reads the
/// sections it needs.
struct RunConfig {
  std::uint64_t seed = 0;
  std::optional<GenConfig> dataset;
  EncoderConfig encoder;
  TrainConfig train;
  bool dump_camera_offsets = false;
  bool dump_labels = false;
  std::optional<AblationConfig> ablate;
  json raw;
};

namespace detail {

inline void reject_unknown(const json& obj, const std::string& section,
                           std::initializer_list<const char*> allowed) {
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : obj.items()) {
    if (!ok.count(key)) throw Error(Errc::invalid_config, "unknown field '" + section + "." + key + "'");
  }
}

template <typename T>
T required(const json& obj, const std::string& section, const char* key) {
  if (!obj.contains(key)) throw Error(Errc::invalid_config, "missing field '" + section + "." + key + "'");
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::invalid_config, "field '" + section + "." + key + "' has the wrong type");
  }
}

template <typename T>
void optional_into(const json& obj, const std::string& section, const char* key, T& out) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(Errc::invalid_config, "field '" + section + "." + key + "' has the wrong type");
  }
}

inline const char* const kTrainKeys[] = {
    "variant", "rho",     "use_temporal", "use_camera_offset", "lambda", "mu_s",
    "mu_t",    "tau",     "eps",          "min_num",           "learning_rate", "P",
    "K",       "epochs",  "passes_per_epoch", "distance_mode", "dump_camera_offsets", "dump_labels"};

/// Applies the keys present in obj on top of cfg.
inline void apply_train_overrides(const json& obj, const std::string& section, TrainConfig& cfg) {
  for (const auto& [key, _] : obj.items()) {
    bool known = false;
    for (const char* k : kTrainKeys) known |= key == k;
    if (!known && key != "name") throw Error(Errc::invalid_config, "unknown field '" + section + "." + key + "'");
  }
  if (obj.contains("variant")) {
    const auto name = required<std::string>(obj, section, "variant");
    const auto v = parse_variant(name);
    if (!v) throw Error(Errc::invalid_config, "field '" + section + ".variant' has unknown value '" + name + "'");
    cfg.variant = *v;
  }
  if (obj.contains("distance_mode")) {
    const auto name = required<std::string>(obj, section, "distance_mode");
    const auto m = parse_distance_mode(name);
    if (!m) throw Error(Errc::invalid_config, "field '" + section + ".distance_mode' has unknown value '" + name + "'");
    cfg.distance_mode = *m;
  }
  optional_into(obj, section, "rho", cfg.rho);
  optional_into(obj, section, "use_temporal", cfg.use_temporal);
  optional_into(obj, section, "use_camera_offset", cfg.use_camera_offset);
  optional_into(obj, section, "lambda", cfg.lambda);
  optional_into(obj, section, "mu_s", cfg.mu_s);
  optional_into(obj, section, "mu_t", cfg.mu_t);
  optional_into(obj, section, "tau", cfg.loss.tau);
  optional_into(obj, section, "eps", cfg.dbscan.eps);
  optional_into(obj, section, "min_num", cfg.dbscan.min_num);
  optional_into(obj, section, "learning_rate", cfg.optim.learning_rate);
  optional_into(obj, section, "P", cfg.sampler.P);
  optional_into(obj, section, "K", cfg.sampler.K);
  optional_into(obj, section, "epochs", cfg.epochs);
  optional_into(obj, section, "passes_per_epoch", cfg.passes_per_epoch);
}

/// Named rows of the ablation table.
inline std::optional<TrainConfig> preset(const std::string& name, TrainConfig base) {
  auto set = [&](Variant v, bool temporal, bool cam) {
    base.variant = v;
    base.use_temporal = temporal;
    base.use_camera_offset = cam;
    return base;
  };
  if (name == "baseline") return set(Variant::baseline, false, false);
  if (name == "stochastic" || name == "stochastic_random") return set(Variant::stochastic_random, false, false);
  if (name == "stochastic_online") return set(Variant::stochastic_online, false, false);
  if (name == "hard") return set(Variant::hard, false, false);
  if (name == "temporal") return set(Variant::stochastic_online, true, false);
  if (name == "temporal_cam") return set(Variant::stochastic_online, true, true);
  if (name == "hard_temporal_cam") return set(Variant::hard, true, true);
  return std::nullopt;
}

inline std::string format_axis_value(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

inline AblationConfig parse_ablation(const json& obj, const TrainConfig& base) {
  reject_unknown(obj, "ablate", {"seeds", "grid", "sweep"});
  AblationConfig out;
  out.seeds = required<std::vector<std::uint64_t>>(obj, "ablate", "seeds");
  if (out.seeds.empty()) throw Error(Errc::invalid_config, "field 'ablate.seeds' is empty");

  if (obj.contains("grid")) {
    if (!obj["grid"].is_array()) throw Error(Errc::invalid_config, "field 'ablate.grid' must be an array");
    for (const auto& entry : obj["grid"]) {
      if (entry.is_string()) {
        const auto name = entry.get<std::string>();
        auto cfg = preset(name, base);
        if (!cfg) throw Error(Errc::invalid_config, "ablate.grid: unknown preset '" + name + "'");
        out.cells.push_back({name, *cfg});
      } else if (entry.is_object()) {
        const auto name = required<std::string>(entry, "ablate.grid[]", "name");
        // Objects start from the train section; the name is only a label.
        TrainConfig cfg = base;
        apply_train_overrides(entry, "ablate.grid[" + name + "]", cfg);
        validate(cfg);
        out.cells.push_back({name, cfg});
      } else {
        throw Error(Errc::invalid_config, "ablate.grid entries must be strings or objects");
      }
    }
  }

  if (obj.contains("sweep")) {
    const auto& sw = obj["sweep"];
    reject_unknown(sw, "ablate.sweep", {"axis", "values", "base"});
    const auto axis = required<std::string>(sw, "ablate.sweep", "axis");
    const auto values = required<std::vector<double>>(sw, "ablate.sweep", "values");
    TrainConfig sweep_base = base;
    if (sw.contains("base")) {
      const auto& b = sw["base"];
      if (b.is_string()) {
        auto cfg = preset(b.get<std::string>(), base);
        if (!cfg) throw Error(Errc::invalid_config, "ablate.sweep.base: unknown preset");
        sweep_base = *cfg;
      } else {
        apply_train_overrides(b, "ablate.sweep.base", sweep_base);
      }
    }
    for (double x : values) {
      TrainConfig cfg = sweep_base;
      if (axis == "mu_s") {
        cfg.mu_s = x;
      } else if (axis == "mu_t") {
        cfg.mu_t = x;
      } else if (axis == "lambda") {
        cfg.lambda = x;
      } else if (axis == "rho") {
        cfg.variant = Variant::percent_mean;
        cfg.rho = x;
      } else {
        throw Error(Errc::invalid_config, "ablate.sweep.axis must be one of mu_s, mu_t, lambda, rho");
      }
      validate(cfg);
      out.cells.push_back({axis + "=" + format_axis_value(x), cfg});
    }
  }
  if (out.cells.empty()) throw Error(Errc::invalid_config, "ablate needs a grid and/or a sweep");
  return out;
}

}  // namespace detail

inline GenConfig parse_gen_config(const json& obj) {
  detail::reject_unknown(obj, "dataset", {"n_identities", "n_cameras", "images_per_id_per_cam", "d_in",
                                          "camera_shift", "noise_sigma"});
  GenConfig g;
  g.n_identities = detail::required<std::size_t>(obj, "dataset", "n_identities");
  g.n_cameras = detail::required<int>(obj, "dataset", "n_cameras");
  g.images_per_id_per_cam = detail::required<std::size_t>(obj, "dataset", "images_per_id_per_cam");
  g.d_in = detail::required<std::size_t>(obj, "dataset", "d_in");
  g.camera_shift = detail::required<double>(obj, "dataset", "camera_shift");
  g.noise_sigma = detail::required<double>(obj, "dataset", "noise_sigma");
  validate(g);
  return g;
}

inline RunConfig parse_run_config(const json& root) {
  if (!root.is_object()) throw Error(Errc::invalid_config, "config must be a JSON object");
  detail::reject_unknown(root, "", {"seed", "dataset", "encoder", "train", "ablate"});
  RunConfig rc;
  rc.raw = root;
  rc.seed = detail::required<std::uint64_t>(root, "", "seed");
  if (root.contains("dataset")) rc.dataset = parse_gen_config(root["dataset"]);
  if (root.contains("encoder")) {
    const auto& e = root["encoder"];
    detail::reject_unknown(e, "encoder", {"kind", "d_out"});
    std::string kind = "linear";
    detail::optional_into(e, "encoder", "kind", kind);
    if (kind == "linear") {
      rc.encoder.kind = EncoderKind::linear;
    } else if (kind == "free_embedding") {
      rc.encoder.kind = EncoderKind::free_embedding;
    } else {
      throw Error(Errc::invalid_config, "field 'encoder.kind' has unknown value '" + kind + "'");
    }
    detail::optional_into(e, "encoder", "d_out", rc.encoder.d_out);
    if (rc.encoder.d_out < 2) throw Error(Errc::invalid_config, "field 'encoder.d_out' must be >= 2");
  }
  if (root.contains("train")) {
    const auto& t = root["train"];
    detail::apply_train_overrides(t, "train", rc.train);
    detail::optional_into(t, "train", "dump_camera_offsets", rc.dump_camera_offsets);
    detail::optional_into(t, "train", "dump_labels", rc.dump_labels);
  }
  rc.train.seed = rc.seed;
  validate(rc.train);
  if (root.contains("ablate")) rc.ablate = detail::parse_ablation(root["ablate"], rc.train);
  return rc;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config " + path.string());
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_config, path.string() + ": " + e.what());
  }
  return parse_run_config(root);
}

/// Generator config keyed to the dataset sub-stream of the run seed.
inline GenConfig seeded(GenConfig g, std::uint64_t run_seed) {
  g.seed = derive_seed(run_seed, "dataset");
  return g;
}

}  // namespace reid
