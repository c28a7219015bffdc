#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "reid/config.hpp"
#include "reid/dataset.hpp"
#include "reid/encoder.hpp"
#include "reid/evaluation.hpp"
#include "reid/experiment.hpp"
#include "reid/trainer.hpp"

#ifndef REID_VERSION
#define REID_VERSION "0.1.0"
#endif

namespace reid {

namespace fs = std::filesystem;

/// Command-line overrides shared by every subcommand.
struct CommandOptions {
  fs::path config;
  fs::path data;
  fs::path out;
  fs::path checkpoint;
  std::optional<std::uint64_t> seed;
  std::optional<DistanceMode> mode;
  // Write measured wall time into the epoch CSV instead of 0.
  bool timing = false;
};

namespace detail {

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string fmt(const char* pattern, double x) {
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, x);
  return buf;
}

inline RunConfig load_with_overrides(const CommandOptions& opt) {
  RunConfig rc = load_run_config(opt.config);
  if (opt.seed) {
    rc.seed = *opt.seed;
    rc.train.seed = *opt.seed;
    rc.raw["seed"] = *opt.seed;
    if (rc.ablate) rc.ablate->seeds = {*opt.seed};
  }
  if (opt.mode) {
    rc.train.distance_mode = *opt.mode;
    rc.raw["train"]["distance_mode"] = distance_mode_name(*opt.mode);
    if (rc.ablate) {
      for (auto& cell : rc.ablate->cells) cell.train.distance_mode = *opt.mode;
    }
  }
  return rc;
}

inline void write_json(const fs::path& path, const nlohmann::ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::io_error, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace detail

/// Epoch CSV: "epoch,Y,outliers,clu_acc,loss,secs".
inline std::string epoch_csv(const std::vector<EpochReport>& reports, bool with_timing) {
  std::ostringstream os;
  os << "epoch,Y,outliers,clu_acc,loss,secs\n";
  for (const auto& r : reports) {
    os << r.epoch << ',' << r.num_clusters << ',' << r.num_outliers << ','
       << detail::fmt("%.6f", r.clustering_accuracy) << ',' << detail::fmt("%.8f", r.mean_loss) << ','
       << detail::fmt("%.3f", with_timing ? r.seconds : 0.0) << '\n';
  }
  return os.str();
}

/// Ranks reported in the results JSON.
inline constexpr std::size_t kReportedRanks[] = {1, 5, 10, 20};

inline nlohmann::ordered_json retrieval_json(const RetrievalResult& r) {
  nlohmann::ordered_json j;
  j["mAP"] = r.mAP;
  auto cmc = nlohmann::ordered_json::array();
  for (std::size_t k : kReportedRanks) cmc.push_back(r.rank(k));
  j["cmc"] = cmc;
  j["cmc_ranks"] = kReportedRanks;
  j["num_queries"] = r.num_queries;
  j["skipped"] = r.skipped;
  return j;
}

inline int cmd_gen(const CommandOptions& opt) {
  const RunConfig rc = detail::load_with_overrides(opt);
  if (!rc.dataset) throw Error(Errc::invalid_config, "missing section 'dataset'");
  const GenConfig g = seeded(*rc.dataset, rc.seed);
  export_dataset(generate(g), opt.out, g.seed);
  return 0;
}

inline int cmd_train(const CommandOptions& opt) {
  const std::string started = detail::utc_now();
  const RunConfig rc = detail::load_with_overrides(opt);
  const Dataset ds = ingest_dir(opt.data);
  fs::create_directories(opt.out);

  std::vector<std::string> outputs = {"epochs.csv", "checkpoint.json", "checkpoint.bin", "summary.json",
                                      "manifest.json"};
  TrainHooks hooks;
  if (rc.dump_camera_offsets || rc.dump_labels) {
    hooks.on_clustered = [&](const ClusteringSnapshot& snap) {
      char tag[32];
      std::snprintf(tag, sizeof tag, "%04zu", snap.epoch);
      if (rc.dump_labels) {
        const std::string name = std::string("labels_epoch_") + tag + ".csv";
        std::ofstream os(opt.out / name);
        os << "index,label\n";
        for (std::size_t i = 0; i < snap.labels.size(); ++i) os << i << ',' << snap.labels.label[i] << '\n';
        outputs.push_back(name);
      }
      if (rc.dump_camera_offsets && snap.offsets) {
        const std::string name = std::string("camera_offsets_epoch_") + tag + ".csv";
        std::ofstream os(opt.out / name);
        const Mat& m = snap.offsets->values;
        for (std::size_t a = 0; a < m.rows(); ++a) {
          for (std::size_t b = 0; b < m.cols(); ++b) os << (b ? "," : "") << detail::format_double(m(a, b));
          os << '\n';
        }
        outputs.push_back(name);
      }
    };
  }

  const ExperimentResult res = run_experiment(ds, rc.encoder, rc.train, hooks);

  {
    std::ofstream csv(opt.out / "epochs.csv");
    csv << epoch_csv(res.training.reports, opt.timing);
  }
  save_checkpoint(res.training.encoder, opt.out / "checkpoint.json");

  nlohmann::ordered_json summary;
  summary["variant"] = variant_name(rc.train.variant);
  summary["epochs"] = res.training.reports.size();
  if (!res.training.reports.empty()) {
    const auto& last = res.training.reports.back();
    summary["last_epoch"] = {{"Y", last.num_clusters},
                             {"outliers", last.num_outliers},
                             {"clu_acc", std::isnan(last.clustering_accuracy) ? nlohmann::ordered_json()
                                                                              : nlohmann::ordered_json(last.clustering_accuracy)},
                             {"loss", std::isnan(last.mean_loss) ? nlohmann::ordered_json()
                                                                 : nlohmann::ordered_json(last.mean_loss)}};
  }
  summary["final_clusters"] = res.final_clusters;
  summary["final_clustering_accuracy"] = std::isnan(res.final_clustering_accuracy)
                                             ? nlohmann::ordered_json()
                                             : nlohmann::ordered_json(res.final_clustering_accuracy);
  if (res.retrieval.num_queries > 0) summary["retrieval"] = retrieval_json(res.retrieval);
  detail::write_json(opt.out / "summary.json", summary);

  nlohmann::ordered_json manifest;
  manifest["version"] = REID_VERSION;
  manifest["command"] = "train";
  manifest["seed"] = rc.seed;
  manifest["config"] = rc.raw;
  manifest["data"] = opt.data.string();
  manifest["outputs"] = outputs;
  manifest["started_at"] = started;
  manifest["finished_at"] = detail::utc_now();
  detail::write_json(opt.out / "manifest.json", manifest);
  return 0;
}

/// Writes the results JSON for a checkpoint evaluated on the dataset's
/// query/gallery splits.
inline int cmd_eval(const CommandOptions& opt, std::ostream& out = std::cout) {
  const EncoderState enc = load_checkpoint(opt.checkpoint);
  const Dataset ds = ingest_dir(opt.data);
  const TrainView query(ds, Split::query);
  const TrainView gallery(ds, Split::gallery);
  if (query.empty()) throw Error(Errc::invalid_config, "dataset has no query split");
  out << retrieval_json(evaluate(enc, query, gallery)).dump(2) << '\n';
  return 0;
}

struct AblationRow {
  std::string cell;
  std::uint64_t seed;
  double mAP;
  double rank1;
  double clu_acc;
};

inline std::vector<AblationRow> run_ablation(const RunConfig& rc, const std::optional<Dataset>& fixed,
                                             bool verbose = true) {
  if (!rc.ablate) throw Error(Errc::invalid_config, "missing section 'ablate'");
  if (!fixed && !rc.dataset) throw Error(Errc::invalid_config, "ablate needs a 'dataset' section or --data");
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : rc.ablate->seeds) {
    const Dataset ds = fixed ? *fixed : generate(seeded(*rc.dataset, seed));
    for (const auto& cell : rc.ablate->cells) {
      TrainConfig cfg = cell.train;
      cfg.seed = seed;
      const auto res = run_experiment(ds, rc.encoder, cfg);
      rows.push_back({cell.name, seed, res.retrieval.mAP, res.retrieval.rank(1), res.final_clustering_accuracy});
      if (verbose) {
        std::fprintf(stderr, "[ablate] %-24s seed=%llu mAP=%.4f rank1=%.4f clu_acc=%.4f\n", cell.name.c_str(),
                     static_cast<unsigned long long>(seed), rows.back().mAP, rows.back().rank1,
                     rows.back().clu_acc);
      }
    }
  }
  return rows;
}

inline int cmd_ablate(const CommandOptions& opt) {
  const RunConfig rc = detail::load_with_overrides(opt);
  std::optional<Dataset> fixed;
  if (!opt.data.empty()) fixed = ingest_dir(opt.data);
  const auto rows = run_ablation(rc, fixed);
  fs::create_directories(opt.out);
  std::ofstream csv(opt.out / "ablation.csv");
  csv << "cell,seed,mAP,rank1,clu_acc\n";
  for (const auto& r : rows) {
    csv << r.cell << ',' << r.seed << ',' << detail::fmt("%.6f", r.mAP) << ',' << detail::fmt("%.6f", r.rank1)
        << ',' << detail::fmt("%.6f", r.clu_acc) << '\n';
  }
  return 0;
}

}  // namespace reid
