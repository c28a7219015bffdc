#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "reid/clustering.hpp"
#include "reid/dataset.hpp"
#include "reid/distance.hpp"
#include "reid/encoder.hpp"
#include "reid/loss.hpp"
#include "reid/memory.hpp"
#include "reid/numerics.hpp"
#include "reid/rng.hpp"
#include "reid/sampler.hpp"

namespace reid {

/// How the contrastive classifiers are built and refreshed.
enum class Variant {
  baseline,           // normalized mean of the cluster's V rows
  stochastic_random,  // M row pulled toward a random member's V row per sample
  stochastic_online,  // M row pulled toward each sample's own embedding
  hard,               // M row pulled toward the batch member least similar to it
  percent_mean,       // mean of a random rho-fraction of the cluster's V rows
};

inline const char* variant_name(Variant v) {
  switch (v) {
    case Variant::baseline: return "baseline";
    case Variant::stochastic_random: return "stochastic_random";
    case Variant::stochastic_online: return "stochastic_online";
    case Variant::hard: return "hard";
    case Variant::percent_mean: return "percent_mean";
  }
  return "baseline";
}

inline std::optional<Variant> parse_variant(std::string_view s) {
  if (s == "baseline") return Variant::baseline;
  if (s == "stochastic_random" || s == "stochastic") return Variant::stochastic_random;
  if (s == "stochastic_online") return Variant::stochastic_online;
  if (s == "hard") return Variant::hard;
  if (s == "percent_mean") return Variant::percent_mean;
  return std::nullopt;
}

inline bool uses_cluster_memory(Variant v) {
  return v == Variant::stochastic_random || v == Variant::stochastic_online || v == Variant::hard;
}

struct TrainConfig {
  Variant variant = Variant::stochastic_online;
  double rho = 1.0;
  bool use_temporal = true;
  bool use_camera_offset = true;
  double lambda = 1.0;
  double mu_s = 0.2;
  double mu_t = 0.2;
  LossConfig loss;
  DbscanParams dbscan;
  OptimConfig optim;
  SamplerConfig sampler;
  std::size_t epochs = 80;
  // Full sampler passes over the clusters per epoch.
  std::size_t passes_per_epoch = 1;
  DistanceMode distance_mode = DistanceMode::softmax_relative;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.variant == Variant::percent_mean && !(cfg.rho > 0.0 && cfg.rho <= 1.0)) {
    throw Error(Errc::invalid_config, "rho must lie in (0, 1]");
  }
  if (!(cfg.mu_s >= 0.0 && cfg.mu_s <= 1.0)) throw Error(Errc::invalid_config, "mu_s must lie in [0, 1]");
  if (!(cfg.mu_t >= 0.0 && cfg.mu_t <= 1.0)) throw Error(Errc::invalid_config, "mu_t must lie in [0, 1]");
  if (!(cfg.lambda >= 0.0)) throw Error(Errc::invalid_config, "lambda must be >= 0");
  if (!(cfg.loss.tau > 0.0)) throw Error(Errc::invalid_config, "tau must be > 0");
  if (!(cfg.dbscan.eps > 0.0)) throw Error(Errc::invalid_config, "eps must be > 0");
  if (cfg.dbscan.min_num < 1) throw Error(Errc::invalid_config, "min_num must be >= 1");
  if (!(cfg.optim.learning_rate > 0.0)) throw Error(Errc::invalid_config, "learning_rate must be > 0");
  if (cfg.sampler.P < 1 || cfg.sampler.K < 2) throw Error(Errc::invalid_config, "need P >= 1 and K >= 2");
  if (cfg.passes_per_epoch < 1) throw Error(Errc::invalid_config, "passes_per_epoch must be >= 1");
}

struct EpochReport {
  std::size_t epoch = 0;
  std::size_t num_clusters = 0;
  std::size_t num_outliers = 0;
  double clustering_accuracy = std::numeric_limits<double>::quiet_NaN();
  double mean_loss = std::numeric_limits<double>::quiet_NaN();
  double seconds = 0.0;
};

/// State visible to observers right after an epoch's clustering step.
struct ClusteringSnapshot {
  std::size_t epoch;
  const Mat& similarity;
  const CameraOffsetMatrix* offsets;  // null when the camera offset is off
  const PseudoLabeling& labels;
};

/// State visible to observers right after a batch's loss was computed.
struct BatchSnapshot {
  std::size_t epoch;
  std::size_t batch;
  std::span<const std::size_t> samples;
  const PseudoLabeling& labels;
  const Mat& classifiers;
  const InstanceMemory& instance_memory;
  const ClusterMemory* cluster_memory;  // null for the mean variants
};

struct TrainHooks {
  std::function<void(const ClusteringSnapshot&)> on_clustered;
  std::function<void(const BatchSnapshot&)> on_batch;
};

struct TrainResult {
  EncoderState encoder;
  std::vector<EpochReport> reports;
  InstanceMemory instance_memory;
  PseudoLabeling last_labels;
};

namespace detail {

inline Mat mean_classifiers(const InstanceMemory& mem,
                            const std::vector<std::vector<std::size_t>>& members, double rho,
                            Rng& rng) {
  Mat c(members.size(), mem.V.cols());
  for (std::size_t j = 0; j < members.size(); ++j) c.set_row(j, centroid(mem.V, members[j], rho, rng));
  return c;
}

/// Distance matrix (camera-corrected when enabled) followed by DBSCAN.
inline PseudoLabeling pseudo_label(const Mat& sim, std::span<const int> cameras, int n_cam,
                                   const TrainConfig& cfg, std::optional<CameraOffsetMatrix>& offsets) {
  const auto nc = static_cast<std::size_t>(n_cam);
  if (cfg.use_camera_offset) {
    offsets = camera_offsets(sim, cameras, n_cam);
  } else {
    offsets.reset();
  }
  const CameraOffsetMatrix none{Mat(nc, nc), false};
  const double lambda = cfg.use_camera_offset ? cfg.lambda : 0.0;
  const auto dist = unified(sim, offsets ? *offsets : none, cameras, lambda, cfg.distance_mode);
  return dbscan(dist.dist, cfg.dbscan);
}

}  // namespace detail

/// Pseudo labels for a set of memory features under cfg's distance settings.
inline PseudoLabeling pseudo_label(const Mat& features, std::span<const int> cameras, int n_cam,
                                   const TrainConfig& cfg) {
  std::optional<CameraOffsetMatrix> offsets;
  return detail::pseudo_label(pairwise_similarity(features), cameras, n_cam, cfg, offsets);
}

/// Applies the variant's cluster-memory refresh for one batch. `embeddings`
/// are the batch's pre-step encoder outputs, in sample order.
inline void classifier_update(Variant variant, std::span<const std::size_t> samples,
                              std::span<const Vec> embeddings, const PseudoLabeling& labels,
                              const std::vector<std::vector<std::size_t>>& members,
                              ClusterMemory& M, const InstanceMemory& V, Rng& rng) {
  switch (variant) {
    case Variant::stochastic_online:
      for (std::size_t b = 0; b < samples.size(); ++b) {
        update_cluster(M, static_cast<std::size_t>(labels.label[samples[b]]), embeddings[b]);
      }
      return;
    case Variant::stochastic_random:
      for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto y = static_cast<std::size_t>(labels.label[samples[b]]);
        const auto& pool = members[y];
        update_cluster(M, y, V.V.row(pool[rng.below(pool.size())]));
      }
      return;
    case Variant::hard: {
      // One update per cluster present in the batch, scored against the
      // rows as they were when the batch started.
      const Mat start = M.M;
      std::vector<std::size_t> clusters;
      std::vector<std::size_t> pick;
      std::vector<double> score;
      for (std::size_t b = 0; b < samples.size(); ++b) {
        const auto y = static_cast<std::size_t>(labels.label[samples[b]]);
        const double s = dot(embeddings[b], start.row(y));
        auto it = std::find(clusters.begin(), clusters.end(), y);
        if (it == clusters.end()) {
          clusters.push_back(y);
          pick.push_back(b);
          score.push_back(s);
        } else {
          const auto k = static_cast<std::size_t>(it - clusters.begin());
          if (s < score[k]) {
            score[k] = s;
            pick[k] = b;
          }
        }
      }
      for (std::size_t k = 0; k < clusters.size(); ++k) update_cluster(M, clusters[k], embeddings[pick[k]]);
      return;
    }
    case Variant::baseline:
    case Variant::percent_mean:
      return;
  }
}

/// Clustering / contrastive-training loop.
///
/// Per epoch: similarity over V, optional camera-offset correction, DBSCAN,
/// cluster memory seeded from V, then P x K batches of
/// forward -> loss -> backward -> Adam -> classifier update -> V update.
/// Outliers are re-encoded into V at the end of the epoch.
///
/// V update: stochastic variants blend with mu_t when use_temporal is set and
/// overwrite otherwise; the mean variants always blend with mu_t because V is
/// the memory their centroids are built from.
inline TrainResult train(const TrainView& view, EncoderState encoder, const TrainConfig& cfg,
                         std::optional<std::vector<int>> truth = std::nullopt,
                         const TrainHooks& hooks = {}) {
  validate(cfg);
  if (view.empty()) throw Error(Errc::invalid_config, "training set is empty");
  if (truth && truth->size() != view.size()) throw Error(Errc::dim_mismatch, "truth vs training set");

  TrainResult out;
  out.instance_memory = init_instance_memory(encoder, view, cfg.mu_t);
  InstanceMemory& V = out.instance_memory;
  const std::vector<int> cameras = view.cameras();

  Rng memory_rng(derive_seed(cfg.seed, "cluster_memory"));
  Rng sampler_rng(derive_seed(cfg.seed, "sampler"));
  Rng classifier_rng(derive_seed(cfg.seed, "classifier"));

  const bool stochastic = uses_cluster_memory(cfg.variant);
  const double rho = cfg.variant == Variant::percent_mean ? cfg.rho : 1.0;
  const bool blend_instances = cfg.use_temporal || !stochastic;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    EpochReport rep;
    rep.epoch = epoch;

    const Mat sim = pairwise_similarity(V.V);
    std::optional<CameraOffsetMatrix> offsets;
    PseudoLabeling labels = detail::pseudo_label(sim, cameras, view.n_cam(), cfg, offsets);
    rep.num_clusters = labels.num_clusters;
    rep.num_outliers = labels.num_outliers();
    if (truth && labels.num_clusters > 0) rep.clustering_accuracy = clustering_accuracy(labels, *truth);
    if (hooks.on_clustered) hooks.on_clustered({epoch, sim, offsets ? &*offsets : nullptr, labels});

    if (labels.num_clusters > 0) {
      const auto members = labels.members();
      ClusterMemory M;
      if (stochastic) M = init_cluster_memory(V, labels, cfg.mu_s, memory_rng);

      std::vector<std::vector<std::size_t>> batches;
      for (std::size_t pass = 0; pass < cfg.passes_per_epoch; ++pass) {
        auto more = epoch_batches(labels, cameras, cfg.sampler, sampler_rng);
        batches.insert(batches.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
      }
      double loss_sum = 0.0;
      std::size_t loss_count = 0;
      Mat grads(encoder.theta.rows(), encoder.theta.cols());
      std::vector<Vec> embeddings;
      std::vector<std::size_t> targets;

      for (std::size_t b = 0; b < batches.size(); ++b) {
        const auto& batch = batches[b];
        const Mat classifiers = stochastic ? M.M : detail::mean_classifiers(V, members, rho, classifier_rng);

        embeddings.clear();
        targets.clear();
        for (std::size_t i : batch) {
          embeddings.push_back(forward(encoder, view.index(i), view.raw(i)));
          targets.push_back(static_cast<std::size_t>(labels.label[i]));
        }
        const BatchLoss bl = batch_loss(embeddings, targets, classifiers, cfg.loss);
        if (hooks.on_batch) hooks.on_batch({epoch, b, batch, labels, classifiers, V, stochastic ? &M : nullptr});
        loss_sum += bl.mean_loss * static_cast<double>(batch.size());
        loss_count += batch.size();

        grads.fill(0.0);
        const double scale = 1.0 / static_cast<double>(batch.size());
        for (std::size_t k = 0; k < batch.size(); ++k) {
          const std::size_t i = batch[k];
          accumulate_backward(encoder, view.index(i), view.raw(i), bl.grads[k], grads, scale);
        }
        adam_step(encoder, grads, cfg.optim);

        if (stochastic) classifier_update(cfg.variant, batch, embeddings, labels, members, M, V, classifier_rng);
        for (std::size_t k = 0; k < batch.size(); ++k) {
          if (blend_instances) {
            update_instance(V, batch[k], embeddings[k]);
          } else {
            V.V.set_row(batch[k], embeddings[k]);
          }
        }
      }
      rep.mean_loss = loss_sum / static_cast<double>(loss_count);
    }

    const auto outliers = labels.outliers();
    refresh_outliers(V, encoder, view, outliers);
    out.last_labels = std::move(labels);
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.reports.push_back(rep);
  }
  out.encoder = std::move(encoder);
  return out;
}

}  // namespace reid
