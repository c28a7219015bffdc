#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "reid/dataset.hpp"
#include "reid/encoder.hpp"
#include "reid/evaluation.hpp"
#include "reid/rng.hpp"
#include "reid/trainer.hpp"

namespace reid {

struct EncoderConfig {
  EncoderKind kind = EncoderKind::linear;
  std::size_t d_out = 32;
};

struct ExperimentResult {
  TrainResult training;
  RetrievalResult retrieval;
  // Clustering of the final instance memory, scored against ground truth.
  std::size_t final_clusters = 0;
  double final_clustering_accuracy = std::numeric_limits<double>::quiet_NaN();
};

/// Encoder initialized from the "encoder" sub-stream of seed.
inline EncoderState make_encoder(const EncoderConfig& cfg, const Dataset& ds, std::uint64_t seed) {
  Rng rng(derive_seed(seed, "encoder"));
  if (cfg.kind == EncoderKind::linear) return make_linear_encoder(ds.d_in, cfg.d_out, rng);
  return make_free_embedding(ds.size(), ds.d_in, cfg.d_out, rng);
}

/// Trains on the train split and evaluates query against gallery when both
/// are present and carry identities.
inline ExperimentResult run_experiment(const Dataset& ds, const EncoderConfig& enc_cfg,
                                       const TrainConfig& cfg, const TrainHooks& hooks = {}) {
  const TrainView train_view(ds, Split::train);
  const TrainView query(ds, Split::query);
  const TrainView gallery(ds, Split::gallery);
  auto truth = ground_truth(train_view);
  const bool has_truth =
      std::none_of(truth.begin(), truth.end(), [](int id) { return id == kUnknownIdentity; });

  ExperimentResult res;
  res.training = train(train_view, make_encoder(enc_cfg, ds, cfg.seed), cfg,
                       has_truth ? std::optional(truth) : std::nullopt, hooks);
  const auto final_labels =
      pseudo_label(res.training.instance_memory.V, train_view.cameras(), ds.n_cam, cfg);
  res.final_clusters = final_labels.num_clusters;
  if (has_truth && final_labels.num_clusters > 0) {
    res.final_clustering_accuracy = clustering_accuracy(final_labels, truth);
  }
  if (!query.empty() && !gallery.empty()) res.retrieval = evaluate(res.training.encoder, query, gallery);
  return res;
}

}  // namespace reid
