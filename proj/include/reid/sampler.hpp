#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "reid/clustering.hpp"
#include "reid/error.hpp"
#include "reid/rng.hpp"

namespace reid {

struct SamplerConfig {
  std::size_t P = 16;
  std::size_t K = 4;
};

/// K members of one cluster. If the cluster spans two or more cameras, the
/// first two picks come from distinct cameras and the remaining K-2 are drawn
/// uniformly; members are drawn without replacement while enough remain.
inline std::vector<std::size_t> draw_cluster_slot(std::span<const std::size_t> members,
                                                  std::span<const int> cameras, std::size_t K,
                                                  Rng& rng) {
  std::vector<std::size_t> pool(members.begin(), members.end());
  std::vector<std::size_t> picked;
  picked.reserve(K);
  // Moves pool[k] into the picked prefix.
  std::size_t used = 0;
  auto take = [&](std::size_t k) {
    std::swap(pool[used], pool[k]);
    picked.push_back(pool[used]);
    ++used;
  };

  bool multi_cam = false;
  for (std::size_t m : pool) multi_cam |= cameras[m] != cameras[pool.front()];

  if (multi_cam && K >= 2) {
    take(rng.below(pool.size()));
    const int first_cam = cameras[picked.front()];
    std::vector<std::size_t> other;
    for (std::size_t k = used; k < pool.size(); ++k) {
      if (cameras[pool[k]] != first_cam) other.push_back(k);
    }
    take(other[rng.below(other.size())]);
  }
  while (picked.size() < K) {
    if (used < pool.size()) {
      take(used + rng.below(pool.size() - used));
    } else {
      picked.push_back(pool[rng.below(pool.size())]);
    }
  }
  return picked;
}

/// One epoch of P x K batches: clusters are shuffled and consumed in groups
/// of P, so every cluster appears in exactly one batch. Outliers are never
/// sampled.
inline std::vector<std::vector<std::size_t>> epoch_batches(const PseudoLabeling& labeling,
                                                           std::span<const int> cameras,
                                                           const SamplerConfig& cfg, Rng& rng) {
  if (labeling.num_clusters == 0) throw Error(Errc::no_clusters, "nothing to sample");
  if (cfg.P < 1 || cfg.K < 2) throw Error(Errc::invalid_config, "sampler needs P >= 1 and K >= 2");
  if (cameras.size() != labeling.size()) throw Error(Errc::dim_mismatch, "cameras vs labeling");

  const auto members = labeling.members();
  std::vector<std::size_t> order(labeling.num_clusters);
  for (std::size_t j = 0; j < order.size(); ++j) order[j] = j;
  rng.shuffle(order);

  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < order.size(); start += cfg.P) {
    const std::size_t stop = std::min(order.size(), start + cfg.P);
    std::vector<std::size_t> batch;
    batch.reserve((stop - start) * cfg.K);
    for (std::size_t g = start; g < stop; ++g) {
      const auto slot = draw_cluster_slot(members[order[g]], cameras, cfg.K, rng);
      batch.insert(batch.end(), slot.begin(), slot.end());
    }
    batches.push_back(std::move(batch));
  }
  return batches;
}

}  // namespace reid
