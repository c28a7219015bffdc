#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "reid/clustering.hpp"
#include "reid/dataset.hpp"
#include "reid/encoder.hpp"
#include "reid/error.hpp"
#include "reid/numerics.hpp"
#include "reid/rng.hpp"

namespace reid {

/// Temporal-ensembling memory: one unit row per training instance.
struct InstanceMemory {
  Mat V;
  double mu_t = 0.2;
};

/// One unit row per current pseudo cluster.
struct ClusterMemory {
  Mat M;
  double mu_s = 0.2;
};

/// mu * old + (1 - mu) * f, before renormalization.
inline Vec momentum_blend(std::span<const double> old, std::span<const double> f, double mu) {
  if (old.size() != f.size()) throw Error(Errc::dim_mismatch, "memory row and feature differ in length");
  Vec out(old.size());
  for (std::size_t k = 0; k < old.size(); ++k) out[k] = mu * old[k] + (1.0 - mu) * f[k];
  return out;
}

namespace detail {

inline void momentum_update_row(Mat& bank, std::size_t r, std::span<const double> f, double mu,
                                const char* what) {
  if (r >= bank.rows()) {
    throw Error(Errc::index_out_of_range, std::string(what) + " row " + std::to_string(r) +
                                              " of " + std::to_string(bank.rows()));
  }
  if (f.size() != bank.cols()) throw Error(Errc::dim_mismatch, "feature length differs from memory width");
  // mu == 1 must leave the stored bits untouched; renormalizing would not.
  if (mu == 1.0) return;
  bank.set_row(r, l2_normalize(momentum_blend(bank.row(r), f, mu)));
}

}  // namespace detail

inline void update_cluster(ClusterMemory& mem, std::size_t j, std::span<const double> f) {
  detail::momentum_update_row(mem.M, j, f, mem.mu_s, "cluster");
}

inline void update_instance(InstanceMemory& mem, std::size_t i, std::span<const double> f) {
  detail::momentum_update_row(mem.V, i, f, mem.mu_t, "instance");
}

inline InstanceMemory init_instance_memory(const EncoderState& enc, const TrainView& view,
                                           double mu_t) {
  InstanceMemory mem{Mat(view.size(), enc.d_out), mu_t};
  for (std::size_t i = 0; i < view.size(); ++i) {
    mem.V.set_row(i, forward(enc, view.index(i), view.raw(i)));
  }
  return mem;
}

/// Each cluster's row starts as the V row of one uniformly drawn member.
inline ClusterMemory init_cluster_memory(const InstanceMemory& inst, const PseudoLabeling& labels,
                                         double mu_s, Rng& rng) {
  if (labels.size() != inst.V.rows()) throw Error(Errc::dim_mismatch, "labeling size != memory rows");
  ClusterMemory mem{Mat(labels.num_clusters, inst.V.cols()), mu_s};
  const auto members = labels.members();
  for (std::size_t j = 0; j < members.size(); ++j) {
    if (members[j].empty()) throw Error(Errc::empty_cluster, "cluster " + std::to_string(j));
    mem.M.set_row(j, inst.V.row(members[j][rng.below(members[j].size())]));
  }
  return mem;
}

/// Replaces the V rows of outliers with a fresh encoder pass.
inline void refresh_outliers(InstanceMemory& mem, const EncoderState& enc, const TrainView& view,
                             std::span<const std::size_t> outliers) {
  for (std::size_t i : outliers) {
    if (i >= mem.V.rows()) throw Error(Errc::index_out_of_range, "outlier " + std::to_string(i));
    mem.V.set_row(i, forward(enc, view.index(i), view.raw(i)));
  }
}

/// Normalized mean of V over a uniformly drawn ceil(rho * |members|) subset.
/// rho == 1 averages every member and consumes no random draws.
inline Vec centroid(const Mat& V, std::span<const std::size_t> members, double rho, Rng& rng) {
  if (members.empty()) throw Error(Errc::empty_cluster, "centroid of empty cluster");
  if (!(rho > 0.0 && rho <= 1.0)) throw Error(Errc::invalid_config, "rho must lie in (0, 1]");
  const std::size_t n = members.size();
  std::size_t take = static_cast<std::size_t>(std::ceil(rho * static_cast<double>(n)));
  take = std::clamp<std::size_t>(take, 1, n);

  Vec sum(V.cols(), 0.0);
  if (take == n) {
    for (std::size_t i : members) axpy(1.0, V.row(i), sum);
  } else {
    std::vector<std::size_t> pool(members.begin(), members.end());
    for (std::size_t k = 0; k < take; ++k) {
      std::swap(pool[k], pool[k + rng.below(n - k)]);
      axpy(1.0, V.row(pool[k]), sum);
    }
  }
  for (double& x : sum) x /= static_cast<double>(take);
  return l2_normalize(sum);
}

inline Vec centroid(const InstanceMemory& mem, const PseudoLabeling& labels, std::size_t j,
                    double rho, Rng& rng) {
  if (j >= labels.num_clusters) throw Error(Errc::empty_cluster, "no cluster " + std::to_string(j));
  const auto members = labels.members();
  return centroid(mem.V, members[j], rho, rng);
}

}  // namespace reid
