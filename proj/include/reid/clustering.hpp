#pragma once

#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <vector>

#include "reid/error.hpp"
#include "reid/numerics.hpp"

namespace reid {

inline constexpr int kOutlier = -1;

struct DbscanParams {
  double eps = 0.5;
  std::size_t min_num = 4;
};

struct PseudoLabeling {
  std::vector<int> label;  // cluster id in [0, num_clusters) or kOutlier
  std::size_t num_clusters = 0;
  std::size_t num_clustered = 0;

  std::size_t size() const noexcept { return label.size(); }
  std::size_t num_outliers() const noexcept { return label.size() - num_clustered; }

  /// Member indices per cluster, ascending.
  std::vector<std::vector<std::size_t>> members() const {
    std::vector<std::vector<std::size_t>> m(num_clusters);
    for (std::size_t i = 0; i < label.size(); ++i) {
      if (label[i] != kOutlier) m[static_cast<std::size_t>(label[i])].push_back(i);
    }
    return m;
  }

  std::vector<std::size_t> outliers() const {
    std::vector<std::size_t> o;
    for (std::size_t i = 0; i < label.size(); ++i) {
      if (label[i] == kOutlier) o.push_back(i);
    }
    return o;
  }

  friend bool operator==(const PseudoLabeling&, const PseudoLabeling&) = default;
};

/// Renumbers cluster ids by ascending smallest member index and recounts.
inline PseudoLabeling canonicalize(std::vector<int> label) {
  std::map<int, int> remap;
  for (int l : label) {
    if (l != kOutlier && !remap.count(l)) {
      const int next = static_cast<int>(remap.size());
      remap[l] = next;
    }
  }
  PseudoLabeling out;
  for (int& l : label) {
    if (l != kOutlier) {
      l = remap[l];
      ++out.num_clustered;
    }
  }
  out.label = std::move(label);
  out.num_clusters = remap.size();
  return out;
}

/// DBSCAN over a precomputed distance matrix.
///
/// u is a core point iff |{v : dist(u,v) < eps}| >= min_num, counting u
/// itself. Seeds are taken in ascending index order and each cluster is
/// expanded breadth-first, visiting neighbours in ascending index, so a border
/// point joins the first cluster that reaches it.
inline PseudoLabeling dbscan(const Mat& dist, const DbscanParams& params) {
  if (dist.rows() != dist.cols()) throw Error(Errc::dim_mismatch, "distance matrix must be square");
  if (!(params.eps > 0.0)) throw Error(Errc::invalid_config, "eps must be > 0");
  if (params.min_num < 1) throw Error(Errc::invalid_config, "min_num must be >= 1");
  const std::size_t n = dist.rows();

  std::vector<std::vector<std::size_t>> neighbours(n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto row = dist.row(u);
    for (std::size_t v = 0; v < n; ++v) {
      if (row[v] < params.eps) neighbours[u].push_back(v);
    }
  }
  std::vector<bool> core(n);
  for (std::size_t u = 0; u < n; ++u) core[u] = neighbours[u].size() >= params.min_num;

  std::vector<int> label(n, kOutlier);
  int next = 0;
  std::deque<std::size_t> frontier;
  for (std::size_t seed = 0; seed < n; ++seed) {
    if (!core[seed] || label[seed] != kOutlier) continue;
    const int id = next++;
    label[seed] = id;
    frontier.push_back(seed);
    while (!frontier.empty()) {
      const std::size_t u = frontier.front();
      frontier.pop_front();
      for (std::size_t v : neighbours[u]) {
        if (label[v] != kOutlier) continue;
        label[v] = id;
        if (core[v]) frontier.push_back(v);
      }
    }
  }
  return canonicalize(std::move(label));
}

/// Unweighted mean over clusters of the majority-identity fraction; outliers
/// are ignored.
inline double clustering_accuracy(const PseudoLabeling& labeling, std::span<const int> truth) {
  if (labeling.num_clusters == 0) throw Error(Errc::no_clusters, "clustering has no clusters");
  if (truth.size() != labeling.size()) {
    throw Error(Errc::dim_mismatch, "ground truth length differs from labeling");
  }
  double total = 0.0;
  for (const auto& members : labeling.members()) {
    std::map<int, std::size_t> counts;
    std::size_t best = 0;
    for (std::size_t i : members) best = std::max(best, ++counts[truth[i]]);
    total += static_cast<double>(best) / static_cast<double>(members.size());
  }
  return total / static_cast<double>(labeling.num_clusters);
}

}  // namespace reid
