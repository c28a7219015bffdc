#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "reid/error.hpp"
#include "reid/numerics.hpp"

namespace reid {

enum class DistanceMode { direct, softmax_relative };

inline const char* distance_mode_name(DistanceMode m) {
  return m == DistanceMode::direct ? "direct" : "softmax_relative";
}

inline std::optional<DistanceMode> parse_distance_mode(std::string_view s) {
  if (s == "direct") return DistanceMode::direct;
  if (s == "softmax" || s == "softmax_relative") return DistanceMode::softmax_relative;
  return std::nullopt;
}

/// Mean similarity per camera pair.
struct CameraOffsetMatrix {
  Mat values;
  // Set when some camera pair had no qualifying instance pair; those entries are 0.
  bool empty_pair = false;
};

struct UnifiedDistance {
  Mat dist;
  DistanceMode mode = DistanceMode::softmax_relative;
  double lambda = 0.0;
};

/// Entry (a, b) is the mean of sim[u][v] over u != v with camera u == a and
/// camera v == b.
inline CameraOffsetMatrix camera_offsets(const Mat& sim, std::span<const int> cameras, int n_cam) {
  const std::size_t n = sim.rows();
  if (sim.cols() != n || cameras.size() != n) {
    throw Error(Errc::dim_mismatch, "similarity matrix and camera list disagree in size");
  }
  const auto nc = static_cast<std::size_t>(n_cam);
  Mat sum(nc, nc);
  std::vector<double> count(nc * nc, 0.0);
  for (std::size_t u = 0; u < n; ++u) {
    const auto cu = static_cast<std::size_t>(cameras[u]);
    if (cu >= nc) throw Error(Errc::index_out_of_range, "camera id " + std::to_string(cameras[u]));
    const auto row = sim.row(u);
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      const auto cv = static_cast<std::size_t>(cameras[v]);
      sum(cu, cv) += row[v];
      count[cu * nc + cv] += 1.0;
    }
  }
  CameraOffsetMatrix out{Mat(nc, nc), false};
  for (std::size_t a = 0; a < nc; ++a) {
    for (std::size_t b = 0; b < nc; ++b) {
      const double c = count[a * nc + b];
      if (c == 0.0) {
        out.empty_pair = true;
        out.values(a, b) = 0.0;
      } else {
        out.values(a, b) = sum(a, b) / c;
      }
    }
  }
  return out;
}

/// S~[u][v] = sim[u][v] - lambda * offsets[c_u][c_v] for u != v.
///
/// direct:           dist = 1 - S~.
/// softmax_relative: per row, p'[u][v] = exp(S~[u][v] - max_w S~[u][w]) (the
///                   row softmax rescaled so its max is 1), then
///                   dist = 1 - (p'[u][v] + p'[v][u]) / 2.
/// The diagonal is 0 in both modes.
inline UnifiedDistance unified(const Mat& sim, const CameraOffsetMatrix& offsets,
                               std::span<const int> cameras, double lambda, DistanceMode mode) {
  const std::size_t n = sim.rows();
  if (sim.cols() != n || cameras.size() != n) {
    throw Error(Errc::dim_mismatch, "similarity matrix and camera list disagree in size");
  }
  if (!(lambda >= 0.0)) throw Error(Errc::invalid_config, "lambda must be >= 0");
  UnifiedDistance out{Mat(n, n), mode, lambda};
  Mat& d = out.dist;
  for (std::size_t u = 0; u < n; ++u) {
    const auto cu = static_cast<std::size_t>(cameras[u]);
    for (std::size_t v = 0; v < n; ++v) {
      if (u == v) continue;
      const double off = lambda == 0.0 ? 0.0 : offsets.values(cu, static_cast<std::size_t>(cameras[v]));
      d(u, v) = sim(u, v) - lambda * off;
    }
  }

  if (mode == DistanceMode::direct) {
    for (std::size_t u = 0; u < n; ++u) {
      for (std::size_t v = 0; v < n; ++v) d(u, v) = u == v ? 0.0 : 1.0 - d(u, v);
    }
    return out;
  }

  for (std::size_t u = 0; u < n; ++u) {
    auto row = d.row(u);
    double mx = -INFINITY;
    for (std::size_t v = 0; v < n; ++v) {
      if (v != u) mx = std::max(mx, row[v]);
    }
    for (std::size_t v = 0; v < n; ++v) row[v] = v == u ? 0.0 : std::exp(row[v] - mx);
  }
  for (std::size_t u = 0; u < n; ++u) {
    d(u, u) = 0.0;
    for (std::size_t v = u + 1; v < n; ++v) {
      const double dd = 1.0 - 0.5 * (d(u, v) + d(v, u));
      d(u, v) = dd;
      d(v, u) = dd;
    }
  }
  return out;
}

}  // namespace reid
