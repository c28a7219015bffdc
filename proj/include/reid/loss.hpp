#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "reid/error.hpp"
#include "reid/numerics.hpp"

namespace reid {

struct LossConfig {
  double tau = 0.04;
};

struct LossResult {
  double loss = 0.0;
  Vec grad_f;
  Vec probs;
};

/// -log softmax_y(<f, m_j> / tau) against detached classifier rows, with the
/// gradient taken only with respect to f.
inline LossResult contrastive_loss(std::span<const double> f, const Mat& classifiers, std::size_t y,
                                   const LossConfig& cfg) {
  const std::size_t n_cls = classifiers.rows();
  if (y >= n_cls) {
    throw Error(Errc::index_out_of_range, "target " + std::to_string(y) + " of " + std::to_string(n_cls));
  }
  if (f.size() != classifiers.cols()) throw Error(Errc::dim_mismatch, "embedding and classifier widths differ");
  if (!(cfg.tau > 0.0)) throw Error(Errc::invalid_config, "tau must be > 0");

  LossResult r;
  r.probs.resize(n_cls);
  double mx = -INFINITY;
  for (std::size_t j = 0; j < n_cls; ++j) {
    r.probs[j] = dot(f, classifiers.row(j)) / cfg.tau;
    mx = std::max(mx, r.probs[j]);
  }
  double z = 0.0;
  for (double& p : r.probs) {
    p = std::exp(p - mx);
    z += p;
  }
  const double target_logit = dot(f, classifiers.row(y)) / cfg.tau;
  r.loss = std::max(0.0, std::log(z) + mx - target_logit);
  for (double& p : r.probs) p /= z;

  r.grad_f.assign(f.size(), 0.0);
  for (std::size_t j = 0; j < n_cls; ++j) {
    const double w = (r.probs[j] - (j == y ? 1.0 : 0.0)) / cfg.tau;
    if (w != 0.0) axpy(w, classifiers.row(j), r.grad_f);
  }
  return r;
}

struct BatchLoss {
  double mean_loss = 0.0;
  std::vector<Vec> grads;  // per sample, of the per-sample loss
};

inline BatchLoss batch_loss(const std::vector<Vec>& embeddings, std::span<const std::size_t> targets,
                            const Mat& classifiers, const LossConfig& cfg) {
  if (embeddings.empty()) throw Error(Errc::invalid_config, "empty batch");
  if (embeddings.size() != targets.size()) throw Error(Errc::dim_mismatch, "embeddings vs targets");
  BatchLoss out;
  out.grads.reserve(embeddings.size());
  double sum = 0.0;
  for (std::size_t b = 0; b < embeddings.size(); ++b) {
    auto r = contrastive_loss(embeddings[b], classifiers, targets[b], cfg);
    sum += r.loss;
    out.grads.push_back(std::move(r.grad_f));
  }
  out.mean_loss = sum / static_cast<double>(embeddings.size());
  return out;
}

}  // namespace reid
