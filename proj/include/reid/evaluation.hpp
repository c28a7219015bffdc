#pragma once

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <span>
#include <vector>

#include "reid/dataset.hpp"
#include "reid/encoder.hpp"
#include "reid/error.hpp"
#include "reid/numerics.hpp"

namespace reid {

struct RetrievalResult {
  double mAP = 0.0;
  std::vector<double> cmc;  // cmc[r - 1] = fraction of queries matched within the top r
  std::size_t num_queries = 0;
  std::size_t skipped = 0;

  double rank(std::size_t r) const {
    if (cmc.empty()) return 0.0;
    return cmc[std::min(r, cmc.size()) - 1];
  }
};

/// Labelled embeddings on one side of a retrieval problem.
struct EmbeddedSet {
  Mat features;  // unit rows
  std::vector<int> identities;
  std::vector<int> cameras;
};

/// Cross-camera retrieval: gallery items sharing both identity and camera with
/// the query are dropped; the rest are ranked by descending cosine with ties
/// going to the lower gallery index. Queries with no remaining match are
/// skipped.
inline RetrievalResult evaluate_embeddings(const EmbeddedSet& query, const EmbeddedSet& gallery) {
  const std::size_t ng = gallery.features.rows();
  if (ng == 0) throw Error(Errc::empty_gallery, "gallery is empty");
  if (query.features.cols() != gallery.features.cols()) {
    throw Error(Errc::dim_mismatch, "query and gallery embeddings differ in width");
  }
  RetrievalResult res;
  std::vector<double> hits(ng, 0.0);
  double ap_sum = 0.0;
  std::vector<double> sim(ng);
  std::vector<std::size_t> order;
  order.reserve(ng);

  for (std::size_t q = 0; q < query.features.rows(); ++q) {
    const int qid = query.identities[q];
    const int qcam = query.cameras[q];
    order.clear();
    bool any_match = false;
    for (std::size_t g = 0; g < ng; ++g) {
      const bool same_id = gallery.identities[g] == qid;
      if (same_id && gallery.cameras[g] == qcam) continue;
      any_match |= same_id;
      sim[g] = cosine(query.features.row(q), gallery.features.row(g));
      order.push_back(g);
    }
    if (!any_match) {
      ++res.skipped;
      std::fprintf(stderr, "warning: query %zu has no cross-camera match, skipped\n", q);
      continue;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });

    std::size_t found = 0;
    double ap = 0.0;
    std::size_t first_hit = order.size();
    for (std::size_t k = 0; k < order.size(); ++k) {
      if (gallery.identities[order[k]] != qid) continue;
      if (found == 0) first_hit = k;
      ++found;
      ap += static_cast<double>(found) / static_cast<double>(k + 1);
    }
    ap_sum += ap / static_cast<double>(found);
    hits[first_hit] += 1.0;
    ++res.num_queries;
  }

  res.cmc.assign(ng, 0.0);
  if (res.num_queries > 0) {
    res.mAP = ap_sum / static_cast<double>(res.num_queries);
    double acc = 0.0;
    for (std::size_t r = 0; r < ng; ++r) {
      acc += hits[r];
      res.cmc[r] = acc / static_cast<double>(res.num_queries);
    }
  }
  return res;
}

inline EmbeddedSet embed(const EncoderState& enc, const TrainView& view) {
  EmbeddedSet s{Mat(view.size(), enc.d_out), ground_truth(view), view.cameras()};
  for (std::size_t i = 0; i < view.size(); ++i) s.features.set_row(i, forward(enc, view.index(i), view.raw(i)));
  return s;
}

inline RetrievalResult evaluate(const EncoderState& enc, const TrainView& query, const TrainView& gallery) {
  if (gallery.empty()) throw Error(Errc::empty_gallery, "gallery is empty");
  if (enc.kind == EncoderKind::linear && query.d_in() != enc.d_in) {
    throw Error(Errc::dim_mismatch, "encoder d_in=" + std::to_string(enc.d_in) + " but dataset d_in=" +
                                        std::to_string(query.d_in()));
  }
  if (enc.kind == EncoderKind::free_embedding && enc.theta.rows() != query.dataset_size()) {
    throw Error(Errc::dim_mismatch, "embedding table has " + std::to_string(enc.theta.rows()) +
                                        " rows but dataset has " + std::to_string(query.dataset_size()));
  }
  return evaluate_embeddings(embed(enc, query), embed(enc, gallery));
}

}  // namespace reid
