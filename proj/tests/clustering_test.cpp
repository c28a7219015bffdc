#include <gtest/gtest.h>

#include "dbscan_oracle.hpp"
#include "reid/clustering.hpp"

using namespace reid;

namespace {

Mat from_rows(std::vector<std::vector<double>> r) {
  Mat m(r.size(), r.size());
  for (std::size_t i = 0; i < r.size(); ++i) m.set_row(i, r[i]);
  return m;
}

}  // namespace

TEST(Dbscan, PairAndOutlier) {
  const Mat d = from_rows({{0, 0.1, 0.9}, {0.1, 0, 0.9}, {0.9, 0.9, 0}});
  const auto l = dbscan(d, {0.5, 2});
  EXPECT_EQ(l.label, (std::vector<int>{0, 0, kOutlier}));
  EXPECT_EQ(l.num_clusters, 1u);
  EXPECT_EQ(l.num_clustered, 2u);
  EXPECT_EQ(l, oracle::naive_dbscan(d, 0.5, 2));
}

TEST(Dbscan, GenerousEpsMakesOneCluster) {
  const Mat d = from_rows({{0, 0.3, 0.9}, {0.3, 0, 0.6}, {0.9, 0.6, 0}});
  const auto l = dbscan(d, {1.0, 1});
  EXPECT_EQ(l.label, (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(l.num_outliers(), 0u);
}

TEST(Dbscan, MinNumAboveSizeGivesAllOutliers) {
  const Mat d = from_rows({{0, 0.1}, {0.1, 0}});
  const auto l = dbscan(d, {0.5, 3});
  EXPECT_EQ(l.num_clusters, 0u);
  EXPECT_EQ(l.num_clustered, 0u);
  EXPECT_EQ(l.outliers().size(), 2u);
}

TEST(Dbscan, BorderJoinsFirstCluster) {
  // Two tight groups {0..3} and {5..8}; point 4 sits between them, within eps
  // of 3 and 5 but with too few neighbours to be core itself.
  Mat d(9, 9);
  for (std::size_t u = 0; u < 9; ++u) {
    for (std::size_t v = 0; v < 9; ++v) {
      const bool same = (u < 4 && v < 4) || (u > 4 && v > 4);
      d(u, v) = u == v ? 0.0 : same ? 0.1 : 0.9;
    }
  }
  d(3, 4) = d(4, 3) = 0.2;
  d(4, 5) = d(5, 4) = 0.2;
  const auto l = dbscan(d, {0.25, 4});
  EXPECT_EQ(l.label, (std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1}));
  EXPECT_EQ(l, oracle::naive_dbscan(d, 0.25, 4));
  // At min_num 3 the bridge is core and merges everything.
  EXPECT_EQ(dbscan(d, {0.25, 3}).num_clusters, 1u);
}

TEST(Dbscan, LabelsOrderedBySmallestMember) {
  const Mat d = from_rows({{0, 0.9, 0.1, 0.9}, {0.9, 0, 0.9, 0.1}, {0.1, 0.9, 0, 0.9}, {0.9, 0.1, 0.9, 0}});
  EXPECT_EQ(dbscan(d, {0.5, 2}).label, (std::vector<int>{0, 1, 0, 1}));
}

TEST(Dbscan, MatchesNaiveReference) {
  Rng rng(2024);
  const double eps_choices[] = {0.3, 0.5, 0.7};
  const std::size_t min_choices[] = {2, 4};
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(299);
    const Mat d = oracle::random_blob_distances(rng, n);
    const DbscanParams p{eps_choices[rng.below(3)], min_choices[rng.below(2)]};
    ASSERT_EQ(dbscan(d, p), oracle::naive_dbscan(d, p.eps, p.min_num)) << "trial " << t << " n=" << n;
  }
}

TEST(Dbscan, DuplicatingACorePointKeepsMemberships) {
  Rng rng(77);
  for (int t = 0; t < 10; ++t) {
    const std::size_t n = 40 + rng.below(60);
    const Mat d = oracle::random_blob_distances(rng, n);
    const DbscanParams p{0.3, 4};
    const auto before = dbscan(d, p);
    std::size_t core = n;
    for (std::size_t u = 0; u < n && core == n; ++u) {
      std::size_t c = 0;
      for (std::size_t v = 0; v < n; ++v) c += d(u, v) < p.eps;
      if (c >= p.min_num) core = u;
    }
    if (core == n) continue;
    Mat e(n + 1, n + 1);
    for (std::size_t u = 0; u <= n; ++u) {
      for (std::size_t v = 0; v <= n; ++v) {
        const std::size_t a = u == n ? core : u;
        const std::size_t b = v == n ? core : v;
        e(u, v) = u == v ? 0.0 : d(a, b);
      }
    }
    const auto after = dbscan(e, p);
    for (std::size_t u = 0; u < n; ++u) {
      if (before.label[u] == kOutlier) continue;
      EXPECT_NE(after.label[u], kOutlier);
      for (std::size_t v = 0; v < n; ++v) {
        if (before.label[v] == before.label[u]) {
          EXPECT_EQ(after.label[u], after.label[v]);
        }
      }
    }
  }
}

TEST(ClusteringAccuracy, Examples) {
  const auto l = canonicalize({0, 0, 0, 1, 1});
  const std::vector<int> truth{7, 7, 8, 9, 9};
  EXPECT_NEAR(clustering_accuracy(l, truth), (2.0 / 3.0 + 1.0) / 2.0, 1e-15);
  EXPECT_NEAR(clustering_accuracy(l, truth), 0.83333333, 1e-8);
  EXPECT_EQ(clustering_accuracy(canonicalize({0, 1, 1, kOutlier}), std::vector<int>{1, 2, 2, 3}), 1.0);
  EXPECT_EQ(clustering_accuracy(canonicalize({0, 0}), std::vector<int>{1, 2}), 0.5);
  try {
    clustering_accuracy(canonicalize({kOutlier}), std::vector<int>{1});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::no_clusters);
  }
}
