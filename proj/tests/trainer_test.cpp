#include <gtest/gtest.h>

#include <cmath>

#include "reid/experiment.hpp"
#include "reid/trainer.hpp"

using namespace reid;

namespace {

// Ten well separated identities over two cameras, four training images each.
Dataset easy_dataset(std::uint64_t seed = 3) {
  GenConfig g;
  g.n_identities = 10;
  g.n_cameras = 2;
  g.images_per_id_per_cam = 4;
  g.d_in = 64;
  g.camera_shift = 0.1;
  g.noise_sigma = 0.01;
  g.seed = seed;
  return generate(g);
}

TrainConfig easy_config(Variant v = Variant::stochastic_online) {
  TrainConfig c;
  c.variant = v;
  c.distance_mode = DistanceMode::direct;
  c.use_camera_offset = false;
  c.dbscan = {0.3, 2};
  c.sampler = {4, 4};
  c.loss.tau = 0.1;
  c.optim.learning_rate = 1e-3;
  c.epochs = 4;
  c.seed = 17;
  return c;
}

EncoderState easy_encoder(const Dataset& ds) { return make_encoder({EncoderKind::linear, 16}, ds, 17); }

}  // namespace

TEST(Train, ZeroEpochsLeavesEverythingAlone) {
  const auto ds = easy_dataset();
  const TrainView view(ds, Split::train);
  auto cfg = easy_config();
  cfg.epochs = 0;
  const auto enc = easy_encoder(ds);
  const auto r = train(view, enc, cfg);
  EXPECT_TRUE(r.reports.empty());
  EXPECT_EQ(r.encoder, enc);
  EXPECT_EQ(r.instance_memory.V, init_instance_memory(enc, view, cfg.mu_t).V);
}

TEST(Train, SeparableDataClustersPerfectly) {
  const auto ds = easy_dataset();
  const TrainView view(ds, Split::train);
  for (Variant v : {Variant::baseline, Variant::stochastic_random, Variant::stochastic_online, Variant::hard,
                    Variant::percent_mean}) {
    auto cfg = easy_config(v);
    cfg.rho = 0.5;
    const auto r = train(view, easy_encoder(ds), cfg, ground_truth(view));
    ASSERT_EQ(r.reports.size(), cfg.epochs);
    for (const auto& rep : r.reports) {
      EXPECT_EQ(rep.num_clusters, 10u) << variant_name(v) << " epoch " << rep.epoch;
      EXPECT_EQ(rep.num_outliers, 0u);
      EXPECT_EQ(rep.clustering_accuracy, 1.0);
      EXPECT_TRUE(std::isfinite(rep.mean_loss));
    }
  }
}

TEST(Train, LossFallsOnSeparableData) {
  const auto ds = easy_dataset();
  const TrainView view(ds, Split::train);
  for (Variant v : {Variant::baseline, Variant::stochastic_online}) {
    auto cfg = easy_config(v);
    cfg.epochs = 10;
    const auto r = train(view, easy_encoder(ds), cfg);
    EXPECT_LT(r.reports.back().mean_loss, r.reports.front().mean_loss) << variant_name(v);
  }
}

TEST(Train, SameSeedSameResult) {
  const auto ds = easy_dataset();
  const TrainView view(ds, Split::train);
  const auto cfg = easy_config(Variant::stochastic_random);
  const auto a = train(view, easy_encoder(ds), cfg);
  const auto b = train(view, easy_encoder(ds), cfg);
  EXPECT_EQ(a.encoder, b.encoder);
  EXPECT_EQ(a.instance_memory.V, b.instance_memory.V);
  ASSERT_EQ(a.reports.size(), b.reports.size());
  for (std::size_t e = 0; e < a.reports.size(); ++e) {
    EXPECT_EQ(a.reports[e].num_clusters, b.reports[e].num_clusters);
    EXPECT_EQ(a.reports[e].mean_loss, b.reports[e].mean_loss);
  }
  auto other = cfg;
  other.seed = 18;
  EXPECT_NE(train(view, easy_encoder(ds), other).encoder, a.encoder);
}

TEST(Train, NoClustersSkipsTrainingButRefreshes) {
  const auto ds = easy_dataset();
  const TrainView view(ds, Split::train);
  auto cfg = easy_config();
  cfg.dbscan = {1e-9, 2};
  cfg.epochs = 2;
  const auto enc = easy_encoder(ds);
  const auto r = train(view, enc, cfg, ground_truth(view));
  for (const auto& rep : r.reports) {
    EXPECT_EQ(rep.num_clusters, 0u);
    EXPECT_TRUE(std::isnan(rep.mean_loss));
    EXPECT_TRUE(std::isnan(rep.clustering_accuracy));
  }
  EXPECT_EQ(r.encoder, enc);
}

TEST(Train, BatchesNeverContainOutliersAndOutliersRefreshAtEpochEnd) {
  // A looser noise level and tighter eps leave some points unclustered.
  GenConfig g;
  g.n_identities = 12;
  g.n_cameras = 3;
  g.images_per_id_per_cam = 4;
  g.d_in = 32;
  g.camera_shift = 0.3;
  g.noise_sigma = 0.08;
  g.seed = 5;
  const auto ds = generate(g);
  const TrainView view(ds, Split::train);
  auto cfg = easy_config();
  cfg.dbscan = {0.15, 3};
  cfg.epochs = 3;
  std::size_t outliers_seen = 0, batches = 0;
  TrainHooks hooks;
  hooks.on_batch = [&](const BatchSnapshot& s) {
    ++batches;
    for (std::size_t i : s.samples) ASSERT_NE(s.labels.label[i], kOutlier);
    outliers_seen = std::max(outliers_seen, s.labels.num_outliers());
  };
  const auto r = train(view, easy_encoder(ds), cfg, std::nullopt, hooks);
  ASSERT_GT(batches, 0u);
  ASSERT_GT(outliers_seen, 0u) << "fixture should produce outliers";
  for (std::size_t i : r.last_labels.outliers()) {
    const Vec f = forward(r.encoder, view.index(i), view.raw(i));
    const auto row = r.instance_memory.V.row(i);
    for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(row[k], f[k]);
  }
}

TEST(Train, MeanClassifiersAreCentroidsOfTheMemory) {
  const auto ds = easy_dataset();
  const TrainView view(ds, Split::train);
  auto cfg = easy_config(Variant::baseline);
  cfg.epochs = 2;
  std::size_t checked = 0;
  TrainHooks hooks;
  hooks.on_batch = [&](const BatchSnapshot& s) {
    EXPECT_EQ(s.cluster_memory, nullptr);
    const auto members = s.labels.members();
    for (std::size_t j = 0; j < members.size(); ++j) {
      Vec mean(s.instance_memory.V.cols(), 0.0);
      for (std::size_t i : members[j]) axpy(1.0, s.instance_memory.V.row(i), mean);
      mean = l2_normalize(mean);
      for (std::size_t k = 0; k < mean.size(); ++k) ASSERT_NEAR(s.classifiers(j, k), mean[k], 1e-12);
    }
    ++checked;
  };
  train(view, easy_encoder(ds), cfg, std::nullopt, hooks);
  EXPECT_GT(checked, 0u);
}

TEST(Train, StochasticClassifiersAreTheClusterMemory) {
  const auto ds = easy_dataset();
  const TrainView view(ds, Split::train);
  auto cfg = easy_config(Variant::stochastic_online);
  cfg.epochs = 2;
  std::size_t first_batches = 0;
  TrainHooks hooks;
  hooks.on_batch = [&](const BatchSnapshot& s) {
    ASSERT_NE(s.cluster_memory, nullptr);
    EXPECT_EQ(s.classifiers, s.cluster_memory->M);
    if (s.batch != 0) return;
    // Freshly seeded: every row is one member's memory feature.
    const auto members = s.labels.members();
    for (std::size_t j = 0; j < members.size(); ++j) {
      bool found = false;
      for (std::size_t i : members[j]) {
        const auto v = s.instance_memory.V.row(i);
        found |= std::equal(v.begin(), v.end(), s.classifiers.row(j).begin());
      }
      EXPECT_TRUE(found) << "row " << j;
    }
    ++first_batches;
  };
  train(view, easy_encoder(ds), cfg, std::nullopt, hooks);
  EXPECT_EQ(first_batches, 2u);
}

TEST(ClassifierUpdate, VariantRules) {
  // Two clusters {0, 1} and {2, 3}; memory and embeddings are axis vectors.
  const auto labels = canonicalize({0, 0, 1, 1});
  const auto members = labels.members();
  InstanceMemory V{Mat(4, 3), 0.2};
  V.V.set_row(0, Vec{1, 0, 0});
  V.V.set_row(1, Vec{0, 1, 0});
  V.V.set_row(2, Vec{0, 0, 1});
  V.V.set_row(3, Vec{1, 0, 0});
  const std::vector<std::size_t> samples{0, 1, 2, 3};
  const std::vector<Vec> emb{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 1, 0}};
  auto fresh = [] {
    ClusterMemory M{Mat(2, 3), 0.0};
    M.M.set_row(0, Vec{1, 0, 0});
    M.M.set_row(1, Vec{0, 0, 1});
    return M;
  };
  Rng rng(1);

  auto M = fresh();
  classifier_update(Variant::stochastic_online, samples, emb, labels, members, M, V, rng);
  // mu 0: the last sample of each cluster wins.
  EXPECT_EQ(M.M.row(0)[1], 1.0);
  EXPECT_EQ(M.M.row(1)[1], 1.0);

  M = fresh();
  classifier_update(Variant::hard, samples, emb, labels, members, M, V, rng);
  // Cluster 0: <e0, m0> = 1, <e1, m0> = 0 -> sample 1. Cluster 1: sample 3.
  EXPECT_EQ(M.M.row(0)[1], 1.0);
  EXPECT_EQ(M.M.row(1)[1], 1.0);
  M = fresh();
  const std::vector<Vec> emb2{{0, 1, 0}, {1, 0, 0}, {0, 0, 1}, {0, 1, 0}};
  classifier_update(Variant::hard, samples, emb2, labels, members, M, V, rng);
  EXPECT_EQ(M.M.row(0)[1], 1.0);

  M = fresh();
  classifier_update(Variant::stochastic_random, samples, emb, labels, members, M, V, rng);
  for (std::size_t j = 0; j < 2; ++j) {
    bool matches_member = false;
    for (std::size_t i : members[j]) {
      const auto v = V.V.row(i);
      matches_member |= std::equal(v.begin(), v.end(), M.M.row(j).begin());
    }
    EXPECT_TRUE(matches_member);
  }

  for (Variant v : {Variant::baseline, Variant::percent_mean}) {
    M = fresh();
    classifier_update(v, samples, emb, labels, members, M, V, rng);
    EXPECT_EQ(M.M, fresh().M);
  }
}

TEST(Experiment, ReportsRetrievalAndFinalClustering) {
  const auto ds = easy_dataset();
  auto cfg = easy_config();
  const auto r = run_experiment(ds, {EncoderKind::linear, 16}, cfg);
  EXPECT_EQ(r.final_clusters, 10u);
  EXPECT_EQ(r.final_clustering_accuracy, 1.0);
  EXPECT_EQ(r.retrieval.num_queries, 20u);
  EXPECT_GT(r.retrieval.mAP, 0.9);
}
