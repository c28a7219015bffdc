#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "reid/dataset.hpp"

using namespace reid;
namespace fs = std::filesystem;

namespace {

GenConfig tiny(double shift, double sigma, std::uint64_t seed = 1) {
  GenConfig g;
  g.n_identities = 2;
  g.n_cameras = 2;
  g.images_per_id_per_cam = 1;
  g.d_in = 8;
  g.camera_shift = shift;
  g.noise_sigma = sigma;
  g.seed = seed;
  return g;
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("reid_dataset_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

double mean_cross_camera_cosine(const Dataset& ds) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& a : ds.instances) {
    for (const auto& b : ds.instances) {
      if (a.index < b.index && a.true_identity == b.true_identity && a.camera != b.camera) {
        sum += cosine(a.raw, b.raw);
        ++n;
      }
    }
  }
  EXPECT_GE(n, 100u);
  return sum / static_cast<double>(n);
}

}  // namespace

TEST(Generate, NoShiftNoNoiseGivesIdenticalImages) {
  const Dataset ds = generate(tiny(0.0, 0.0));
  ASSERT_EQ(ds.size(), 4u);
  for (const auto& a : ds.instances) {
    EXPECT_NEAR(norm2(a.raw), 1.0, 1e-12);
    for (const auto& b : ds.instances) {
      if (a.true_identity == b.true_identity) {
        EXPECT_NEAR(cosine(a.raw, b.raw), 1.0, 1e-12);
      }
    }
  }
}

TEST(Generate, CrossCameraCosineMatchesClosedForm) {
  const auto g = generate_with_truth(tiny(0.8, 0.0));
  const Dataset& ds = g.dataset;
  for (const auto& a : ds.instances) {
    EXPECT_NEAR(norm2(g.camera_offsets[static_cast<std::size_t>(a.camera)]), 0.8, 1e-12);
    for (const auto& b : ds.instances) {
      if (a.true_identity != b.true_identity || a.camera == b.camera) continue;
      const auto& p = g.prototypes[static_cast<std::size_t>(a.true_identity)];
      const auto& oa = g.camera_offsets[static_cast<std::size_t>(a.camera)];
      const auto& ob = g.camera_offsets[static_cast<std::size_t>(b.camera)];
      double ip = 0, na = 0, nb = 0;
      for (std::size_t k = 0; k < p.size(); ++k) {
        const double xa = p[k] + oa[k];
        const double xb = p[k] + ob[k];
        ip += xa * xb;
        na += xa * xa;
        nb += xb * xb;
      }
      const double expected = ip / std::sqrt(na * nb);
      EXPECT_LT(expected, 1.0);
      EXPECT_NEAR(cosine(a.raw, b.raw), expected, 1e-12);
    }
  }
}

TEST(Generate, DeterministicUnderSeed) {
  GenConfig g = tiny(0.5, 0.1, 42);
  g.images_per_id_per_cam = 3;
  EXPECT_EQ(generate(g), generate(g));
  GenConfig other = g;
  other.seed = 43;
  EXPECT_NE(generate(g), generate(other));
}

TEST(Generate, LargerShiftLowersCrossCameraCosine) {
  GenConfig g;
  g.n_identities = 20;
  g.n_cameras = 3;
  g.images_per_id_per_cam = 2;
  g.d_in = 16;
  g.noise_sigma = 0.05;
  g.seed = 9;
  double previous = 2.0;
  for (double shift : {0.2, 0.8, 1.4}) {
    g.camera_shift = shift;
    const double c = mean_cross_camera_cosine(generate(g));
    EXPECT_LT(c, previous) << "shift " << shift;
    previous = c;
  }
}

TEST(Generate, SplitIsPartition) {
  GenConfig g = tiny(0.3, 0.1);
  g.images_per_id_per_cam = 4;
  const Dataset ds = generate(g);
  EXPECT_EQ(ds.count(Split::query) + ds.count(Split::gallery) + ds.count(Split::train), ds.size());
  EXPECT_EQ(ds.count(Split::query), 4u);
  EXPECT_EQ(ds.count(Split::gallery), 4u);
  EXPECT_EQ(ds.count(Split::train), 8u);
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.instances[i].index, i);
}

TEST(Generate, RejectsBadConfig) {
  GenConfig g = tiny(0.1, 0.1);
  g.n_identities = 0;
  try {
    generate(g);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_config);
  }
  g = tiny(-1.0, 0.1);
  EXPECT_THROW(generate(g), Error);
}

TEST(TrainViewTest, ExposesOnlyItsSplit) {
  GenConfig g = tiny(0.3, 0.1);
  g.images_per_id_per_cam = 3;
  const Dataset ds = generate(g);
  const TrainView train(ds, Split::train);
  ASSERT_EQ(train.size(), 4u);
  for (std::size_t i = 0; i < train.size(); ++i) {
    EXPECT_EQ(ds.instances[train.index(i)].split, Split::train);
    EXPECT_EQ(train.camera(i), ds.instances[train.index(i)].camera);
  }
  const auto truth = ground_truth(train);
  EXPECT_EQ(truth.size(), 4u);
}

TEST(Ingest, ThreeRows) {
  const auto dir = scratch("three");
  std::ofstream(dir / "f.csv") << "1,2,3,4\n0.5,0.25,-1,2e-3\n9,8,7,6\n";
  std::ofstream(dir / "l.csv") << "0,0,5\n1,1\n2,0,7\n";
  const Dataset ds = ingest(dir / "f.csv", dir / "l.csv");
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.d_in, 4u);
  EXPECT_EQ(ds.n_cam, 2);
  EXPECT_EQ(ds.instances[1].raw, (Vec{0.5, 0.25, -1, 0.002}));
  EXPECT_EQ(ds.instances[1].true_identity, kUnknownIdentity);
  EXPECT_EQ(ds.instances[2].true_identity, 7);
}

TEST(Ingest, WrongArityNamesRow) {
  const auto dir = scratch("arity");
  std::ofstream(dir / "f.csv") << "1,2,3,4\n1,2,3\n9,8,7,6\n";
  std::ofstream(dir / "l.csv") << "0,0\n1,1\n2,0\n";
  try {
    ingest(dir / "f.csv", dir / "l.csv");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse_error);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(Ingest, BadNumberAndIndex) {
  const auto dir = scratch("bad");
  std::ofstream(dir / "f.csv") << "1,2\n1,x\n";
  std::ofstream(dir / "l.csv") << "0,0\n1,0\n";
  EXPECT_THROW(ingest(dir / "f.csv", dir / "l.csv"), Error);
  std::ofstream(dir / "f2.csv") << "1,2\n1,3\n";
  std::ofstream(dir / "l2.csv") << "0,0\n5,0\n";
  EXPECT_THROW(ingest(dir / "f2.csv", dir / "l2.csv"), Error);
}

TEST(Ingest, ExportRoundTrip) {
  GenConfig g = tiny(0.7, 0.2, 3);
  g.images_per_id_per_cam = 3;
  const Dataset ds = generate(g);
  const auto dir = scratch("roundtrip");
  export_dataset(ds, dir, g.seed);
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  EXPECT_EQ(ingest_dir(dir), ds);
}
