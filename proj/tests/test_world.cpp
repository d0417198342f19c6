#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "ippsim/common.hpp"
#include "ippsim/world.hpp"

using namespace ippsim;

namespace {

WorldModel flat_world(int cols, int rows, int k, uint64_t seed = 3) {
  WorldGenParams p;
  p.cols = cols;
  p.rows = rows;
  p.num_classes = k;
  p.seed = seed;
  return WorldModel::generate(p);
}

CameraModel camera(int px, double footprint, double noise) {
  CameraModel c;
  c.width = px;
  c.height = px;
  c.footprint = footprint;
  c.noise_amp = noise;
  return c;
}

}  // namespace

TEST_CASE("flat world: every depth equals the flight altitude") {
  const auto world = flat_world(32, 32, 3);
  const auto frame = world.sense({16.0, 16.0, 30.0}, camera(16, 8.0, 0.0), 1);
  for (int m = 0; m < frame.height; ++m)
    for (int n = 0; n < frame.width; ++n)
      CHECK(frame.depth_at(m, n) == doctest::Approx(30.0));
}

TEST_CASE("zero noise amplitude reproduces the feature field exactly") {
  const auto world = flat_world(16, 16, 2);
  const auto frame = world.sense({8.0, 8.0, 30.0}, camera(16, 16.0, 0.0), 42);
  for (int m = 0; m < frame.height; ++m)
    for (int n = 0; n < frame.width; ++n) {
      double gx, gy;
      pixel_ground_point(frame.pose, frame.camera_geometry(), m, n, &gx, &gy);
      const int i = static_cast<int>(gx / world.cell_size());
      const int j = static_cast<int>(gy / world.cell_size());
      const float* expected = world.features_at_cell(i, j);
      const float* got = frame.features_at(m, n);
      for (int c = 0; c < kFeatureChannels; ++c) CHECK(got[c] == expected[c]);
    }
}

TEST_CASE("single-cell world labels every pixel with its class") {
  const auto world = WorldModel::from_rasters({3}, {}, 1, 1, 3, 4.0);
  const auto frame = world.sense({2.0, 2.0, 30.0}, camera(4, 4.0, 0.0), 1);
  for (uint8_t c : GroundTruthGate::labels(frame)) CHECK(c == 3);
}

TEST_CASE("annotate: empty query yields an all-void label image") {
  const auto world = flat_world(8, 8, 3);
  const auto frame = world.sense({4.0, 4.0, 30.0}, camera(8, 4.0, 0.0), 1);
  Annotator oracle;
  const auto labels = oracle.annotate(frame, {});
  CHECK(labels.entries.empty());
  for (uint8_t c : labels.to_dense()) CHECK(c == kVoidClass);
  CHECK(oracle.queries() == 0);
}

TEST_CASE("annotate: querying every pixel copies the ground truth") {
  const auto world = flat_world(8, 8, 3);
  const auto frame = world.sense({4.0, 4.0, 30.0}, camera(8, 4.0, 0.0), 1);
  std::vector<PixelCoord> all;
  for (int m = 0; m < frame.height; ++m)
    for (int n = 0; n < frame.width; ++n) all.push_back({m, n});
  Annotator oracle;
  const auto labels = oracle.annotate(frame, all);
  CHECK(labels.to_dense() == GroundTruthGate::labels(frame));
  CHECK(oracle.queries() == all.size());
}

TEST_CASE("annotate: three pixels match ground truth, duplicates collapse") {
  const auto world = flat_world(8, 8, 4);
  const auto frame = world.sense({4.0, 4.0, 30.0}, camera(8, 4.0, 0.0), 9);
  Annotator oracle;
  const auto labels =
      oracle.annotate(frame, {{0, 0}, {3, 5}, {7, 7}, {3, 5}});
  CHECK(labels.entries.size() == 3);
  const auto& gt = GroundTruthGate::labels(frame);
  for (const auto& e : labels.entries)
    CHECK(e.cls == gt[static_cast<size_t>(e.pixel.m) * frame.width + e.pixel.n]);
  CHECK(oracle.queries() == 3);
}

TEST_CASE("annotate: out-of-bounds pixel throws") {
  const auto world = flat_world(8, 8, 2);
  const auto frame = world.sense({4.0, 4.0, 30.0}, camera(8, 4.0, 0.0), 1);
  Annotator oracle;
  CHECK_THROWS_AS(oracle.annotate(frame, {{8, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(oracle.annotate(frame, {{0, -1}}), std::invalid_argument);
}

TEST_CASE("travel cost basics and symmetry") {
  CHECK(travel_cost({1, 2, 3}, {1, 2, 3}, 2.0) == doctest::Approx(0.0));
  CHECK(travel_cost({0, 0, 30}, {30, 0, 30}, 2.0) == doctest::Approx(15.0));
  CHECK_THROWS_AS(travel_cost({0, 0, 0}, {1, 0, 0}, 0.0), std::invalid_argument);

  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    const Pose a{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(10, 50)};
    const Pose b{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(10, 50)};
    const Pose c{rng.uniform(0, 100), rng.uniform(0, 100), rng.uniform(10, 50)};
    const double ab = travel_cost(a, b, 1.7), ba = travel_cost(b, a, 1.7);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
    CHECK(travel_cost(a, c, 1.7) <= ab + travel_cost(b, c, 1.7) + 1e-9);
  }
}

TEST_CASE("sense is a pure function of pose, world, and seed") {
  const auto world = flat_world(16, 16, 3);
  const auto cam = camera(12, 8.0, 0.05);
  const auto a = world.sense({8.0, 8.0, 30.0}, cam, 77);
  const auto b = world.sense({8.0, 8.0, 30.0}, cam, 77);
  CHECK(a.features == b.features);
  CHECK(a.depth == b.depth);
  const auto c = world.sense({8.0, 8.0, 30.0}, cam, 78);
  CHECK(a.features != c.features);
}

TEST_CASE("pose outside the extent is a domain error") {
  const auto world = flat_world(16, 16, 2);
  CHECK_THROWS_AS(world.sense({-1.0, 8.0, 30.0}, camera(8, 4.0, 0.0), 1),
                  std::domain_error);
  CHECK_THROWS_AS(world.sense({8.0, 16.0, 30.0}, camera(8, 4.0, 0.0), 1),
                  std::domain_error);
}

TEST_CASE("pixels whose rays leave the world get the no-return sentinel") {
  const auto world = flat_world(8, 8, 2);
  // Footprint pokes past the world edge from a corner-ish pose.
  const auto frame = world.sense({1.0, 1.0, 30.0}, camera(8, 8.0, 0.0), 1);
  CHECK_FALSE(frame.has_return(0, 0));
  CHECK(frame.has_return(7, 7));
}

TEST_CASE("terrain heights shorten the depth") {
  std::vector<float> heights(16, 0.0f);
  heights[5] = 2.5f;  // cell (1, 1) of a 4x4 world
  const auto world =
      WorldModel::from_rasters(std::vector<uint8_t>(16, 1), heights, 4, 4, 1, 1.0);
  const auto frame = world.sense({2.0, 2.0, 30.0}, camera(4, 4.0, 0.0), 1);
  CHECK(frame.depth_at(1, 1) == doctest::Approx(27.5));
  CHECK(frame.depth_at(0, 0) == doctest::Approx(30.0));
}

TEST_CASE("world save/load round trip preserves classes, heights, features") {
  WorldGenParams p;
  p.cols = 24;
  p.rows = 18;
  p.num_classes = 5;
  p.seed = 11;
  p.height_max = 3.0;
  const auto world = WorldModel::generate(p);
  const std::string dir = std::filesystem::temp_directory_path() / "ippsim_world_rt";
  world.save(dir);
  const auto loaded = WorldModel::load(dir + "/manifest.txt");

  CHECK(loaded.cols() == world.cols());
  CHECK(loaded.rows() == world.rows());
  CHECK(loaded.num_classes() == world.num_classes());
  for (int j = 0; j < world.rows(); ++j)
    for (int i = 0; i < world.cols(); ++i) {
      CHECK(loaded.class_at_cell(i, j) == world.class_at_cell(i, j));
      CHECK(loaded.height_at_cell(i, j) ==
            doctest::Approx(world.height_at_cell(i, j)).epsilon(1e-3));
      const float* a = world.features_at_cell(i, j);
      const float* b = loaded.features_at_cell(i, j);
      for (int c = 0; c < kFeatureChannels; ++c) CHECK(a[c] == b[c]);
    }
}
