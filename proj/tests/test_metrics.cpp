#include <doctest.h>

#include <cmath>

#include "ippsim/common.hpp"
#include "ippsim/metrics.hpp"

using namespace ippsim;

namespace {

ConfusionMatrix from_counts(int k, const std::vector<std::vector<uint64_t>>& counts) {
  ConfusionMatrix cm(k);
  for (int g = 0; g < k; ++g)
    for (int p = 0; p < k; ++p)
      for (uint64_t i = 0; i < counts[g][p]; ++i)
        cm.add(static_cast<uint8_t>(g + 1), static_cast<uint8_t>(p + 1));
  return cm;
}

}  // namespace

TEST_CASE("perfect prediction gives a diagonal matrix and perfect scores") {
  ConfusionMatrix cm(3);
  const std::vector<uint8_t> gt = {1, 2, 3, 2, 1};
  cm.accumulate(gt, gt);
  for (int g = 0; g < 3; ++g)
    for (int p = 0; p < 3; ++p)
      if (g != p) CHECK(cm.at(g, p) == 0);
  CHECK(miou(cm) == doctest::Approx(1.0));
  CHECK(accuracy(cm) == doctest::Approx(1.0));
}

TEST_CASE("fully ignored input leaves the matrix unchanged") {
  ConfusionMatrix cm(2);
  const std::vector<uint8_t> gt = {1, 2, 1};
  const std::vector<uint8_t> pred = {2, 1, 2};
  const std::vector<uint8_t> ignore = {1, 1, 1};
  cm.accumulate(gt, pred, ignore);
  CHECK(cm.total() == 0);
}

TEST_CASE("hand-counted 2-class 8-pixel case") {
  // Two errors among eight pixels.
  const std::vector<uint8_t> gt = {1, 1, 1, 1, 2, 2, 2, 2};
  const std::vector<uint8_t> pred = {1, 1, 1, 2, 2, 2, 2, 1};
  ConfusionMatrix cm(2);
  cm.accumulate(gt, pred);
  CHECK(cm.at(0, 1) + cm.at(1, 0) == 2);
  CHECK(cm.total() == 8);
}

TEST_CASE("worked confusion matrix [[3,1],[1,3]]") {
  const auto cm = from_counts(2, {{3, 1}, {1, 3}});
  const auto iou = per_class_iou(cm);
  CHECK(iou[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(iou[1] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(miou(cm) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(accuracy(cm) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("classes with an empty union are excluded from the mean") {
  // Class 3 never appears in gt or prediction.
  const auto cm = from_counts(3, {{4, 0, 0}, {0, 2, 0}, {0, 0, 0}});
  const auto iou = per_class_iou(cm);
  CHECK(std::isnan(iou[2]));
  CHECK(miou(cm) == doctest::Approx(1.0));
}

TEST_CASE("empty matrix is an error") {
  ConfusionMatrix cm(2);
  CHECK_THROWS_AS(miou(cm), std::invalid_argument);
  CHECK_THROWS_AS(accuracy(cm), std::invalid_argument);
  CHECK_THROWS_AS(per_class_iou(cm), std::invalid_argument);
}

TEST_CASE("metrics are invariant to consistent class relabeling") {
  Rng rng(123);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 2 + static_cast<int>(rng.uniform_int(4));
    std::vector<std::vector<uint64_t>> counts(k, std::vector<uint64_t>(k));
    for (auto& row : counts)
      for (auto& c : row) c = rng.uniform_int(20);
    counts[0][0] += 1;  // guarantee a non-empty matrix
    const auto cm = from_counts(k, counts);

    std::vector<int> perm(k);
    for (int i = 0; i < k; ++i) perm[i] = i;
    rng.shuffle(perm);
    std::vector<std::vector<uint64_t>> permuted(k, std::vector<uint64_t>(k));
    for (int g = 0; g < k; ++g)
      for (int p = 0; p < k; ++p) permuted[perm[g]][perm[p]] = counts[g][p];
    const auto cm2 = from_counts(k, permuted);

    CHECK(miou(cm) == doctest::Approx(miou(cm2)).epsilon(1e-12));
    CHECK(accuracy(cm) == doctest::Approx(accuracy(cm2)).epsilon(1e-12));
    CHECK(miou(cm) >= 0.0);
    CHECK(miou(cm) <= 1.0);
    CHECK(accuracy(cm) >= 0.0);
    CHECK(accuracy(cm) <= 1.0);
  }
}
