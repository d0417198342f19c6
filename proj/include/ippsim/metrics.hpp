#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ippsim/model.hpp"
#include "ippsim/types.hpp"
#include "ippsim/world.hpp"

namespace ippsim {

// K x K counts, rows = ground truth, cols = prediction. Void pixels are
// excluded via the ignore mask.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return k_; }
  uint64_t at(int gt, int pred) const { return counts_[static_cast<size_t>(gt) * k_ + pred]; }
  uint64_t total() const;
  uint64_t trace() const;

  void add(uint8_t gt_class, uint8_t pred_class);  // 1..K each
  // Per-pixel accumulation; `ignore` marks pixels to skip (may be empty).
  void accumulate(const std::vector<uint8_t>& gt, const std::vector<uint8_t>& pred,
                  const std::vector<uint8_t>& ignore = {});
  void merge(const ConfusionMatrix& other);

 private:
  int k_;
  std::vector<uint64_t> counts_;
};

// IoU per class; classes with an empty union get NaN and are excluded from
// the mean. Throws std::invalid_argument on an empty matrix.
std::vector<double> per_class_iou(const ConfusionMatrix& cm);
double miou(const ConfusionMatrix& cm);
double accuracy(const ConfusionMatrix& cm);

struct EvalResult {
  double miou = 0.0;
  double accuracy = 0.0;
  std::vector<double> class_iou;
  uint64_t pixels = 0;
};

// Fixed, seeded grid of held-out poses covering the world; sub-footprint
// jitter keeps them disjoint from planned poses.
std::vector<Pose> evaluation_poses(const WorldModel& world, const CameraModel& camera,
                                   double altitude, uint64_t seed);

// Noise-free renders at the evaluation poses scored against ground truth.
EvalResult evaluate_model(const WorldModel& world, const SurrogateModel& model,
                          const CameraModel& camera, double altitude, uint64_t seed);

}  // namespace ippsim
