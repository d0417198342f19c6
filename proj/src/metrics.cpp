#include "ippsim/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "ippsim/common.hpp"

namespace ippsim {

ConfusionMatrix::ConfusionMatrix(int num_classes) : k_(num_classes) {
  if (num_classes < 1) throw std::invalid_argument("confusion matrix needs K >= 1");
  counts_.assign(static_cast<size_t>(k_) * k_, 0);
}

uint64_t ConfusionMatrix::total() const {
  uint64_t t = 0;
  for (uint64_t c : counts_) t += c;
  return t;
}

uint64_t ConfusionMatrix::trace() const {
  uint64_t t = 0;
  for (int i = 0; i < k_; ++i) t += at(i, i);
  return t;
}

void ConfusionMatrix::add(uint8_t gt_class, uint8_t pred_class) {
  if (gt_class < 1 || gt_class > k_ || pred_class < 1 || pred_class > k_)
    throw std::invalid_argument("confusion matrix class id outside 1..K");
  ++counts_[static_cast<size_t>(gt_class - 1) * k_ + (pred_class - 1)];
}

void ConfusionMatrix::accumulate(const std::vector<uint8_t>& gt,
                                 const std::vector<uint8_t>& pred,
                                 const std::vector<uint8_t>& ignore) {
  if (gt.size() != pred.size())
    throw std::invalid_argument("accumulate: size mismatch");
  if (!ignore.empty() && ignore.size() != gt.size())
    throw std::invalid_argument("accumulate: ignore mask size mismatch");
  for (size_t i = 0; i < gt.size(); ++i) {
    if (!ignore.empty() && ignore[i]) continue;
    add(gt[i], pred[i]);
  }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.k_ != k_) throw std::invalid_argument("merge: K mismatch");
  for (size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::vector<double> per_class_iou(const ConfusionMatrix& cm) {
  if (cm.total() == 0)
    throw std::invalid_argument("per_class_iou: empty confusion matrix");
  const int k = cm.num_classes();
  std::vector<double> iou(k, std::nan(""));
  for (int c = 0; c < k; ++c) {
    uint64_t row = 0, col = 0;
    for (int j = 0; j < k; ++j) {
      row += cm.at(c, j);
      col += cm.at(j, c);
    }
    const uint64_t inter = cm.at(c, c);
    const uint64_t uni = row + col - inter;
    if (uni > 0) iou[c] = static_cast<double>(inter) / static_cast<double>(uni);
  }
  return iou;
}

double miou(const ConfusionMatrix& cm) {
  const auto iou = per_class_iou(cm);
  double sum = 0.0;
  int n = 0;
  for (double v : iou) {
    if (std::isnan(v)) continue;  // empty-union classes are excluded
    sum += v;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("miou: no class has a non-empty union");
  return sum / n;
}

double accuracy(const ConfusionMatrix& cm) {
  const uint64_t t = cm.total();
  if (t == 0) throw std::invalid_argument("accuracy: empty confusion matrix");
  return static_cast<double>(cm.trace()) / static_cast<double>(t);
}

std::vector<Pose> evaluation_poses(const WorldModel& world, const CameraModel& camera,
                                   double altitude, uint64_t seed) {
  Rng rng(derive_seed(seed, "eval-poses"));
  const double fp = camera.footprint;
  const int cols = std::max(1, static_cast<int>(std::ceil(world.extent_x() / fp)));
  const int rows = std::max(1, static_cast<int>(std::ceil(world.extent_y() / fp)));
  // One seeded jitter for the whole grid keeps coverage even while moving the
  // poses off any planner-visited position.
  const double jx = rng.uniform(0.12, 0.38) * fp;
  const double jy = rng.uniform(0.12, 0.38) * fp;

  std::vector<Pose> poses;
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double x = c * fp + jx;
      double y = r * fp + jy;
      x = std::min(x, world.extent_x() - 1e-6);
      y = std::min(y, world.extent_y() - 1e-6);
      poses.push_back({x, y, altitude});
    }
  }
  return poses;
}

EvalResult evaluate_model(const WorldModel& world, const SurrogateModel& model,
                          const CameraModel& camera, double altitude, uint64_t seed) {
  CameraModel noise_free = camera;
  noise_free.noise_amp = 0.0;

  ConfusionMatrix cm(world.num_classes());
  for (const Pose& pose : evaluation_poses(world, camera, altitude, seed)) {
    const Frame frame = world.sense(pose, noise_free, derive_seed(seed, "eval-sense"));
    const PredictionTensor pred = model.predict(frame);
    const auto& gt = GroundTruthGate::labels(frame);
    std::vector<uint8_t> ignore(gt.size(), 0);
    for (int m = 0; m < frame.height; ++m)
      for (int n = 0; n < frame.width; ++n)
        if (!frame.has_return(m, n))
          ignore[static_cast<size_t>(m) * frame.width + n] = 1;
    cm.accumulate(gt, pred.ml_labels, ignore);
  }

  EvalResult res;
  res.miou = miou(cm);
  res.accuracy = accuracy(cm);
  res.class_iou = per_class_iou(cm);
  res.pixels = cm.total();
  return res;
}

}  // namespace ippsim
