#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ippsim/geometry.hpp"
#include "ippsim/types.hpp"

namespace ippsim {

constexpr float kNoReturnDepth = -1.0f;  // sentinel for rays leaving the world
constexpr int kFeatureChannels = 3;

enum class FrameKind : uint8_t { kPlanned, kIntermediate };

// One simulated nadir RGB-D observation. Ground-truth labels are private:
// they may be read only through Annotator (the human-labeller oracle) and
// GroundTruthGate (evaluation and test harnesses). Mapping, planning, model,
// and label-selection code must not touch them.
class Frame {
 public:
  Frame() = default;

  uint64_t id = 0;
  FrameKind kind = FrameKind::kPlanned;
  Pose pose;
  int width = 0;
  int height = 0;
  double footprint = 0.0;       // ground footprint side length at capture
  std::vector<float> features;  // w*h*F, [m][n][c], values in [0, 1]
  std::vector<float> depth;     // w*h vertical depth in meters, or kNoReturnDepth

  // Capture geometry, noise-free; enough to recompute per-pixel rays.
  CameraModel camera_geometry() const {
    CameraModel cam;
    cam.width = width;
    cam.height = height;
    cam.footprint = footprint;
    cam.noise_amp = 0.0;
    return cam;
  }

  float depth_at(int m, int n) const { return depth[static_cast<size_t>(m) * width + n]; }
  const float* features_at(int m, int n) const {
    return &features[(static_cast<size_t>(m) * width + n) * kFeatureChannels];
  }
  bool has_return(int m, int n) const { return depth_at(m, n) > 0.0f; }

 private:
  std::vector<uint8_t> gt_labels_;  // w*h, 1..K

  friend class WorldModel;
  friend class Annotator;
  friend class GroundTruthGate;
};

// The only sanctioned back doors to a frame's hidden ground truth: evaluation
// and oracle-style test checks. Keep out of planner/model/selection code.
class GroundTruthGate {
 public:
  static const std::vector<uint8_t>& labels(const Frame& f) { return f.gt_labels_; }
};

struct WorldGenParams {
  int cols = 96;
  int rows = 96;
  double cell_size = 1.0;
  int num_classes = 5;
  uint64_t seed = 7;
  double blob_scale = 12.0;    // cells; spatial scale of the class blobs
  double color_drift = 0.15;   // amplitude of low-frequency appearance drift
  double class_imbalance = 0.0;  // > 0 makes higher class ids rarer
  double height_max = 0.0;     // meters; 0 = flat terrain
  double height_scale = 24.0;  // cells; spatial scale of the terrain field
};

// Ground-truth environment: class raster, terrain heights, and a per-cell
// appearance field the sensor samples. Read-only after construction.
class WorldModel {
 public:
  static WorldModel generate(const WorldGenParams& params);
  // Loads manifest + rasters written by save(). Features are re-synthesized
  // deterministically from the manifest's palette, seed, and drift.
  static WorldModel load(const std::string& manifest_path);
  // Direct ingestion of class ids (1..K) and optional heights, row-major.
  static WorldModel from_rasters(std::vector<uint8_t> classes,
                                 std::vector<float> heights, int cols, int rows,
                                 int num_classes, double cell_size,
                                 uint64_t feature_seed = 1,
                                 double color_drift = 0.0);
  void save(const std::string& dir) const;

  int cols() const { return cols_; }
  int rows() const { return rows_; }
  int num_classes() const { return num_classes_; }
  double cell_size() const { return cell_size_; }
  double extent_x() const { return cols_ * cell_size_; }
  double extent_y() const { return rows_ * cell_size_; }
  double max_height() const { return max_height_; }

  bool contains(double x, double y) const {
    return x >= 0.0 && x < extent_x() && y >= 0.0 && y < extent_y();
  }

  uint8_t class_at_cell(int i, int j) const {  // i = column, j = row
    return classes_[static_cast<size_t>(j) * cols_ + i];
  }
  float height_at_cell(int i, int j) const {
    return heights_[static_cast<size_t>(j) * cols_ + i];
  }
  const float* features_at_cell(int i, int j) const {
    return &features_[(static_cast<size_t>(j) * cols_ + i) * kFeatureChannels];
  }
  const std::array<double, 3>& class_color(int k) const { return colors_[k - 1]; }

  // Simulates one nadir RGB-D capture. Pure function of (world, pose, camera,
  // seed). Pixels whose rays leave the world extent get kNoReturnDepth.
  // Throws std::domain_error if the pose is outside the world extent.
  Frame sense(const Pose& pose, const CameraModel& camera, uint64_t noise_seed,
              uint64_t frame_id = 0, FrameKind kind = FrameKind::kPlanned) const;

 private:
  WorldModel() = default;
  void synthesize_features();

  int cols_ = 0, rows_ = 0;
  int num_classes_ = 0;
  double cell_size_ = 1.0;
  float max_height_ = 0.0f;
  uint64_t feature_seed_ = 0;
  double color_drift_ = 0.15;
  std::vector<uint8_t> classes_;
  std::vector<float> heights_;
  std::vector<float> features_;
  std::vector<std::array<double, 3>> colors_;
};

// Human-annotator oracle. Counts every labelled pixel so campaigns can audit
// the total labelling effort.
class Annotator {
 public:
  // Labels the requested pixels with ground truth. Duplicates are collapsed;
  // out-of-bounds pixels throw std::invalid_argument.
  SparseLabelImage annotate(const Frame& frame, const std::vector<PixelCoord>& pixels);

  uint64_t queries() const { return queries_; }
  void reset() { queries_ = 0; }

 private:
  uint64_t queries_ = 0;
};

// Travel time between poses at constant speed (straight-line flight).
double travel_cost(const Pose& a, const Pose& b, double speed);

}  // namespace ippsim
