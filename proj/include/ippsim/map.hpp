#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ippsim/geometry.hpp"
#include "ippsim/model.hpp"
#include "ippsim/types.hpp"
#include "ippsim/world.hpp"

namespace ippsim {

struct MapParams {
  double p_hit = 0.7;
  double p_miss = 0.4;
  double log_odds_min = -2.0;
  double log_odds_max = 3.5;
  double semantic_floor = 0.01;  // measurement probs clamped to [floor, 1-floor]
  double occupied_threshold = 0.65;
  double free_threshold = 0.35;
};

enum class VoxelState : uint8_t { kUnknown = 0, kFree = 1, kOccupied = 2 };

struct SemanticRender {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  std::vector<double> probs;      // class-major, normalized on hit pixels
  std::vector<uint8_t> hit_mask;  // 1 where a surface voxel reflected the ray
  std::vector<uint8_t> ml_labels; // argmax class on hits, void elsewhere
};

struct RayHit {
  enum class Kind : uint8_t { kFreeExit, kUnknown, kSurface };
  Kind kind = Kind::kFreeExit;
  size_t voxel = 0;  // valid for kUnknown / kSurface
};

// Four-layer probabilistic voxel map: occupancy log-odds, per-class semantic
// log-odds, running-mean model uncertainty, and human-training occurrence
// counts. Single writer; renders and classification are read-only.
class MultiLayerMap {
 public:
  MultiLayerMap(int nx, int ny, int nz, double voxel_size, int num_classes,
                const MapParams& params = {});

  // Grid sized for a world: one voxel per cell footprint, height covering the
  // terrain plus one voxel of headroom.
  static MultiLayerMap for_world(const WorldModel& world, int num_classes,
                                 double voxel_size = 0.0,
                                 const MapParams& params = {});

  int nx() const { return nx_; }
  int ny() const { return ny_; }
  int nz() const { return nz_; }
  size_t num_voxels() const { return static_cast<size_t>(nx_) * ny_ * nz_; }
  double voxel_size() const { return voxel_; }
  int num_classes() const { return num_classes_; }
  const MapParams& params() const { return params_; }

  size_t index_of(const GridIndex& g) const {
    return (static_cast<size_t>(g.z) * ny_ + g.y) * nx_ + g.x;
  }
  GridIndex grid_of(size_t v) const {
    const int x = static_cast<int>(v % nx_);
    const int y = static_cast<int>((v / nx_) % ny_);
    const int z = static_cast<int>(v / (static_cast<size_t>(nx_) * ny_));
    return {x, y, z};
  }
  bool in_grid(const GridIndex& g) const {
    return g.x >= 0 && g.x < nx_ && g.y >= 0 && g.y < ny_ && g.z >= 0 && g.z < nz_;
  }

  // --- voxel-level updates (also the oracle-test entry points) ---
  void apply_occupancy_hit(size_t v);
  void apply_occupancy_miss(size_t v);
  void apply_semantic_observation(size_t v, const double* class_probs, double unc);

  // --- per-voxel reads ---
  double occupancy_log_odds(size_t v) const { return occ_lo_[v]; }
  double occupancy_prob(size_t v) const { return 1.0 / (1.0 + std::exp(-occ_lo_[v])); }
  uint32_t observation_count(size_t v) const { return obs_count_[v]; }
  VoxelState state(size_t v) const;
  // Normalized per-class probabilities from the semantic layers.
  void semantic_probs(size_t v, double* out) const;
  double uncertainty(size_t v) const {  // 1.0 where never observed
    return unc_count_[v] ? unc_sum_[v] / unc_count_[v] : 1.0;
  }
  uint32_t uncertainty_count(size_t v) const { return unc_count_[v]; }
  double uncertainty_sum(size_t v) const { return unc_sum_[v]; }
  uint32_t train_count(size_t v) const { return train_count_[v]; }

  // --- frame integration ---
  // Casts one ray per valid-depth pixel: traversed voxels get miss updates,
  // the endpoint voxel gets a hit plus the pixel's semantic probabilities and
  // uncertainty. Rays whose endpoint leaves the grid are truncated at the
  // boundary with no endpoint update.
  void integrate_frame(const Frame& frame, const PredictionTensor& pred,
                       const UncertaintyImage& unc);

  // Semantic/uncertainty layers only; used by rebuild().
  void integrate_semantics(const Frame& frame, const PredictionTensor& pred,
                           const UncertaintyImage& unc);

  // Endpoint voxels of a human-labelled frame, counted once per frame.
  void increment_train_counts(const Frame& frame);

  // Endpoint voxel of pixel (m, n), or nullopt when outside the grid or the
  // pixel has no return.
  std::optional<size_t> endpoint_voxel(const Frame& frame, int m, int n) const;

  // --- rendering ---
  // Casts a ray from `origin` towards the pixel's nominal ground point. Free
  // voxels are traversable; the first unknown or occupied voxel reflects.
  RayHit cast_ray(const Pose& origin, double gx, double gy) const;
  SemanticRender render_semantics(const Pose& pose, const CameraModel& camera) const;
  UncertaintyImage render_uncertainty(const Pose& pose, const CameraModel& camera) const;

  // Fresh semantic and uncertainty layers from re-integrating every stored
  // frame (original order) with predictions from `model`; occupancy and
  // train counts are carried over unchanged. `mc_seed_of` must reproduce the
  // per-frame seeds used during incremental integration.
  MultiLayerMap rebuild(const std::vector<const Frame*>& frames,
                        const SurrogateModel& model, int mc_samples,
                        const std::function<uint64_t(const Frame&)>& mc_seed_of) const;

  void save(const std::string& path) const;
  static MultiLayerMap load(const std::string& path);

  // Per-layer horizontal slices as PGM images, for inspection.
  void export_slices(const std::string& dir) const;

 private:
  int nx_, ny_, nz_;
  double voxel_;
  int num_classes_;
  MapParams params_;
  double l_hit_, l_miss_;

  std::vector<double> occ_lo_;
  std::vector<uint32_t> obs_count_;
  std::vector<double> sem_lo_;  // voxel-major: [v * K + k]
  std::vector<double> unc_sum_;
  std::vector<uint32_t> unc_count_;
  std::vector<uint32_t> train_count_;
};

// Per-voxel free/unknown/occupied classification (disjoint, covering).
// Throws std::invalid_argument if free_threshold >= occupied_threshold.
struct VoxelClassField {
  int nx = 0, ny = 0, nz = 0;
  double voxel_size = 0.0;
  std::vector<VoxelState> states;

  VoxelState at(size_t v) const { return states[v]; }
  size_t index_of(const GridIndex& g) const {
    return (static_cast<size_t>(g.z) * ny + g.y) * nx + g.x;
  }
  bool in_grid(const GridIndex& g) const {
    return g.x >= 0 && g.x < nx && g.y >= 0 && g.y < ny && g.z >= 0 && g.z < nz;
  }
  size_t count(VoxelState s) const;
};

VoxelClassField classify_voxels(const MultiLayerMap& map);

double logit(double p);

}  // namespace ippsim
