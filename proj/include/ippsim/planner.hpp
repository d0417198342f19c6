#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ippsim/map.hpp"

namespace ippsim {

struct CandidatePose {
  Pose pose;
  double info_value = 0.0;
  double cost_to_reach = 0.0;  // seconds
  int component = 0;           // frontier component id (deterministic order)
  int arc_index = 0;           // position along the component
};

struct PlanState {
  Pose pose;
  double budget_remaining = 0.0;  // seconds
  std::vector<Pose> executed_path;
  double executed_cost = 0.0;
};

struct PlannerConfig {
  double unknown_prior = 0.5;      // per-pixel value of rays ending in unknown space
  int score_width = 32;            // low-res scoring image
  int score_height = 32;
  double candidate_spacing = 0.0;  // meters; 0 -> footprint / 2
  double speed = 2.0;              // m/s
  double altitude = 30.0;
  CameraModel camera;              // footprint geometry for scoring rays

  double spacing() const {
    return candidate_spacing > 0.0 ? candidate_spacing : 0.5 * camera.footprint;
  }
};

// A frontier: free voxels (26-connected component) with at least one
// 6-neighbor in unknown space. Voxels are kept sorted by linear index.
struct FrontierComponent {
  std::vector<size_t> voxels;
};

std::vector<FrontierComponent> extract_frontiers(const VoxelClassField& field);

// Poses along each frontier's ground projection, spaced at least `spacing`
// apart, lifted to flight altitude, with unreachable candidates dropped.
// Deterministic order: component id, then arc position.
std::vector<CandidatePose> sample_candidates(
    const std::vector<FrontierComponent>& frontiers, const VoxelClassField& field,
    const PlanState& state, const PlannerConfig& config);

// Information value of a candidate view: per low-res pixel, 0 for rays that
// exit through free space, the unknown prior for rays reflected by unknown
// voxels, and uncertainty normalized by training occurrences for surface
// reflections.
double score_candidate(const MultiLayerMap& map, const CandidatePose& candidate,
                       const PlannerConfig& config);

// Greedy next-best view: argmax of score over sampled candidates; ties go to
// the cheaper candidate, then to sampling order. nullopt = mission end.
std::optional<CandidatePose> plan_next_pose(const MultiLayerMap& map,
                                            const PlanState& state,
                                            const PlannerConfig& config);

// Same as plan_next_pose but also exposes the scored candidate list (used by
// trace logging and oracle checks).
std::optional<CandidatePose> plan_next_pose(const MultiLayerMap& map,
                                            const PlanState& state,
                                            const PlannerConfig& config,
                                            std::vector<CandidatePose>* all_candidates);

// Boustrophedon sweep at flight altitude with row spacing equal to the camera
// footprint, truncated so the path cost stays within the budget.
std::vector<Pose> coverage_path(double extent_x, double extent_y,
                                const CameraModel& camera, double budget,
                                double altitude, double speed);

// One row per planning decision.
class PlannerTrace {
 public:
  explicit PlannerTrace(const std::string& csv_path);
  void log(int mission, int step, size_t candidate_count,
           const CandidatePose& chosen, double budget_remaining);
  void flush();

 private:
  std::string path_;
  std::string rows_;
};

}  // namespace ippsim
