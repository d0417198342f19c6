#include "ippsim/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <stdexcept>

#include "ippsim/common.hpp"
#include "ippsim/world.hpp"

namespace ippsim {

std::vector<FrontierComponent> extract_frontiers(const VoxelClassField& field) {
  const int nx = field.nx, ny = field.ny;
  const size_t n = field.states.size();

  // Frontier membership: free voxel with a 6-neighbor in unknown space.
  std::vector<uint8_t> is_frontier(n, 0);
  static const int kFaceNbr[6][3] = {{1, 0, 0},  {-1, 0, 0}, {0, 1, 0},
                                     {0, -1, 0}, {0, 0, 1},  {0, 0, -1}};
  for (size_t v = 0; v < n; ++v) {
    if (field.states[v] != VoxelState::kFree) continue;
    const int x = static_cast<int>(v % nx);
    const int y = static_cast<int>((v / nx) % ny);
    const int z = static_cast<int>(v / (static_cast<size_t>(nx) * ny));
    for (const auto& d : kFaceNbr) {
      const GridIndex g{x + d[0], y + d[1], z + d[2]};
      if (field.in_grid(g) && field.states[field.index_of(g)] == VoxelState::kUnknown) {
        is_frontier[v] = 1;
        break;
      }
    }
  }

  // Group into maximal 26-connected components, discovered in scan order so
  // component ids are deterministic.
  std::vector<FrontierComponent> components;
  std::vector<uint8_t> visited(n, 0);
  std::vector<size_t> stack;
  for (size_t seed = 0; seed < n; ++seed) {
    if (!is_frontier[seed] || visited[seed]) continue;
    FrontierComponent comp;
    stack.assign(1, seed);
    visited[seed] = 1;
    while (!stack.empty()) {
      const size_t v = stack.back();
      stack.pop_back();
      comp.voxels.push_back(v);
      const int x = static_cast<int>(v % nx);
      const int y = static_cast<int>((v / nx) % ny);
      const int z = static_cast<int>(v / (static_cast<size_t>(nx) * ny));
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dx == 0 && dy == 0 && dz == 0) continue;
            const GridIndex g{x + dx, y + dy, z + dz};
            if (!field.in_grid(g)) continue;
            const size_t u = field.index_of(g);
            if (is_frontier[u] && !visited[u]) {
              visited[u] = 1;
              stack.push_back(u);
            }
          }
    }
    std::sort(comp.voxels.begin(), comp.voxels.end());
    components.push_back(std::move(comp));
  }
  return components;
}

std::vector<CandidatePose> sample_candidates(
    const std::vector<FrontierComponent>& frontiers, const VoxelClassField& field,
    const PlanState& state, const PlannerConfig& config) {
  std::vector<CandidatePose> out;
  if (state.budget_remaining <= 0.0) return out;
  const double d = config.spacing();
  if (!(d > 0.0)) throw std::invalid_argument("candidate spacing must be > 0");
  const double v = field.voxel_size;

  for (size_t ci = 0; ci < frontiers.size(); ++ci) {
    // Ground projection: unique (x, y) cells of the component's voxels.
    std::vector<std::pair<int, int>> cells;
    for (size_t vox : frontiers[ci].voxels) {
      const int x = static_cast<int>(vox % field.nx);
      const int y = static_cast<int>((vox / field.nx) % field.ny);
      cells.emplace_back(x, y);
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());

    // Walk the projection as a greedy nearest-neighbor chain from the
    // lexicographically smallest cell; gives a stable arc ordering without
    // assuming the frontier is a clean curve.
    std::vector<std::pair<double, double>> chain;
    {
      std::vector<uint8_t> used(cells.size(), 0);
      size_t cur = 0;
      used[0] = 1;
      chain.emplace_back((cells[0].first + 0.5) * v, (cells[0].second + 0.5) * v);
      for (size_t step = 1; step < cells.size(); ++step) {
        double best_d2 = 0.0;
        size_t best = cells.size();
        for (size_t i = 0; i < cells.size(); ++i) {
          if (used[i]) continue;
          const double dx = cells[i].first - cells[cur].first;
          const double dy = cells[i].second - cells[cur].second;
          const double d2 = dx * dx + dy * dy;
          if (best == cells.size() || d2 < best_d2) {
            best = i;
            best_d2 = d2;
          }
        }
        used[best] = 1;
        cur = best;
        chain.emplace_back((cells[best].first + 0.5) * v,
                           (cells[best].second + 0.5) * v);
      }
    }

    // Thin the chain so kept points are pairwise at least d apart.
    std::vector<std::pair<double, double>> kept;
    for (const auto& c : chain) {
      bool ok = true;
      for (const auto& k : kept) {
        const double dx = c.first - k.first, dy = c.second - k.second;
        if (dx * dx + dy * dy < d * d) {
          ok = false;
          break;
        }
      }
      if (ok) kept.push_back(c);
    }

    int arc = 0;
    for (const auto& k : kept) {
      CandidatePose cand;
      cand.pose = {k.first, k.second, config.altitude};
      cand.component = static_cast<int>(ci);
      cand.arc_index = arc++;
      cand.cost_to_reach = travel_cost(state.pose, cand.pose, config.speed);
      if (cand.cost_to_reach > state.budget_remaining) continue;
      // Re-sensing in place gains nothing; skip the degenerate candidate.
      if (cand.cost_to_reach == 0.0) continue;
      out.push_back(cand);
    }
  }
  return out;
}

double score_candidate(const MultiLayerMap& map, const CandidatePose& candidate,
                       const PlannerConfig& config) {
  if (config.score_width < 1 || config.score_height < 1)
    throw std::invalid_argument("scoring image must be at least 1x1");
  CameraModel lowres = config.camera;
  lowres.width = config.score_width;
  lowres.height = config.score_height;

  double total = 0.0;
  for (int m = 0; m < lowres.height; ++m) {
    for (int n = 0; n < lowres.width; ++n) {
      double gx, gy;
      pixel_ground_point(candidate.pose, lowres, m, n, &gx, &gy);
      const RayHit hit = map.cast_ray(candidate.pose, gx, gy);
      switch (hit.kind) {
        case RayHit::Kind::kFreeExit:
          break;
        case RayHit::Kind::kUnknown:
          total += config.unknown_prior;
          break;
        case RayHit::Kind::kSurface:
          total += map.uncertainty(hit.voxel) /
                   std::max<uint32_t>(1, map.train_count(hit.voxel));
          break;
      }
    }
  }
  return total;
}

std::optional<CandidatePose> plan_next_pose(const MultiLayerMap& map,
                                            const PlanState& state,
                                            const PlannerConfig& config,
                                            std::vector<CandidatePose>* all_candidates) {
  const VoxelClassField field = classify_voxels(map);
  const auto frontiers = extract_frontiers(field);
  std::vector<CandidatePose> candidates =
      sample_candidates(frontiers, field, state, config);
  for (auto& c : candidates) c.info_value = score_candidate(map, c, config);
  if (all_candidates) *all_candidates = candidates;
  if (candidates.empty()) return std::nullopt;

  size_t best = 0;
  for (size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].info_value > candidates[best].info_value ||
        (candidates[i].info_value == candidates[best].info_value &&
         candidates[i].cost_to_reach < candidates[best].cost_to_reach)) {
      best = i;
    }
  }
  return candidates[best];
}

std::optional<CandidatePose> plan_next_pose(const MultiLayerMap& map,
                                            const PlanState& state,
                                            const PlannerConfig& config) {
  return plan_next_pose(map, state, config, nullptr);
}

std::vector<Pose> coverage_path(double extent_x, double extent_y,
                                const CameraModel& camera, double budget,
                                double altitude, double speed) {
  if (!(speed > 0.0)) throw std::invalid_argument("coverage_path: speed must be > 0");
  const double fp = camera.footprint;
  const int cols = std::max(1, static_cast<int>(std::ceil(extent_x / fp)));
  const int rows = std::max(1, static_cast<int>(std::ceil(extent_y / fp)));

  // Tile centers, clamped so edge tiles stay inside the extent.
  auto center = [&](int i, double extent) {
    const double c = (i + 0.5) * fp;
    return std::min(c, extent - 0.5 * std::min(fp, extent));
  };

  std::vector<Pose> path;
  double cost = 0.0;
  for (int r = 0; r < rows; ++r) {
    for (int k = 0; k < cols; ++k) {
      const int c = (r % 2 == 0) ? k : cols - 1 - k;  // serpentine
      Pose p{center(c, extent_x), center(r, extent_y), altitude};
      if (!path.empty()) {
        const double leg = travel_cost(path.back(), p, speed);
        if (cost + leg > budget) return path;
        cost += leg;
      }
      path.push_back(p);
    }
  }
  return path;
}

PlannerTrace::PlannerTrace(const std::string& csv_path) : path_(csv_path) {
  rows_ = "mission,step,candidates,x,y,z,info_value,cost,budget_remaining\n";
}

void PlannerTrace::log(int mission, int step, size_t candidate_count,
                       const CandidatePose& chosen, double budget_remaining) {
  rows_ += std::to_string(mission) + "," + std::to_string(step) + "," +
           std::to_string(candidate_count) + "," + format_double(chosen.pose.x) +
           "," + format_double(chosen.pose.y) + "," + format_double(chosen.pose.z) +
           "," + format_double(chosen.info_value) + "," +
           format_double(chosen.cost_to_reach) + "," +
           format_double(budget_remaining) + "\n";
}

void PlannerTrace::flush() {
  if (path_.empty()) return;
  std::ofstream out(path_);
  if (!out) throw std::runtime_error("cannot write planner trace " + path_);
  out << rows_;
}

}  // namespace ippsim
