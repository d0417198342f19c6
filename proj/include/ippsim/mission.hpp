#pragma once

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ippsim/labels.hpp"
#include "ippsim/map.hpp"
#include "ippsim/metrics.hpp"
#include "ippsim/model.hpp"
#include "ippsim/planner.hpp"
#include "ippsim/trainer.hpp"
#include "ippsim/world.hpp"

namespace ippsim {

enum class PlannerKind : uint8_t { kFrontier, kCoverage };
enum class HumanMode : uint8_t { kOurs, kRandom, kUncRand, kRandUnc, kRegImp, kDense };

struct MissionConfig {
  // World: loaded from a manifest when set, procedurally generated otherwise.
  std::string world_manifest;
  WorldGenParams world_gen;

  CameraModel camera{64, 64, 16.0, 0.05};
  double altitude = 30.0;
  double speed = 2.0;

  double budget = 1800.0;
  int missions = 10;
  double pseudo_spacing = 0.0;    // 0 -> footprint
  double candidate_spacing = 0.0; // 0 -> footprint / 2
  double voxel_size = 0.0;        // 0 -> world cell size

  PlannerKind planner = PlannerKind::kFrontier;
  double unknown_prior = 0.5;  // c_u
  int score_width = 32;
  int score_height = 32;

  int alpha = 1000;
  double beta = 5.0;
  int impurity_radius = 1;
  HumanMode human_select = HumanMode::kOurs;
  PseudoMode pseudo_select = PseudoMode::kOurs;

  ModelConfig model;  // num_classes is filled from the world
  TrainConfig train;
  int mc_samples = 20;

  std::vector<uint64_t> seeds{1};
  std::string run_root;  // empty -> $IPPSIM_RUN_ROOT or "runs"
  std::string run_name;  // empty -> config hash

  void validate() const;              // throws std::invalid_argument
  std::string snapshot() const;       // config.toml-style key=value dump
  uint64_t config_hash() const;       // seed-independent
  int effective_alpha() const {       // dense human labelling has no alpha
    return human_select == HumanMode::kDense ? camera.width * camera.height : alpha;
  }
};

struct MissionRecord {
  int mission = 0;  // 1-based
  int planned_frames = 0;
  int new_pseudo_frames = 0;
  size_t train_human_frames = 0;
  size_t train_pseudo_frames = 0;
  size_t new_human_pixels = 0;
  size_t cum_human_pixels = 0;
  size_t oracle_queries = 0;  // cumulative audit counter
  size_t human_fallbacks = 0;
  double budget_spent = 0.0;
  int train_epochs = 0;
  double train_best_val_miou = 0.0;
  double eval_miou = 0.0;
  double eval_accuracy = 0.0;
  std::vector<double> eval_class_iou;
};

struct CampaignRecord {
  uint64_t seed = 0;
  std::string run_dir;
  std::vector<MissionRecord> rows;

  const MissionRecord& final_row() const { return rows.back(); }
};

// Observer hooks for tests and tracing; all optional.
struct CampaignHooks {
  std::function<void(const MultiLayerMap&, const std::vector<CandidatePose>&,
                     const CandidatePose&)>
      on_plan;
};

// Poses on the open segment (a, b) at the given spacing, endpoints excluded.
std::vector<Pose> intermediate_poses(const Pose& a, const Pose& b, double spacing);

// One full campaign for one seed: `missions` iterations of
// plan/fly/capture/integrate, then label, train from the fixed initial
// checkpoint, rebuild, re-render pseudo labels, and evaluate. All artifacts
// land under the run directory unless it is empty ("" = in-memory run).
CampaignRecord run_campaign(const MissionConfig& config, uint64_t seed,
                            const std::string& run_dir,
                            const CampaignHooks* hooks = nullptr);

// Runs every configured seed, writing per-seed run dirs plus a
// mean/stddev-per-mission summary.csv. Returns the per-seed records.
std::vector<CampaignRecord> run_campaign_all_seeds(const MissionConfig& config);

std::string default_run_root();
std::string run_dir_for(const MissionConfig& config, uint64_t seed);

// Applies a key=value config snapshot (the format run dirs write) on top of
// the given config; run-local keys (seed/out/name) are skipped.
void apply_config_file(MissionConfig& config, const std::string& path);

// Cartesian product over config axes loaded from a JSON grid spec; each combo
// runs all seeds and the merged per-axis summary lands in the grid directory.
struct GridRun {
  std::string label;
  MissionConfig config;
  std::vector<CampaignRecord> records;
};
std::vector<GridRun> run_experiment_grid(const std::string& grid_spec_path);

void write_metrics_csv(const std::string& path, const std::vector<MissionRecord>& rows,
                       int num_classes);
void write_summary_csv(const std::string& path,
                       const std::vector<CampaignRecord>& records);

const char* planner_name(PlannerKind k);
const char* human_mode_name(HumanMode k);
const char* pseudo_mode_name(PseudoMode k);
PlannerKind planner_from_name(const std::string& s);
HumanMode human_mode_from_name(const std::string& s);
PseudoMode pseudo_mode_from_name(const std::string& s);

}  // namespace ippsim
