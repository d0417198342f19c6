#include "ippsim/mission.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "ippsim/common.hpp"

namespace fs = std::filesystem;

namespace ippsim {

std::vector<Pose> intermediate_poses(const Pose& a, const Pose& b, double spacing) {
  if (!(spacing > 0.0)) throw std::invalid_argument("intermediate spacing must be > 0");
  std::vector<Pose> out;
  const double d = distance(a, b);
  for (int i = 1; i * spacing < d; ++i) {
    const double t = i * spacing / d;
    out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y),
                   a.z + t * (b.z - a.z)});
  }
  return out;
}

void MissionConfig::validate() const {
  if (!(budget > 0.0)) throw std::invalid_argument("budget must be > 0");
  if (missions < 1) throw std::invalid_argument("missions must be >= 1");
  if (alpha < 1) throw std::invalid_argument("alpha must be >= 1");
  if (beta <= 0.0 || beta > 100.0) throw std::invalid_argument("beta must be in (0, 100]");
  if (impurity_radius < 1) throw std::invalid_argument("impurity radius must be >= 1");
  if (!camera.valid()) throw std::invalid_argument("invalid camera");
  if (!(speed > 0.0)) throw std::invalid_argument("speed must be > 0");
  if (!(altitude > 0.0)) throw std::invalid_argument("altitude must be > 0");
  if (mc_samples < 1) throw std::invalid_argument("mc_samples must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (unknown_prior < 0.0) throw std::invalid_argument("unknown prior must be >= 0");
  if (human_select != HumanMode::kDense) {
    const size_t cap = static_cast<size_t>(
        std::ceil(beta / 100.0 * camera.width * camera.height));
    if (static_cast<size_t>(alpha) > cap)
      throw std::invalid_argument(
          "alpha exceeds the beta-percent pixel pool at this resolution");
  }
}

std::string MissionConfig::snapshot() const {
  std::ostringstream out;
  out << "world = " << world_manifest << "\n";
  out << "gen-cols = " << world_gen.cols << "\n";
  out << "gen-rows = " << world_gen.rows << "\n";
  out << "gen-cell-size = " << format_double(world_gen.cell_size, 17) << "\n";
  out << "gen-classes = " << world_gen.num_classes << "\n";
  out << "gen-seed = " << world_gen.seed << "\n";
  out << "gen-blob-scale = " << format_double(world_gen.blob_scale, 17) << "\n";
  out << "gen-color-drift = " << format_double(world_gen.color_drift, 17) << "\n";
  out << "gen-imbalance = " << format_double(world_gen.class_imbalance, 17) << "\n";
  out << "gen-height-max = " << format_double(world_gen.height_max, 17) << "\n";
  out << "camera-px = " << camera.width << "\n";
  out << "footprint = " << format_double(camera.footprint, 17) << "\n";
  out << "noise-amp = " << format_double(camera.noise_amp, 17) << "\n";
  out << "altitude = " << format_double(altitude, 17) << "\n";
  out << "speed = " << format_double(speed, 17) << "\n";
  out << "budget = " << format_double(budget, 17) << "\n";
  out << "missions = " << missions << "\n";
  out << "pseudo-spacing = " << format_double(pseudo_spacing, 17) << "\n";
  out << "candidate-spacing = " << format_double(candidate_spacing, 17) << "\n";
  out << "voxel-size = " << format_double(voxel_size, 17) << "\n";
  out << "planner = " << planner_name(planner) << "\n";
  out << "cu = " << format_double(unknown_prior, 17) << "\n";
  out << "score-px = " << score_width << "\n";
  out << "alpha = " << alpha << "\n";
  out << "beta = " << format_double(beta, 17) << "\n";
  out << "radius = " << impurity_radius << "\n";
  out << "human-select = " << human_mode_name(human_select) << "\n";
  out << "pseudo-select = " << pseudo_mode_name(pseudo_select) << "\n";
  out << "patch-radius = " << model.patch_radius << "\n";
  out << "hidden1 = " << model.hidden1 << "\n";
  out << "hidden2 = " << model.hidden2 << "\n";
  out << "dropout = " << format_double(model.dropout_p, 17) << "\n";
  out << "mc-samples = " << mc_samples << "\n";
  out << "peak-lr = " << format_double(train.peak_lr, 17) << "\n";
  out << "momentum = " << format_double(train.momentum, 17) << "\n";
  out << "batch-size = " << train.batch_size << "\n";
  out << "max-epochs = " << train.max_epochs << "\n";
  out << "patience = " << train.patience << "\n";
  out << "min-epochs = " << train.min_epochs << "\n";
  out << "val-fraction = " << format_double(train.val_fraction, 17) << "\n";
  out << "weight-decay = " << format_double(train.weight_decay_override, 17) << "\n";
  return out.str();
}

uint64_t MissionConfig::config_hash() const { return hash_str(snapshot()); }

std::string default_run_root() {
  if (const char* env = std::getenv("IPPSIM_RUN_ROOT")) return env;
  return "runs";
}

std::string run_dir_for(const MissionConfig& config, uint64_t seed) {
  const std::string root = config.run_root.empty() ? default_run_root() : config.run_root;
  std::string name = config.run_name;
  if (name.empty()) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(config.config_hash()));
    name = buf;
  }
  return root + "/" + name + "-s" + std::to_string(seed);
}

namespace {

struct CapturedOutputs {
  PredictionTensor pred;
  UncertaintyImage unc;
};

// All mutable state of one campaign run.
struct CampaignState {
  const MissionConfig& cfg;
  const WorldModel& world;
  uint64_t seed;

  SurrogateModel initial_model;
  SurrogateModel model;
  MultiLayerMap map;
  std::deque<Frame> frames;  // stable addresses; capture order
  std::vector<const Frame*> planned_frames;
  std::vector<const Frame*> pseudo_frames;
  std::vector<SparseLabelImage> human_labels;   // parallel to planned_frames
  std::vector<SparseLabelImage> pseudo_labels;  // refreshed every mission
  Annotator annotator;
  Pose pose;
  uint64_t next_frame_id = 0;
  size_t coverage_resume = 0;
  std::vector<Pose> coverage_waypoints;

  CampaignState(const MissionConfig& c, const WorldModel& w, uint64_t s,
                const ModelConfig& mc)
      : cfg(c), world(w), seed(s), initial_model(mc), model(initial_model),
        map(MultiLayerMap::for_world(w, w.num_classes(), c.voxel_size)) {}

  uint64_t sense_seed(uint64_t frame_id) const {
    return derive_seed(seed, "sense", frame_id);
  }
  uint64_t mc_seed(uint64_t frame_id) const {
    return derive_seed(seed, "mc", frame_id);
  }

  // Sense, infer, and fuse one frame; returns its capture outputs so planned
  // frames can reuse them for pixel selection.
  const Frame& capture(const Pose& p, FrameKind kind, CapturedOutputs* outputs) {
    const uint64_t id = next_frame_id++;
    frames.push_back(world.sense(p, cfg.camera, sense_seed(id), id, kind));
    const Frame& frame = frames.back();
    auto [pred, unc] = model.mc_predict(frame, cfg.mc_samples, mc_seed(id));
    map.integrate_frame(frame, pred, unc);
    if (kind == FrameKind::kPlanned)
      planned_frames.push_back(&frame);
    else
      pseudo_frames.push_back(&frame);
    if (outputs) {
      outputs->pred = std::move(pred);
      outputs->unc = std::move(unc);
    }
    return frame;
  }

  std::vector<double> human_class_histogram() const {
    std::vector<double> hist(world.num_classes(), 0.0);
    double total = 0.0;
    for (const auto& labels : human_labels)
      for (const auto& e : labels.entries) {
        hist[e.cls - 1] += 1.0;
        total += 1.0;
      }
    if (total > 0.0)
      for (double& h : hist) h /= total;
    return hist;
  }
};

double spacing_or(double value, double fallback) {
  return value > 0.0 ? value : fallback;
}

}  // namespace

CampaignRecord run_campaign(const MissionConfig& config, uint64_t seed,
                            const std::string& run_dir, const CampaignHooks* hooks) {
  config.validate();

  std::unique_ptr<WorldModel> world_storage;
  if (config.world_manifest.empty())
    world_storage = std::make_unique<WorldModel>(WorldModel::generate(config.world_gen));
  else
    world_storage = std::make_unique<WorldModel>(WorldModel::load(config.world_manifest));
  const WorldModel& world = *world_storage;

  ModelConfig model_cfg = config.model;
  model_cfg.num_classes = world.num_classes();
  model_cfg.init_seed = derive_seed(seed, "model-init");

  CampaignState st(config, world, seed, model_cfg);
  st.pose = {0.5 * world.extent_x(), 0.5 * world.extent_y(), config.altitude};

  const bool persist = !run_dir.empty();
  if (persist) {
    fs::create_directories(run_dir);
    fs::create_directories(run_dir + "/labels");
    fs::create_directories(run_dir + "/checkpoints");
    fs::create_directories(run_dir + "/maps");
    std::ofstream cfg_out(run_dir + "/config.toml");
    cfg_out << config.snapshot();
    cfg_out << "seed = " << seed << "\n";
    st.initial_model.save(run_dir + "/checkpoints/initial.ckpt");
  }
  PlannerTrace trace(persist ? run_dir + "/planner_trace.csv" : "");

  PlannerConfig pcfg;
  pcfg.unknown_prior = config.unknown_prior;
  pcfg.score_width = config.score_width;
  pcfg.score_height = config.score_height;
  pcfg.candidate_spacing = config.candidate_spacing;
  pcfg.speed = config.speed;
  pcfg.altitude = config.altitude;
  pcfg.camera = config.camera;

  const double pseudo_spacing = spacing_or(config.pseudo_spacing, config.camera.footprint);
  const uint64_t eval_seed = derive_seed(config.world_gen.seed, "evaluation");

  if (config.planner == PlannerKind::kCoverage)
    st.coverage_waypoints = coverage_path(world.extent_x(), world.extent_y(),
                                          config.camera, config.budget,
                                          config.altitude, config.speed);

  CampaignRecord record;
  record.seed = seed;
  record.run_dir = run_dir;

  // Per-mission capture outputs of planned frames, reused for selection.
  std::map<uint64_t, CapturedOutputs> mission_outputs;

  for (int mission = 0; mission < config.missions; ++mission) {
    MissionRecord row;
    row.mission = mission + 1;
    double budget_remaining = config.budget;
    double spent = 0.0;
    const size_t planned_before = st.planned_frames.size();
    const size_t pseudo_before = st.pseudo_frames.size();
    mission_outputs.clear();

    // The first capture anchors the map; without it a fresh map has no free
    // space and therefore no frontier to plan towards.
    if (mission == 0) {
      CapturedOutputs out;
      const Frame& f = st.capture(st.pose, FrameKind::kPlanned, &out);
      mission_outputs.emplace(f.id, std::move(out));
    }

    int step = 0;
    if (config.planner == PlannerKind::kFrontier) {
      while (true) {
        PlanState ps;
        ps.pose = st.pose;
        ps.budget_remaining = budget_remaining;
        std::vector<CandidatePose> candidates;
        const auto next = plan_next_pose(st.map, ps, pcfg, &candidates);
        if (!next) break;
        if (hooks && hooks->on_plan) hooks->on_plan(st.map, candidates, *next);
        trace.log(mission + 1, step++, candidates.size(), *next,
                  budget_remaining - next->cost_to_reach);

        for (const Pose& p : intermediate_poses(st.pose, next->pose, pseudo_spacing))
          st.capture(p, FrameKind::kIntermediate, nullptr);
        budget_remaining -= next->cost_to_reach;
        spent += next->cost_to_reach;
        st.pose = next->pose;
        CapturedOutputs out;
        const Frame& f = st.capture(st.pose, FrameKind::kPlanned, &out);
        mission_outputs.emplace(f.id, std::move(out));
      }
    } else {
      while (st.coverage_resume < st.coverage_waypoints.size()) {
        const Pose& wp = st.coverage_waypoints[st.coverage_resume];
        const double leg = travel_cost(st.pose, wp, config.speed);
        if (leg > budget_remaining) break;
        CandidatePose chosen;
        chosen.pose = wp;
        chosen.cost_to_reach = leg;
        trace.log(mission + 1, step++, 1, chosen, budget_remaining - leg);
        for (const Pose& p : intermediate_poses(st.pose, wp, pseudo_spacing))
          st.capture(p, FrameKind::kIntermediate, nullptr);
        budget_remaining -= leg;
        spent += leg;
        st.pose = wp;
        CapturedOutputs out;
        const Frame& f = st.capture(st.pose, FrameKind::kPlanned, &out);
        mission_outputs.emplace(f.id, std::move(out));
        ++st.coverage_resume;
      }
    }

    if (spent > config.budget + 1e-9)
      throw std::runtime_error("budget constraint violated; planner bug");

    // --- labelling ---
    const size_t queries_before = st.annotator.queries();
    SelectionConfig sel;
    sel.alpha = config.alpha;
    sel.beta = config.beta;
    sel.radius = config.impurity_radius;

    for (size_t i = planned_before; i < st.planned_frames.size(); ++i) {
      const Frame& f = *st.planned_frames[i];
      const CapturedOutputs& cap = mission_outputs.at(f.id);
      std::vector<PixelCoord> pixels;
      sel.seed = derive_seed(seed, "select-human", f.id);
      if (config.human_select == HumanMode::kDense) {
        pixels.reserve(static_cast<size_t>(f.width) * f.height);
        for (int m = 0; m < f.height; ++m)
          for (int n = 0; n < f.width; ++n) pixels.push_back({m, n});
      } else if (config.human_select == HumanMode::kOurs) {
        auto res = select_human_pixels_ours(cap.pred, sel);
        row.human_fallbacks += res.fallback ? 1 : 0;
        pixels = std::move(res.pixels);
      } else {
        HumanSelection kind;
        switch (config.human_select) {
          case HumanMode::kRandom: kind = HumanSelection::kRandom; break;
          case HumanMode::kUncRand: kind = HumanSelection::kUncRand; break;
          case HumanMode::kRandUnc: kind = HumanSelection::kRandUnc; break;
          default: kind = HumanSelection::kRegImpGreedy; break;
        }
        auto res = select_human_pixels_baseline(kind, cap.pred, cap.unc, sel);
        row.human_fallbacks += res.fallback ? 1 : 0;
        pixels = std::move(res.pixels);
      }
      SparseLabelImage labels = st.annotator.annotate(f, pixels);
      row.new_human_pixels += labels.entries.size();
      if (persist)
        save_sparse_labels(run_dir + "/labels/human_" + std::to_string(f.id) + ".txt",
                           labels);
      st.human_labels.push_back(std::move(labels));
    }

    // Oracle audit: every planned frame costs exactly the selected pixel count.
    const size_t expected =
        (st.planned_frames.size() - planned_before) *
        static_cast<size_t>(config.effective_alpha());
    if (st.annotator.queries() - queries_before != expected)
      throw std::runtime_error("oracle query audit failed");

    for (size_t i = planned_before; i < st.planned_frames.size(); ++i)
      st.map.increment_train_counts(*st.planned_frames[i]);

    // --- training (restart from the fixed initial checkpoint) ---
    st.model = st.initial_model;
    TrainingSet ts;
    for (size_t i = 0; i < st.planned_frames.size(); ++i)
      ts.human.push_back({st.planned_frames[i], &st.human_labels[i]});
    for (size_t i = 0; i < st.pseudo_labels.size(); ++i) {
      if (st.pseudo_labels[i].entries.empty()) continue;  // all-miss renders
      ts.pseudo.push_back({st.pseudo_frames[i], &st.pseudo_labels[i]});
    }
    TrainConfig tc = config.train;
    tc.seed = derive_seed(seed, "train", mission);
    const TrainReport train_report = train(st.model, ts, config.effective_alpha(), tc);
    if (persist) {
      train_report.save_csv(run_dir + "/train_report_" + std::to_string(mission + 1) +
                            ".csv");
      st.model.save(run_dir + "/checkpoints/mission_" + std::to_string(mission + 1) +
                    ".ckpt");
    }

    // --- rebuild, then refresh pseudo labels from the new map ---
    std::vector<const Frame*> all_frames;
    all_frames.reserve(st.frames.size());
    for (const Frame& f : st.frames) all_frames.push_back(&f);
    st.map = st.map.rebuild(all_frames, st.model, config.mc_samples,
                            [&](const Frame& f) { return st.mc_seed(f.id); });

    SelectionConfig psel = sel;
    psel.seed = derive_seed(seed, "pseudo-select", mission);
    st.pseudo_labels = rerender_all_pseudo(st.pseudo_frames, st.map,
                                           config.pseudo_select,
                                           st.human_class_histogram(), psel);

    // --- evaluation ---
    const EvalResult eval =
        evaluate_model(world, st.model, config.camera, config.altitude, eval_seed);

    row.planned_frames = static_cast<int>(st.planned_frames.size() - planned_before);
    row.new_pseudo_frames = static_cast<int>(st.pseudo_frames.size() - pseudo_before);
    row.train_human_frames = ts.human.size();
    row.train_pseudo_frames = ts.pseudo.size();
    row.cum_human_pixels = (record.rows.empty() ? 0 : record.rows.back().cum_human_pixels) +
                           row.new_human_pixels;
    row.oracle_queries = st.annotator.queries();
    row.budget_spent = spent;
    row.train_epochs = train_report.epochs_run;
    row.train_best_val_miou = train_report.best_val_miou;
    row.eval_miou = eval.miou;
    row.eval_accuracy = eval.accuracy;
    row.eval_class_iou = eval.class_iou;
    record.rows.push_back(std::move(row));
  }

  if (persist) {
    write_metrics_csv(run_dir + "/metrics.csv", record.rows, world.num_classes());
    trace.flush();
    st.map.save(run_dir + "/maps/final.map");
    std::ofstream frames_out(run_dir + "/frames.csv");
    frames_out << "frame_id,kind,x,y,z\n";
    for (const Frame& f : st.frames)
      frames_out << f.id << ","
                 << (f.kind == FrameKind::kPlanned ? "planned" : "intermediate")
                 << "," << format_double(f.pose.x, 17) << ","
                 << format_double(f.pose.y, 17) << ","
                 << format_double(f.pose.z, 17) << "\n";
    for (size_t i = 0; i < st.pseudo_labels.size(); ++i) {
      if (st.pseudo_labels[i].entries.empty()) continue;
      save_sparse_labels(run_dir + "/labels/pseudo_" +
                             std::to_string(st.pseudo_labels[i].frame_id) + ".txt",
                         st.pseudo_labels[i]);
    }
  }
  return record;
}

void write_metrics_csv(const std::string& path, const std::vector<MissionRecord>& rows,
                       int num_classes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics " + path);
  out << "mission,planned_frames,new_pseudo_frames,train_human_frames,"
         "train_pseudo_frames,new_human_pixels,cum_human_pixels,oracle_queries,"
         "human_fallbacks,budget_spent,train_epochs,train_best_val_miou,miou,"
         "accuracy";
  for (int k = 1; k <= num_classes; ++k) out << ",iou_" << k;
  out << "\n";
  for (const auto& r : rows) {
    out << r.mission << "," << r.planned_frames << "," << r.new_pseudo_frames << ","
        << r.train_human_frames << "," << r.train_pseudo_frames << ","
        << r.new_human_pixels << "," << r.cum_human_pixels << ","
        << r.oracle_queries << "," << r.human_fallbacks << ","
        << format_double(r.budget_spent) << "," << r.train_epochs << ","
        << format_double(r.train_best_val_miou) << "," << format_double(r.eval_miou)
        << "," << format_double(r.eval_accuracy);
    for (double v : r.eval_class_iou) out << "," << format_double(v);
    out << "\n";
  }
}

void write_summary_csv(const std::string& path,
                       const std::vector<CampaignRecord>& records) {
  if (records.empty()) return;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write summary " + path);
  out << "mission,seeds,mean_cum_human_pixels,mean_miou,std_miou,mean_accuracy,"
         "std_accuracy\n";
  const size_t missions = records.front().rows.size();
  for (size_t m = 0; m < missions; ++m) {
    double sum_miou = 0.0, sum_acc = 0.0, sum_px = 0.0;
    for (const auto& r : records) {
      sum_miou += r.rows[m].eval_miou;
      sum_acc += r.rows[m].eval_accuracy;
      sum_px += static_cast<double>(r.rows[m].cum_human_pixels);
    }
    const double n = static_cast<double>(records.size());
    const double mean_miou = sum_miou / n, mean_acc = sum_acc / n;
    double var_miou = 0.0, var_acc = 0.0;
    for (const auto& r : records) {
      var_miou += (r.rows[m].eval_miou - mean_miou) * (r.rows[m].eval_miou - mean_miou);
      var_acc += (r.rows[m].eval_accuracy - mean_acc) * (r.rows[m].eval_accuracy - mean_acc);
    }
    out << (m + 1) << "," << records.size() << "," << format_double(sum_px / n) << ","
        << format_double(mean_miou) << "," << format_double(std::sqrt(var_miou / n))
        << "," << format_double(mean_acc) << ","
        << format_double(std::sqrt(var_acc / n)) << "\n";
  }
}

std::vector<CampaignRecord> run_campaign_all_seeds(const MissionConfig& config) {
  config.validate();
  std::vector<CampaignRecord> records;
  for (uint64_t seed : config.seeds)
    records.push_back(run_campaign(config, seed, run_dir_for(config, seed)));
  if (records.size() > 1) {
    const std::string root =
        fs::path(records.front().run_dir).parent_path().string();
    std::string name = config.run_name;
    if (name.empty()) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "%016llx",
                    static_cast<unsigned long long>(config.config_hash()));
      name = buf;
    }
    write_summary_csv(root + "/" + name + "-summary.csv", records);
  }
  return records;
}

namespace {

void apply_grid_override(MissionConfig& cfg, const std::string& key,
                         const nlohmann::json& value) {
  if (key == "alpha") cfg.alpha = value;
  else if (key == "beta") cfg.beta = value;
  else if (key == "radius") cfg.impurity_radius = value;
  else if (key == "budget") cfg.budget = value;
  else if (key == "missions") cfg.missions = value;
  else if (key == "cu") cfg.unknown_prior = value;
  else if (key == "mc-samples") cfg.mc_samples = value;
  else if (key == "planner") cfg.planner = planner_from_name(value);
  else if (key == "human-select") cfg.human_select = human_mode_from_name(value);
  else if (key == "pseudo-select") cfg.pseudo_select = pseudo_mode_from_name(value);
  else if (key == "camera-px") { cfg.camera.width = value; cfg.camera.height = value; }
  else if (key == "footprint") cfg.camera.footprint = value;
  else if (key == "noise-amp") cfg.camera.noise_amp = value;
  else if (key == "altitude") cfg.altitude = value;
  else if (key == "speed") cfg.speed = value;
  else if (key == "world") cfg.world_manifest = value;
  else if (key == "gen-cols") cfg.world_gen.cols = value;
  else if (key == "gen-rows") cfg.world_gen.rows = value;
  else if (key == "gen-classes") cfg.world_gen.num_classes = value;
  else if (key == "gen-seed") cfg.world_gen.seed = value;
  else if (key == "gen-imbalance") cfg.world_gen.class_imbalance = value;
  else if (key == "gen-blob-scale") cfg.world_gen.blob_scale = value;
  else if (key == "gen-color-drift") cfg.world_gen.color_drift = value;
  else if (key == "gen-height-max") cfg.world_gen.height_max = value;
  else if (key == "gen-cell-size") cfg.world_gen.cell_size = value;
  else if (key == "pseudo-spacing") cfg.pseudo_spacing = value;
  else if (key == "candidate-spacing") cfg.candidate_spacing = value;
  else if (key == "voxel-size") cfg.voxel_size = value;
  else if (key == "score-px") { cfg.score_width = value; cfg.score_height = value; }
  else if (key == "hidden1") cfg.model.hidden1 = value;
  else if (key == "hidden2") cfg.model.hidden2 = value;
  else if (key == "momentum") cfg.train.momentum = value;
  else if (key == "max-epochs") cfg.train.max_epochs = value;
  else if (key == "peak-lr") cfg.train.peak_lr = value;
  else if (key == "patience") cfg.train.patience = value;
  else if (key == "min-epochs") cfg.train.min_epochs = value;
  else if (key == "weight-decay") cfg.train.weight_decay_override = value;
  else if (key == "val-fraction") cfg.train.val_fraction = value;
  else if (key == "batch-size") cfg.train.batch_size = value;
  else if (key == "dropout") cfg.model.dropout_p = value;
  else if (key == "hidden") { cfg.model.hidden1 = value; cfg.model.hidden2 = value; }
  else if (key == "patch-radius") cfg.model.patch_radius = value;
  else throw std::invalid_argument("unknown grid axis/override: " + key);
}

}  // namespace

void apply_config_file(MissionConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file " + path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos || line[0] == '#' || line[0] == '[') continue;
    auto trim = [](std::string v) {
      const auto b = v.find_first_not_of(" \t");
      const auto e = v.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : v.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) continue;
    if (key == "seed" || key == "out" || key == "name") continue;  // run-local
    nlohmann::json v;
    try {
      size_t used = 0;
      const long long as_int = std::stoll(value, &used);
      if (used == value.size()) {
        v = as_int;
      } else {
        const double as_double = std::stod(value, &used);
        v = (used == value.size()) ? nlohmann::json(as_double)
                                   : nlohmann::json(value);
      }
    } catch (const std::exception&) {
      v = value;
    }
    apply_grid_override(cfg, key, v);
  }
}

std::vector<GridRun> run_experiment_grid(const std::string& grid_spec_path) {
  std::ifstream in(grid_spec_path);
  if (!in) throw std::invalid_argument("cannot read grid spec " + grid_spec_path);
  nlohmann::json spec = nlohmann::json::parse(in);

  MissionConfig base;
  if (spec.contains("base"))
    for (const auto& [key, value] : spec["base"].items())
      apply_grid_override(base, key, value);
  if (spec.contains("seeds")) {
    base.seeds.clear();
    for (const auto& s : spec["seeds"]) base.seeds.push_back(s.get<uint64_t>());
  }
  const std::string grid_name = spec.value("name", std::string("grid"));
  base.run_root = (base.run_root.empty() ? default_run_root() : base.run_root) +
                  "/" + grid_name;

  // Cartesian product over the axes, in declaration order.
  std::vector<std::pair<std::string, std::vector<nlohmann::json>>> axes;
  if (spec.contains("axes"))
    for (const auto& [key, values] : spec["axes"].items()) {
      std::vector<nlohmann::json> vals(values.begin(), values.end());
      axes.emplace_back(key, std::move(vals));
    }

  std::vector<GridRun> runs;
  std::vector<size_t> at(axes.size(), 0);
  while (true) {
    MissionConfig cfg = base;
    std::string label;
    bool skip = false;
    for (size_t i = 0; i < axes.size(); ++i) {
      const auto& [key, values] = axes[i];
      // Dense labelling has no alpha; such combos are dropped, not run.
      if (key == "alpha" && cfg.human_select == HumanMode::kDense) skip = true;
      apply_grid_override(cfg, key, values[at[i]]);
      if (cfg.human_select == HumanMode::kDense &&
          std::any_of(axes.begin(), axes.end(),
                      [](const auto& a) { return a.first == "alpha"; }))
        skip = true;
      std::string v = values[at[i]].is_string()
                          ? values[at[i]].get<std::string>()
                          : values[at[i]].dump();
      label += (label.empty() ? "" : "_") + key + "=" + v;
    }
    if (!skip) {
      cfg.run_name = label.empty() ? "single" : label;
      GridRun run;
      run.label = cfg.run_name;
      run.config = cfg;
      run.records = run_campaign_all_seeds(cfg);
      runs.push_back(std::move(run));
    }

    size_t axis = 0;
    for (; axis < axes.size(); ++axis) {
      if (++at[axis] < axes[axis].second.size()) break;
      at[axis] = 0;
    }
    if (axes.empty() || axis == axes.size()) break;
  }

  // Merged per-axis summary: one row per run and mission.
  std::ofstream out(base.run_root + "/grid_summary.csv");
  out << "run,mission,mean_cum_human_pixels,mean_miou,std_miou,mean_accuracy,"
         "std_accuracy\n";
  for (const auto& run : runs) {
    const size_t missions = run.records.front().rows.size();
    for (size_t m = 0; m < missions; ++m) {
      double sum_miou = 0.0, sum_acc = 0.0, sum_px = 0.0;
      for (const auto& r : run.records) {
        sum_miou += r.rows[m].eval_miou;
        sum_acc += r.rows[m].eval_accuracy;
        sum_px += static_cast<double>(r.rows[m].cum_human_pixels);
      }
      const double n = static_cast<double>(run.records.size());
      const double mean_miou = sum_miou / n, mean_acc = sum_acc / n;
      double var_miou = 0.0, var_acc = 0.0;
      for (const auto& r : run.records) {
        var_miou += (r.rows[m].eval_miou - mean_miou) * (r.rows[m].eval_miou - mean_miou);
        var_acc += (r.rows[m].eval_accuracy - mean_acc) * (r.rows[m].eval_accuracy - mean_acc);
      }
      out << run.label << "," << (m + 1) << "," << format_double(sum_px / n) << ","
          << format_double(mean_miou) << "," << format_double(std::sqrt(var_miou / n))
          << "," << format_double(mean_acc) << ","
          << format_double(std::sqrt(var_acc / n)) << "\n";
    }
  }
  return runs;
}

const char* planner_name(PlannerKind k) {
  return k == PlannerKind::kFrontier ? "frontier" : "coverage";
}
const char* human_mode_name(HumanMode k) {
  switch (k) {
    case HumanMode::kOurs: return "ours";
    case HumanMode::kRandom: return "random";
    case HumanMode::kUncRand: return "unc-rand";
    case HumanMode::kRandUnc: return "rand-unc";
    case HumanMode::kRegImp: return "reg-imp";
    case HumanMode::kDense: return "dense";
  }
  return "?";
}
const char* pseudo_mode_name(PseudoMode k) {
  switch (k) {
    case PseudoMode::kOurs: return "ours";
    case PseudoMode::kRandom: return "random";
    case PseudoMode::kDistAlign: return "dist-align";
    case PseudoMode::kDense: return "dense";
    case PseudoMode::kNone: return "none";
  }
  return "?";
}
PlannerKind planner_from_name(const std::string& s) {
  if (s == "frontier") return PlannerKind::kFrontier;
  if (s == "coverage") return PlannerKind::kCoverage;
  throw std::invalid_argument("unknown planner: " + s);
}
HumanMode human_mode_from_name(const std::string& s) {
  if (s == "ours") return HumanMode::kOurs;
  if (s == "random") return HumanMode::kRandom;
  if (s == "unc-rand") return HumanMode::kUncRand;
  if (s == "rand-unc") return HumanMode::kRandUnc;
  if (s == "reg-imp") return HumanMode::kRegImp;
  if (s == "dense") return HumanMode::kDense;
  throw std::invalid_argument("unknown human selection: " + s);
}
PseudoMode pseudo_mode_from_name(const std::string& s) {
  if (s == "ours") return PseudoMode::kOurs;
  if (s == "random") return PseudoMode::kRandom;
  if (s == "dist-align") return PseudoMode::kDistAlign;
  if (s == "dense") return PseudoMode::kDense;
  if (s == "none") return PseudoMode::kNone;
  throw std::invalid_argument("unknown pseudo selection: " + s);
}

}  // namespace ippsim
