#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ippsim/common.hpp"
#include "ippsim/map.hpp"
#include "ippsim/metrics.hpp"
#include "ippsim/mission.hpp"

namespace fs = std::filesystem;
using namespace ippsim;

namespace {

void add_config_flags(CLI::App* cmd, MissionConfig* cfg, std::string* planner,
                      std::string* human, std::string* pseudo) {
  cmd->add_option("--world", cfg->world_manifest, "world manifest to load");
  cmd->add_option("--gen-cols", cfg->world_gen.cols, "procedural world columns");
  cmd->add_option("--gen-rows", cfg->world_gen.rows, "procedural world rows");
  cmd->add_option("--gen-classes", cfg->world_gen.num_classes, "procedural class count");
  cmd->add_option("--gen-seed", cfg->world_gen.seed, "procedural world seed");
  cmd->add_option("--gen-blob-scale", cfg->world_gen.blob_scale, "class blob scale (cells)");
  cmd->add_option("--gen-color-drift", cfg->world_gen.color_drift, "appearance drift amplitude");
  cmd->add_option("--gen-imbalance", cfg->world_gen.class_imbalance, "class area imbalance");
  cmd->add_option("--gen-height-max", cfg->world_gen.height_max, "max terrain height (m)");
  cmd->add_option("--camera-px", cfg->camera.width, "camera resolution (square)")
      ->each([cfg](const std::string& v) { cfg->camera.height = std::stoi(v); });
  cmd->add_option("--footprint", cfg->camera.footprint, "ground footprint side (m)");
  cmd->add_option("--noise-amp", cfg->camera.noise_amp, "sensor feature noise amplitude");
  cmd->add_option("--altitude", cfg->altitude, "flight altitude (m)");
  cmd->add_option("--speed", cfg->speed, "flight speed (m/s)");
  cmd->add_option("--budget", cfg->budget, "mission budget (s)");
  cmd->add_option("--missions", cfg->missions, "mission count");
  cmd->add_option("--pseudo-spacing", cfg->pseudo_spacing, "pseudo-frame spacing (m)");
  cmd->add_option("--candidate-spacing", cfg->candidate_spacing, "candidate spacing (m)");
  cmd->add_option("--voxel-size", cfg->voxel_size, "map voxel size (m)");
  cmd->add_option("--planner", *planner, "frontier|coverage");
  cmd->add_option("--cu", cfg->unknown_prior, "uniform uncertainty prior c_u");
  cmd->add_option("--score-px", cfg->score_width, "candidate scoring resolution")
      ->each([cfg](const std::string& v) { cfg->score_height = std::stoi(v); });
  cmd->add_option("--alpha", cfg->alpha, "labelled pixels per image");
  cmd->add_option("--beta", cfg->beta, "selection pool percent bound");
  cmd->add_option("--radius", cfg->impurity_radius, "impurity neighborhood radius");
  cmd->add_option("--human-select", *human, "ours|random|unc-rand|rand-unc|reg-imp|dense");
  cmd->add_option("--pseudo-select", *pseudo, "ours|random|dist-align|dense|none");
  cmd->add_option("--patch-radius", cfg->model.patch_radius, "model receptive half-width");
  cmd->add_option("--hidden1", cfg->model.hidden1, "first hidden layer width");
  cmd->add_option("--hidden2", cfg->model.hidden2, "second hidden layer width");
  cmd->add_option("--dropout", cfg->model.dropout_p, "dropout probability");
  cmd->add_option("--mc-samples", cfg->mc_samples, "Monte-Carlo forward passes");
  cmd->add_option("--peak-lr", cfg->train.peak_lr, "one-cycle peak learning rate");
  cmd->add_option("--batch-size", cfg->train.batch_size, "training batch size (frames)");
  cmd->add_option("--max-epochs", cfg->train.max_epochs, "training epoch cap");
  cmd->add_option("--patience", cfg->train.patience, "early-stop patience (epochs)");
  cmd->add_option("--min-epochs", cfg->train.min_epochs, "epochs before early stop may fire");
  cmd->add_option("--val-fraction", cfg->train.val_fraction, "validation pixel fraction");
  cmd->add_option("--weight-decay", cfg->train.weight_decay_override,
                  "weight decay; negative uses the (1-p)/2N rule");
  cmd->add_option("--seeds", cfg->seeds, "campaign seeds");
  cmd->add_option("--out", cfg->run_root, "run directory root");
  cmd->add_option("--name", cfg->run_name, "run name (default: config hash)");
  cmd->add_option("--config", "apply a config snapshot before other flags")
      ->type_name("FILE");
}

void resolve_names(MissionConfig* cfg, const std::string& planner,
                   const std::string& human, const std::string& pseudo) {
  if (!planner.empty()) cfg->planner = planner_from_name(planner);
  if (!human.empty()) cfg->human_select = human_mode_from_name(human);
  if (!pseudo.empty()) cfg->pseudo_select = pseudo_mode_from_name(pseudo);
}

// Minimal reader for the key=value config snapshots written into run dirs.
std::map<std::string, std::string> read_snapshot(const std::string& path) {
  std::map<std::string, std::string> kv;
  std::ifstream in(path);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

int export_plots(const std::vector<std::string>& run_dirs, const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out) {
    std::cerr << "cannot write " << out_path << "\n";
    return 2;
  }
  out << "run,seed,alpha,human_select,pseudo_select,planner,mission,"
         "cum_human_pixels,miou,accuracy\n";
  for (const auto& dir : run_dirs) {
    const auto cfg = read_snapshot(dir + "/config.toml");
    std::ifstream metrics(dir + "/metrics.csv");
    if (!metrics) {
      std::cerr << "skipping " << dir << ": no metrics.csv\n";
      continue;
    }
    std::string header;
    std::getline(metrics, header);
    std::vector<std::string> cols;
    {
      std::istringstream hs(header);
      std::string c;
      while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    auto col_of = [&](const std::string& name) {
      for (size_t i = 0; i < cols.size(); ++i)
        if (cols[i] == name) return static_cast<int>(i);
      return -1;
    };
    const int c_mission = col_of("mission"), c_px = col_of("cum_human_pixels");
    const int c_miou = col_of("miou"), c_acc = col_of("accuracy");
    std::string line;
    while (std::getline(metrics, line)) {
      std::vector<std::string> vals;
      std::istringstream ls(line);
      std::string v;
      while (std::getline(ls, v, ',')) vals.push_back(v);
      out << fs::path(dir).filename().string() << ","
          << (cfg.count("seed") ? cfg.at("seed") : "") << ","
          << (cfg.count("alpha") ? cfg.at("alpha") : "") << ","
          << (cfg.count("human-select") ? cfg.at("human-select") : "") << ","
          << (cfg.count("pseudo-select") ? cfg.at("pseudo-select") : "") << ","
          << (cfg.count("planner") ? cfg.at("planner") : "") << ","
          << vals[c_mission] << "," << vals[c_px] << "," << vals[c_miou] << ","
          << vals[c_acc] << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ippsim: informative path planning simulator for semi-supervised "
               "active segmentation learning"};
  app.require_subcommand(1);

  MissionConfig cfg;
  // A config snapshot seeds the defaults; explicit flags still win because
  // CLI11 writes over the fields afterwards.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        apply_config_file(cfg, argv[i + 1]);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
      }
    }
  }
  std::string planner_name_s, human_name_s, pseudo_name_s;

  auto* run_cmd = app.add_subcommand("run", "run one campaign (all seeds)");
  add_config_flags(run_cmd, &cfg, &planner_name_s, &human_name_s, &pseudo_name_s);

  auto* grid_cmd = app.add_subcommand("grid", "run an experiment grid from a JSON spec");
  std::string grid_spec;
  grid_cmd->add_option("spec", grid_spec, "grid spec JSON")->required();

  auto* gen_cmd = app.add_subcommand("gen-world", "generate a procedural world");
  WorldGenParams gen;
  std::string gen_out = "world";
  gen_cmd->add_option("--cols", gen.cols, "columns");
  gen_cmd->add_option("--rows", gen.rows, "rows");
  gen_cmd->add_option("--classes", gen.num_classes, "class count");
  gen_cmd->add_option("--seed", gen.seed, "generation seed");
  gen_cmd->add_option("--cell-size", gen.cell_size, "cell size (m)");
  gen_cmd->add_option("--blob-scale", gen.blob_scale, "class blob scale (cells)");
  gen_cmd->add_option("--color-drift", gen.color_drift, "appearance drift amplitude");
  gen_cmd->add_option("--imbalance", gen.class_imbalance, "class area imbalance");
  gen_cmd->add_option("--height-max", gen.height_max, "max terrain height (m)");
  gen_cmd->add_option("--out", gen_out, "output directory");

  auto* eval_cmd = app.add_subcommand("eval", "re-evaluate a checkpoint on a world");
  std::string eval_ckpt, eval_world;
  CameraModel eval_camera{64, 64, 16.0, 0.05};
  double eval_altitude = 30.0;
  uint64_t eval_seed = 7;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "model checkpoint")->required();
  eval_cmd->add_option("--world", eval_world, "world manifest")->required();
  eval_cmd->add_option("--camera-px", eval_camera.width, "camera resolution")
      ->each([&](const std::string& v) { eval_camera.height = std::stoi(v); });
  eval_cmd->add_option("--footprint", eval_camera.footprint, "footprint side (m)");
  eval_cmd->add_option("--altitude", eval_altitude, "flight altitude (m)");
  eval_cmd->add_option("--eval-seed", eval_seed, "evaluation grid seed");

  auto* slices_cmd = app.add_subcommand("export-map",
                                        "dump a saved map's layers as PGM slices");
  std::string map_path, slices_out = "map_slices";
  slices_cmd->add_option("map", map_path, "map file (maps/final.map)")->required();
  slices_cmd->add_option("--out", slices_out, "output directory");

  auto* plots_cmd = app.add_subcommand("export-plots",
                                       "merge run metrics into one plot-ready CSV");
  std::vector<std::string> plot_dirs;
  std::string plots_out = "plots.csv";
  plots_cmd->add_option("dirs", plot_dirs, "run directories")->required();
  plots_cmd->add_option("--out", plots_out, "output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (run_cmd->parsed()) {
      resolve_names(&cfg, planner_name_s, human_name_s, pseudo_name_s);
      cfg.validate();
      const auto records = run_campaign_all_seeds(cfg);
      for (const auto& r : records) {
        std::printf("seed %llu -> %s (final mIoU %.4f, accuracy %.4f)\n",
                    static_cast<unsigned long long>(r.seed), r.run_dir.c_str(),
                    r.final_row().eval_miou, r.final_row().eval_accuracy);
      }
    } else if (grid_cmd->parsed()) {
      const auto runs = run_experiment_grid(grid_spec);
      std::printf("grid complete: %zu runs\n", runs.size());
    } else if (gen_cmd->parsed()) {
      const WorldModel world = WorldModel::generate(gen);
      world.save(gen_out);
      std::printf("world written to %s (%dx%d cells, %d classes)\n", gen_out.c_str(),
                  world.cols(), world.rows(), world.num_classes());
    } else if (eval_cmd->parsed()) {
      const WorldModel world = WorldModel::load(eval_world);
      const SurrogateModel model = SurrogateModel::load(eval_ckpt);
      const EvalResult res =
          evaluate_model(world, model, eval_camera, eval_altitude, eval_seed);
      std::printf("mIoU %.6f accuracy %.6f over %llu pixels\n", res.miou,
                  res.accuracy, static_cast<unsigned long long>(res.pixels));
      for (size_t k = 0; k < res.class_iou.size(); ++k)
        std::printf("  class %zu IoU %.6f\n", k + 1, res.class_iou[k]);
    } else if (slices_cmd->parsed()) {
      const MultiLayerMap map = MultiLayerMap::load(map_path);
      map.export_slices(slices_out);
      std::printf("wrote %dx%dx%d map slices to %s\n", map.nx(), map.ny(),
                  map.nz(), slices_out.c_str());
    } else if (plots_cmd->parsed()) {
      return export_plots(plot_dirs, plots_out);
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
