#include "ippsim/map.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ippsim {

double logit(double p) { return std::log(p / (1.0 - p)); }

MultiLayerMap::MultiLayerMap(int nx, int ny, int nz, double voxel_size,
                             int num_classes, const MapParams& params)
    : nx_(nx), ny_(ny), nz_(nz), voxel_(voxel_size), num_classes_(num_classes),
      params_(params) {
  if (nx < 1 || ny < 1 || nz < 1) throw std::invalid_argument("map dims must be >= 1");
  if (!(voxel_size > 0.0)) throw std::invalid_argument("voxel size must be > 0");
  if (num_classes < 1) throw std::invalid_argument("map needs num_classes >= 1");
  l_hit_ = logit(params.p_hit);
  l_miss_ = logit(params.p_miss);
  const size_t n = num_voxels();
  occ_lo_.assign(n, 0.0);
  obs_count_.assign(n, 0);
  sem_lo_.assign(n * num_classes, 0.0);
  unc_sum_.assign(n, 0.0);
  unc_count_.assign(n, 0);
  train_count_.assign(n, 0);
}

MultiLayerMap MultiLayerMap::for_world(const WorldModel& world, int num_classes,
                                       double voxel_size, const MapParams& params) {
  const double v = voxel_size > 0.0 ? voxel_size : world.cell_size();
  const int nx = static_cast<int>(std::ceil(world.extent_x() / v));
  const int ny = static_cast<int>(std::ceil(world.extent_y() / v));
  const int nz = static_cast<int>(std::floor(world.max_height() / v)) + 2;
  return MultiLayerMap(nx, ny, nz, v, num_classes, params);
}

void MultiLayerMap::apply_occupancy_hit(size_t v) {
  occ_lo_[v] = std::clamp(occ_lo_[v] + l_hit_, params_.log_odds_min,
                          params_.log_odds_max);
  ++obs_count_[v];
}

void MultiLayerMap::apply_occupancy_miss(size_t v) {
  occ_lo_[v] = std::clamp(occ_lo_[v] + l_miss_, params_.log_odds_min,
                          params_.log_odds_max);
  ++obs_count_[v];
}

void MultiLayerMap::apply_semantic_observation(size_t v, const double* class_probs,
                                               double unc) {
  double* lo = &sem_lo_[v * num_classes_];
  for (int k = 0; k < num_classes_; ++k) {
    const double p = std::clamp(class_probs[k], params_.semantic_floor,
                                1.0 - params_.semantic_floor);
    lo[k] += logit(p);
  }
  unc_sum_[v] += unc;
  ++unc_count_[v];
}

VoxelState MultiLayerMap::state(size_t v) const {
  if (obs_count_[v] == 0) return VoxelState::kUnknown;
  const double p = occupancy_prob(v);
  if (p >= params_.occupied_threshold) return VoxelState::kOccupied;
  if (p <= params_.free_threshold) return VoxelState::kFree;
  return VoxelState::kUnknown;
}

void MultiLayerMap::semantic_probs(size_t v, double* out) const {
  const double* lo = &sem_lo_[v * num_classes_];
  double sum = 0.0;
  for (int k = 0; k < num_classes_; ++k) {
    out[k] = 1.0 / (1.0 + std::exp(-lo[k]));
    sum += out[k];
  }
  for (int k = 0; k < num_classes_; ++k) out[k] /= sum;
}

std::optional<size_t> MultiLayerMap::endpoint_voxel(const Frame& frame, int m,
                                                    int n) const {
  if (!frame.has_return(m, n)) return std::nullopt;
  const CameraModel cam = frame.camera_geometry();
  double gx, gy;
  pixel_ground_point(frame.pose, cam, m, n, &gx, &gy);
  const double ez = frame.pose.z - frame.depth_at(m, n);
  const GridIndex g{static_cast<int>(std::floor(gx / voxel_)),
                    static_cast<int>(std::floor(gy / voxel_)),
                    static_cast<int>(std::floor(ez / voxel_))};
  if (!in_grid(g)) return std::nullopt;
  return index_of(g);
}

void MultiLayerMap::integrate_frame(const Frame& frame, const PredictionTensor& pred,
                                    const UncertaintyImage& unc) {
  if (pred.width != frame.width || pred.height != frame.height ||
      unc.width != frame.width || unc.height != frame.height)
    throw std::invalid_argument("integrate_frame: resolution mismatch");
  if (pred.num_classes != num_classes_)
    throw std::invalid_argument("integrate_frame: class count mismatch");

  const CameraModel cam = frame.camera_geometry();

  const size_t npx = static_cast<size_t>(frame.width) * frame.height;
  std::vector<double> probs(num_classes_);
  for (int m = 0; m < frame.height; ++m) {
    for (int n = 0; n < frame.width; ++n) {
      if (!frame.has_return(m, n)) continue;
      double gx, gy;
      pixel_ground_point(frame.pose, cam, m, n, &gx, &gy);
      const double ez = frame.pose.z - frame.depth_at(m, n);
      const GridIndex eg{static_cast<int>(std::floor(gx / voxel_)),
                         static_cast<int>(std::floor(gy / voxel_)),
                         static_cast<int>(std::floor(ez / voxel_))};
      const bool endpoint_inside = in_grid(eg);
      const size_t endpoint = endpoint_inside ? index_of(eg) : 0;

      traverse_segment(frame.pose.x, frame.pose.y, frame.pose.z, gx, gy, ez,
                       voxel_, nx_, ny_, nz_, [&](const GridIndex& g) {
                         const size_t v = index_of(g);
                         if (endpoint_inside && v == endpoint) return false;
                         apply_occupancy_miss(v);
                         return true;
                       });
      if (!endpoint_inside) continue;
      apply_occupancy_hit(endpoint);

      const size_t px = static_cast<size_t>(m) * frame.width + n;
      for (int k = 0; k < num_classes_; ++k)
        probs[k] = pred.probs[static_cast<size_t>(k) * npx + px];
      apply_semantic_observation(endpoint, probs.data(), unc.values[px]);
    }
  }
}

void MultiLayerMap::integrate_semantics(const Frame& frame,
                                        const PredictionTensor& pred,
                                        const UncertaintyImage& unc) {
  const CameraModel cam = frame.camera_geometry();

  const size_t npx = static_cast<size_t>(frame.width) * frame.height;
  std::vector<double> probs(num_classes_);
  for (int m = 0; m < frame.height; ++m) {
    for (int n = 0; n < frame.width; ++n) {
      if (!frame.has_return(m, n)) continue;
      double gx, gy;
      pixel_ground_point(frame.pose, cam, m, n, &gx, &gy);
      const double ez = frame.pose.z - frame.depth_at(m, n);
      const GridIndex eg{static_cast<int>(std::floor(gx / voxel_)),
                         static_cast<int>(std::floor(gy / voxel_)),
                         static_cast<int>(std::floor(ez / voxel_))};
      if (!in_grid(eg)) continue;
      const size_t px = static_cast<size_t>(m) * frame.width + n;
      for (int k = 0; k < num_classes_; ++k)
        probs[k] = pred.probs[static_cast<size_t>(k) * npx + px];
      apply_semantic_observation(index_of(eg), probs.data(), unc.values[px]);
    }
  }
}

void MultiLayerMap::increment_train_counts(const Frame& frame) {
  const CameraModel cam = frame.camera_geometry();

  std::vector<size_t> voxels;
  for (int m = 0; m < frame.height; ++m) {
    for (int n = 0; n < frame.width; ++n) {
      if (!frame.has_return(m, n)) continue;
      double gx, gy;
      pixel_ground_point(frame.pose, cam, m, n, &gx, &gy);
      const double ez = frame.pose.z - frame.depth_at(m, n);
      const GridIndex eg{static_cast<int>(std::floor(gx / voxel_)),
                         static_cast<int>(std::floor(gy / voxel_)),
                         static_cast<int>(std::floor(ez / voxel_))};
      if (!in_grid(eg)) continue;
      voxels.push_back(index_of(eg));
    }
  }
  // One occurrence per frame regardless of how many pixels hit the voxel.
  std::sort(voxels.begin(), voxels.end());
  voxels.erase(std::unique(voxels.begin(), voxels.end()), voxels.end());
  for (size_t v : voxels) ++train_count_[v];
}

RayHit MultiLayerMap::cast_ray(const Pose& origin, double gx, double gy) const {
  RayHit hit;
  traverse_segment(origin.x, origin.y, origin.z, gx, gy, 0.0, voxel_, nx_, ny_,
                   nz_, [&](const GridIndex& g) {
                     const size_t v = index_of(g);
                     switch (state(v)) {
                       case VoxelState::kFree:
                         return true;
                       case VoxelState::kUnknown:
                         hit = {RayHit::Kind::kUnknown, v};
                         return false;
                       case VoxelState::kOccupied:
                         hit = {RayHit::Kind::kSurface, v};
                         return false;
                     }
                     return true;
                   });
  return hit;
}

SemanticRender MultiLayerMap::render_semantics(const Pose& pose,
                                               const CameraModel& camera) const {
  SemanticRender out;
  out.width = camera.width;
  out.height = camera.height;
  out.num_classes = num_classes_;
  const size_t npx = static_cast<size_t>(camera.width) * camera.height;
  out.probs.assign(npx * num_classes_, 0.0);
  out.hit_mask.assign(npx, 0);
  out.ml_labels.assign(npx, kVoidClass);

  std::vector<double> probs(num_classes_);
  for (int m = 0; m < camera.height; ++m) {
    for (int n = 0; n < camera.width; ++n) {
      double gx, gy;
      pixel_ground_point(pose, camera, m, n, &gx, &gy);
      const RayHit hit = cast_ray(pose, gx, gy);
      if (hit.kind != RayHit::Kind::kSurface) continue;
      const size_t px = static_cast<size_t>(m) * camera.width + n;
      semantic_probs(hit.voxel, probs.data());
      int best = 0;
      for (int k = 0; k < num_classes_; ++k) {
        out.probs[static_cast<size_t>(k) * npx + px] = probs[k];
        if (probs[k] > probs[best]) best = k;
      }
      out.hit_mask[px] = 1;
      out.ml_labels[px] = static_cast<uint8_t>(best + 1);
    }
  }
  return out;
}

UncertaintyImage MultiLayerMap::render_uncertainty(const Pose& pose,
                                                   const CameraModel& camera) const {
  UncertaintyImage out;
  out.width = camera.width;
  out.height = camera.height;
  out.values.assign(static_cast<size_t>(camera.width) * camera.height, 1.0);
  for (int m = 0; m < camera.height; ++m) {
    for (int n = 0; n < camera.width; ++n) {
      double gx, gy;
      pixel_ground_point(pose, camera, m, n, &gx, &gy);
      const RayHit hit = cast_ray(pose, gx, gy);
      if (hit.kind == RayHit::Kind::kSurface)
        out.values[static_cast<size_t>(m) * camera.width + n] = uncertainty(hit.voxel);
    }
  }
  return out;
}

MultiLayerMap MultiLayerMap::rebuild(
    const std::vector<const Frame*>& frames, const SurrogateModel& model,
    int mc_samples, const std::function<uint64_t(const Frame&)>& mc_seed_of) const {
  MultiLayerMap fresh(nx_, ny_, nz_, voxel_, num_classes_, params_);
  fresh.occ_lo_ = occ_lo_;
  fresh.obs_count_ = obs_count_;
  fresh.train_count_ = train_count_;
  for (const Frame* f : frames) {
    auto [pred, unc] = model.mc_predict(*f, mc_samples, mc_seed_of(*f));
    fresh.integrate_semantics(*f, pred, unc);
  }
  return fresh;
}

VoxelClassField classify_voxels(const MultiLayerMap& map) {
  const MapParams& p = map.params();
  if (p.free_threshold >= p.occupied_threshold)
    throw std::invalid_argument("classify_voxels: free_threshold >= occupied_threshold");
  VoxelClassField f;
  f.nx = map.nx();
  f.ny = map.ny();
  f.nz = map.nz();
  f.voxel_size = map.voxel_size();
  f.states.resize(map.num_voxels());
  for (size_t v = 0; v < f.states.size(); ++v) f.states[v] = map.state(v);
  return f;
}

size_t VoxelClassField::count(VoxelState s) const {
  size_t c = 0;
  for (VoxelState v : states)
    if (v == s) ++c;
  return c;
}

void MultiLayerMap::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write map " + path);
  std::ostringstream header;
  header << "ippsim-map 1\n"
         << nx_ << " " << ny_ << " " << nz_ << " " << num_classes_ << "\n"
         << format_double(voxel_, 17) << "\n"
         << format_double(params_.p_hit, 17) << " "
         << format_double(params_.p_miss, 17) << " "
         << format_double(params_.log_odds_min, 17) << " "
         << format_double(params_.log_odds_max, 17) << " "
         << format_double(params_.semantic_floor, 17) << " "
         << format_double(params_.occupied_threshold, 17) << " "
         << format_double(params_.free_threshold, 17) << "\n";
  const std::string h = header.str();
  const uint64_t hlen = h.size();
  out.write("IPPMAP01", 8);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  auto dump = [&out](const auto& vec) {
    out.write(reinterpret_cast<const char*>(vec.data()),
              static_cast<std::streamsize>(vec.size() *
                                           sizeof(typename std::decay_t<decltype(vec)>::value_type)));
  };
  dump(occ_lo_);
  dump(obs_count_);
  dump(sem_lo_);
  dump(unc_sum_);
  dump(unc_count_);
  dump(train_count_);
}

MultiLayerMap MultiLayerMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read map " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "IPPMAP01", 8) != 0)
    throw std::runtime_error(path + ": not an ippsim map");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  std::istringstream header(h);
  std::string tag;
  int version, nx, ny, nz, k;
  double voxel;
  MapParams p;
  header >> tag >> version >> nx >> ny >> nz >> k >> voxel >> p.p_hit >>
      p.p_miss >> p.log_odds_min >> p.log_odds_max >> p.semantic_floor >>
      p.occupied_threshold >> p.free_threshold;
  if (tag != "ippsim-map" || version != 1)
    throw std::runtime_error(path + ": unsupported map version");

  MultiLayerMap map(nx, ny, nz, voxel, k, p);
  auto slurp = [&in, &path](auto& vec) {
    in.read(reinterpret_cast<char*>(vec.data()),
            static_cast<std::streamsize>(vec.size() *
                                         sizeof(typename std::decay_t<decltype(vec)>::value_type)));
    if (!in) throw std::runtime_error(path + ": truncated map payload");
  };
  slurp(map.occ_lo_);
  slurp(map.obs_count_);
  slurp(map.sem_lo_);
  slurp(map.unc_sum_);
  slurp(map.unc_count_);
  slurp(map.train_count_);
  return map;
}

void MultiLayerMap::export_slices(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto write_slice = [&](const std::string& name, int z,
                         const std::function<uint8_t(size_t)>& value) {
    std::ofstream out(dir + "/" + name, std::ios::binary);
    out << "P5\n" << nx_ << " " << ny_ << "\n255\n";
    for (int y = 0; y < ny_; ++y)
      for (int x = 0; x < nx_; ++x) {
        const uint8_t v = value(index_of({x, y, z}));
        out.write(reinterpret_cast<const char*>(&v), 1);
      }
  };
  std::vector<double> probs(num_classes_);
  for (int z = 0; z < nz_; ++z) {
    const std::string suffix = "_z" + std::to_string(z) + ".pgm";
    write_slice("occupancy" + suffix, z, [&](size_t v) {
      return static_cast<uint8_t>(std::lround(occupancy_prob(v) * 255.0));
    });
    write_slice("uncertainty" + suffix, z, [&](size_t v) {
      return static_cast<uint8_t>(std::lround(uncertainty(v) * 255.0));
    });
    write_slice("class" + suffix, z, [&](size_t v) {
      if (unc_count_[v] == 0) return static_cast<uint8_t>(0);
      semantic_probs(v, probs.data());
      int best = 0;
      for (int k = 0; k < num_classes_; ++k)
        if (probs[k] > probs[best]) best = k;
      return static_cast<uint8_t>(best + 1);
    });
  }
}

}  // namespace ippsim
