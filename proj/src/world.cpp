#include "ippsim/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "ippsim/common.hpp"

namespace ippsim {
namespace {

// Palette with deliberately confusable pairs (two greens, red/magenta) so the
// per-pixel classification task is not trivially separable by color alone.
const std::array<double, 3> kPalette[] = {
    {0.75, 0.25, 0.25}, {0.25, 0.65, 0.30}, {0.31, 0.71, 0.36},
    {0.25, 0.35, 0.75}, {0.70, 0.30, 0.62}, {0.85, 0.80, 0.30},
    {0.45, 0.45, 0.45}, {0.20, 0.75, 0.75},
};
constexpr int kPaletteSize = 8;

// Smooth random field built from a handful of cosine waves; cheap, seeded,
// and free of tiling artifacts at the world sizes used here.
class LowFreqField {
 public:
  LowFreqField(uint64_t seed, double scale_cells, int waves = 4) {
    Rng rng(seed);
    for (int i = 0; i < waves; ++i) {
      const double angle = rng.uniform(0.0, 2.0 * M_PI);
      const double wavelength = scale_cells * (0.6 + 0.9 * rng.uniform());
      const double k = 2.0 * M_PI / wavelength;
      waves_.push_back({k * std::cos(angle), k * std::sin(angle),
                        rng.uniform(0.0, 2.0 * M_PI), rng.uniform(0.5, 1.0)});
    }
  }

  double at(double i, double j) const {
    double v = 0.0, norm = 0.0;
    for (const auto& w : waves_) {
      v += w.amp * std::cos(w.kx * i + w.ky * j + w.phase);
      norm += w.amp;
    }
    return v / norm;  // in [-1, 1]
  }

 private:
  struct Wave {
    double kx, ky, phase, amp;
  };
  std::vector<Wave> waves_;
};

void write_pgm8(const std::string& path, int cols, int rows,
                const std::vector<uint8_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << cols << " " << rows << "\n255\n";
  out.write(reinterpret_cast<const char*>(data.data()),
            static_cast<std::streamsize>(data.size()));
}

std::vector<uint8_t> read_pgm8(const std::string& path, int* cols, int* rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  int maxval = 0;
  in >> magic >> *cols >> *rows >> maxval;
  if (magic != "P5" || maxval != 255)
    throw std::runtime_error(path + ": expected 8-bit binary PGM");
  in.get();  // single whitespace after header
  std::vector<uint8_t> data(static_cast<size_t>(*cols) * *rows);
  in.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size()));
  if (!in) throw std::runtime_error(path + ": truncated PGM payload");
  return data;
}

void write_pgm16(const std::string& path, int cols, int rows,
                 const std::vector<uint16_t>& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "P5\n" << cols << " " << rows << "\n65535\n";
  for (uint16_t v : data) {  // PGM 16-bit is big-endian
    const char bytes[2] = {static_cast<char>(v >> 8), static_cast<char>(v & 0xff)};
    out.write(bytes, 2);
  }
}

std::vector<uint16_t> read_pgm16(const std::string& path, int* cols, int* rows) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::string magic;
  int maxval = 0;
  in >> magic >> *cols >> *rows >> maxval;
  if (magic != "P5" || maxval != 65535)
    throw std::runtime_error(path + ": expected 16-bit binary PGM");
  in.get();
  std::vector<uint16_t> data(static_cast<size_t>(*cols) * *rows);
  for (auto& v : data) {
    unsigned char bytes[2];
    in.read(reinterpret_cast<char*>(bytes), 2);
    v = static_cast<uint16_t>(bytes[0] << 8 | bytes[1]);
  }
  if (!in) throw std::runtime_error(path + ": truncated PGM payload");
  return data;
}

}  // namespace

WorldModel WorldModel::generate(const WorldGenParams& p) {
  if (p.cols < 1 || p.rows < 1) throw std::invalid_argument("world dims must be >= 1");
  if (p.num_classes < 1) throw std::invalid_argument("num_classes must be >= 1");

  WorldModel w;
  w.cols_ = p.cols;
  w.rows_ = p.rows;
  w.num_classes_ = p.num_classes;
  w.cell_size_ = p.cell_size;
  w.feature_seed_ = derive_seed(p.seed, "features");
  w.color_drift_ = p.color_drift;

  w.colors_.resize(p.num_classes);
  for (int k = 0; k < p.num_classes; ++k) w.colors_[k] = kPalette[k % kPaletteSize];

  // Class blobs: one smooth field per class, cell label = argmax.
  std::vector<LowFreqField> class_fields;
  class_fields.reserve(p.num_classes);
  for (int k = 0; k < p.num_classes; ++k)
    class_fields.emplace_back(derive_seed(p.seed, "class", k), p.blob_scale);

  w.classes_.resize(static_cast<size_t>(p.cols) * p.rows);
  for (int j = 0; j < p.rows; ++j) {
    for (int i = 0; i < p.cols; ++i) {
      int best = 0;
      double best_v = -2.0;
      for (int k = 0; k < p.num_classes; ++k) {
        // Higher class ids get a shrinking handicap, making them rarer.
        const double bias = p.num_classes > 1
                                ? -p.class_imbalance * k / (p.num_classes - 1.0)
                                : 0.0;
        const double v = class_fields[k].at(i, j) + bias;
        if (v > best_v) {
          best_v = v;
          best = k;
        }
      }
      w.classes_[static_cast<size_t>(j) * p.cols + i] = static_cast<uint8_t>(best + 1);
    }
  }

  w.heights_.assign(w.classes_.size(), 0.0f);
  w.max_height_ = 0.0f;
  if (p.height_max > 0.0) {
    LowFreqField hf(derive_seed(p.seed, "height"), p.height_scale);
    for (int j = 0; j < p.rows; ++j) {
      for (int i = 0; i < p.cols; ++i) {
        const float h =
            static_cast<float>(0.5 * (hf.at(i, j) + 1.0) * p.height_max);
        w.heights_[static_cast<size_t>(j) * p.cols + i] = h;
        w.max_height_ = std::max(w.max_height_, h);
      }
    }
  }

  w.synthesize_features();
  return w;
}

WorldModel WorldModel::from_rasters(std::vector<uint8_t> classes,
                                    std::vector<float> heights, int cols, int rows,
                                    int num_classes, double cell_size,
                                    uint64_t feature_seed, double color_drift) {
  if (cols < 1 || rows < 1) throw std::invalid_argument("world dims must be >= 1");
  if (classes.size() != static_cast<size_t>(cols) * rows)
    throw std::invalid_argument("class raster size mismatch");
  for (uint8_t c : classes)
    if (c < 1 || c > num_classes)
      throw std::invalid_argument("class raster value outside 1..K");

  WorldModel w;
  w.cols_ = cols;
  w.rows_ = rows;
  w.num_classes_ = num_classes;
  w.cell_size_ = cell_size;
  w.feature_seed_ = feature_seed;
  w.color_drift_ = color_drift;
  w.classes_ = std::move(classes);
  if (heights.empty()) heights.assign(w.classes_.size(), 0.0f);
  if (heights.size() != w.classes_.size())
    throw std::invalid_argument("height raster size mismatch");
  w.heights_ = std::move(heights);
  w.max_height_ = 0.0f;
  for (float h : w.heights_) w.max_height_ = std::max(w.max_height_, h);
  w.colors_.resize(num_classes);
  for (int k = 0; k < num_classes; ++k) w.colors_[k] = kPalette[k % kPaletteSize];
  w.synthesize_features();
  return w;
}

void WorldModel::synthesize_features() {
  features_.resize(classes_.size() * kFeatureChannels);
  LowFreqField drift[kFeatureChannels] = {
      LowFreqField(derive_seed(feature_seed_, "drift", 0), 20.0),
      LowFreqField(derive_seed(feature_seed_, "drift", 1), 20.0),
      LowFreqField(derive_seed(feature_seed_, "drift", 2), 20.0),
  };
  for (int j = 0; j < rows_; ++j) {
    for (int i = 0; i < cols_; ++i) {
      const size_t cell = static_cast<size_t>(j) * cols_ + i;
      const auto& base = colors_[classes_[cell] - 1];
      for (int c = 0; c < kFeatureChannels; ++c) {
        const double v = base[c] + color_drift_ * drift[c].at(i, j);
        features_[cell * kFeatureChannels + c] =
            static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

Frame WorldModel::sense(const Pose& pose, const CameraModel& camera,
                        uint64_t noise_seed, uint64_t frame_id,
                        FrameKind kind) const {
  if (!contains(pose.x, pose.y))
    throw std::domain_error("sense: pose outside world extent");
  if (!camera.valid()) throw std::invalid_argument("sense: invalid camera");
  if (pose.z <= max_height_)
    throw std::domain_error("sense: flight altitude below terrain");

  Frame f;
  f.id = frame_id;
  f.kind = kind;
  f.pose = pose;
  f.width = camera.width;
  f.height = camera.height;
  f.footprint = camera.footprint;
  const size_t npx = static_cast<size_t>(camera.width) * camera.height;
  f.features.assign(npx * kFeatureChannels, 0.0f);
  f.depth.assign(npx, kNoReturnDepth);
  f.gt_labels_.assign(npx, 1);

  Rng noise(derive_seed(noise_seed, "sensor-noise"));
  for (int m = 0; m < camera.height; ++m) {
    for (int n = 0; n < camera.width; ++n) {
      const size_t px = static_cast<size_t>(m) * camera.width + n;
      double gx, gy;
      pixel_ground_point(pose, camera, m, n, &gx, &gy);
      // Keep the noise stream aligned across pixels regardless of coverage.
      double noise_vals[kFeatureChannels];
      for (double& nv : noise_vals) nv = noise.uniform(-camera.noise_amp, camera.noise_amp);
      if (!contains(gx, gy)) continue;  // no return
      const int i = static_cast<int>(gx / cell_size_);
      const int j = static_cast<int>(gy / cell_size_);
      const size_t cell = static_cast<size_t>(j) * cols_ + i;
      f.depth[px] = static_cast<float>(pose.z) - heights_[cell];
      f.gt_labels_[px] = classes_[cell];
      const float* feat = &features_[cell * kFeatureChannels];
      for (int c = 0; c < kFeatureChannels; ++c) {
        f.features[px * kFeatureChannels + c] = static_cast<float>(
            std::clamp(static_cast<double>(feat[c]) + noise_vals[c], 0.0, 1.0));
      }
    }
  }
  return f;
}

void WorldModel::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  write_pgm8(dir + "/classes.pgm", cols_, rows_, classes_);

  const bool has_height = max_height_ > 0.0f;
  if (has_height) {
    std::vector<uint16_t> hv(heights_.size());
    for (size_t i = 0; i < heights_.size(); ++i)
      hv[i] = static_cast<uint16_t>(std::lround(heights_[i] * 1000.0f));
    write_pgm16(dir + "/heights.pgm", cols_, rows_, hv);
  }

  std::ofstream out(dir + "/manifest.txt");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << "version = 1\n";
  out << "cell_size = " << format_double(cell_size_, 17) << "\n";
  out << "classes = " << num_classes_ << "\n";
  out << "class_raster = classes.pgm\n";
  if (has_height) out << "height_raster = heights.pgm\n";
  out << "height_unit = 0.001\n";
  out << "feature_seed = " << feature_seed_ << "\n";
  out << "color_drift = " << format_double(color_drift_, 17) << "\n";
  for (int k = 1; k <= num_classes_; ++k) {
    out << "color_" << k << " = " << format_double(colors_[k - 1][0], 17) << " "
        << format_double(colors_[k - 1][1], 17) << " "
        << format_double(colors_[k - 1][2], 17) << "\n";
  }
}

WorldModel WorldModel::load(const std::string& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) throw std::runtime_error("cannot read " + manifest_path);
  const std::string dir =
      std::filesystem::path(manifest_path).parent_path().string();

  WorldModel w;
  std::string class_raster, height_raster;
  double height_unit = 0.001;
  std::vector<std::pair<int, std::array<double, 3>>> colors;

  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t\r");
      s = (b == std::string::npos) ? "" : s.substr(b, e - b + 1);
    };
    trim(key);
    trim(value);
    if (key == "cell_size") w.cell_size_ = std::stod(value);
    else if (key == "classes") w.num_classes_ = std::stoi(value);
    else if (key == "class_raster") class_raster = value;
    else if (key == "height_raster") height_raster = value;
    else if (key == "height_unit") height_unit = std::stod(value);
    else if (key == "feature_seed") w.feature_seed_ = std::stoull(value);
    else if (key == "color_drift") w.color_drift_ = std::stod(value);
    else if (key.rfind("color_", 0) == 0) {
      const int k = std::stoi(key.substr(6));
      std::istringstream cs(value);
      std::array<double, 3> rgb{};
      cs >> rgb[0] >> rgb[1] >> rgb[2];
      colors.emplace_back(k, rgb);
    }
  }
  if (w.num_classes_ < 1 || class_raster.empty())
    throw std::runtime_error(manifest_path + ": missing classes or class_raster");

  w.classes_ = read_pgm8(dir.empty() ? class_raster : dir + "/" + class_raster,
                         &w.cols_, &w.rows_);
  for (uint8_t c : w.classes_)
    if (c < 1 || c > w.num_classes_)
      throw std::runtime_error("class raster value outside 1..K");

  if (!height_raster.empty()) {
    int hc = 0, hr = 0;
    auto hv = read_pgm16(dir.empty() ? height_raster : dir + "/" + height_raster,
                         &hc, &hr);
    if (hc != w.cols_ || hr != w.rows_)
      throw std::runtime_error("height raster dimensions mismatch class raster");
    w.heights_.resize(hv.size());
    w.max_height_ = 0.0f;
    for (size_t i = 0; i < hv.size(); ++i) {
      w.heights_[i] = static_cast<float>(hv[i] * height_unit);
      w.max_height_ = std::max(w.max_height_, w.heights_[i]);
    }
  } else {
    w.heights_.assign(w.classes_.size(), 0.0f);
    w.max_height_ = 0.0f;
  }

  w.colors_.resize(w.num_classes_);
  for (int k = 0; k < w.num_classes_; ++k) w.colors_[k] = kPalette[k % kPaletteSize];
  for (const auto& [k, rgb] : colors)
    if (k >= 1 && k <= w.num_classes_) w.colors_[k - 1] = rgb;

  w.synthesize_features();
  return w;
}

SparseLabelImage Annotator::annotate(const Frame& frame,
                                     const std::vector<PixelCoord>& pixels) {
  SparseLabelImage out;
  out.frame_id = frame.id;
  out.width = frame.width;
  out.height = frame.height;
  out.provenance = Provenance::kHuman;
  out.alpha = static_cast<int>(pixels.size());

  std::set<std::pair<int, int>> seen;
  for (const auto& p : pixels) {
    if (p.m < 0 || p.m >= frame.height || p.n < 0 || p.n >= frame.width)
      throw std::invalid_argument("annotate: pixel out of bounds");
    if (!seen.insert({p.m, p.n}).second) continue;  // deduplicate
    LabelEntry e;
    e.pixel = p;
    e.cls = frame.gt_labels_[static_cast<size_t>(p.m) * frame.width + p.n];
    out.entries.push_back(e);
    ++queries_;
  }
  return out;
}

double travel_cost(const Pose& a, const Pose& b, double speed) {
  if (!(speed > 0.0)) throw std::invalid_argument("travel_cost: speed must be > 0");
  return distance(a, b) / speed;
}

std::vector<uint8_t> SparseLabelImage::to_dense() const {
  std::vector<uint8_t> dense(static_cast<size_t>(width) * height, kVoidClass);
  for (const auto& e : entries)
    dense[static_cast<size_t>(e.pixel.m) * width + e.pixel.n] = e.cls;
  return dense;
}

const char* provenance_name(Provenance p) {
  return p == Provenance::kHuman ? "human" : "pseudo";
}

Provenance provenance_from_name(const std::string& name) {
  if (name == "human") return Provenance::kHuman;
  if (name == "pseudo") return Provenance::kPseudo;
  throw std::invalid_argument("unknown provenance: " + name);
}

}  // namespace ippsim
