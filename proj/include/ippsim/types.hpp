#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ippsim {

// Class ids are 1..K everywhere; 0 is the void class used for unlabelled
// pixels in dense label images.
constexpr uint8_t kVoidClass = 0;

struct PixelCoord {
  int m = 0;  // row
  int n = 0;  // column

  bool operator==(const PixelCoord&) const = default;
};

enum class Provenance : uint8_t { kHuman, kPseudo };

struct LabelEntry {
  PixelCoord pixel;
  uint8_t cls = 0;  // 1..K, never void
};

// Sparse per-frame labels; every pixel not listed is void.
struct SparseLabelImage {
  uint64_t frame_id = 0;
  int width = 0;
  int height = 0;
  std::vector<LabelEntry> entries;
  Provenance provenance = Provenance::kHuman;
  int alpha = 0;  // target labelled-pixel count the selection aimed for

  // Dense rendering with void elsewhere, row-major.
  std::vector<uint8_t> to_dense() const;
};

// Per-pixel class probabilities, class-major: probs[k * w * h + m * w + n].
struct PredictionTensor {
  int width = 0;
  int height = 0;
  int num_classes = 0;
  std::vector<double> probs;
  std::vector<uint8_t> ml_labels;  // argmax, ties broken by lowest class id

  double prob(int k, int m, int n) const {
    return probs[static_cast<size_t>(k) * width * height +
                 static_cast<size_t>(m) * width + n];
  }
};

struct UncertaintyImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;  // in [0, 1]

  double at(int m, int n) const { return values[static_cast<size_t>(m) * width + n]; }
};

const char* provenance_name(Provenance p);
Provenance provenance_from_name(const std::string& name);

}  // namespace ippsim
