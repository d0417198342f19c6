#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ippsim/map.hpp"
#include "ippsim/types.hpp"

namespace ippsim {

struct SelectionConfig {
  int alpha = 1000;      // labelled pixels per image
  double beta = 5.0;     // percent bound for the selection pool, (0, 100]
  int radius = 1;        // impurity neighborhood radius
  uint64_t seed = 1;

  void validate(int width, int height) const;
};

struct SelectionResult {
  std::vector<PixelCoord> pixels;
  bool fallback = false;  // padded or exhausted pool (see op contracts)
  size_t pool_size = 0;
};

enum class HumanSelection : uint8_t { kRandom, kUncRand, kRandUnc, kRegImpGreedy };
enum class PseudoSelection : uint8_t { kRandom, kDistAlign };

// Entropy of predicted-class proportions in each pixel's r-step neighborhood
// (natural log, 0 log 0 = 0). At borders the proportions are taken over the
// in-bounds neighbors.
std::vector<double> region_impurity(const std::vector<uint8_t>& ml_labels,
                                    int width, int height, int radius);

// Targeted human selection: alpha pixels sampled uniformly from the top-beta%
// by region impurity (zero-impurity pixels never enter the pool). Falls back
// to random padding when the pool runs short.
SelectionResult select_human_pixels_ours(const PredictionTensor& prediction,
                                         const SelectionConfig& config);

SelectionResult select_human_pixels_baseline(HumanSelection kind,
                                             const PredictionTensor& prediction,
                                             const UncertaintyImage& uncertainty,
                                             const SelectionConfig& config);

// Uncertainty-aware pseudo selection: alpha hit pixels sampled uniformly from
// the beta% with the lowest rendered uncertainty, labelled with the map's
// maximum-likelihood class.
SparseLabelImage select_pseudo_pixels_ours(const SemanticRender& render,
                                           const UncertaintyImage& rendered_unc,
                                           const SelectionConfig& config,
                                           uint64_t frame_id,
                                           bool* fallback = nullptr);

// `human_class_histogram`: per-class proportions (size K, summing to ~1)
// estimated from the human labels; used only by kDistAlign.
SparseLabelImage select_pseudo_pixels_baseline(
    PseudoSelection kind, const SemanticRender& render,
    const UncertaintyImage& rendered_unc,
    const std::vector<double>& human_class_histogram,
    const SelectionConfig& config, uint64_t frame_id);

// Every hit pixel with its map ML class (the dense self-supervised mode).
SparseLabelImage select_pseudo_dense(const SemanticRender& render, uint64_t frame_id);

// Re-renders and re-selects pseudo labels for all stored pseudo frames from
// the current map. Selection seeds derive from (config.seed, frame id).
enum class PseudoMode : uint8_t { kOurs, kRandom, kDistAlign, kDense, kNone };
std::vector<SparseLabelImage> rerender_all_pseudo(
    const std::vector<const Frame*>& pseudo_frames, const MultiLayerMap& map,
    PseudoMode mode, const std::vector<double>& human_class_histogram,
    const SelectionConfig& config);

void save_sparse_labels(const std::string& path, const SparseLabelImage& labels);
SparseLabelImage load_sparse_labels(const std::string& path);

}  // namespace ippsim
