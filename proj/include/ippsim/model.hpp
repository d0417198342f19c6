#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ippsim/common.hpp"
#include "ippsim/types.hpp"
#include "ippsim/world.hpp"

namespace ippsim {

struct ModelConfig {
  int patch_radius = 2;  // receptive field half-width; input is (2r+1)^2 * F
  int hidden1 = 32;
  int hidden2 = 32;
  int num_classes = 0;
  double dropout_p = 0.5;
  uint64_t init_seed = 1;

  int input_dim() const {
    const int side = 2 * patch_radius + 1;
    return side * side * kFeatureChannels;
  }
};

// Per-layer dropout scale factors: 0 for dropped units, 1/(1-p) for kept
// ones (inverted dropout). One mask is shared across all pixels of a forward
// pass, i.e. each pass samples one thinned network.
struct DropoutMask {
  std::vector<double> hidden1;
  std::vector<double> hidden2;
};

// Scratch for backward passes.
struct ForwardCache {
  std::vector<double> z1, a1, z2, a2, probs;
};

// Small per-pixel probabilistic classifier over a local feature patch, with
// stochastic forward passes for Monte-Carlo uncertainty estimation. All
// arithmetic is double precision so gradient checks are exact to roundoff.
class SurrogateModel {
 public:
  explicit SurrogateModel(const ModelConfig& config);

  const ModelConfig& config() const { return config_; }
  size_t num_params() const { return params_.size(); }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }

  // Deterministic prediction (dropout disabled). Throws if parameters are
  // non-finite or features leave [0, 1].
  PredictionTensor predict(const Frame& frame) const;

  // Mean of `samples` stochastic passes plus the normalized predictive
  // entropy of the mean. Deterministic given the seed.
  std::pair<PredictionTensor, UncertaintyImage> mc_predict(const Frame& frame,
                                                           int samples,
                                                           uint64_t seed) const;

  DropoutMask sample_mask(Rng& rng) const;

  // Low-level single-patch forward/backward used by prediction and training.
  // `mask` may be null (evaluation mode). `cache` must be non-null when a
  // backward pass will follow.
  void forward_patch(const double* input, const DropoutMask* mask,
                     double* probs_out, ForwardCache* cache = nullptr) const;
  // Accumulates d(loss)/d(theta) into grad (same layout as params()) given
  // d(loss)/d(logits); returns nothing. `input` and `cache` must match the
  // forward call.
  void backward_patch(const double* input, const DropoutMask* mask,
                      const ForwardCache& cache, const double* dlogits,
                      std::vector<double>& grad) const;

  void extract_patch(const Frame& frame, int m, int n, double* out) const;

  void save(const std::string& path) const;
  static SurrogateModel load(const std::string& path);

  // Parameter block offsets, exposed for targeted test setups.
  size_t w1_offset() const { return 0; }
  size_t b1_offset() const { return b1_; }
  size_t w2_offset() const { return w2_; }
  size_t b2_offset() const { return b2_; }
  size_t w3_offset() const { return w3_; }
  size_t b3_offset() const { return b3_; }

 private:
  void check_finite() const;

  ModelConfig config_;
  std::vector<double> params_;
  size_t b1_ = 0, w2_ = 0, b2_ = 0, w3_ = 0, b3_ = 0;
};

// Entropy of a K-way distribution normalized by ln K, in [0, 1].
double normalized_entropy(const double* probs, int k);

}  // namespace ippsim
