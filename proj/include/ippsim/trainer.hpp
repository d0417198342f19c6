#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ippsim/model.hpp"
#include "ippsim/types.hpp"
#include "ippsim/world.hpp"

namespace ippsim {

struct TrainSample {
  const Frame* frame = nullptr;
  const SparseLabelImage* labels = nullptr;
};

struct TrainingSet {
  std::vector<TrainSample> human;
  std::vector<TrainSample> pseudo;

  size_t n_human() const { return human.size(); }
  size_t n_pseudo() const { return pseudo.size(); }
  bool empty() const { return human.empty() && pseudo.empty(); }
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;
};

// Masked semi-supervised cross-entropy: human terms weighted 1/(n_human_total
// * alpha), pseudo terms 1/(n_pseudo_total * alpha), plus lambda * ||theta||^2.
// Void pixels contribute exactly zero. The totals default to the batch sizes;
// mini-batch training passes the full-set counts so batch gradients sum to
// the full objective. `mask` selects training mode (null = deterministic).
// Entries whose index appears in the sample's `skip` list are left out (used
// for validation splits). Throws on non-finite loss, naming the frame.
struct BatchSample {
  TrainSample sample;
  bool is_pseudo = false;
  const std::vector<uint32_t>* skip = nullptr;  // sorted entry indices to exclude
};

LossResult masked_loss(const SurrogateModel& model,
                       const std::vector<BatchSample>& batch, int alpha,
                       double lambda, size_t n_human_total, size_t n_pseudo_total,
                       const DropoutMask* mask = nullptr);

// Convenience for the whole set at once.
LossResult masked_loss(const SurrogateModel& model, const TrainingSet& set,
                       int alpha, double lambda, const DropoutMask* mask = nullptr);

// lambda = (1 - dropout_p) / (2 (n_human + n_pseudo)).
double weight_decay(double dropout_p, size_t n_human, size_t n_pseudo);

struct TrainConfig {
  double peak_lr = 0.1;
  double momentum = 0.9;
  int batch_size = 8;  // frames per step
  int max_epochs = 200;
  int patience = 10;          // epochs without validation improvement
  int min_epochs = 0;         // no early stop before this many epochs
  double val_fraction = 0.1;  // labelled pixels held out per frame
  uint64_t seed = 1;
  // Weight decay; negative selects the (1 - p) / 2N rule. The rule blows up
  // for degenerate single-image sets, so tests can pin it explicitly.
  double weight_decay_override = -1.0;
};

struct EpochRow {
  int epoch = 0;
  double train_loss = 0.0;
  double val_miou = 0.0;  // NaN when there is no validation split
  double lr = 0.0;
};

struct TrainReport {
  int epochs_run = 0;
  int best_epoch = 0;
  double best_val_miou = 0.0;
  double final_train_loss = 0.0;
  bool early_stopped = false;
  std::vector<EpochRow> rows;

  void save_csv(const std::string& path) const;
};

// Mini-batch SGD with momentum under a one-cycle learning-rate schedule,
// early-stopped on held-out mIoU (or training loss when the validation split
// is empty). Restores the best parameters before returning. Deterministic
// given the seed.
TrainReport train(SurrogateModel& model, const TrainingSet& set, int alpha,
                  const TrainConfig& config);

}  // namespace ippsim
