#include "ippsim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "ippsim/common.hpp"
#include "ippsim/metrics.hpp"

namespace ippsim {

LossResult masked_loss(const SurrogateModel& model,
                       const std::vector<BatchSample>& batch, int alpha,
                       double lambda, size_t n_human_total, size_t n_pseudo_total,
                       const DropoutMask* mask) {
  if (alpha < 1) throw std::invalid_argument("masked_loss: alpha must be >= 1");
  const auto& theta = model.params();
  LossResult res;
  res.grad.assign(theta.size(), 0.0);

  const int k = model.config().num_classes;
  std::vector<double> patch(model.config().input_dim());
  std::vector<double> dlogits(k);
  ForwardCache cache;

  for (const BatchSample& bs : batch) {
    const Frame& frame = *bs.sample.frame;
    const SparseLabelImage& labels = *bs.sample.labels;
    const size_t denom = bs.is_pseudo ? n_pseudo_total : n_human_total;
    if (denom == 0) throw std::invalid_argument("masked_loss: zero list total");
    const double w = 1.0 / (static_cast<double>(denom) * alpha);

    double frame_loss = 0.0;
    for (uint32_t ei = 0; ei < labels.entries.size(); ++ei) {
      if (bs.skip &&
          std::binary_search(bs.skip->begin(), bs.skip->end(), ei))
        continue;
      const LabelEntry& e = labels.entries[ei];
      model.extract_patch(frame, e.pixel.m, e.pixel.n, patch.data());
      model.forward_patch(patch.data(), mask, dlogits.data(), &cache);
      const int target = e.cls - 1;
      const double p = cache.probs[target];
      frame_loss += -std::log(std::max(p, 1e-300));
      // d(-log softmax)/dlogits = probs - onehot, scaled by the term weight.
      for (int c = 0; c < k; ++c)
        dlogits[c] = w * (cache.probs[c] - (c == target ? 1.0 : 0.0));
      model.backward_patch(patch.data(), mask, cache, dlogits.data(), res.grad);
    }
    if (!std::isfinite(frame_loss))
      throw std::runtime_error("masked_loss: non-finite loss on frame " +
                               std::to_string(frame.id));
    res.loss += w * frame_loss;
  }

  double sq = 0.0;
  for (size_t i = 0; i < theta.size(); ++i) {
    sq += theta[i] * theta[i];
    res.grad[i] += 2.0 * lambda * theta[i];
  }
  res.loss += lambda * sq;
  if (!std::isfinite(res.loss))
    throw std::runtime_error("masked_loss: non-finite total loss");
  return res;
}

LossResult masked_loss(const SurrogateModel& model, const TrainingSet& set,
                       int alpha, double lambda, const DropoutMask* mask) {
  std::vector<BatchSample> batch;
  for (const auto& s : set.human) batch.push_back({s, false, nullptr});
  for (const auto& s : set.pseudo) batch.push_back({s, true, nullptr});
  return masked_loss(model, batch, alpha, lambda, set.n_human(), set.n_pseudo(),
                     mask);
}

double weight_decay(double dropout_p, size_t n_human, size_t n_pseudo) {
  const size_t n = n_human + n_pseudo;
  if (n == 0) throw std::invalid_argument("weight_decay: empty training set");
  return (1.0 - dropout_p) / (2.0 * static_cast<double>(n));
}

namespace {

// One-cycle: linear warmup from peak/10 over the first 30% of steps, cosine
// anneal to peak/1000 over the rest.
double one_cycle_lr(double peak, size_t step, size_t total_steps) {
  if (total_steps <= 1) return peak;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  const double warm = 0.3;
  if (t <= warm) {
    const double u = t / warm;
    return peak * (0.1 + 0.9 * u);
  }
  const double u = (t - warm) / (1.0 - warm);
  const double floor = peak / 1000.0;
  return floor + 0.5 * (peak - floor) * (1.0 + std::cos(M_PI * u));
}

struct Split {
  // Per sample: sorted entry indices held out for validation.
  std::vector<std::vector<uint32_t>> human_val, pseudo_val;
};

Split make_validation_split(const TrainingSet& set, double val_fraction,
                            uint64_t seed) {
  Split split;
  split.human_val.resize(set.human.size());
  split.pseudo_val.resize(set.pseudo.size());
  if (val_fraction <= 0.0) return split;
  Rng rng(derive_seed(seed, "val-split"));
  auto pick = [&](const TrainSample& s, std::vector<uint32_t>& out) {
    const size_t n = s.labels->entries.size();
    const size_t k = static_cast<size_t>(std::floor(val_fraction * n));
    if (k == 0) return;
    auto idx = rng.sample_indices(n, k);
    out.assign(idx.begin(), idx.end());
    std::sort(out.begin(), out.end());
  };
  for (size_t i = 0; i < set.human.size(); ++i) pick(set.human[i], split.human_val[i]);
  for (size_t i = 0; i < set.pseudo.size(); ++i) pick(set.pseudo[i], split.pseudo_val[i]);
  return split;
}

// mIoU of eval-mode predictions on the held-out entries.
double validation_miou(const SurrogateModel& model, const TrainingSet& set,
                       const Split& split) {
  ConfusionMatrix cm(model.config().num_classes);
  std::vector<double> patch(model.config().input_dim());
  std::vector<double> probs(model.config().num_classes);
  bool any = false;
  auto run = [&](const TrainSample& s, const std::vector<uint32_t>& val) {
    for (uint32_t ei : val) {
      const LabelEntry& e = s.labels->entries[ei];
      model.extract_patch(*s.frame, e.pixel.m, e.pixel.n, patch.data());
      model.forward_patch(patch.data(), nullptr, probs.data());
      int best = 0;
      for (int c = 1; c < model.config().num_classes; ++c)
        if (probs[c] > probs[best]) best = c;
      cm.add(e.cls, static_cast<uint8_t>(best + 1));
      any = true;
    }
  };
  for (size_t i = 0; i < set.human.size(); ++i) run(set.human[i], split.human_val[i]);
  for (size_t i = 0; i < set.pseudo.size(); ++i) run(set.pseudo[i], split.pseudo_val[i]);
  if (!any) return std::nan("");
  return miou(cm);
}

}  // namespace

TrainReport train(SurrogateModel& model, const TrainingSet& set, int alpha,
                  const TrainConfig& config) {
  if (set.empty()) throw std::invalid_argument("train: empty training set");
  if (config.batch_size < 1) throw std::invalid_argument("train: batch_size >= 1");
  if (config.val_fraction < 0.0 || config.val_fraction > 0.5)
    throw std::invalid_argument("train: val_fraction must be in [0, 0.5]");

  const double lambda =
      config.weight_decay_override >= 0.0
          ? config.weight_decay_override
          : weight_decay(model.config().dropout_p, set.n_human(), set.n_pseudo());
  const Split split = make_validation_split(set, config.val_fraction, config.seed);

  // All samples in one deck, tagged with their list and validation holdout;
  // shuffling the deck mixes human and pseudo frames proportionally.
  std::vector<BatchSample> deck;
  for (size_t i = 0; i < set.human.size(); ++i)
    deck.push_back({set.human[i], false, &split.human_val[i]});
  for (size_t i = 0; i < set.pseudo.size(); ++i)
    deck.push_back({set.pseudo[i], true, &split.pseudo_val[i]});

  const size_t batches_per_epoch =
      (deck.size() + config.batch_size - 1) / config.batch_size;
  const size_t total_steps =
      static_cast<size_t>(config.max_epochs) * batches_per_epoch;

  Rng rng(derive_seed(config.seed, "train"));
  std::vector<double> velocity(model.params().size(), 0.0);
  std::vector<double> best_params = model.params();
  const bool have_val = [&] {
    for (const auto& v : split.human_val)
      if (!v.empty()) return true;
    for (const auto& v : split.pseudo_val)
      if (!v.empty()) return true;
    return false;
  }();

  TrainReport report;
  double best_metric = -std::numeric_limits<double>::infinity();
  int since_best = 0;
  size_t step = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    rng.shuffle(deck);
    double epoch_loss = 0.0;
    double last_lr = 0.0;
    for (size_t b = 0; b < batches_per_epoch; ++b) {
      const size_t lo = b * config.batch_size;
      const size_t hi = std::min(deck.size(), lo + config.batch_size);
      std::vector<BatchSample> batch(deck.begin() + lo, deck.begin() + hi);

      const DropoutMask mask = model.sample_mask(rng);
      LossResult lr_res = masked_loss(model, batch, alpha, lambda, set.n_human(),
                                      set.n_pseudo(), &mask);
      epoch_loss += lr_res.loss;
      const double lr = one_cycle_lr(config.peak_lr, step++, total_steps);
      last_lr = lr;
      auto& params = model.params();
      for (size_t i = 0; i < params.size(); ++i) {
        velocity[i] = config.momentum * velocity[i] - lr * lr_res.grad[i];
        params[i] += velocity[i];
      }
    }
    epoch_loss /= static_cast<double>(batches_per_epoch);
    if (!std::isfinite(epoch_loss))
      throw std::runtime_error("train: training diverged (non-finite loss)");

    const double val = have_val ? validation_miou(model, set, split) : std::nan("");
    // Early-stop metric: validation mIoU when available, else falling loss.
    const double metric = have_val ? val : -epoch_loss;
    report.rows.push_back({epoch, epoch_loss, val, last_lr});
    report.epochs_run = epoch + 1;
    report.final_train_loss = epoch_loss;

    if (metric > best_metric + 1e-12) {
      best_metric = metric;
      best_params = model.params();
      report.best_epoch = epoch;
      report.best_val_miou = have_val ? val : std::nan("");
      since_best = 0;
    } else if (++since_best >= config.patience && epoch + 1 >= config.min_epochs) {
      report.early_stopped = true;
      break;
    }
  }

  model.params() = best_params;
  return report;
}

void TrainReport::save_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write training report " + path);
  out << "epoch,train_loss,val_miou,lr\n";
  for (const auto& r : rows)
    out << r.epoch << "," << format_double(r.train_loss) << ","
        << format_double(r.val_miou) << "," << format_double(r.lr) << "\n";
}

}  // namespace ippsim
