#include "ippsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace ippsim {

SurrogateModel::SurrogateModel(const ModelConfig& config) : config_(config) {
  if (config.num_classes < 2)
    throw std::invalid_argument("model requires num_classes >= 2");
  if (config.patch_radius < 0 || config.hidden1 < 1 || config.hidden2 < 1)
    throw std::invalid_argument("invalid model dimensions");
  if (config.dropout_p < 0.0 || config.dropout_p >= 1.0)
    throw std::invalid_argument("dropout_p must be in [0, 1)");

  const int in = config.input_dim();
  const int h1 = config.hidden1, h2 = config.hidden2, k = config.num_classes;
  b1_ = static_cast<size_t>(h1) * in;
  w2_ = b1_ + h1;
  b2_ = w2_ + static_cast<size_t>(h2) * h1;
  w3_ = b2_ + h2;
  b3_ = w3_ + static_cast<size_t>(k) * h2;
  params_.assign(b3_ + k, 0.0);

  // He-normal hidden layers; zero output layer so a fresh model predicts the
  // uniform distribution (maximal uncertainty before any training).
  Rng rng(derive_seed(config.init_seed, "model-init"));
  const double s1 = std::sqrt(2.0 / in);
  for (size_t i = 0; i < b1_; ++i) params_[i] = s1 * rng.normal();
  const double s2 = std::sqrt(2.0 / h1);
  for (size_t i = w2_; i < b2_; ++i) params_[i] = s2 * rng.normal();
}

DropoutMask SurrogateModel::sample_mask(Rng& rng) const {
  DropoutMask mask;
  const double p = config_.dropout_p;
  const double scale = 1.0 / (1.0 - p);
  mask.hidden1.resize(config_.hidden1);
  mask.hidden2.resize(config_.hidden2);
  for (double& v : mask.hidden1) v = (rng.uniform() < p) ? 0.0 : scale;
  for (double& v : mask.hidden2) v = (rng.uniform() < p) ? 0.0 : scale;
  return mask;
}

void SurrogateModel::forward_patch(const double* input, const DropoutMask* mask,
                                   double* probs_out, ForwardCache* cache) const {
  const int in = config_.input_dim();
  const int h1 = config_.hidden1, h2 = config_.hidden2, k = config_.num_classes;
  const double* w1 = params_.data();
  const double* b1 = params_.data() + b1_;
  const double* w2 = params_.data() + w2_;
  const double* b2 = params_.data() + b2_;
  const double* w3 = params_.data() + w3_;
  const double* b3 = params_.data() + b3_;

  thread_local ForwardCache scratch;
  ForwardCache& c = cache ? *cache : scratch;
  c.z1.resize(h1);
  c.a1.resize(h1);
  c.z2.resize(h2);
  c.a2.resize(h2);
  c.probs.resize(k);

  for (int i = 0; i < h1; ++i) {
    const double* row = w1 + static_cast<size_t>(i) * in;
    double acc = b1[i];
    for (int j = 0; j < in; ++j) acc += row[j] * input[j];
    c.z1[i] = acc;
    double a = acc > 0.0 ? acc : 0.0;
    if (mask) a *= mask->hidden1[i];
    c.a1[i] = a;
  }
  for (int i = 0; i < h2; ++i) {
    const double* row = w2 + static_cast<size_t>(i) * h1;
    double acc = b2[i];
    for (int j = 0; j < h1; ++j) acc += row[j] * c.a1[j];
    c.z2[i] = acc;
    double a = acc > 0.0 ? acc : 0.0;
    if (mask) a *= mask->hidden2[i];
    c.a2[i] = a;
  }
  double max_logit = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < k; ++i) {
    const double* row = w3 + static_cast<size_t>(i) * h2;
    double acc = b3[i];
    for (int j = 0; j < h2; ++j) acc += row[j] * c.a2[j];
    c.probs[i] = acc;  // logits, normalized below
    max_logit = std::max(max_logit, acc);
  }
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    c.probs[i] = std::exp(c.probs[i] - max_logit);
    sum += c.probs[i];
  }
  for (int i = 0; i < k; ++i) {
    c.probs[i] /= sum;
    probs_out[i] = c.probs[i];
  }
}

void SurrogateModel::backward_patch(const double* input, const DropoutMask* mask,
                                    const ForwardCache& cache,
                                    const double* dlogits,
                                    std::vector<double>& grad) const {
  const int in = config_.input_dim();
  const int h1 = config_.hidden1, h2 = config_.hidden2, k = config_.num_classes;
  const double* w2 = params_.data() + w2_;
  const double* w3 = params_.data() + w3_;

  thread_local std::vector<double> da2, da1;
  da2.assign(h2, 0.0);
  da1.assign(h1, 0.0);

  double* gw3 = grad.data() + w3_;
  double* gb3 = grad.data() + b3_;
  for (int i = 0; i < k; ++i) {
    const double d = dlogits[i];
    if (d == 0.0) continue;
    double* row = gw3 + static_cast<size_t>(i) * h2;
    const double* w_row = w3 + static_cast<size_t>(i) * h2;
    for (int j = 0; j < h2; ++j) {
      row[j] += d * cache.a2[j];
      da2[j] += d * w_row[j];
    }
    gb3[i] += d;
  }

  double* gw2 = grad.data() + w2_;
  double* gb2 = grad.data() + b2_;
  for (int i = 0; i < h2; ++i) {
    double d = da2[i];
    if (mask) d *= mask->hidden2[i];
    if (cache.z2[i] <= 0.0) d = 0.0;
    if (d == 0.0) continue;
    double* row = gw2 + static_cast<size_t>(i) * h1;
    const double* w_row = w2 + static_cast<size_t>(i) * h1;
    for (int j = 0; j < h1; ++j) {
      row[j] += d * cache.a1[j];
      da1[j] += d * w_row[j];
    }
    gb2[i] += d;
  }

  double* gw1 = grad.data();
  double* gb1 = grad.data() + b1_;
  for (int i = 0; i < h1; ++i) {
    double d = da1[i];
    if (mask) d *= mask->hidden1[i];
    if (cache.z1[i] <= 0.0) d = 0.0;
    if (d == 0.0) continue;
    double* row = gw1 + static_cast<size_t>(i) * in;
    for (int j = 0; j < in; ++j) row[j] += d * input[j];
    gb1[i] += d;
  }
}

void SurrogateModel::extract_patch(const Frame& frame, int m, int n,
                                   double* out) const {
  const int r = config_.patch_radius;
  int idx = 0;
  for (int dm = -r; dm <= r; ++dm) {
    // Replicate padding at the image border.
    const int mm = std::clamp(m + dm, 0, frame.height - 1);
    for (int dn = -r; dn <= r; ++dn) {
      const int nn = std::clamp(n + dn, 0, frame.width - 1);
      const float* f = frame.features_at(mm, nn);
      for (int c = 0; c < kFeatureChannels; ++c) out[idx++] = f[c];
    }
  }
}

void SurrogateModel::check_finite() const {
  for (double v : params_)
    if (!std::isfinite(v))
      throw std::runtime_error("model parameters are non-finite");
}

PredictionTensor SurrogateModel::predict(const Frame& frame) const {
  check_finite();
  const int k = config_.num_classes;
  PredictionTensor out;
  out.width = frame.width;
  out.height = frame.height;
  out.num_classes = k;
  const size_t npx = static_cast<size_t>(frame.width) * frame.height;
  out.probs.resize(npx * k);
  out.ml_labels.resize(npx);

  std::vector<double> patch(config_.input_dim());
  std::vector<double> probs(k);
  for (int m = 0; m < frame.height; ++m) {
    for (int n = 0; n < frame.width; ++n) {
      extract_patch(frame, m, n, patch.data());
      forward_patch(patch.data(), nullptr, probs.data());
      const size_t px = static_cast<size_t>(m) * frame.width + n;
      int best = 0;
      for (int c = 0; c < k; ++c) {
        out.probs[static_cast<size_t>(c) * npx + px] = probs[c];
        if (probs[c] > probs[best]) best = c;  // ties keep the lowest class
      }
      out.ml_labels[px] = static_cast<uint8_t>(best + 1);
    }
  }
  return out;
}

std::pair<PredictionTensor, UncertaintyImage> SurrogateModel::mc_predict(
    const Frame& frame, int samples, uint64_t seed) const {
  if (samples < 1) throw std::invalid_argument("mc_predict: samples must be >= 1");
  check_finite();
  const int k = config_.num_classes;
  const size_t npx = static_cast<size_t>(frame.width) * frame.height;

  PredictionTensor out;
  out.width = frame.width;
  out.height = frame.height;
  out.num_classes = k;
  out.probs.assign(npx * k, 0.0);
  out.ml_labels.resize(npx);

  Rng rng(derive_seed(seed, "mc-dropout"));
  std::vector<double> patch(config_.input_dim());
  std::vector<double> probs(k);
  for (int t = 0; t < samples; ++t) {
    const DropoutMask mask = sample_mask(rng);
    for (int m = 0; m < frame.height; ++m) {
      for (int n = 0; n < frame.width; ++n) {
        extract_patch(frame, m, n, patch.data());
        forward_patch(patch.data(), &mask, probs.data());
        const size_t px = static_cast<size_t>(m) * frame.width + n;
        for (int c = 0; c < k; ++c)
          out.probs[static_cast<size_t>(c) * npx + px] += probs[c];
      }
    }
  }

  UncertaintyImage unc;
  unc.width = frame.width;
  unc.height = frame.height;
  unc.values.resize(npx);
  const double inv = 1.0 / samples;
  std::vector<double> mean(k);
  for (size_t px = 0; px < npx; ++px) {
    int best = 0;
    for (int c = 0; c < k; ++c) {
      const size_t at = static_cast<size_t>(c) * npx + px;
      out.probs[at] *= inv;
      mean[c] = out.probs[at];
      if (mean[c] > mean[best]) best = c;
    }
    out.ml_labels[px] = static_cast<uint8_t>(best + 1);
    unc.values[px] = normalized_entropy(mean.data(), k);
  }
  return {std::move(out), std::move(unc)};
}

double normalized_entropy(const double* probs, int k) {
  if (k < 2) return 0.0;
  double h = 0.0;
  for (int i = 0; i < k; ++i)
    if (probs[i] > 0.0) h -= probs[i] * std::log(probs[i]);
  return std::clamp(h / std::log(static_cast<double>(k)), 0.0, 1.0);
}

void SurrogateModel::save(const std::string& path) const {
  nlohmann::json header;
  header["format"] = "ippsim-checkpoint";
  header["version"] = 1;
  header["patch_radius"] = config_.patch_radius;
  header["hidden1"] = config_.hidden1;
  header["hidden2"] = config_.hidden2;
  header["num_classes"] = config_.num_classes;
  header["dropout_p"] = config_.dropout_p;
  header["init_seed"] = config_.init_seed;
  header["num_params"] = params_.size();
  const std::string h = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  const uint64_t hlen = h.size();
  out.write("IPPCKPT1", 8);
  out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  out.write(h.data(), static_cast<std::streamsize>(h.size()));
  out.write(reinterpret_cast<const char*>(params_.data()),
            static_cast<std::streamsize>(params_.size() * sizeof(double)));
}

SurrogateModel SurrogateModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, "IPPCKPT1", 8) != 0)
    throw std::runtime_error(path + ": not an ippsim checkpoint");
  uint64_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string h(hlen, '\0');
  in.read(h.data(), static_cast<std::streamsize>(hlen));
  const auto header = nlohmann::json::parse(h);

  ModelConfig cfg;
  cfg.patch_radius = header.at("patch_radius");
  cfg.hidden1 = header.at("hidden1");
  cfg.hidden2 = header.at("hidden2");
  cfg.num_classes = header.at("num_classes");
  cfg.dropout_p = header.at("dropout_p");
  cfg.init_seed = header.at("init_seed");

  SurrogateModel model(cfg);
  const size_t n = header.at("num_params");
  if (n != model.params_.size())
    throw std::runtime_error(path + ": parameter count mismatch");
  in.read(reinterpret_cast<char*>(model.params_.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw std::runtime_error(path + ": truncated checkpoint");
  return model;
}

}  // namespace ippsim
