#include "ippsim/labels.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ippsim/common.hpp"

namespace ippsim {
namespace {

PixelCoord coord_of(size_t px, int width) {
  return {static_cast<int>(px / width), static_cast<int>(px % width)};
}

// Indices ordered by (value desc/asc, index asc); stable under ties.
std::vector<size_t> order_by(const std::vector<double>& values, bool descending) {
  std::vector<size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (values[a] != values[b])
      return descending ? values[a] > values[b] : values[a] < values[b];
    return a < b;
  });
  return idx;
}

size_t pool_cap(double beta, size_t n) {
  return static_cast<size_t>(std::ceil(beta / 100.0 * static_cast<double>(n)));
}

// alpha draws without replacement from `pool`; pads from the complement when
// the pool is short. Sets *fallback when padding happened.
std::vector<PixelCoord> sample_with_padding(const std::vector<size_t>& pool,
                                            size_t total_pixels, int width,
                                            size_t alpha, Rng& rng,
                                            bool* fallback) {
  std::vector<PixelCoord> out;
  if (pool.size() >= alpha) {
    for (size_t i : rng.sample_indices(pool.size(), alpha))
      out.push_back(coord_of(pool[i], width));
    return out;
  }
  *fallback = true;
  std::vector<uint8_t> in_pool(total_pixels, 0);
  for (size_t p : pool) {
    in_pool[p] = 1;
    out.push_back(coord_of(p, width));
  }
  std::vector<size_t> rest;
  rest.reserve(total_pixels - pool.size());
  for (size_t p = 0; p < total_pixels; ++p)
    if (!in_pool[p]) rest.push_back(p);
  const size_t need = std::min(alpha - pool.size(), rest.size());
  for (size_t i : rng.sample_indices(rest.size(), need))
    out.push_back(coord_of(rest[i], width));
  return out;
}

}  // namespace

void SelectionConfig::validate(int width, int height) const {
  if (alpha < 1) throw std::invalid_argument("selection alpha must be >= 1");
  if (beta <= 0.0 || beta > 100.0)
    throw std::invalid_argument("selection beta must be in (0, 100]");
  if (radius < 1) throw std::invalid_argument("selection radius must be >= 1");
  const size_t cap = pool_cap(beta, static_cast<size_t>(width) * height);
  if (static_cast<size_t>(alpha) > cap)
    throw std::invalid_argument(
        "alpha exceeds the beta-percent pool; sampling from the top slice is "
        "ill-defined");
}

std::vector<double> region_impurity(const std::vector<uint8_t>& ml_labels,
                                    int width, int height, int radius) {
  if (radius < 1) throw std::invalid_argument("region_impurity: radius must be >= 1");
  std::vector<double> out(static_cast<size_t>(width) * height, 0.0);
  std::vector<int> counts(256, 0);
  for (int m = 0; m < height; ++m) {
    for (int n = 0; n < width; ++n) {
      const int m0 = std::max(0, m - radius), m1 = std::min(height - 1, m + radius);
      const int n0 = std::max(0, n - radius), n1 = std::min(width - 1, n + radius);
      int total = 0;
      std::vector<uint8_t> present;
      for (int i = m0; i <= m1; ++i)
        for (int j = n0; j <= n1; ++j) {
          const uint8_t c = ml_labels[static_cast<size_t>(i) * width + j];
          if (counts[c]++ == 0) present.push_back(c);
          ++total;
        }
      double h = 0.0;
      for (uint8_t c : present) {
        const double p = static_cast<double>(counts[c]) / total;
        h -= p * std::log(p);
        counts[c] = 0;
      }
      out[static_cast<size_t>(m) * width + n] = h;
    }
  }
  return out;
}

SelectionResult select_human_pixels_ours(const PredictionTensor& prediction,
                                         const SelectionConfig& config) {
  config.validate(prediction.width, prediction.height);
  const size_t n = static_cast<size_t>(prediction.width) * prediction.height;
  const auto impurity = region_impurity(prediction.ml_labels, prediction.width,
                                        prediction.height, config.radius);

  const auto ranked = order_by(impurity, /*descending=*/true);
  const size_t cap = pool_cap(config.beta, n);
  std::vector<size_t> pool;
  for (size_t i = 0; i < cap && i < ranked.size(); ++i) {
    if (impurity[ranked[i]] <= 0.0) break;  // only informative pixels qualify
    pool.push_back(ranked[i]);
  }

  SelectionResult res;
  res.pool_size = pool.size();
  Rng rng(derive_seed(config.seed, "human-ours"));
  res.pixels = sample_with_padding(pool, n, prediction.width,
                                   static_cast<size_t>(config.alpha), rng,
                                   &res.fallback);
  return res;
}

SelectionResult select_human_pixels_baseline(HumanSelection kind,
                                             const PredictionTensor& prediction,
                                             const UncertaintyImage& uncertainty,
                                             const SelectionConfig& config) {
  config.validate(prediction.width, prediction.height);
  const size_t n = static_cast<size_t>(prediction.width) * prediction.height;
  const size_t alpha = static_cast<size_t>(config.alpha);
  SelectionResult res;

  switch (kind) {
    case HumanSelection::kRandom: {
      Rng rng(derive_seed(config.seed, "human-random"));
      res.pool_size = n;
      for (size_t i : rng.sample_indices(n, std::min(alpha, n)))
        res.pixels.push_back(coord_of(i, prediction.width));
      break;
    }
    case HumanSelection::kUncRand: {
      const auto ranked = order_by(uncertainty.values, /*descending=*/true);
      const size_t cap = std::min(pool_cap(config.beta, n), ranked.size());
      std::vector<size_t> pool(ranked.begin(), ranked.begin() + cap);
      res.pool_size = pool.size();
      Rng rng(derive_seed(config.seed, "human-unc-rand"));
      res.pixels = sample_with_padding(pool, n, prediction.width, alpha, rng,
                                       &res.fallback);
      break;
    }
    case HumanSelection::kRandUnc: {
      Rng rng(derive_seed(config.seed, "human-rand-unc"));
      const size_t cap = std::min(pool_cap(config.beta, n), n);
      std::vector<size_t> pool = rng.sample_indices(n, cap);
      std::sort(pool.begin(), pool.end(), [&](size_t a, size_t b) {
        if (uncertainty.values[a] != uncertainty.values[b])
          return uncertainty.values[a] > uncertainty.values[b];
        return a < b;
      });
      res.pool_size = pool.size();
      const size_t take = std::min(alpha, pool.size());
      for (size_t i = 0; i < take; ++i)
        res.pixels.push_back(coord_of(pool[i], prediction.width));
      res.fallback = take < alpha;
      break;
    }
    case HumanSelection::kRegImpGreedy: {
      const auto impurity = region_impurity(
          prediction.ml_labels, prediction.width, prediction.height, config.radius);
      const auto ranked = order_by(impurity, /*descending=*/true);
      res.pool_size = ranked.size();
      for (size_t i = 0; i < alpha && i < ranked.size(); ++i)
        res.pixels.push_back(coord_of(ranked[i], prediction.width));
      break;
    }
  }
  return res;
}

SparseLabelImage select_pseudo_pixels_ours(const SemanticRender& render,
                                           const UncertaintyImage& rendered_unc,
                                           const SelectionConfig& config,
                                           uint64_t frame_id, bool* fallback) {
  config.validate(render.width, render.height);
  SparseLabelImage out;
  out.frame_id = frame_id;
  out.width = render.width;
  out.height = render.height;
  out.provenance = Provenance::kPseudo;
  out.alpha = config.alpha;
  if (fallback) *fallback = false;

  std::vector<size_t> hits;
  for (size_t px = 0; px < render.hit_mask.size(); ++px)
    if (render.hit_mask[px]) hits.push_back(px);
  const size_t alpha = static_cast<size_t>(config.alpha);

  std::vector<size_t> chosen;
  if (hits.size() <= alpha) {
    chosen = hits;  // pool exhausted: keep everything we can label
    if (fallback && hits.size() < alpha) *fallback = true;
  } else {
    std::sort(hits.begin(), hits.end(), [&](size_t a, size_t b) {
      if (rendered_unc.values[a] != rendered_unc.values[b])
        return rendered_unc.values[a] < rendered_unc.values[b];
      return a < b;
    });
    size_t cap = pool_cap(config.beta, hits.size());
    if (cap < alpha) {
      cap = alpha;  // widen to the alpha least-uncertain hits
      if (fallback) *fallback = true;
    }
    cap = std::min(cap, hits.size());
    Rng rng(derive_seed(config.seed, "pseudo-ours"));
    for (size_t i : rng.sample_indices(cap, alpha)) chosen.push_back(hits[i]);
  }

  for (size_t px : chosen) {
    LabelEntry e;
    e.pixel = coord_of(px, render.width);
    e.cls = render.ml_labels[px];
    out.entries.push_back(e);
  }
  return out;
}

SparseLabelImage select_pseudo_pixels_baseline(
    PseudoSelection kind, const SemanticRender& render,
    const UncertaintyImage& rendered_unc,
    const std::vector<double>& human_class_histogram,
    const SelectionConfig& config, uint64_t frame_id) {
  config.validate(render.width, render.height);
  SparseLabelImage out;
  out.frame_id = frame_id;
  out.width = render.width;
  out.height = render.height;
  out.provenance = Provenance::kPseudo;
  out.alpha = config.alpha;

  std::vector<size_t> hits;
  for (size_t px = 0; px < render.hit_mask.size(); ++px)
    if (render.hit_mask[px]) hits.push_back(px);
  const size_t alpha = static_cast<size_t>(config.alpha);

  std::vector<size_t> chosen;
  if (kind == PseudoSelection::kRandom) {
    Rng rng(derive_seed(config.seed, "pseudo-random"));
    if (hits.size() <= alpha) {
      chosen = hits;
    } else {
      for (size_t i : rng.sample_indices(hits.size(), alpha))
        chosen.push_back(hits[i]);
    }
  } else {  // kDistAlign
    const int k = render.num_classes;
    if (static_cast<int>(human_class_histogram.size()) != k)
      throw std::invalid_argument("dist_align: histogram size mismatch");

    // Integer quotas matching the human class distribution: floor first,
    // then distribute the remainder by largest fractional part.
    std::vector<size_t> quota(k, 0);
    std::vector<std::pair<double, int>> remainder;
    size_t assigned = 0;
    for (int c = 0; c < k; ++c) {
      const double want = alpha * human_class_histogram[c];
      quota[c] = static_cast<size_t>(std::floor(want));
      assigned += quota[c];
      remainder.push_back({want - std::floor(want), c});
    }
    std::sort(remainder.begin(), remainder.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (size_t i = 0; i < remainder.size() && assigned < alpha; ++i) {
      if (remainder[i].first <= 0.0) break;
      ++quota[remainder[i].second];
      ++assigned;
    }

    // Per class, take the quota of lowest-uncertainty hit pixels; the map's
    // per-class uncertainty threshold falls out implicitly.
    std::vector<std::vector<size_t>> by_class(k);
    for (size_t px : hits) by_class[render.ml_labels[px] - 1].push_back(px);
    for (int c = 0; c < k; ++c) {
      auto& pool = by_class[c];
      std::sort(pool.begin(), pool.end(), [&](size_t a, size_t b) {
        if (rendered_unc.values[a] != rendered_unc.values[b])
          return rendered_unc.values[a] < rendered_unc.values[b];
        return a < b;
      });
      const size_t take = std::min(quota[c], pool.size());
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + take);
    }
    std::sort(chosen.begin(), chosen.end());
  }

  for (size_t px : chosen) {
    LabelEntry e;
    e.pixel = coord_of(px, render.width);
    e.cls = render.ml_labels[px];
    out.entries.push_back(e);
  }
  return out;
}

SparseLabelImage select_pseudo_dense(const SemanticRender& render, uint64_t frame_id) {
  SparseLabelImage out;
  out.frame_id = frame_id;
  out.width = render.width;
  out.height = render.height;
  out.provenance = Provenance::kPseudo;
  out.alpha = render.width * render.height;
  for (size_t px = 0; px < render.hit_mask.size(); ++px) {
    if (!render.hit_mask[px]) continue;
    LabelEntry e;
    e.pixel = coord_of(px, render.width);
    e.cls = render.ml_labels[px];
    out.entries.push_back(e);
  }
  return out;
}

std::vector<SparseLabelImage> rerender_all_pseudo(
    const std::vector<const Frame*>& pseudo_frames, const MultiLayerMap& map,
    PseudoMode mode, const std::vector<double>& human_class_histogram,
    const SelectionConfig& config) {
  std::vector<SparseLabelImage> out;
  out.reserve(pseudo_frames.size());
  for (const Frame* f : pseudo_frames) {
    const CameraModel cam = f->camera_geometry();
    const SemanticRender render = map.render_semantics(f->pose, cam);
    const UncertaintyImage unc = map.render_uncertainty(f->pose, cam);
    SelectionConfig cfg = config;
    cfg.seed = derive_seed(config.seed, "pseudo-frame", f->id);
    switch (mode) {
      case PseudoMode::kOurs:
        out.push_back(select_pseudo_pixels_ours(render, unc, cfg, f->id));
        break;
      case PseudoMode::kRandom:
        out.push_back(select_pseudo_pixels_baseline(PseudoSelection::kRandom, render,
                                                    unc, human_class_histogram, cfg,
                                                    f->id));
        break;
      case PseudoMode::kDistAlign:
        out.push_back(select_pseudo_pixels_baseline(PseudoSelection::kDistAlign,
                                                    render, unc,
                                                    human_class_histogram, cfg,
                                                    f->id));
        break;
      case PseudoMode::kDense:
        out.push_back(select_pseudo_dense(render, f->id));
        break;
      case PseudoMode::kNone:
        break;
    }
  }
  return out;
}

void save_sparse_labels(const std::string& path, const SparseLabelImage& labels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write labels " + path);
  out << labels.frame_id << "\n";
  for (const auto& e : labels.entries)
    out << e.pixel.m << " " << e.pixel.n << " " << static_cast<int>(e.cls) << " "
        << provenance_name(labels.provenance) << "\n";
}

SparseLabelImage load_sparse_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read labels " + path);
  SparseLabelImage out;
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(path + ": missing frame id line");
  out.frame_id = std::stoull(line);
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    LabelEntry e;
    int cls;
    std::string prov;
    if (!(row >> e.pixel.m >> e.pixel.n >> cls >> prov))
      throw std::runtime_error(path + ": malformed label row: " + line);
    e.cls = static_cast<uint8_t>(cls);
    if (e.cls == kVoidClass)
      throw std::runtime_error(path + ": void class in label entry");
    out.entries.push_back(e);
    if (first) {
      out.provenance = provenance_from_name(prov);
      first = false;
    }
  }
  out.alpha = static_cast<int>(out.entries.size());
  return out;
}

}  // namespace ippsim
