#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <set>

#include "ippsim/common.hpp"
#include "ippsim/labels.hpp"
#include "ippsim/world.hpp"

using namespace ippsim;

namespace {

PredictionTensor tensor_from_labels(const std::vector<uint8_t>& labels, int w, int h,
                                    int k) {
  PredictionTensor p;
  p.width = w;
  p.height = h;
  p.num_classes = k;
  const size_t npx = static_cast<size_t>(w) * h;
  p.probs.assign(npx * k, 0.0);
  p.ml_labels = labels;
  for (size_t px = 0; px < npx; ++px) p.probs[(labels[px] - 1) * npx + px] = 1.0;
  return p;
}

UncertaintyImage unc_image(int w, int h, const std::vector<double>& values) {
  UncertaintyImage u;
  u.width = w;
  u.height = h;
  u.values = values;
  return u;
}

std::vector<uint8_t> checkerboard(int w, int h) {
  std::vector<uint8_t> labels(static_cast<size_t>(w) * h);
  for (int m = 0; m < h; ++m)
    for (int n = 0; n < w; ++n)
      labels[static_cast<size_t>(m) * w + n] = static_cast<uint8_t>(1 + (m + n) % 2);
  return labels;
}

SemanticRender render_from(const std::vector<uint8_t>& ml, const std::vector<uint8_t>& hits,
                           int w, int h, int k) {
  SemanticRender r;
  r.width = w;
  r.height = h;
  r.num_classes = k;
  r.ml_labels = ml;
  r.hit_mask = hits;
  const size_t npx = static_cast<size_t>(w) * h;
  r.probs.assign(npx * k, 0.0);
  for (size_t px = 0; px < npx; ++px)
    if (hits[px]) r.probs[(ml[px] - 1) * npx + px] = 1.0;
  return r;
}

size_t px_of(const PixelCoord& p, int w) { return static_cast<size_t>(p.m) * w + p.n; }

}  // namespace

TEST_CASE("region impurity: constant image scores zero everywhere") {
  const std::vector<uint8_t> labels(64, 2);
  for (double v : region_impurity(labels, 8, 8, 1)) CHECK(v == 0.0);
}

TEST_CASE("region impurity: 3/3/3 neighborhood scores ln 3") {
  // Row stripes 1,2,3 repeating: every interior 3x3 window has 3 of each.
  std::vector<uint8_t> labels(81);
  for (int m = 0; m < 9; ++m)
    for (int n = 0; n < 9; ++n) labels[m * 9 + n] = static_cast<uint8_t>(1 + m % 3);
  const auto imp = region_impurity(labels, 9, 9, 1);
  CHECK(imp[4 * 9 + 4] == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(imp[4 * 9 + 4] == doctest::Approx(1.098612).epsilon(1e-6));
}

TEST_CASE("region impurity: 5-4 split evaluates to 0.686962") {
  // Checkerboard interior pixel: 5 of one class, 4 of the other.
  const auto labels = checkerboard(8, 8);
  const auto imp = region_impurity(labels, 8, 8, 1);
  CHECK(imp[3 * 8 + 3] == doctest::Approx(0.686962).epsilon(1e-6));
}

TEST_CASE("region impurity: border pixels use in-bounds neighbor counts") {
  const auto labels = checkerboard(8, 8);
  const auto imp = region_impurity(labels, 8, 8, 1);
  // Corner: 4 in-bounds neighbors split 2/2 -> ln 2.
  CHECK(imp[0] == doctest::Approx(std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("ours: beta=100 degenerates to uniform sampling over the image") {
  const auto labels = checkerboard(16, 16);
  const auto pred = tensor_from_labels(labels, 16, 16, 2);
  SelectionConfig cfg;
  cfg.alpha = 20;
  cfg.beta = 100.0;
  cfg.seed = 5;
  const auto res = select_human_pixels_ours(pred, cfg);
  CHECK(res.pixels.size() == 20);
  CHECK_FALSE(res.fallback);
  std::set<std::pair<int, int>> distinct;
  for (const auto& p : res.pixels) CHECK(distinct.insert({p.m, p.n}).second);
  // Deterministic under the same seed.
  const auto res2 = select_human_pixels_ours(pred, cfg);
  CHECK(res.pixels == res2.pixels);
}

TEST_CASE("ours: checkerboard selections all sit at maximal impurity") {
  const auto labels = checkerboard(32, 32);
  const auto pred = tensor_from_labels(labels, 32, 32, 2);
  const auto imp = region_impurity(labels, 32, 32, 1);
  const double max_imp = *std::max_element(imp.begin(), imp.end());

  SelectionConfig cfg;
  cfg.alpha = 10;
  cfg.beta = 5.0;
  cfg.seed = 11;
  const auto res = select_human_pixels_ours(pred, cfg);
  CHECK(res.pixels.size() == 10);
  for (const auto& p : res.pixels)
    CHECK(imp[px_of(p, 32)] == doctest::Approx(max_imp).epsilon(1e-12));
}

TEST_CASE("ours: constant prediction falls back to random pixels") {
  const std::vector<uint8_t> labels(32 * 32, 1);
  const auto pred = tensor_from_labels(labels, 32, 32, 2);
  SelectionConfig cfg;
  cfg.alpha = 12;
  cfg.beta = 5.0;
  cfg.seed = 3;
  const auto res = select_human_pixels_ours(pred, cfg);
  CHECK(res.fallback);
  CHECK(res.pool_size == 0);
  CHECK(res.pixels.size() == 12);
}

TEST_CASE("baseline random: alpha distinct pixels, deterministic per seed") {
  const auto pred = tensor_from_labels(checkerboard(16, 16), 16, 16, 2);
  const auto unc = unc_image(16, 16, std::vector<double>(256, 0.5));
  SelectionConfig cfg;
  cfg.alpha = 30;
  cfg.beta = 50.0;
  cfg.seed = 7;
  const auto res =
      select_human_pixels_baseline(HumanSelection::kRandom, pred, unc, cfg);
  CHECK(res.pixels.size() == 30);
  std::set<std::pair<int, int>> distinct;
  for (const auto& p : res.pixels) CHECK(distinct.insert({p.m, p.n}).second);
}

TEST_CASE("baseline unc-rand: picks stay above the (100-beta) percentile") {
  Rng rng(19);
  std::vector<double> values(24 * 24);
  for (double& v : values) v = rng.uniform();
  const auto pred = tensor_from_labels(checkerboard(24, 24), 24, 24, 2);
  const auto unc = unc_image(24, 24, values);
  SelectionConfig cfg;
  cfg.alpha = 14;
  cfg.beta = 5.0;
  cfg.seed = 23;
  const auto res =
      select_human_pixels_baseline(HumanSelection::kUncRand, pred, unc, cfg);
  CHECK(res.pixels.size() == 14);

  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  const size_t cap = static_cast<size_t>(std::ceil(0.05 * values.size()));
  const double threshold = sorted[cap - 1];
  for (const auto& p : res.pixels) CHECK(values[px_of(p, 24)] >= threshold);
}

TEST_CASE("baseline rand-unc: alpha most-uncertain pixels of a random pool") {
  Rng rng(31);
  std::vector<double> values(24 * 24);
  for (double& v : values) v = rng.uniform();
  const auto pred = tensor_from_labels(checkerboard(24, 24), 24, 24, 2);
  const auto unc = unc_image(24, 24, values);
  SelectionConfig cfg;
  cfg.alpha = 10;
  cfg.beta = 25.0;
  cfg.seed = 13;
  const auto res =
      select_human_pixels_baseline(HumanSelection::kRandUnc, pred, unc, cfg);
  CHECK(res.pixels.size() == 10);
  std::set<std::pair<int, int>> distinct;
  double mean_sel = 0.0, mean_all = 0.0;
  for (const auto& p : res.pixels) {
    distinct.insert({p.m, p.n});
    mean_sel += values[px_of(p, 24)];
  }
  for (double v : values) mean_all += v;
  CHECK(distinct.size() == 10);
  // The top slice of a uniform pool is far above the global mean.
  CHECK(mean_sel / 10.0 > mean_all / values.size());
}

TEST_CASE("baseline reg-imp: equals the alpha largest impurities (sort oracle)") {
  WorldGenParams wp;
  wp.cols = 24;
  wp.rows = 24;
  wp.num_classes = 3;
  wp.seed = 2;
  const auto world = WorldModel::generate(wp);
  std::vector<uint8_t> labels(24 * 24);
  for (int j = 0; j < 24; ++j)
    for (int i = 0; i < 24; ++i) labels[j * 24 + i] = world.class_at_cell(i, j);
  const auto pred = tensor_from_labels(labels, 24, 24, 3);
  const auto unc = unc_image(24, 24, std::vector<double>(24 * 24, 0.5));
  SelectionConfig cfg;
  cfg.alpha = 20;
  cfg.beta = 10.0;
  const auto res =
      select_human_pixels_baseline(HumanSelection::kRegImpGreedy, pred, unc, cfg);

  const auto imp = region_impurity(labels, 24, 24, 1);
  std::vector<size_t> idx(imp.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
    if (imp[a] != imp[b]) return imp[a] > imp[b];
    return a < b;
  });
  std::set<size_t> expected(idx.begin(), idx.begin() + 20);
  std::set<size_t> got;
  for (const auto& p : res.pixels) got.insert(px_of(p, 24));
  CHECK(got == expected);
}

TEST_CASE("pseudo ours: all-miss render yields an empty label set") {
  const auto render = render_from(std::vector<uint8_t>(64, kVoidClass),
                                  std::vector<uint8_t>(64, 0), 8, 8, 3);
  const auto unc = unc_image(8, 8, std::vector<double>(64, 1.0));
  SelectionConfig cfg;
  cfg.alpha = 3;
  cfg.beta = 50.0;
  bool fallback = false;
  const auto out = select_pseudo_pixels_ours(render, unc, cfg, 7, &fallback);
  CHECK(out.entries.empty());
  CHECK(fallback);
  CHECK(out.provenance == Provenance::kPseudo);
}

TEST_CASE("pseudo ours: uniform uncertainty is a plain random hit sample") {
  std::vector<uint8_t> hits(16 * 16, 1);
  std::vector<uint8_t> ml(16 * 16, 2);
  const auto render = render_from(ml, hits, 16, 16, 3);
  const auto unc = unc_image(16, 16, std::vector<double>(256, 0.4));
  SelectionConfig cfg;
  cfg.alpha = 12;
  cfg.beta = 100.0;  // degenerate order: every hit is in the pool
  cfg.seed = 9;
  const auto out = select_pseudo_pixels_ours(render, unc, cfg, 1);
  CHECK(out.entries.size() == 12);
  for (const auto& e : out.entries) CHECK(e.cls == 2);
}

TEST_CASE("pseudo ours: picks stay below the beta percentile of hit uncertainty") {
  Rng rng(77);
  const int w = 20, h = 20;
  std::vector<uint8_t> hits(w * h, 0);
  std::vector<uint8_t> ml(w * h, kVoidClass);
  std::vector<double> values(w * h, 1.0);
  std::vector<double> hit_unc;
  for (int px = 0; px < w * h; ++px) {
    if (rng.uniform() < 0.7) {
      hits[px] = 1;
      ml[px] = static_cast<uint8_t>(1 + rng.uniform_int(3));
      values[px] = rng.uniform();
      hit_unc.push_back(values[px]);
    }
  }
  const auto render = render_from(ml, hits, w, h, 3);
  const auto unc = unc_image(w, h, values);
  SelectionConfig cfg;
  cfg.alpha = 5;
  cfg.beta = 10.0;
  cfg.seed = 21;
  const auto out = select_pseudo_pixels_ours(render, unc, cfg, 2);
  CHECK(out.entries.size() == 5);

  std::sort(hit_unc.begin(), hit_unc.end());
  const size_t cap = static_cast<size_t>(std::ceil(0.10 * hit_unc.size()));
  const double threshold = hit_unc[cap - 1];
  for (const auto& e : out.entries)
    CHECK(values[px_of(e.pixel, w)] <= threshold + 1e-12);
}

TEST_CASE("pseudo pool exhaustion returns every hit pixel") {
  std::vector<uint8_t> hits(64, 0);
  std::vector<uint8_t> ml(64, kVoidClass);
  hits[3] = hits[17] = hits[40] = 1;
  ml[3] = 1;
  ml[17] = 2;
  ml[40] = 1;
  const auto render = render_from(ml, hits, 8, 8, 2);
  const auto unc = unc_image(8, 8, std::vector<double>(64, 0.5));
  SelectionConfig cfg;
  cfg.alpha = 5;
  cfg.beta = 100.0;
  const auto out = select_pseudo_pixels_baseline(PseudoSelection::kRandom, render,
                                                 unc, {}, cfg, 3);
  CHECK(out.entries.size() == 3);
  std::set<size_t> got;
  for (const auto& e : out.entries) got.insert(px_of(e.pixel, 8));
  CHECK(got == std::set<size_t>{3, 17, 40});
}

TEST_CASE("dist-align: uniform histogram splits the quota evenly") {
  const int w = 16, h = 16;
  std::vector<uint8_t> hits(w * h, 1);
  std::vector<uint8_t> ml(w * h);
  for (int px = 0; px < w * h; ++px) ml[px] = static_cast<uint8_t>(1 + (px / 8) % 2);
  const auto render = render_from(ml, hits, w, h, 2);
  Rng rng(5);
  std::vector<double> values(w * h);
  for (double& v : values) v = rng.uniform();
  const auto unc = unc_image(w, h, values);

  SelectionConfig cfg;
  cfg.alpha = 10;
  cfg.beta = 100.0;
  const auto out = select_pseudo_pixels_baseline(PseudoSelection::kDistAlign, render,
                                                 unc, {0.5, 0.5}, cfg, 4);
  CHECK(out.entries.size() == 10);
  int per_class[2] = {0, 0};
  for (const auto& e : out.entries) ++per_class[e.cls - 1];
  CHECK(per_class[0] == 5);
  CHECK(per_class[1] == 5);
}

TEST_CASE("dist-align quotas never exceed alpha") {
  Rng rng(8);
  const int w = 12, h = 12;
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<uint8_t> hits(w * h), ml(w * h, kVoidClass);
    std::vector<double> values(w * h, 1.0);
    for (int px = 0; px < w * h; ++px) {
      hits[px] = rng.uniform() < 0.5 ? 1 : 0;
      if (hits[px]) {
        ml[px] = static_cast<uint8_t>(1 + rng.uniform_int(3));
        values[px] = rng.uniform();
      }
    }
    std::vector<double> hist = {rng.uniform(), rng.uniform(), rng.uniform()};
    const double s = hist[0] + hist[1] + hist[2];
    for (double& v : hist) v /= s;
    SelectionConfig cfg;
    cfg.alpha = 9;
    cfg.beta = 100.0;
    const auto out = select_pseudo_pixels_baseline(
        PseudoSelection::kDistAlign, render_from(ml, hits, w, h, 3),
        unc_image(w, h, values), hist, cfg, trial);
    CHECK(out.entries.size() <= 9);
  }
}

TEST_CASE("sparse label file round trip") {
  SparseLabelImage labels;
  labels.frame_id = 42;
  labels.width = 8;
  labels.height = 8;
  labels.provenance = Provenance::kPseudo;
  labels.alpha = 3;
  labels.entries = {{{1, 2}, 3}, {{5, 0}, 1}, {{7, 7}, 2}};
  const std::string path =
      (std::filesystem::temp_directory_path() / "ippsim_labels.txt").string();
  save_sparse_labels(path, labels);
  const auto loaded = load_sparse_labels(path);
  CHECK(loaded.frame_id == 42);
  CHECK(loaded.provenance == Provenance::kPseudo);
  REQUIRE(loaded.entries.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(loaded.entries[i].pixel == labels.entries[i].pixel);
    CHECK(loaded.entries[i].cls == labels.entries[i].cls);
  }
}

TEST_CASE("ours stochastically dominates random selection on impurity") {
  // Mann-Whitney U over repeated draws on one fixed prediction.
  WorldGenParams wp;
  wp.cols = 32;
  wp.rows = 32;
  wp.num_classes = 4;
  wp.seed = 3;
  const auto world = WorldModel::generate(wp);
  std::vector<uint8_t> labels(32 * 32);
  for (int j = 0; j < 32; ++j)
    for (int i = 0; i < 32; ++i) labels[j * 32 + i] = world.class_at_cell(i, j);
  const auto pred = tensor_from_labels(labels, 32, 32, 4);
  const auto imp = region_impurity(labels, 32, 32, 1);
  const auto unc = unc_image(32, 32, std::vector<double>(32 * 32, 0.5));

  std::vector<double> ours_scores, random_scores;
  for (uint64_t seed = 1; seed <= 40; ++seed) {
    SelectionConfig cfg;
    cfg.alpha = 10;
    cfg.beta = 5.0;
    cfg.seed = seed;
    for (const auto& p : select_human_pixels_ours(pred, cfg).pixels)
      ours_scores.push_back(imp[px_of(p, 32)]);
    for (const auto& p :
         select_human_pixels_baseline(HumanSelection::kRandom, pred, unc, cfg).pixels)
      random_scores.push_back(imp[px_of(p, 32)]);
  }

  // Rank-sum with average ranks for ties.
  std::vector<std::pair<double, int>> pooled;  // (value, group)
  for (double v : ours_scores) pooled.push_back({v, 0});
  for (double v : random_scores) pooled.push_back({v, 1});
  std::sort(pooled.begin(), pooled.end());
  std::vector<double> ranks(pooled.size());
  for (size_t i = 0; i < pooled.size();) {
    size_t j = i;
    while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
    const double avg = 0.5 * (i + 1 + j);  // average of ranks i+1..j
    for (size_t t = i; t < j; ++t) ranks[t] = avg;
    i = j;
  }
  double r_ours = 0.0;
  for (size_t i = 0; i < pooled.size(); ++i)
    if (pooled[i].second == 0) r_ours += ranks[i];
  const double n1 = static_cast<double>(ours_scores.size());
  const double n2 = static_cast<double>(random_scores.size());
  const double u = r_ours - n1 * (n1 + 1) / 2.0;
  const double mean_u = n1 * n2 / 2.0;
  const double sd_u = std::sqrt(n1 * n2 * (n1 + n2 + 1) / 12.0);
  const double z = (u - mean_u) / sd_u;
  CHECK(z > 3.0);  // one-sided dominance, far beyond p < 0.01
}

TEST_CASE("rerender: deterministic per map+seed, one output per stored frame") {
  WorldGenParams wp;
  wp.cols = 24;
  wp.rows = 24;
  wp.num_classes = 3;
  wp.seed = 6;
  const auto world = WorldModel::generate(wp);
  CameraModel cam;
  cam.width = 16;
  cam.height = 16;
  cam.footprint = 8.0;
  cam.noise_amp = 0.0;

  MultiLayerMap map = MultiLayerMap::for_world(world, 3);
  std::vector<Frame> frames;
  uint64_t id = 0;
  for (double x : {6.0, 12.0, 18.0})
    frames.push_back(world.sense({x, 12.0, 30.0}, cam, id + 1, id)), ++id;
  for (const Frame& f : frames) {
    const auto& gt = GroundTruthGate::labels(f);
    PredictionTensor pred;
    pred.width = cam.width;
    pred.height = cam.height;
    pred.num_classes = 3;
    const size_t npx = gt.size();
    pred.probs.assign(npx * 3, 0.0);
    pred.ml_labels = gt;
    for (size_t px = 0; px < npx; ++px) pred.probs[(gt[px] - 1) * npx + px] = 1.0;
    UncertaintyImage u;
    u.width = cam.width;
    u.height = cam.height;
    u.values.assign(npx, 0.2);
    map.integrate_frame(f, pred, u);
  }

  std::vector<const Frame*> ptrs;
  for (const Frame& f : frames) ptrs.push_back(&f);
  SelectionConfig cfg;
  cfg.alpha = 8;
  cfg.beta = 20.0;
  cfg.seed = 17;
  const auto a = rerender_all_pseudo(ptrs, map, PseudoMode::kOurs, {}, cfg);
  const auto b = rerender_all_pseudo(ptrs, map, PseudoMode::kOurs, {}, cfg);
  REQUIRE(a.size() == ptrs.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].frame_id == frames[i].id);
    REQUIRE(a[i].entries.size() == b[i].entries.size());
    for (size_t e = 0; e < a[i].entries.size(); ++e) {
      CHECK(a[i].entries[e].pixel == b[i].entries[e].pixel);
      CHECK(a[i].entries[e].cls == b[i].entries[e].cls);
    }
  }
}

TEST_CASE("pseudo selection error rate does not exceed the all-hit error rate") {
  // Corrupted predictions carry high uncertainty; good ones carry low. The
  // low-uncertainty pool must therefore be at least as accurate as the full
  // hit set.
  WorldGenParams wp;
  wp.cols = 48;
  wp.rows = 48;
  wp.num_classes = 4;
  wp.seed = 12;
  const auto world = WorldModel::generate(wp);
  CameraModel cam;
  cam.width = 24;
  cam.height = 24;
  cam.footprint = 12.0;
  cam.noise_amp = 0.0;

  MultiLayerMap map = MultiLayerMap::for_world(world, 4);
  Rng rng(55);
  std::vector<Frame> frames;
  uint64_t id = 0;
  for (double y : {6.0, 18.0, 30.0, 42.0})
    for (double x : {6.0, 12.0, 18.0, 24.0, 30.0, 36.0, 42.0})
      frames.push_back(world.sense({x, y, 30.0}, cam, id + 1, id)), ++id;
  REQUIRE(frames.size() >= 20);

  for (const Frame& f : frames) {
    const auto& gt = GroundTruthGate::labels(f);
    const size_t npx = gt.size();
    PredictionTensor pred;
    pred.width = cam.width;
    pred.height = cam.height;
    pred.num_classes = 4;
    pred.probs.assign(npx * 4, 0.0);
    pred.ml_labels.resize(npx);
    UncertaintyImage u;
    u.width = cam.width;
    u.height = cam.height;
    u.values.resize(npx);
    // Corrupt a third of the pixels: wrong one-hot class, high uncertainty.
    for (size_t px = 0; px < npx; ++px) {
      const bool corrupt = rng.uniform() < 0.33;
      uint8_t cls = gt[px];
      if (corrupt) cls = static_cast<uint8_t>(1 + (cls % 4));
      pred.ml_labels[px] = cls;
      pred.probs[(cls - 1) * npx + px] = 1.0;
      u.values[px] = corrupt ? rng.uniform(0.7, 1.0) : rng.uniform(0.0, 0.3);
    }
    map.integrate_frame(f, pred, u);
  }

  size_t sel_err = 0, sel_total = 0, all_err = 0, all_total = 0;
  for (const Frame& f : frames) {
    const auto render = map.render_semantics(f.pose, cam);
    const auto unc = map.render_uncertainty(f.pose, cam);
    const auto& gt = GroundTruthGate::labels(f);
    SelectionConfig cfg;
    cfg.alpha = 20;
    cfg.beta = 10.0;
    cfg.seed = f.id;
    const auto picks = select_pseudo_pixels_ours(render, unc, cfg, f.id);
    for (const auto& e : picks.entries) {
      ++sel_total;
      if (e.cls != gt[px_of(e.pixel, cam.width)]) ++sel_err;
    }
    for (size_t px = 0; px < render.hit_mask.size(); ++px) {
      if (!render.hit_mask[px]) continue;
      ++all_total;
      if (render.ml_labels[px] != gt[px]) ++all_err;
    }
  }
  REQUIRE(sel_total > 0);
  REQUIRE(all_total > 0);
  const double sel_rate = static_cast<double>(sel_err) / sel_total;
  const double all_rate = static_cast<double>(all_err) / all_total;
  CHECK(sel_rate <= all_rate + 1e-12);
}

TEST_CASE("a map improved on a region does not lose pseudo-label accuracy") {
  WorldGenParams wp;
  wp.cols = 32;
  wp.rows = 32;
  wp.num_classes = 3;
  wp.seed = 25;
  const auto world = WorldModel::generate(wp);
  CameraModel cam;
  cam.width = 16;
  cam.height = 16;
  cam.footprint = 8.0;
  cam.noise_amp = 0.0;

  std::vector<Frame> frames;
  uint64_t id = 0;
  for (double x : {8.0, 16.0, 24.0})
    frames.push_back(world.sense({x, 16.0, 30.0}, cam, id + 1, id)), ++id;

  auto integrate = [&](bool corrupted) {
    MultiLayerMap map = MultiLayerMap::for_world(world, 3);
    Rng rng(9);
    for (const Frame& f : frames) {
      const auto& gt = GroundTruthGate::labels(f);
      const size_t npx = gt.size();
      PredictionTensor pred;
      pred.width = cam.width;
      pred.height = cam.height;
      pred.num_classes = 3;
      pred.probs.assign(npx * 3, 0.0);
      pred.ml_labels.resize(npx);
      UncertaintyImage u;
      u.width = cam.width;
      u.height = cam.height;
      u.values.assign(npx, 0.2);
      for (size_t px = 0; px < npx; ++px) {
        uint8_t cls = gt[px];
        if (corrupted && rng.uniform() < 0.4)
          cls = static_cast<uint8_t>(1 + (cls % 3));
        pred.ml_labels[px] = cls;
        pred.probs[(cls - 1) * npx + px] = 1.0;
      }
      map.integrate_frame(f, pred, u);
    }
    return map;
  };

  const auto before = integrate(true);
  const auto after = integrate(false);
  std::vector<const Frame*> ptrs;
  for (const Frame& f : frames) ptrs.push_back(&f);
  SelectionConfig cfg;
  cfg.alpha = 10;
  cfg.beta = 50.0;
  cfg.seed = 31;

  auto accuracy_of = [&](const MultiLayerMap& m) {
    size_t ok = 0, total = 0;
    const auto sel = rerender_all_pseudo(ptrs, m, PseudoMode::kOurs, {}, cfg);
    for (size_t i = 0; i < sel.size(); ++i) {
      const auto& gt = GroundTruthGate::labels(frames[i]);
      for (const auto& e : sel[i].entries) {
        ++total;
        if (e.cls == gt[px_of(e.pixel, cam.width)]) ++ok;
      }
    }
    REQUIRE(total > 0);
    return static_cast<double>(ok) / total;
  };
  CHECK(accuracy_of(after) >= accuracy_of(before));
}
