#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include "oracles.hpp"
#include "tactwin/errors.hpp"
#include "tactwin/loss.hpp"
#include "tactwin/toy_head.hpp"

using namespace tactwin;
using doctest::Approx;

namespace {

constexpr double kScale = 0.05;

LossTarget target(double cx, double cy, double w, double h, double theta = 0.0, std::size_t cls = 0,
                  double force = 1.0) {
  return {make_box(cx, cy, w, h, theta), cls, AngleDeg(theta), force};
}

/// Every cell predicts a `w` x `h` box on its own centre.
PredictionField uniform_field(const RegionGrid& g, std::size_t classes, double w, double h) {
  PredictionField p(g.size(), classes);
  for (std::size_t c = 0; c < g.size(); ++c) {
    p.box_at(c)[2] = w;
    p.box_at(c)[3] = h;
  }
  return p;
}

/// Predictions that reproduce every target exactly at its positives.
PredictionField perfect_field(const RegionGrid& g, std::size_t classes, const std::vector<LossTarget>& ts,
                              const Assignment& a, const LossParams& lp) {
  PredictionField p(g.size(), classes);
  std::fill(p.obj.begin(), p.obj.end(), lp.eps);
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const CslVector label = csl_encode(ts[t].theta, lp.csl);
    for (std::size_t c : a.positives[t]) {
      p.obj[c] = 1.0 - lp.eps;
      for (std::size_t k = 0; k < classes; ++k) p.cls_at(c, k) = k == ts[t].class_index ? 1.0 - lp.eps : lp.eps;
      for (std::size_t b = 0; b < kCslBins; ++b) p.csl_at(c, b) = label.bins[b];
      p.force[c] = ts[t].force;
      p.set_box(g, c, kScale, ts[t].box);
    }
  }
  return p;
}

}  // namespace

TEST_CASE("bce closed forms") {
  CHECK(bce(0.5, 1.0) == Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(bce(0.3, 0.3) == Approx(-(0.3 * std::log(0.3) + 0.7 * std::log(0.7))).epsilon(1e-12));
  CHECK(bce(0.3, 0.3) == Approx(0.6109).epsilon(1e-4));
  CHECK(bce(0.0, 0.0) == Approx(-std::log(1.0 - 1e-7)).epsilon(1e-9));
  CHECK(std::isfinite(bce(1.0, 0.0)));
  CHECK(bce_grad(0.5, 1.0) == Approx(-2.0).epsilon(1e-12));
  CHECK(bce_grad(0.0, 1.0) == 0.0);
}

TEST_CASE("smooth_l1 closed forms") {
  CHECK(smooth_l1(0.0) == 0.0);
  CHECK(smooth_l1(0.5) == Approx(0.125).epsilon(1e-12));
  CHECK(smooth_l1(2.0) == Approx(1.5).epsilon(1e-12));
  CHECK(smooth_l1(-2.0) == Approx(1.5).epsilon(1e-12));
  CHECK(smooth_l1(1.0 - 1e-9) == Approx(smooth_l1(1.0 + 1e-9)).epsilon(1e-8));
  CHECK(smooth_l1_grad(0.3) == Approx(0.3));
  CHECK(smooth_l1_grad(-4.0) == -1.0);
}

TEST_CASE("box loss is one minus IoU squared") {
  const OrientedBox a = make_box(0, 0, 4, 2, 0);
  CHECK(box_loss(a, a) == Approx(0.0).epsilon(1e-12));
  CHECK(box_loss(a, make_box(2, 0, 4, 2, 0)) == Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(box_loss(a, make_box(20, 0, 4, 2, 0)) == 1.0);
}

TEST_CASE("simOTA picks the dynamic-k cheapest candidates of a 3x3 block") {
  const RegionGrid g = build_region_grid(640);
  LossParams lp;
  // level-8 cell (40, 40) is centred at (0.2, 0.2) mm; the box spans its 3x3 neighbourhood
  const LossTarget t = target(0.2, 0.2, 1.2, 1.2);
  const PredictionField p = uniform_field(g, 1, 1.2, 1.2);
  const Assignment a = simota_assign(p, {t}, g, kScale, lp);

  std::vector<std::pair<double, std::size_t>> cost;
  std::vector<double> ious;
  for (std::size_t c = 0; c < g.size(); ++c) {
    const Vec2 q = cell_center_mm(g, c, kScale);
    const bool in_box = oracle::inside(t.box, q.x, q.y);
    const bool near = std::hypot(q.x - 0.2, q.y - 0.2) <= 2.5 * g.cells[c].stride * kScale;
    if (!in_box && !near) continue;
    const double iou = rotated_iou(make_box(q.x, q.y, 1.2, 1.2, 0), t.box);
    ious.push_back(iou);
    cost.push_back({std::log(2.0) + 3.0 * (1.0 - iou * iou), c});
  }
  std::sort(ious.rbegin(), ious.rend());
  const double top = std::accumulate(ious.begin(), ious.begin() + std::min<std::size_t>(10, ious.size()), 0.0);
  const auto k = static_cast<std::size_t>(std::floor(top));
  std::sort(cost.begin(), cost.end());
  std::vector<std::size_t> expected;
  for (std::size_t i = 0; i < k; ++i) expected.push_back(cost[i].second);
  std::sort(expected.begin(), expected.end());

  CHECK(a.positives[0] == expected);
  for (std::size_t c : a.positives[0]) {
    const Vec2 q = cell_center_mm(g, c, kScale);
    CHECK(oracle::inside(t.box, q.x, q.y));
  }
  CHECK(a.total_positives() == k);
}

TEST_CASE("simOTA single candidate and contention") {
  const RegionGrid g = build_region_grid(64);
  LossParams lp;
  lp.center_radius = 0.1;
  // a tiny box around the first level-8 cell centre catches only that cell
  const Vec2 c0 = cell_center_mm(g, 0, kScale);
  const Assignment one = simota_assign(uniform_field(g, 1, 0.1, 0.1), {target(c0.x, c0.y, 0.1, 0.1)}, g, kScale, lp);
  CHECK(one.positives[0] == std::vector<std::size_t>{0});
  CHECK(one.total_positives() == 1);

  LossParams wide;
  const PredictionField p = uniform_field(g, 1, 0.8, 0.8);
  const Vec2 a = cell_center_mm(g, 3 * 8 + 3, kScale);
  const Vec2 b = cell_center_mm(g, 3 * 8 + 4, kScale);
  const std::vector<LossTarget> ts{target(a.x, a.y, 0.8, 0.8), target(b.x, b.y, 0.8, 0.8)};
  const Assignment m = simota_assign(p, ts, g, kScale, wide);
  check_assignment(m, p, ts);
  CHECK(m.owner[3 * 8 + 3] == 0);
  CHECK(m.owner[3 * 8 + 4] == 1);
  CHECK_FALSE(m.positives[0].empty());
  CHECK_FALSE(m.positives[1].empty());
  CHECK(simota_assign(p, ts, g, kScale, wide, 4).owner == m.owner);

  CHECK_THROWS_AS(simota_assign(p, {target(50.0, 50.0, 0.5, 0.5)}, g, kScale, wide), AssignmentError);
}

TEST_CASE("total loss closed forms") {
  const RegionGrid g = build_region_grid(640);
  LossParams lp;
  const PredictionField uniform(g.size(), 1);
  const Assignment none = simota_assign(uniform, {}, g, kScale, lp);
  const LossBreakdown l = total_loss(uniform, {}, none, g, kScale, lp);
  CHECK(std::abs(l.total - 8400.0 * std::log(2.0)) < 1e-6);
  CHECK(l.cls == 0.0);

  const std::vector<LossTarget> ts{target(1.0, -2.0, 3.0, 1.5, 30.0, 0, 2.0)};
  const Assignment a = simota_assign(uniform_field(g, 1, 3.0, 1.5), ts, g, kScale, lp);
  PredictionField p = perfect_field(g, 1, ts, a, lp);
  const LossBreakdown perfect = total_loss(p, ts, a, g, kScale, lp);
  CHECK(perfect.force == 0.0);
  CHECK(perfect.box == Approx(0.0).epsilon(1e-12));
  CHECK(perfect.obj == Approx(8400.0 * -std::log(1.0 - 1e-7)).epsilon(1e-9));
  CHECK(perfect.total == Approx(perfect.cls + perfect.csl + perfect.force + perfect.box + perfect.obj).epsilon(1e-12));

  const std::size_t c = a.positives[0].front();
  p.force[c] += 2.0;
  CHECK(total_loss(p, ts, a, g, kScale, lp).force == Approx(1.5).epsilon(1e-12));
}

TEST_CASE("inconsistent assignment is a contract violation") {
  const RegionGrid g = build_region_grid(64);
  const PredictionField p(g.size(), 1);
  Assignment a;
  a.owner.assign(g.size(), kUnassigned);
  a.positives.resize(1);
  CHECK_THROWS_AS(total_loss(p, {target(0, 0, 1, 1)}, a, g, kScale, {}), ContractViolation);
  a.positives[0] = {5};
  CHECK_THROWS_AS(total_loss(p, {target(0, 0, 1, 1)}, a, g, kScale, {}), ContractViolation);
}

TEST_CASE("analytic gradients agree with central differences") {
  const RegionGrid g = build_region_grid(64);
  LossParams lp;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> prob(0.05, 0.95), pos(-1.0, 1.0), ang(0.0, 180.0);
  const std::vector<LossTarget> ts{target(pos(rng), pos(rng), 0.9, 0.5, ang(rng), 1, 2.0),
                                   target(pos(rng), pos(rng), 0.6, 0.6, ang(rng), 0, 0.4)};
  PredictionField p = uniform_field(g, 2, 0.7, 0.6);
  for (auto& v : p.obj) v = prob(rng);
  for (auto& v : p.cls) v = prob(rng);
  for (auto& v : p.csl) v = prob(rng);
  for (auto& v : p.force) v = 3.0 * prob(rng);
  const Assignment a = simota_assign(p, ts, g, kScale, lp);
  const PredictionField grad = loss_gradient(p, ts, a, g, kScale, lp);
  auto check = [&](std::vector<double> PredictionField::*channel, std::size_t i) {
    const double h = 1e-6;
    PredictionField q = p;
    (q.*channel)[i] = (p.*channel)[i] + h;
    const double up = total_loss(q, ts, a, g, kScale, lp).total;
    (q.*channel)[i] = (p.*channel)[i] - h;
    const double down = total_loss(q, ts, a, g, kScale, lp).total;
    const double fd = (up - down) / (2.0 * h);
    const double an = (grad.*channel)[i];
    CHECK(std::abs(an - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
  };
  const std::size_t c = a.positives[0].front();
  check(&PredictionField::obj, c);
  check(&PredictionField::obj, 0);
  check(&PredictionField::cls, c * 2 + 1);
  check(&PredictionField::csl, c * kCslBins + 17);
  check(&PredictionField::force, c);
  CHECK(grad.force[0 == c ? 1 : 0] == 0.0);
}

// ---- toy head --------------------------------------------------------------

namespace {

/// Two classes on the 84-cell grid. Features around the contact carry a
/// bump, the class sign and the force, so every channel is linearly solvable.
ToyDataset separable_toy(std::size_t n, std::uint64_t seed) {
  ToyDataset d;
  d.grid = build_region_grid(64);
  d.scale = kScale;
  d.dim = 4;
  d.classes = 2;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-0.8, 0.8), f(0.0, 3.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % 2;
    const LossTarget t = target(pos(rng), pos(rng), 0.8, 0.8, 0.0, k, f(rng));
    ToySample s;
    s.targets.push_back(t);
    for (std::size_t c = 0; c < d.grid.size(); ++c) {
      const Vec2 q = cell_center_mm(d.grid, c, kScale);
      const double bump = std::exp(-(std::pow(q.x - t.box.cx, 2) + std::pow(q.y - t.box.cy, 2)) / (2 * 0.16));
      s.features.insert(s.features.end(), {bump, bump * (k == 0 ? 1.0 : -1.0), bump * t.force, q.x * bump});
    }
    d.samples.push_back(std::move(s));
  }
  return d;
}

}  // namespace

TEST_CASE("toy head with zero learning rate keeps a flat curve") {
  const ToyDataset d = separable_toy(8, 1);
  ToyHead head = init_toy_head(d, {});
  ToyHyperParams h;
  h.learning_rate = 0.0;
  h.epochs = 5;
  const TrainResult r = fit_toy_head(head, d, h);
  REQUIRE(r.curve.size() == 5);
  for (const auto& e : r.curve) CHECK(e.total == r.curve.front().total);
  CHECK_FALSE(r.diverged);
}

TEST_CASE("toy head separates two classes with a monotone curve") {
  const ToyDataset d = separable_toy(24, 2);
  ToyHead head = init_toy_head(d, {});
  ToyHyperParams h;
  h.epochs = 500;
  const TrainResult r = fit_toy_head(head, d, h);
  CHECK_FALSE(r.diverged);
  for (std::size_t e = 1; e < r.curve.size(); ++e) CHECK(r.curve[e].total <= r.curve[e - 1].total);
  const LossBreakdown end = evaluate_toy_head(head, d, {});
  CHECK(end.cls / static_cast<double>(d.samples.size()) < 0.01);
}

TEST_CASE("toy loss matches the dense total loss of its predictions") {
  const ToyDataset d = separable_toy(4, 3);
  ToyHead head = init_toy_head(d, {});
  ToyHyperParams h;
  h.epochs = 7;
  fit_toy_head(head, d, h);
  const LossParams lp;
  const Vec2 wh = prior_box_size(d);
  double dense = 0.0;
  for (const ToySample& s : d.samples) {
    const Assignment a = prior_assignment(s.targets, d.grid, d.scale, d.classes, wh, lp);
    dense += total_loss(head.predict(s.features, d.grid.size()), s.targets, a, d.grid, d.scale, lp).total;
  }
  CHECK(evaluate_toy_head(head, d, lp).total == Approx(dense).epsilon(1e-9));
}

TEST_CASE("resumed toy training reproduces the next epoch") {
  const ToyDataset d = separable_toy(6, 4);
  ToyHyperParams h;
  h.epochs = 11;
  ToyHead full = init_toy_head(d, {});
  const TrainResult straight = fit_toy_head(full, d, h);

  ToyHead part = init_toy_head(d, {});
  h.epochs = 10;
  fit_toy_head(part, d, h);
  const auto path = std::filesystem::temp_directory_path() / "tactwin_unit_head.json";
  save_toy_head(part, path);
  ToyHead resumed = load_toy_head(path);
  std::filesystem::remove(path);
  CHECK(resumed.epochs_trained == 10);
  h.epochs = 1;
  const TrainResult next = fit_toy_head(resumed, d, h);
  CHECK(next.curve.front().total == straight.curve[10].total);
  CHECK(resumed.force.weights == full.force.weights);
}

TEST_CASE("toy head load rejects malformed files") {
  const auto path = std::filesystem::temp_directory_path() / "tactwin_unit_bad_head.json";
  { std::ofstream(path) << "{\"version\": 1}"; }
  CHECK_THROWS_AS(load_toy_head(path), IoError);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_toy_head(path), IoError);
}
