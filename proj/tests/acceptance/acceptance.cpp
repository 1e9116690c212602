// Acceptance suite. With no arguments every criterion runs; --criterion N
// runs one. Prints one PASS/FAIL line per criterion plus its measurements and
// exits non-zero when any selected criterion fails.

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "../unit/oracles.hpp"
#include "tactwin/cli.hpp"
#include "tactwin/config.hpp"
#include "tactwin/errors.hpp"

using namespace tactwin;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    notes.push_back((ok ? "ok    " : "FAIL  ") + what);
  }
  void note(const std::string& what) { notes.push_back("      " + what); }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string opt(const std::optional<double>& v, const char* f = "%.4f") {
  return v ? fmt(f, *v) : std::string("undefined");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr double kScale = 0.05;

// ---- 1 ---------------------------------------------------------------------

Outcome angle_metric() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> ang(0.0, 180.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double a = ang(rng), b = ang(rng);
    const double d = std::abs(a - b);
    worst = std::max(worst, std::abs(angle_error(AngleDeg(a), AngleDeg(b)) - std::min(d, 180.0 - d)));
  }
  const double elapsed = seconds_since(t0);
  o.require(worst <= 1e-9, "10^4 pairs, max deviation from min(d, 180-d) " + fmt("%.3g deg", worst));
  const double e = angle_error(AngleDeg(1.0), AngleDeg(179.0));
  o.require(e == 2.0, "(1, 179) -> " + fmt("%.17g", e));
  o.require(elapsed < 1.0, "runtime " + fmt("%.3f s", elapsed));
  return o;
}

// ---- 2 ---------------------------------------------------------------------

Outcome rotated_iou_check() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> c(-2.0, 2.0), s(0.5, 4.0), ang(0.0, 180.0);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const OrientedBox a = make_box(c(rng), c(rng), s(rng), s(rng), ang(rng));
    const OrientedBox b = make_box(c(rng), c(rng), s(rng), s(rng), ang(rng));
    worst = std::max(worst, std::abs(rotated_iou(a, b) - oracle::monte_carlo_iou(a, b, 1000000, rng)));
  }
  o.require(worst <= 0.01, "200 pairs vs 10^6-sample Monte Carlo, max deviation " + fmt("%.4f", worst));

  double axis_worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double ax = c(rng), ay = c(rng), aw = s(rng), ah = s(rng);
    const double bx = c(rng), by = c(rng), bw = s(rng), bh = s(rng);
    const double ix = std::max(0.0, std::min(ax + aw / 2, bx + bw / 2) - std::max(ax - aw / 2, bx - bw / 2));
    const double iy = std::max(0.0, std::min(ay + ah / 2, by + bh / 2) - std::max(ay - ah / 2, by - bh / 2));
    const double inter = ix * iy;
    const double closed = inter / (aw * ah + bw * bh - inter);
    axis_worst = std::max(axis_worst, std::abs(rotated_iou(make_box(ax, ay, aw, ah, 0), make_box(bx, by, bw, bh, 0)) - closed));
  }
  o.require(axis_worst <= 1e-12, "1000 axis-aligned pairs, max deviation " + fmt("%.3g", axis_worst));

  const double r2 = std::sqrt(2.0) - 1.0;
  const double octagon = 8.0 * r2 / (8.0 - 8.0 * r2);
  const double got = rotated_iou(make_box(0, 0, 2, 2, 0), make_box(0, 0, 2, 2, 45));
  o.require(std::abs(got - octagon) <= 1e-9, "45 deg square " + fmt("%.12f", got) + " vs " + fmt("%.12f", octagon));
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 30.0, "runtime " + fmt("%.2f s", elapsed));
  return o;
}

// ---- 3 ---------------------------------------------------------------------

Outcome gradient_check() {
  Outcome o;
  const auto t0 = std::chrono::steady_clock::now();
  const RegionGrid g = build_region_grid(64);
  LossParams lp;
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> prob(0.05, 0.95), pos(-1.2, 1.2), ang(0.0, 180.0), sz(0.4, 1.0),
      force(0.0, 4.0);
  std::uniform_int_distribution<int> channel(0, 3);
  const double h = 1e-6;
  const char* names[] = {"obj", "cls", "csl", "force"};
  double worst[4] = {0, 0, 0, 0};
  int counts[4] = {0, 0, 0, 0};

  int done = 0;
  while (done < 1000) {
    std::vector<LossTarget> ts;
    for (std::size_t k = 0; k < 2; ++k) {
      const double th = ang(rng);
      ts.push_back({make_box(pos(rng), pos(rng), sz(rng), sz(rng), th), k, AngleDeg(th), force(rng)});
    }
    PredictionField p(g.size(), 2);
    for (auto& v : p.obj) v = prob(rng);
    for (auto& v : p.cls) v = prob(rng);
    for (auto& v : p.csl) v = prob(rng);
    for (auto& v : p.force) v = force(rng);
    for (std::size_t c = 0; c < g.size(); ++c) {
      const Vec2 q = cell_center_mm(g, c, kScale);
      p.set_box(g, c, kScale, make_box(q.x, q.y, sz(rng), sz(rng), ang(rng)));
    }
    Assignment a;
    try {
      a = simota_assign(p, ts, g, kScale, lp);
    } catch (const AssignmentError&) {
      continue;
    }
    std::vector<std::size_t> positives;
    for (const auto& v : a.positives) positives.insert(positives.end(), v.begin(), v.end());
    std::uniform_int_distribution<std::size_t> any(0, g.size() - 1), pick(0, positives.size() - 1),
        cls_pick(0, 1), bin(0, kCslBins - 1);

    const int ch = channel(rng);
    std::vector<double> PredictionField::*field = nullptr;
    double LossBreakdown::*term = nullptr;
    std::size_t index = 0;
    double target = 0.0;
    const std::size_t cell = ch == 0 ? any(rng) : positives[pick(rng)];
    const LossTarget* owner = a.owner[cell] == kUnassigned ? nullptr : &ts[a.owner[cell]];
    switch (ch) {
      case 0:
        field = &PredictionField::obj, term = &LossBreakdown::obj, index = cell;
        target = owner ? 1.0 : 0.0;
        break;
      case 1: {
        const std::size_t k = cls_pick(rng);
        field = &PredictionField::cls, term = &LossBreakdown::cls, index = cell * 2 + k;
        target = k == owner->class_index ? 1.0 : 0.0;
        break;
      }
      case 2: {
        const std::size_t b = bin(rng);
        field = &PredictionField::csl, term = &LossBreakdown::csl, index = cell * kCslBins + b;
        target = csl_encode(owner->theta, lp.csl).bins[b];
        break;
      }
      default:
        field = &PredictionField::force, term = &LossBreakdown::force, index = cell;
        target = owner->force;
    }
    const double x = (p.*field)[index];
    // degenerate: at the bce minimum or a smooth_l1 knot
    if (ch < 3 && std::abs(x - target) < 0.01) continue;
    if (ch == 3 && (std::abs(std::abs(x - target) - 1.0) < 0.01 || std::abs(x - target) < 0.01)) continue;

    const double analytic = (loss_gradient(p, ts, a, g, kScale, lp).*field)[index];
    PredictionField q = p;
    (q.*field)[index] = x + h;
    const double up = total_loss(q, ts, a, g, kScale, lp).*term;
    (q.*field)[index] = x - h;
    const double down = total_loss(q, ts, a, g, kScale, lp).*term;
    const double fd = (up - down) / (2.0 * h);
    const double rel = std::abs(analytic - fd) / std::max(std::abs(analytic), std::abs(fd));
    worst[ch] = std::max(worst[ch], rel);
    ++counts[ch];
    ++done;
  }
  for (int ch = 0; ch < 4; ++ch) {
    o.require(worst[ch] < 1e-6, std::string(names[ch]) + ": " + std::to_string(counts[ch]) +
                                    " points, max relative error " + fmt("%.3g", worst[ch]));
  }
  const double elapsed = seconds_since(t0);
  o.require(elapsed < 10.0, "runtime " + fmt("%.2f s", elapsed));
  return o;
}

// ---- 4 ---------------------------------------------------------------------

Outcome loss_closed_forms() {
  Outcome o;
  const RegionGrid g = build_region_grid(640);
  LossParams lp;
  const PredictionField uniform(g.size(), 1);
  const LossBreakdown none = total_loss(uniform, {}, simota_assign(uniform, {}, g, kScale, lp), g, kScale, lp);
  o.require(std::abs(none.total - 8400.0 * std::log(2.0)) <= 1e-6,
            "no-GT uniform objectness " + fmt("%.9f", none.total) + " vs 8400 ln 2 = " +
                fmt("%.9f", 8400.0 * std::log(2.0)));

  const std::vector<LossTarget> ts{{make_box(1.0, -2.0, 3.0, 1.5, 30.0), 0, AngleDeg(30.0), 2.0},
                                   {make_box(-6.0, 4.0, 5.0, 5.0, 0.0), 1, AngleDeg(0.0), 6.5}};
  PredictionField prior(g.size(), 2);
  for (std::size_t c = 0; c < g.size(); ++c) {
    prior.box_at(c)[2] = 4.0;
    prior.box_at(c)[3] = 3.0;
  }
  const Assignment a = simota_assign(prior, ts, g, kScale, lp);

  // Every channel equals its target: probabilities 1 on positives and 0
  // elsewhere, the CSL soft label itself, exact force and box.
  PredictionField p(g.size(), 2);
  std::fill(p.obj.begin(), p.obj.end(), 0.0);
  for (std::size_t t = 0; t < ts.size(); ++t) {
    const CslVector label = csl_encode(ts[t].theta, lp.csl);
    for (std::size_t c : a.positives[t]) {
      p.obj[c] = 1.0;
      for (std::size_t k = 0; k < 2; ++k) p.cls_at(c, k) = k == ts[t].class_index ? 1.0 : 0.0;
      for (std::size_t b = 0; b < kCslBins; ++b) p.csl_at(c, b) = label.bins[b];
      p.force[c] = ts[t].force;
      p.set_box(g, c, kScale, ts[t].box);
    }
  }
  const LossBreakdown l = total_loss(p, ts, a, g, kScale, lp);
  o.require(l.total < 1e-5, "perfect-prediction loss " + fmt("%.6g", l.total) + " (bound 1e-5)");
  o.note("obj " + fmt("%.6g", l.obj) + ", cls " + fmt("%.6g", l.cls) + ", csl " + fmt("%.6g", l.csl) +
         ", force " + fmt("%.3g", l.force) + ", box " + fmt("%.3g", l.box) + ", positives " +
         std::to_string(a.total_positives()));
  double entropy = 0.0;
  for (std::size_t t = 0; t < ts.size(); ++t) {
    for (double y : csl_encode(ts[t].theta, lp.csl).bins) {
      if (y > 0.0 && y < 1.0) entropy += a.positives[t].size() * -(y * std::log(y) + (1 - y) * std::log(1 - y));
    }
  }
  o.note("floor from eps clamping: 8400 * -ln(1 - 1e-7) = " + fmt("%.6g", -8400.0 * std::log1p(-1e-7)) +
         " on objectness alone; soft-label entropy of the CSL targets = " + fmt("%.6g", entropy));
  return o;
}

// ---- 5 ---------------------------------------------------------------------

Outcome simota_contract() {
  Outcome o;
  const RegionGrid g = build_region_grid(640);
  LossParams lp;
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> prob(0.01, 0.99), pos(-12.0, 12.0), sz(1.0, 8.0), ang(0.0, 180.0),
      psz(0.5, 6.0);
  std::uniform_int_distribution<int> count(2, 5);
  std::uniform_int_distribution<std::size_t> cls(0, 2);
  PredictionField p(g.size(), 3);
  std::size_t uncovered = 0, doubles = 0, outside = 0, mismatched = 0, errors = 0, positives = 0;
  for (int scene = 0; scene < 1000; ++scene) {
    for (auto& v : p.obj) v = prob(rng);
    for (auto& v : p.cls) v = prob(rng);
    for (std::size_t c = 0; c < g.size(); ++c) {
      const Vec2 q = cell_center_mm(g, c, kScale);
      p.set_box(g, c, kScale, make_box(q.x + 0.5 * pos(rng) / 12.0, q.y, psz(rng), psz(rng), ang(rng)));
    }
    std::vector<LossTarget> ts;
    const int n = count(rng);
    while (static_cast<int>(ts.size()) < n) {
      const double th = ang(rng);
      const LossTarget t{make_box(pos(rng), pos(rng), sz(rng), sz(rng), th), cls(rng), AngleDeg(th), 1.0};
      const bool apart = std::all_of(ts.begin(), ts.end(), [&](const LossTarget& u) {
        return std::hypot(u.box.cx - t.box.cx, u.box.cy - t.box.cy) >= 2.0;
      });
      if (apart) ts.push_back(t);
    }
    Assignment serial, parallel;
    try {
      serial = simota_assign(p, ts, g, kScale, lp, 1);
      parallel = simota_assign(p, ts, g, kScale, lp, 4);
      check_assignment(serial, p, ts);
    } catch (const Error&) {
      ++errors;
      continue;
    }
    if (serial.positives != parallel.positives || serial.owner != parallel.owner) ++mismatched;
    std::vector<int> seen(g.size(), 0);
    for (std::size_t t = 0; t < ts.size(); ++t) {
      if (serial.positives[t].empty()) ++uncovered;
      const std::vector<std::size_t> cand = candidate_cells(g, kScale, ts[t].box, lp.center_radius);
      for (std::size_t c : serial.positives[t]) {
        ++positives;
        if (++seen[c] > 1) ++doubles;
        if (!std::binary_search(cand.begin(), cand.end(), c)) ++outside;
      }
    }
  }
  o.require(errors == 0, "assignment or contract errors: " + std::to_string(errors));
  o.require(uncovered == 0, "targets without a positive: " + std::to_string(uncovered));
  o.require(doubles == 0, "doubly assigned cells: " + std::to_string(doubles));
  o.require(outside == 0, "positives outside the candidate set: " + std::to_string(outside));
  o.require(mismatched == 0, "serial vs 4-thread mismatches: " + std::to_string(mismatched));
  o.note("1000 scenes, " + std::to_string(positives) + " positives");
  return o;
}

// ---- 6 ---------------------------------------------------------------------

ContactScenario sphere(double d, double f) {
  ContactScenario s;
  s.probe = SphereProbe{d};
  s.force = f;
  return s;
}

Outcome simulator_physics() {
  Outcome o;
  const SimParams p;
  const std::vector<double> diameters{10, 15, 20, 25, 30};

  // least-squares slope of log F against log of the simulated peak indentation
  for (double d : diameters) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    for (double f = 0.5; f <= 10.0 + 1e-9; f += 0.5) {
      const HeightField h = height_field(sphere(d, f), p);
      const double x = std::log(*std::max_element(h.data.begin(), h.data.end())), y = std::log(f);
      sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    o.require(std::abs(slope - 1.5) <= 0.01, "d=" + fmt("%.0f", d) + " mm: log F vs log depth slope " + fmt("%.5f", slope));
  }

  const double base = flat_baseline(p.illumination);
  std::map<std::pair<double, double>, SimResult> cache;
  auto image = [&](double d, double f) -> const TactileImage& {
    auto it = cache.find({d, f});
    if (it == cache.end()) it = cache.emplace(std::make_pair(d, f), simulate(sphere(d, f), p, 0)).first;
    return it->second.image;
  };
  for (double d : diameters) {
    double prev = -1.0;
    bool monotone = true;
    for (double f = 0.0; f <= 10.0 + 1e-9; f += 0.5) {
      const double a = deviation_area(image(d, f), base);
      monotone = monotone && a >= prev;
      prev = a;
    }
    o.require(monotone, "d=" + fmt("%.0f", d) + " mm: area nondecreasing over 0-10 N, " + fmt("%.1f mm^2", prev) + " at 10 N");
  }
  for (double f : {1.0, 3.0, 6.0, 9.0}) {
    std::string row;
    bool increasing = true;
    double prev = -1.0;
    for (double d : diameters) {
      const double a = deviation_area(image(d, f), base);
      increasing = increasing && a > prev;
      prev = a;
      row += " " + fmt("%.1f", a);
    }
    o.require(increasing, "F=" + fmt("%.0f", f) + " N: area increasing in diameter," + row);
  }
  auto contrast = [&](double d, double f) { return edge_contrast(image(d, f), base, sphere(d, f), p); };
  for (double d : diameters) {
    const double lo = contrast(d, 2.0), hi = contrast(d, 8.0);
    o.require(lo < hi, "d=" + fmt("%.0f", d) + " mm: edge contrast 2 N " + fmt("%.4f", lo) + " < 8 N " + fmt("%.4f", hi));
  }
  for (double f : {1.0, 3.0, 6.0, 9.0}) {
    const double small = contrast(10.0, f), large = contrast(30.0, f);
    o.require(small > large, "F=" + fmt("%.0f", f) + " N: edge contrast 10 mm " + fmt("%.4f", small) + " > 30 mm " +
                                 fmt("%.4f", large));
  }
  return o;
}

// ---- 7-9 -------------------------------------------------------------------

struct Suite {
  RoundTripResult result;
  double seconds = 0.0;
};

Suite roundtrip(SuiteKind kind, double noise, std::size_t count) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.noise_sigma = noise;
  cfg.roundtrip.suite = kind;
  cfg.roundtrip.count = count;
  cfg.resolve();
  cfg.validate();
  const Decoder decoder(build_calibration(suite_probes(kind), cfg.sim, cfg.decoder,
                                          force_grid(cfg.calibration_step, cfg.sim.material.max_force), cfg.threads),
                        cfg.sim, cfg.decoder);
  Suite s;
  s.result = run_roundtrip(decoder, cfg.roundtrip, cfg.sim, cfg.threads);
  s.seconds = seconds_since(t0);
  return s;
}

void describe(Outcome& o, const std::string& label, const Suite& s) {
  o.note(label + ": " + std::to_string(s.result.cases.size()) + " scenarios in " + fmt("%.1f s", s.seconds) +
         ", unmatched " + std::to_string(s.result.unmatched()) + ", misclassified " +
         std::to_string(s.result.misclassified()));
}

Outcome roundtrip_noiseless() {
  Outcome o;
  const Suite s = roundtrip(SuiteKind::SphereStrip, 0.0, 500);
  const MetricsReport& r = s.result.report;
  describe(o, "sphere-strip, noiseless", s);
  const std::size_t correct = s.result.cases.size() - s.result.unmatched() - s.result.misclassified();
  o.require(correct == s.result.cases.size(),
            "classification accuracy " + fmt("%.4f", double(correct) / double(s.result.cases.size())));
  o.require(r.overall.force_mae && *r.overall.force_mae <= 0.05, "force MAE " + opt(r.overall.force_mae) + " N (<= 0.05)");
  o.require(r.overall.location_mae && *r.overall.location_mae <= 0.15,
            "location MAE " + opt(r.overall.location_mae) + " mm (<= 0.15)");
  o.require(r.overall.angle_mae && *r.overall.angle_mae <= 0.41,
            "angle MAE on anisotropic probes " + opt(r.overall.angle_mae) + " deg (<= 0.41)");
  o.require(s.seconds < 180.0, "runtime " + fmt("%.1f s", s.seconds));
  return o;
}

Outcome roundtrip_noisy() {
  Outcome o;
  const Suite s = roundtrip(SuiteKind::SphereStrip, 0.02, 500);
  const MetricsReport& r = s.result.report;
  describe(o, "sphere-strip, sigma 0.02", s);
  o.require(r.overall.force_mae && *r.overall.force_mae <= 0.2, "force MAE 0-10 N " + opt(r.overall.force_mae) + " N (<= 0.2)");
  const auto low = s.result.force_mae(0.0, 3.0);
  o.require(low && *low <= 0.1, "force MAE 0-3 N " + opt(low) + " N (<= 0.1)");
  o.require(r.overall.angle_mae && *r.overall.angle_mae <= 1.0, "angle MAE " + opt(r.overall.angle_mae) + " deg (<= 1)");

  const Suite f = roundtrip(SuiteKind::Footprints, 0.02, 500);
  describe(o, "footprints, sigma 0.02", f);
  for (const ClassMetrics& c : f.result.report.per_class) {
    o.require(c.ap50 && *c.ap50 >= 0.94, c.name + " AP@50 " + opt(c.ap50) + " (>= 0.94)");
  }
  return o;
}

Outcome screw_suite() {
  Outcome o;
  const Suite s = roundtrip(SuiteKind::Screw, 0.02, 500);
  const MetricsReport& r = s.result.report;
  describe(o, "screw, sigma 0.02", s);
  const std::map<std::string, double> bound{{"body", 0.19}, {"bottom", 0.21}, {"head", 0.15}, {"top", 0.17}};
  for (const ClassMetrics& c : r.per_class) {
    const double limit = bound.at(c.name) + 0.05;
    o.require(c.force_mae && *c.force_mae <= limit, c.name + " force MAE " + opt(c.force_mae) + " N (<= " + fmt("%.2f", limit) + ")");
    o.require(c.recall && *c.recall >= 0.95, c.name + " recall " + opt(c.recall) + " (>= 0.95)");
  }
  const ConfusionMatrix& m = r.confusion;
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    std::size_t off = 0;
    std::string row;
    for (std::size_t j = 0; j < m.counts[i].size(); ++j) {
      if (j != i) off += m.counts[i][j];
      row += " " + std::to_string(m.counts[i][j]);
    }
    o.require(m.counts[i][i] > off, "confusion row " + m.classes[i] + ":" + row + " (last column missed)");
  }
  return o;
}

// ---- 10 --------------------------------------------------------------------

Outcome resolution() {
  Outcome o;
  const RunConfig cfg;
  const std::vector<double> freqs = usaf_frequencies(cfg.resolution_k_min, cfg.resolution_k_max);
  const double nyquist = nyquist_frequency(cfg.sim.sensor.scale);
  std::vector<ResolutionSweep> sweeps;
  for (StripeOrientation ori : {StripeOrientation::Horizontal, StripeOrientation::Vertical}) {
    const ResolutionSweep sw = resolution_sweep(freqs, ori, cfg.sim, cfg.resolution, cfg.threads);
    double rise = 0.0;
    for (std::size_t i = 1; i < sw.points.size(); ++i) {
      rise = std::max(rise, sw.points[i].modulation - sw.points[i - 1].modulation);
    }
    const std::string name = orientation_name(ori);
    o.require(sw.points.size() == freqs.size(), name + ": " + std::to_string(sw.points.size()) + " frequencies");
    o.require(rise <= 0.02, name + ": largest modulation increase " + fmt("%.4f", rise) + " (<= 0.02)");
    o.require(sw.limit && *sw.limit <= nyquist, name + ": limit " + opt(sw.limit, "%.3f") + " lp/mm (<= " +
                                                    fmt("%.0f", nyquist) + ")");
    sweeps.push_back(sw);
  }
  const std::string csv = sweep_csv(sweeps);
  o.require(csv.find("\nhorizontal,") != std::string::npos && csv.find("\nvertical,") != std::string::npos,
            "CSV carries both orientations");
  return o;
}

// ---- 11-12 -----------------------------------------------------------------

struct ScratchDir {
  fs::path path;
  explicit ScratchDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~ScratchDir() { fs::remove_all(path); }
};

Outcome toy_head() {
  Outcome o;
  ScratchDir tmp("tactwin_acceptance_toy");
  RunConfig cfg;
  cfg.seed = 11;
  cfg.dataset.count = 120;
  cfg.dataset.scenarios.force_min = 0.0;
  cfg.dataset.scenarios.force_max = 3.0;
  cfg.resolve();
  cfg.validate();
  generate_dataset(cfg.dataset, cfg.sim, tmp.path / "ds", cfg.threads);
  const LoadedDataset data = load_dataset(tmp.path / "ds");
  const ToyDataset train = build_toy_dataset(data, {Split::Train}, cfg.features, cfg.threads);
  const ToyDataset test = build_toy_dataset(data, {Split::Test}, cfg.features, cfg.threads);

  ToyHead head = init_toy_head(train, cfg.loss);
  const TrainResult fit = fit_toy_head(head, train, cfg.toy);
  std::size_t rises = 0;
  for (std::size_t i = 1; i < fit.curve.size(); ++i) rises += fit.curve[i].total > fit.curve[i - 1].total;
  o.note(std::to_string(train.samples.size()) + " train / " + std::to_string(test.samples.size()) +
         " held-out samples, learning rate " + fmt("%.3g", cfg.toy.learning_rate) + " (per-channel step lr / L)");
  o.require(!fit.diverged && rises == 0 && !fit.curve.empty(),
            "loss " + fmt("%.2f", fit.curve.front().total) + " -> " + fmt("%.2f", fit.curve.back().total) +
                " over " + std::to_string(fit.curve.size()) + " epochs, " + std::to_string(rises) + " increases");
  double sum = 0.0;
  for (const ToySample& s : test.samples) {
    sum += std::abs(toy_infer(head, s.features, test.grid, test.scale).force - s.targets.front().force);
  }
  const double mae = sum / static_cast<double>(test.samples.size());
  o.require(!test.samples.empty() && mae <= 0.1, "held-out force MAE " + fmt("%.4f", mae) + " N (<= 0.1)");
  return o;
}

std::map<std::string, std::string> dataset_files(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "run.log") continue;
    std::ifstream in(e.path(), std::ios::binary);
    out[fs::relative(e.path(), root).generic_string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return out;
}

Outcome determinism() {
  Outcome o;
  ScratchDir tmp("tactwin_acceptance_generate");
  auto generate = [&](const std::string& name, const std::string& threads) {
    const std::string out = (tmp.path / name).string();
    const char* argv[] = {"tactwin", "generate", "--out", out.c_str(), "--count", "40", "--seed", "12",
                          "--probe", "sphere-strip", "--noise", "0.02", "--threads", threads.c_str()};
    std::ostringstream so, se;
    return run_cli(static_cast<int>(std::size(argv)), argv, so, se);
  };
  const bool ok = generate("a", "1") == kExitOk && generate("b", "1") == kExitOk && generate("c", "4") == kExitOk;
  o.require(ok, "three generate runs exit 0");
  if (!ok) return o;
  const auto a = dataset_files(tmp.path / "a");
  o.note(std::to_string(a.size()) + " files per dataset (run.log sidecar excluded)");
  o.require(a == dataset_files(tmp.path / "b"), "byte-identical across runs");
  o.require(a == dataset_files(tmp.path / "c"), "byte-identical across 1 and 4 threads");
  return o;
}

struct Criterion {
  const char* title;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tactwin acceptance suite"};
  int only = 0;
  bool verbose = true;
  app.add_option("--criterion", only, "Run a single criterion (1-12)")->check(CLI::Range(1, 12));
  app.add_flag("!--quiet", verbose, "Print only the PASS/FAIL lines");
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {"angle metric", angle_metric},
      {"rotated IoU", rotated_iou_check},
      {"gradient checks", gradient_check},
      {"loss closed forms", loss_closed_forms},
      {"simOTA contract", simota_contract},
      {"simulator physics", simulator_physics},
      {"round trip, noiseless", roundtrip_noiseless},
      {"round trip, noise 0.02", roundtrip_noisy},
      {"screw suite", screw_suite},
      {"resolution harness", resolution},
      {"toy head", toy_head},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only != 0 && static_cast<int>(i) + 1 != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    failed += !o.pass;
    std::cout << "C" << i + 1 << " " << (o.pass ? "PASS" : "FAIL") << "  " << criteria[i].title << " ("
              << fmt("%.1f s", seconds_since(t0)) << ")\n";
    if (verbose) {
      for (const auto& n : o.notes) std::cout << "    " << n << "\n";
    }
    std::cout.flush();
  }
  return failed == 0 ? 0 : 1;
}
