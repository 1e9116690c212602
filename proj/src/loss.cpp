#include "tactwin/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tactwin/errors.hpp"
#include "tactwin/parallel.hpp"

namespace tactwin {

void LossParams::validate() const {
  csl.validate();
  if (!(center_radius > 0.0)) throw ConfigError("loss.center_radius must be positive");
  if (!(assign_iou_weight >= 0.0)) throw ConfigError("loss.assign_iou_weight must be >= 0");
  if (dynamic_k_candidates < 1) throw ConfigError("loss.dynamic_k_candidates must be >= 1");
  if (!(eps > 0.0 && eps < 0.5)) throw ConfigError("loss.eps must be in (0, 0.5)");
  if (!(box_fd_step > 0.0)) throw ConfigError("loss.box_fd_step must be positive");
}

double bce(double p, double y, double eps) {
  const double q = std::clamp(p, eps, 1.0 - eps);
  return -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
}

double bce_grad(double p, double y, double eps) {
  if (p < eps || p > 1.0 - eps) return 0.0;
  return (p - y) / (p * (1.0 - p));
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

double smooth_l1_grad(double x) {
  if (std::abs(x) < 1.0) return x;
  return x > 0.0 ? 1.0 : -1.0;
}

double box_loss(const OrientedBox& pred, const OrientedBox& gt) {
  const double iou = rotated_iou(pred, gt);
  return 1.0 - iou * iou;
}

PredictionField::PredictionField(std::size_t n, std::size_t k)
    : cells(n),
      classes(k),
      obj(n, 0.5),
      cls(n * k, 0.5),
      csl(n * kCslBins, 0.5),
      force(n, 0.0),
      box(n * kBoxParams, 0.0) {
  for (std::size_t c = 0; c < n; ++c) {
    box[c * kBoxParams + 2] = 1.0;
    box[c * kBoxParams + 3] = 1.0;
  }
}

OrientedBox decode_box_params(const RegionGrid& grid, std::size_t cell, double scale,
                              const double* b) {
  const Vec2 c = cell_center_mm(grid, cell, scale);
  OrientedBox out;
  out.cx = c.x + b[0];
  out.cy = c.y + b[1];
  out.w = std::max(b[2], 1e-3);
  out.h = std::max(b[3], 1e-3);
  out.theta = normalize_angle(b[4]);
  return out;
}

std::array<double, kBoxParams> box_loss_gradient(const RegionGrid& grid, std::size_t cell,
                                                 double scale, const double* raw,
                                                 const OrientedBox& gt, double step) {
  std::array<double, kBoxParams> b, out;
  std::copy_n(raw, kBoxParams, b.begin());
  for (std::size_t p = 0; p < kBoxParams; ++p) {
    const double orig = b[p];
    b[p] = orig + step;
    const double up = box_loss(decode_box_params(grid, cell, scale, b.data()), gt);
    b[p] = orig - step;
    const double down = box_loss(decode_box_params(grid, cell, scale, b.data()), gt);
    b[p] = orig;
    out[p] = (up - down) / (2.0 * step);
  }
  return out;
}

OrientedBox PredictionField::decoded_box(const RegionGrid& grid, std::size_t cell,
                                         double scale) const {
  return decode_box_params(grid, cell, scale, box_at(cell));
}

void PredictionField::set_box(const RegionGrid& grid, std::size_t cell, double scale,
                              const OrientedBox& bx) {
  const Vec2 c = cell_center_mm(grid, cell, scale);
  double* b = box_at(cell);
  b[0] = bx.cx - c.x;
  b[1] = bx.cy - c.y;
  b[2] = bx.w;
  b[3] = bx.h;
  b[4] = bx.theta.value();
}

std::size_t Assignment::total_positives() const {
  std::size_t n = 0;
  for (const auto& p : positives) n += p.size();
  return n;
}

std::vector<std::size_t> candidate_cells(const RegionGrid& grid, double scale,
                                         const OrientedBox& box, double center_radius) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec2 c = cell_center_mm(grid, i, scale);
    const double radius = center_radius * grid.cells[i].stride * scale;
    if (box.contains(c) || norm(c - box.center()) <= radius) out.push_back(i);
  }
  return out;
}

namespace {

struct Ranked {
  std::vector<std::size_t> cells;  // candidates by ascending cost, then index
  std::vector<double> costs;       // aligned with cells
  std::size_t k = 1;
};

Ranked rank_candidates(const PredictionField& preds, const LossTarget& t, const RegionGrid& grid,
                       double scale, const LossParams& params) {
  const std::vector<std::size_t> cand = candidate_cells(grid, scale, t.box, params.center_radius);
  if (cand.empty()) throw AssignmentError("target has no candidate cells");
  std::vector<double> cost(cand.size()), iou(cand.size());
  for (std::size_t j = 0; j < cand.size(); ++j) {
    const std::size_t c = cand[j];
    double cls_cost = 0.0;
    for (std::size_t k = 0; k < preds.classes; ++k) {
      cls_cost += bce(preds.cls_at(c, k), k == t.class_index ? 1.0 : 0.0, params.eps);
    }
    iou[j] = rotated_iou(preds.decoded_box(grid, c, scale), t.box);
    cost[j] = cls_cost + params.assign_iou_weight * (1.0 - iou[j] * iou[j]);
  }
  std::vector<double> top = iou;
  const std::size_t m = std::min<std::size_t>(params.dynamic_k_candidates, top.size());
  std::partial_sort(top.begin(), top.begin() + m, top.end(), std::greater<>());
  const double sum = std::accumulate(top.begin(), top.begin() + m, 0.0);
  Ranked r;
  r.k = std::clamp<std::size_t>(static_cast<std::size_t>(std::floor(sum)), 1, cand.size());
  std::vector<std::size_t> order(cand.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cost[a] != cost[b] ? cost[a] < cost[b] : cand[a] < cand[b];
  });
  for (std::size_t j : order) {
    r.cells.push_back(cand[j]);
    r.costs.push_back(cost[j]);
  }
  return r;
}

}  // namespace

Assignment simota_assign(const PredictionField& preds, const std::vector<LossTarget>& targets,
                         const RegionGrid& grid, double scale, const LossParams& params,
                         int threads) {
  params.validate();
  if (preds.cells != grid.size()) throw ContractViolation("prediction field does not match grid");
  for (const auto& t : targets) {
    if (t.class_index >= preds.classes) throw ContractViolation("target class index out of range");
  }
  std::vector<Ranked> ranked(targets.size());
  parallel_for(targets.size(), threads, [&](std::size_t g) {
    ranked[g] = rank_candidates(preds, targets[g], grid, scale, params);
  });

  Assignment a;
  a.owner.assign(preds.cells, kUnassigned);
  a.positives.resize(targets.size());
  std::vector<double> owner_cost(preds.cells, 0.0);
  for (std::size_t g = 0; g < targets.size(); ++g) {
    for (std::size_t j = 0; j < ranked[g].k; ++j) {
      const std::size_t c = ranked[g].cells[j];
      const double cost = ranked[g].costs[j];
      if (a.owner[c] == kUnassigned || cost < owner_cost[c]) {
        a.owner[c] = static_cast<std::ptrdiff_t>(g);
        owner_cost[c] = cost;
      }
    }
  }
  for (std::size_t c = 0; c < preds.cells; ++c) {
    if (a.owner[c] != kUnassigned) a.positives[a.owner[c]].push_back(c);
  }
  for (std::size_t g = 0; g < targets.size(); ++g) {
    if (!a.positives[g].empty()) continue;
    bool filled = false;
    for (std::size_t j = 0; j < ranked[g].cells.size() && !filled; ++j) {
      const std::size_t c = ranked[g].cells[j];
      if (a.owner[c] == kUnassigned) {
        a.owner[c] = static_cast<std::ptrdiff_t>(g);
        a.positives[g].push_back(c);
        filled = true;
      }
    }
    for (std::size_t j = 0; j < ranked[g].cells.size() && !filled; ++j) {
      const std::size_t c = ranked[g].cells[j];
      auto& donor = a.positives[a.owner[c]];
      if (donor.size() > 1) {
        donor.erase(std::find(donor.begin(), donor.end(), c));
        a.owner[c] = static_cast<std::ptrdiff_t>(g);
        a.positives[g].push_back(c);
        filled = true;
      }
    }
    if (!filled) throw AssignmentError("target " + std::to_string(g) + " lost all positives");
  }
  return a;
}

void check_assignment(const Assignment& a, const PredictionField& preds,
                      const std::vector<LossTarget>& targets) {
  if (a.owner.size() != preds.cells || a.positives.size() != targets.size()) {
    throw ContractViolation("assignment shape does not match predictions and targets");
  }
  std::size_t owned = 0;
  for (std::size_t c = 0; c < a.owner.size(); ++c) {
    const auto o = a.owner[c];
    if (o == kUnassigned) continue;
    if (o < 0 || static_cast<std::size_t>(o) >= targets.size()) {
      throw ContractViolation("assignment owner out of range");
    }
    const auto& pos = a.positives[o];
    if (std::find(pos.begin(), pos.end(), c) == pos.end()) {
      throw ContractViolation("assignment owner and positives disagree");
    }
    ++owned;
  }
  for (std::size_t g = 0; g < targets.size(); ++g) {
    if (targets[g].class_index >= preds.classes) {
      throw ContractViolation("target class index out of range");
    }
    if (a.positives[g].empty()) throw ContractViolation("target without a positive cell");
  }
  if (owned != a.total_positives()) throw ContractViolation("cell assigned to two targets");
}

LossBreakdown total_loss(const PredictionField& preds, const std::vector<LossTarget>& targets,
                         const Assignment& assignment, const RegionGrid& grid, double scale,
                         const LossParams& params) {
  check_assignment(assignment, preds, targets);
  LossBreakdown out;
  for (std::size_t g = 0; g < targets.size(); ++g) {
    const LossTarget& t = targets[g];
    const CslVector label = csl_encode(t.theta, params.csl);
    for (std::size_t c : assignment.positives[g]) {
      for (std::size_t k = 0; k < preds.classes; ++k) {
        out.cls += bce(preds.cls_at(c, k), k == t.class_index ? 1.0 : 0.0, params.eps);
      }
      for (std::size_t b = 0; b < kCslBins; ++b) {
        out.csl += bce(preds.csl_at(c, b), label.bins[b], params.eps);
      }
      out.force += smooth_l1(preds.force[c] - t.force);
      out.box += box_loss(preds.decoded_box(grid, c, scale), t.box);
    }
  }
  for (std::size_t c = 0; c < preds.cells; ++c) {
    out.obj += bce(preds.obj[c], assignment.owner[c] != kUnassigned ? 1.0 : 0.0, params.eps);
  }
  out.total = out.cls + out.csl + out.force + out.box + out.obj;
  return out;
}

PredictionField loss_gradient(const PredictionField& preds, const std::vector<LossTarget>& targets,
                              const Assignment& assignment, const RegionGrid& grid, double scale,
                              const LossParams& params) {
  check_assignment(assignment, preds, targets);
  PredictionField g = preds;
  std::fill(g.obj.begin(), g.obj.end(), 0.0);
  std::fill(g.cls.begin(), g.cls.end(), 0.0);
  std::fill(g.csl.begin(), g.csl.end(), 0.0);
  std::fill(g.force.begin(), g.force.end(), 0.0);
  std::fill(g.box.begin(), g.box.end(), 0.0);
  for (std::size_t c = 0; c < preds.cells; ++c) {
    g.obj[c] = bce_grad(preds.obj[c], assignment.owner[c] != kUnassigned ? 1.0 : 0.0, params.eps);
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const LossTarget& tg = targets[t];
    const CslVector label = csl_encode(tg.theta, params.csl);
    for (std::size_t c : assignment.positives[t]) {
      for (std::size_t k = 0; k < preds.classes; ++k) {
        g.cls_at(c, k) += bce_grad(preds.cls_at(c, k), k == tg.class_index ? 1.0 : 0.0, params.eps);
      }
      for (std::size_t b = 0; b < kCslBins; ++b) {
        g.csl_at(c, b) += bce_grad(preds.csl_at(c, b), label.bins[b], params.eps);
      }
      g.force[c] += smooth_l1_grad(preds.force[c] - tg.force);
      const auto db = box_loss_gradient(grid, c, scale, preds.box_at(c), tg.box, params.box_fd_step);
      for (std::size_t p = 0; p < kBoxParams; ++p) g.box_at(c)[p] += db[p];
    }
  }
  return g;
}

}  // namespace tactwin
