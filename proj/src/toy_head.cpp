#include "tactwin/toy_head.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "tactwin/errors.hpp"
#include "tactwin/parallel.hpp"
#include "tactwin/serialize.hpp"

namespace tactwin {

void FeatureParams::validate() const {
  if (window_half_sizes.empty()) throw ConfigError("features.window_half_sizes must not be empty");
  for (double r : window_half_sizes) {
    if (!(r > 0.0) || !std::isfinite(r)) {
      throw ConfigError("features.window_half_sizes entries must be positive");
    }
  }
}

namespace {

struct Integral {
  int w = 0;
  int h = 0;
  std::vector<double> s;

  Integral(const std::vector<double>& v, int width, int height)
      : w(width), h(height), s(static_cast<std::size_t>(width + 1) * (height + 1), 0.0) {
    for (int r = 0; r < h; ++r) {
      double row = 0.0;
      for (int c = 0; c < w; ++c) {
        row += v[static_cast<std::size_t>(r) * w + c];
        s[at(r + 1, c + 1)] = s[at(r, c + 1)] + row;
      }
    }
  }
  std::size_t at(int r, int c) const { return static_cast<std::size_t>(r) * (w + 1) + c; }
  double sum(int r0, int c0, int r1, int c1) const {
    return s[at(r1, c1)] - s[at(r0, c1)] - s[at(r1, c0)] + s[at(r0, c0)];
  }
};

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

std::vector<double> cell_features(const DeviationMap& dev, const RegionGrid& grid,
                                  const FeatureParams& params) {
  params.validate();
  const int w = dev.width;
  const int h = dev.height;
  if (w != grid.input_size || h != grid.input_size) {
    throw ContractViolation("deviation map does not match the region grid");
  }
  std::vector<double> a(dev.size()), q(dev.size()), g(dev.size());
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double v = dev.at(r, c);
      const int cl = std::max(c - 1, 0), cr = std::min(c + 1, w - 1);
      const int ru = std::max(r - 1, 0), rd = std::min(r + 1, h - 1);
      const double gx = (dev.at(r, cr) - dev.at(r, cl)) / (cr - cl);
      const double gy = (dev.at(rd, c) - dev.at(ru, c)) / (rd - ru);
      const std::size_t i = dev.index(r, c);
      a[i] = std::abs(v);
      q[i] = v * v;
      g[i] = std::hypot(gx, gy);
    }
  }
  const Integral ia(a, w, h), iq(q, w, h), ig(g, w, h);
  const std::size_t dim = params.dim();
  std::vector<double> out(grid.size() * dim);
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const GridCell& gc = grid.cells[cell];
    double* f = &out[cell * dim];
    for (double r : params.window_half_sizes) {
      const double half = r / dev.scale;
      const int c0 = std::max(0, static_cast<int>(std::lround(gc.center_x - half)));
      const int c1 = std::min(w, static_cast<int>(std::lround(gc.center_x + half)));
      const int r0 = std::max(0, static_cast<int>(std::lround(gc.center_y - half)));
      const int r1 = std::min(h, static_cast<int>(std::lround(gc.center_y + half)));
      const double n = std::max(1.0, static_cast<double>(c1 - c0) * (r1 - r0));
      const double ma = ia.sum(r0, c0, r1, c1) / n;
      const double mq = iq.sum(r0, c0, r1, c1) / n;
      const double mg = ig.sum(r0, c0, r1, c1) / n;
      *f++ = ma;
      *f++ = mq;
      *f++ = mg;
      *f++ = std::sqrt(std::max(ma, 0.0));
      *f++ = std::sqrt(std::max(mq, 0.0));
      *f++ = std::sqrt(std::max(mg, 0.0));
    }
  }
  return out;
}

void ToyDataset::validate() const {
  if (dim == 0) throw ContractViolation("toy dataset has zero feature dimension");
  if (classes == 0) throw ContractViolation("toy dataset has no classes");
  for (const ToySample& s : samples) {
    if (s.features.size() != grid.size() * dim) {
      throw ContractViolation("toy sample feature matrix does not match the grid");
    }
    for (const LossTarget& t : s.targets) {
      if (t.class_index >= classes) throw ContractViolation("toy target class out of range");
    }
  }
}

double AffineMap::apply(std::size_t o, const float* x) const {
  const double* row = &weights[o * (inputs + 1)];
  double z = row[inputs];
  for (std::size_t i = 0; i < inputs; ++i) z += row[i] * x[i];
  return z;
}

void Whitening::apply(const double* x, float* out) const {
  const std::size_t d = dim();
  for (std::size_t i = 0; i < d; ++i) {
    double v = 0.0;
    for (std::size_t j = 0; j <= i; ++j) v += matrix[i * d + j] * (x[j] - mean[j]);
    out[i] = static_cast<float>(v);
  }
}

std::vector<float> Whitening::apply_all(const std::vector<double>& features) const {
  const std::size_t d = dim();
  if (d == 0 || features.size() % d != 0) {
    throw ContractViolation("feature matrix does not match the whitening dimension");
  }
  std::vector<float> out(features.size());
  for (std::size_t r = 0; r < features.size() / d; ++r) apply(&features[r * d], &out[r * d]);
  return out;
}

PredictionField ToyHead::predict(const std::vector<double>& features, std::size_t cells) const {
  if (features.size() != cells * dim) throw ContractViolation("feature matrix does not match cell count");
  const std::vector<float> xo = obj_input.apply_all(features);
  const std::vector<float> xp = pos_input.apply_all(features);
  PredictionField out(cells, classes);
  for (std::size_t c = 0; c < cells; ++c) {
    const float* x = &xp[c * dim];
    out.obj[c] = sigmoid(obj.apply(0, &xo[c * dim]));
    for (std::size_t k = 0; k < classes; ++k) out.cls_at(c, k) = sigmoid(cls.apply(k, x));
    for (std::size_t b = 0; b < kCslBins; ++b) out.csl_at(c, b) = sigmoid(csl.apply(b, x));
    out.force[c] = force.apply(0, x);
    for (std::size_t p = 0; p < kBoxParams; ++p) out.box_at(c)[p] = box.apply(p, x);
  }
  return out;
}

void ToyHyperParams::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("toy.learning_rate must be a finite value >= 0");
  }
  if (epochs < 0) throw ConfigError("toy.epochs must be >= 0");
  if (divergence_patience < 1) throw ConfigError("toy.divergence_patience must be >= 1");
  if (!(divergence_factor > 1.0)) throw ConfigError("toy.divergence_factor must be > 1");
  loss.validate();
}

Assignment prior_assignment(const std::vector<LossTarget>& targets, const RegionGrid& grid,
                            double scale, std::size_t classes, Vec2 prior_wh,
                            const LossParams& params) {
  PredictionField prior(grid.size(), classes);
  for (std::size_t c = 0; c < grid.size(); ++c) {
    prior.box_at(c)[2] = prior_wh.x;
    prior.box_at(c)[3] = prior_wh.y;
  }
  return simota_assign(prior, targets, grid, scale, params);
}

Vec2 prior_box_size(const ToyDataset& data) {
  double w = 0.0, h = 0.0;
  std::size_t n = 0;
  for (const auto& s : data.samples) {
    for (const auto& t : s.targets) {
      w += t.box.w;
      h += t.box.h;
      ++n;
    }
  }
  if (n == 0) return {1.0, 1.0};
  return {w / n, h / n};
}

namespace {

using Eigen::Index;

/// Running first and second moments of feature rows.
class Moments {
 public:
  explicit Moments(std::size_t dim)
      : sum_(Eigen::VectorXd::Zero(static_cast<Index>(dim))),
        outer_(Eigen::MatrixXd::Zero(static_cast<Index>(dim), static_cast<Index>(dim))) {}

  void add(const double* x) {
    const Eigen::Map<const Eigen::VectorXd> v(x, sum_.size());
    sum_ += v;
    outer_.selfadjointView<Eigen::Lower>().rankUpdate(v);
    ++n_;
  }
  std::size_t count() const { return n_; }

  Whitening whitening() const {
    const std::size_t d = static_cast<std::size_t>(sum_.size());
    Whitening w;
    w.mean.assign(d, 0.0);
    w.matrix.assign(d * d, 0.0);
    for (std::size_t i = 0; i < d; ++i) w.matrix[i * d + i] = 1.0;
    if (n_ == 0) return w;
    const Eigen::VectorXd mean = sum_ / static_cast<double>(n_);
    Eigen::MatrixXd cov = outer_.selfadjointView<Eigen::Lower>();
    cov = cov / static_cast<double>(n_) - mean * mean.transpose();
    cov.diagonal().array() += 1e-6 * std::max(cov.trace() / static_cast<double>(d), 1e-300);
    const Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success) {
      throw ContractViolation("feature covariance is not positive definite");
    }
    const Eigen::MatrixXd inv =
        llt.matrixL().solve(Eigen::MatrixXd::Identity(static_cast<Index>(d), static_cast<Index>(d)));
    for (std::size_t i = 0; i < d; ++i) {
      w.mean[i] = mean[static_cast<Index>(i)];
      for (std::size_t j = 0; j <= i; ++j) w.matrix[i * d + j] = inv(static_cast<Index>(i), static_cast<Index>(j));
    }
    return w;
  }

 private:
  Eigen::VectorXd sum_;
  Eigen::MatrixXd outer_;
  std::size_t n_ = 0;
};

/// Largest eigenvalue of sum [x;1][x;1]^T over float rows.
double augmented_lambda_max(const std::vector<const float*>& rows, std::size_t dim) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Index>(dim + 1), static_cast<Index>(dim + 1));
  Eigen::VectorXd v(static_cast<Index>(dim + 1));
  for (const float* x : rows) {
    for (std::size_t i = 0; i < dim; ++i) v[static_cast<Index>(i)] = x[i];
    v[static_cast<Index>(dim)] = 1.0;
    m.selfadjointView<Eigen::Lower>().rankUpdate(v);
  }
  const Eigen::MatrixXd full = m.selfadjointView<Eigen::Lower>();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(full, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().maxCoeff();
}

struct Prepared {
  std::vector<std::vector<float>> obj_x;  // per sample [cells x dim]
  std::vector<std::vector<float>> pos_x;  // per sample [positives x dim], target-major
  std::vector<Assignment> assignments;
  std::vector<std::vector<CslVector>> labels;
};

std::vector<Assignment> assign_all(const ToyDataset& data, const LossParams& params, int threads) {
  const Vec2 wh = prior_box_size(data);
  std::vector<Assignment> out(data.samples.size());
  parallel_for(data.samples.size(), threads, [&](std::size_t i) {
    out[i] = prior_assignment(data.samples[i].targets, data.grid, data.scale, data.classes, wh, params);
  });
  return out;
}

Prepared prepare(const ToyHead& head, const ToyDataset& data, const LossParams& params, int threads) {
  data.validate();
  if (head.dim != data.dim || head.classes != data.classes) {
    throw ContractViolation("toy head does not match the dataset shape");
  }
  Prepared p;
  p.assignments = assign_all(data, params, threads);
  const std::size_t n = data.samples.size();
  p.obj_x.resize(n);
  p.pos_x.resize(n);
  p.labels.resize(n);
  parallel_for(n, threads, [&](std::size_t i) {
    const ToySample& s = data.samples[i];
    p.obj_x[i] = head.obj_input.apply_all(s.features);
    for (const auto& pos : p.assignments[i].positives) {
      for (std::size_t c : pos) {
        p.pos_x[i].resize(p.pos_x[i].size() + head.dim);
        head.pos_input.apply(&s.features[c * head.dim], &p.pos_x[i][p.pos_x[i].size() - head.dim]);
      }
    }
    for (const auto& t : s.targets) p.labels[i].push_back(csl_encode(t.theta, params.csl));
  });
  return p;
}

struct HeadGrad {
  std::vector<double> obj, cls, csl, force, box;

  explicit HeadGrad(const ToyHead& h)
      : obj(h.obj.weights.size(), 0.0),
        cls(h.cls.weights.size(), 0.0),
        csl(h.csl.weights.size(), 0.0),
        force(h.force.weights.size(), 0.0),
        box(h.box.weights.size(), 0.0) {}
};

void accumulate(std::vector<double>& g, std::size_t row, std::size_t inputs, double dz, const float* x) {
  double* r = &g[row * (inputs + 1)];
  for (std::size_t i = 0; i < inputs; ++i) r[i] += dz * x[i];
  r[inputs] += dz;
}

LossBreakdown sample_pass(const ToyHead& head, const Prepared& prep, std::size_t i,
                          const std::vector<LossTarget>& targets, const RegionGrid& grid, double scale,
                          const LossParams& params, HeadGrad* grad) {
  const std::size_t dim = head.dim;
  const double eps = params.eps;
  const Assignment& a = prep.assignments[i];
  const float* x = prep.pos_x[i].data();
  LossBreakdown out;
  for (std::size_t g = 0; g < targets.size(); ++g) {
    const LossTarget& t = targets[g];
    for (std::size_t c : a.positives[g]) {
      for (std::size_t k = 0; k < head.classes; ++k) {
        const double p = sigmoid(head.cls.apply(k, x));
        const double y = k == t.class_index ? 1.0 : 0.0;
        out.cls += bce(p, y, eps);
        if (grad) accumulate(grad->cls, k, dim, bce_grad(p, y, eps) * p * (1.0 - p), x);
      }
      for (std::size_t b = 0; b < kCslBins; ++b) {
        const double p = sigmoid(head.csl.apply(b, x));
        const double y = prep.labels[i][g].bins[b];
        out.csl += bce(p, y, eps);
        if (grad) accumulate(grad->csl, b, dim, bce_grad(p, y, eps) * p * (1.0 - p), x);
      }
      const double r = head.force.apply(0, x) - t.force;
      out.force += smooth_l1(r);
      if (grad) accumulate(grad->force, 0, dim, smooth_l1_grad(r), x);
      double raw[kBoxParams];
      for (std::size_t p = 0; p < kBoxParams; ++p) raw[p] = head.box.apply(p, x);
      out.box += box_loss(decode_box_params(grid, c, scale, raw), t.box);
      if (grad) {
        const auto db = box_loss_gradient(grid, c, scale, raw, t.box, params.box_fd_step);
        for (std::size_t p = 0; p < kBoxParams; ++p) accumulate(grad->box, p, dim, db[p], x);
      }
      x += dim;
    }
  }
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const float* xo = &prep.obj_x[i][c * dim];
    const double p = sigmoid(head.obj.apply(0, xo));
    const double y = a.owner[c] != kUnassigned ? 1.0 : 0.0;
    out.obj += bce(p, y, eps);
    if (grad) accumulate(grad->obj, 0, dim, bce_grad(p, y, eps) * p * (1.0 - p), xo);
  }
  out.total = out.cls + out.csl + out.force + out.box + out.obj;
  return out;
}

double box_term(const AffineMap& box, const Prepared& prep, const ToyDataset& data, std::size_t dim,
                int threads) {
  std::vector<double> parts(data.samples.size(), 0.0);
  parallel_for(data.samples.size(), threads, [&](std::size_t i) {
    const float* x = prep.pos_x[i].data();
    const auto& targets = data.samples[i].targets;
    for (std::size_t g = 0; g < targets.size(); ++g) {
      for (std::size_t c : prep.assignments[i].positives[g]) {
        double raw[kBoxParams];
        for (std::size_t p = 0; p < kBoxParams; ++p) raw[p] = box.apply(p, x);
        parts[i] += box_loss(decode_box_params(data.grid, c, data.scale, raw), targets[g].box);
        x += dim;
      }
    }
  });
  double sum = 0.0;
  for (double v : parts) sum += v;
  return sum;
}

void add(LossBreakdown& acc, const LossBreakdown& b) {
  acc.cls += b.cls;
  acc.csl += b.csl;
  acc.force += b.force;
  acc.box += b.box;
  acc.obj += b.obj;
}

}  // namespace

ToyHead init_toy_head(const ToyDataset& data, const LossParams& params) {
  data.validate();
  params.validate();
  const std::size_t dim = data.dim;
  const std::vector<Assignment> assignments = assign_all(data, params, 1);

  Moments all(dim), pos(dim);
  double force_sum = 0.0;
  for (std::size_t s = 0; s < data.samples.size(); ++s) {
    const ToySample& sm = data.samples[s];
    for (std::size_t c = 0; c < data.grid.size(); ++c) all.add(&sm.features[c * dim]);
    for (std::size_t g = 0; g < assignments[s].positives.size(); ++g) {
      for (std::size_t c : assignments[s].positives[g]) {
        pos.add(&sm.features[c * dim]);
        force_sum += sm.targets[g].force;
      }
    }
  }
  ToyHead head;
  head.dim = dim;
  head.classes = data.classes;
  head.obj_input = all.whitening();
  head.pos_input = pos.whitening();
  head.obj = AffineMap(1, dim);
  head.cls = AffineMap(data.classes, dim);
  head.csl = AffineMap(kCslBins, dim);
  head.force = AffineMap(1, dim);
  head.box = AffineMap(kBoxParams, dim);
  const double cells = static_cast<double>(all.count());
  const double rate = cells > 0 ? std::clamp(static_cast<double>(pos.count()) / cells, 1e-6, 0.5) : 0.5;
  head.obj.bias(0) = std::log(rate / (1.0 - rate));
  head.force.bias(0) = pos.count() ? force_sum / static_cast<double>(pos.count()) : 0.0;
  const Vec2 wh = prior_box_size(data);
  head.box.bias(2) = wh.x;
  head.box.bias(3) = wh.y;
  return head;
}

LossBreakdown evaluate_toy_head(const ToyHead& head, const ToyDataset& data, const LossParams& params,
                                int threads) {
  const Prepared p = prepare(head, data, params, threads);
  std::vector<LossBreakdown> parts(data.samples.size());
  parallel_for(data.samples.size(), threads, [&](std::size_t i) {
    parts[i] = sample_pass(head, p, i, data.samples[i].targets, data.grid, data.scale, params, nullptr);
  });
  LossBreakdown total;
  for (const auto& b : parts) add(total, b);
  total.total = total.cls + total.csl + total.force + total.box + total.obj;
  return total;
}

TrainResult fit_toy_head(ToyHead& head, const ToyDataset& data, const ToyHyperParams& hyper) {
  hyper.validate();
  const Prepared p = prepare(head, data, hyper.loss, hyper.threads);
  std::vector<const float*> cell_rows, pos_rows;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    for (std::size_t c = 0; c < data.grid.size(); ++c) cell_rows.push_back(&p.obj_x[i][c * head.dim]);
    for (std::size_t r = 0; r < p.pos_x[i].size(); r += head.dim) pos_rows.push_back(&p.pos_x[i][r]);
  }
  auto step_for = [&](const std::vector<const float*>& rows, double c) {
    if (rows.empty()) return 0.0;
    return hyper.learning_rate / (c * augmented_lambda_max(rows, head.dim));
  };
  const double obj_step = step_for(cell_rows, 0.25);
  const double prob_step = step_for(pos_rows, 0.25);
  const double lin_step = step_for(pos_rows, 1.0);

  TrainResult result;
  int rising = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    std::vector<HeadGrad> grads(data.samples.size(), HeadGrad(head));
    std::vector<LossBreakdown> parts(data.samples.size());
    parallel_for(data.samples.size(), hyper.threads, [&](std::size_t i) {
      parts[i] = sample_pass(head, p, i, data.samples[i].targets, data.grid, data.scale, hyper.loss,
                             &grads[i]);
    });
    LossBreakdown total;
    HeadGrad sum(head);
    auto fold = [](std::vector<double>& acc, const std::vector<double>& g) {
      for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
    };
    for (std::size_t i = 0; i < parts.size(); ++i) {
      add(total, parts[i]);
      fold(sum.obj, grads[i].obj);
      fold(sum.cls, grads[i].cls);
      fold(sum.csl, grads[i].csl);
      fold(sum.force, grads[i].force);
      fold(sum.box, grads[i].box);
    }
    total.total = total.cls + total.csl + total.force + total.box + total.obj;
    if (!result.curve.empty() && total.total > result.curve.back().total) {
      ++rising;
    } else {
      rising = 0;
    }
    result.curve.push_back(total);
    if (!std::isfinite(total.total) || rising >= hyper.divergence_patience ||
        total.total > hyper.divergence_factor * result.curve.front().total) {
      result.diverged = true;
      break;
    }
    auto step = [](std::vector<double>& w, const std::vector<double>& g, double s) {
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= s * g[j];
    };
    step(head.obj.weights, sum.obj, obj_step);
    step(head.cls.weights, sum.cls, prob_step);
    step(head.csl.weights, sum.csl, prob_step);
    step(head.force.weights, sum.force, lin_step);
    AffineMap trial = head.box;
    for (double s = lin_step; s > lin_step * 1e-9; s /= 2.0) {
      trial.weights = head.box.weights;
      step(trial.weights, sum.box, s);
      if (box_term(trial, p, data, head.dim, hyper.threads) <= total.box) {
        head.box = trial;
        break;
      }
    }
    ++head.epochs_trained;
  }
  return result;
}

ToyDetection toy_infer(const ToyHead& head, const std::vector<double>& features, const RegionGrid& grid,
                       double scale) {
  if (features.size() != grid.size() * head.dim) {
    throw ContractViolation("feature matrix does not match the region grid");
  }
  const std::vector<float> xo = head.obj_input.apply_all(features);
  ToyDetection d;
  d.objectness = -1.0;
  for (std::size_t c = 0; c < grid.size(); ++c) {
    const double p = sigmoid(head.obj.apply(0, &xo[c * head.dim]));
    if (p > d.objectness) {
      d.objectness = p;
      d.cell = c;
    }
  }
  std::vector<float> x(head.dim);
  head.pos_input.apply(&features[d.cell * head.dim], x.data());
  double best = -1.0;
  for (std::size_t k = 0; k < head.classes; ++k) {
    const double p = sigmoid(head.cls.apply(k, x.data()));
    if (p > best) {
      best = p;
      d.class_index = k;
    }
  }
  d.force = head.force.apply(0, x.data());
  double raw[kBoxParams];
  for (std::size_t p = 0; p < kBoxParams; ++p) raw[p] = head.box.apply(p, x.data());
  d.box = decode_box_params(grid, d.cell, scale, raw);
  return d;
}

namespace {

Json map_json(const AffineMap& m) {
  return Json{{"outputs", m.outputs}, {"inputs", m.inputs}, {"weights", m.weights}};
}

AffineMap map_from(const Json& j, std::size_t outputs, std::size_t inputs, const std::string& name) {
  AffineMap m;
  m.outputs = j.at("outputs").get<std::size_t>();
  m.inputs = j.at("inputs").get<std::size_t>();
  m.weights = j.at("weights").get<std::vector<double>>();
  if (m.outputs != outputs || m.inputs != inputs || m.weights.size() != outputs * (inputs + 1)) {
    throw IoError("toy head matrix '" + name + "' has the wrong shape");
  }
  return m;
}

Json whitening_json(const Whitening& w) { return Json{{"mean", w.mean}, {"matrix", w.matrix}}; }

Whitening whitening_from(const Json& j, std::size_t dim, const std::string& name) {
  Whitening w;
  w.mean = j.at("mean").get<std::vector<double>>();
  w.matrix = j.at("matrix").get<std::vector<double>>();
  if (w.mean.size() != dim || w.matrix.size() != dim * dim) {
    throw IoError("toy head whitening '" + name + "' has the wrong shape");
  }
  return w;
}

}  // namespace

void save_toy_head(const ToyHead& head, const std::filesystem::path& path) {
  Json j;
  j["version"] = ToyHead::kVersion;
  j["dim"] = head.dim;
  j["classes"] = head.classes;
  j["epochs_trained"] = head.epochs_trained;
  j["obj_input"] = whitening_json(head.obj_input);
  j["pos_input"] = whitening_json(head.pos_input);
  j["obj"] = map_json(head.obj);
  j["cls"] = map_json(head.cls);
  j["csl"] = map_json(head.csl);
  j["force"] = map_json(head.force);
  j["box"] = map_json(head.box);
  std::ofstream out(path);
  if (!out) throw IoError("cannot write toy head " + path.string());
  out << j.dump() << '\n';
  if (!out) throw IoError("failed writing toy head " + path.string());
}

ToyHead load_toy_head(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read toy head " + path.string());
  ToyHead head;
  try {
    const Json j = Json::parse(in);
    const int version = j.at("version").get<int>();
    if (version != ToyHead::kVersion) {
      throw IoError("toy head version " + std::to_string(version) + " is not supported");
    }
    head.dim = j.at("dim").get<std::size_t>();
    head.classes = j.at("classes").get<std::size_t>();
    head.epochs_trained = j.at("epochs_trained").get<std::size_t>();
    head.obj_input = whitening_from(j.at("obj_input"), head.dim, "obj_input");
    head.pos_input = whitening_from(j.at("pos_input"), head.dim, "pos_input");
    head.obj = map_from(j.at("obj"), 1, head.dim, "obj");
    head.cls = map_from(j.at("cls"), head.classes, head.dim, "cls");
    head.csl = map_from(j.at("csl"), kCslBins, head.dim, "csl");
    head.force = map_from(j.at("force"), 1, head.dim, "force");
    head.box = map_from(j.at("box"), kBoxParams, head.dim, "box");
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed toy head " + path.string() + ": " + e.what());
  }
  return head;
}

}  // namespace tactwin
