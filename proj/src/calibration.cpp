#include "tactwin/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <set>

#include "tactwin/errors.hpp"
#include "tactwin/parallel.hpp"
#include "tactwin/serialize.hpp"

namespace tactwin {
namespace {

// Weighted quantile of (value, weight) pairs; linear between cumulative
// weight midpoints.
double weighted_quantile(std::vector<std::pair<double, double>> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double total = 0.0;
  for (const auto& e : v) total += e.second;
  const double target = q * total;
  double cum = 0.0;
  double prev_mid = 0.0, prev_val = v.front().first;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double mid = cum + 0.5 * v[i].second;
    if (mid >= target) {
      if (i == 0 || mid <= prev_mid) return v[i].first;
      const double t = (target - prev_mid) / (mid - prev_mid);
      return prev_val + t * (v[i].first - prev_val);
    }
    cum += v[i].second;
    prev_mid = mid;
    prev_val = v[i].first;
  }
  return v.back().first;
}

// |dev|-weighted quantile extents of the blob projected on u and its normal.
std::pair<double, double> projected_extents(const Blob& b, const DeviationMap& dev, Vec2 u,
                                            const DecoderParams& p) {
  std::vector<std::pair<double, double>> pu, pv;
  pu.reserve(b.pixels.size());
  pv.reserve(b.pixels.size());
  const Vec2 v{-u.y, u.x};
  for (std::size_t i : b.pixels) {
    const Vec2 q = dev.pixel_center(static_cast<int>(i / dev.width), static_cast<int>(i % dev.width));
    const double w = std::abs(dev.data[i]);
    pu.emplace_back(dot(q, u), w);
    pv.emplace_back(dot(q, v), w);
  }
  return {weighted_quantile(pu, p.box_hi_quantile) - weighted_quantile(pu, p.box_lo_quantile),
          weighted_quantile(pv, p.box_hi_quantile) - weighted_quantile(pv, p.box_lo_quantile)};
}

void quantize(CanonicalMask& m) {
  for (double& v : m.cells) v = std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0;
}

CalibrationRow analyze_row(const ProbeSpec& probe, double force, const SimParams& sim,
                           const DecoderParams& dec, const TactileImage& reference) {
  ContactScenario s;
  s.probe = probe;
  s.force = force;
  CalibrationRow row;
  row.force = force;
  const GroundTruth gt = ground_truth(s, sim);
  row.box_w = gt.box.w;
  row.box_h = gt.box.h;
  if (force <= 0.0) return row;
  const TactileImage img = simulate(s, sim, 0).image;
  const DeviationMap dev = prepare_deviation(img, reference, dec);
  const double thr = dec.threshold();
  const std::vector<Blob> blobs = extract_blobs(dev, thr, dec.min_area, dec.merge_gap);
  if (blobs.empty()) return row;
  const Blob& b = blobs.front();
  row.area = b.area;
  row.mass = b.mass;
  row.contrast = b.peak_dev;
  row.profile = radial_profile(dev, blob_groups(dev, thr, dec.merge_gap), b, dec);
  const PoseEstimate pose = estimate_pose(b, dec.isotropy_threshold);
  row.principal_angle = pose.principal_angle;
  row.eccentricity = pose.eccentricity;
  row.centroid_offset = b.centroid;
  std::tie(row.extent_u, row.extent_v) = projected_extents(b, dev, {1.0, 0.0}, dec);
  row.mask = canonical_mask(coarse_mask(b, dev.width, dev.height, dev.scale, dec), b.centroid,
                            0.0, dec);
  quantize(row.mask);
  return row;
}

void check_curve(const CalibrationCurve& c) {
  std::size_t first = c.rows.size();
  for (std::size_t i = 0; i < c.rows.size(); ++i) {
    if (c.rows[i].detected()) {
      first = i;
      break;
    }
  }
  if (first == c.rows.size()) {
    throw CalibrationError("calibration for " + c.variant + " never produced a contact blob");
  }
  for (std::size_t i = first + 1; i < c.rows.size(); ++i) {
    const CalibrationRow& a = c.rows[i - 1];
    const CalibrationRow& b = c.rows[i];
    if (!b.detected() || !(b.area > a.area) || !(b.mass > a.mass)) {
      throw CalibrationError("calibration for " + c.variant + " is not strictly increasing at " +
                             std::to_string(b.force) + " N");
    }
  }
}

// Piecewise cubic Hermite interpolant with shape-preserving slopes.
class Pchip {
 public:
  Pchip(std::vector<double> x, std::vector<double> y) : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    d_.assign(n, 0.0);
    if (n < 2) return;
    std::vector<double> h(n - 1), del(n - 1);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      h[k] = x_[k + 1] - x_[k];
      del[k] = (y_[k + 1] - y_[k]) / h[k];
    }
    if (n == 2) {
      d_[0] = d_[1] = del[0];
      return;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (del[k - 1] * del[k] <= 0.0) continue;
      const double w1 = 2.0 * h[k] + h[k - 1], w2 = h[k] + 2.0 * h[k - 1];
      d_[k] = (w1 + w2) / (w1 / del[k - 1] + w2 / del[k]);
    }
    d_[0] = end_slope(h[0], h[1], del[0], del[1]);
    d_[n - 1] = end_slope(h[n - 2], h[n - 3], del[n - 2], del[n - 3]);
  }

  double operator()(double x) const {
    const std::size_t n = x_.size();
    if (n == 1) return y_[0];
    std::size_t k = std::upper_bound(x_.begin(), x_.end(), x) - x_.begin();
    k = std::clamp<std::size_t>(k, 1, n - 1) - 1;
    const double h = x_[k + 1] - x_[k];
    const double t = (x - x_[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y_[k] + (t3 - 2 * t2 + t) * h * d_[k] +
           (-2 * t3 + 3 * t2) * y_[k + 1] + (t3 - t2) * h * d_[k + 1];
  }

 private:
  static double end_slope(double h0, double h1, double m0, double m1) {
    double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if (d * m0 <= 0.0) {
      d = 0.0;
    } else if (m0 * m1 <= 0.0 && std::abs(d) > std::abs(3.0 * m0)) {
      d = 3.0 * m0;
    }
    return d;
  }

  std::vector<double> x_, y_, d_;
};

std::string hex_encode(const CanonicalMask& m) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(m.cells.size() * 2);
  for (double v : m.cells) {
    const int b = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

std::vector<double> hex_decode(const std::string& s) {
  if (s.size() % 2) throw IoError("calibration mask has odd hex length");
  auto nib = [](char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw IoError("calibration mask has a non-hex digit");
  };
  std::vector<double> out(s.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = (nib(s[2 * i]) * 16 + nib(s[2 * i + 1])) / 255.0;
  }
  return out;
}

Json row_to_json(const CalibrationRow& r) {
  Json j{{"force", r.force},
         {"area", r.area},
         {"mass", r.mass},
         {"contrast", r.contrast},
         {"principal_angle", r.principal_angle},
         {"eccentricity", r.eccentricity},
         {"centroid_offset", {r.centroid_offset.x, r.centroid_offset.y}},
         {"extent_u", r.extent_u},
         {"extent_v", r.extent_v},
         {"box_w", r.box_w},
         {"box_h", r.box_h},
         {"profile", r.profile}};
  if (!r.mask.cells.empty()) {
    j["mask"] = Json{{"size", r.mask.size}, {"scale", r.mask.scale}, {"data", hex_encode(r.mask)}};
  }
  return j;
}

CalibrationRow row_from_json(const Json& j) {
  CalibrationRow r;
  r.force = j.at("force").get<double>();
  r.area = j.at("area").get<double>();
  r.mass = j.at("mass").get<double>();
  r.contrast = j.at("contrast").get<double>();
  r.principal_angle = j.at("principal_angle").get<double>();
  r.eccentricity = j.at("eccentricity").get<double>();
  r.centroid_offset = {j.at("centroid_offset").at(0).get<double>(),
                       j.at("centroid_offset").at(1).get<double>()};
  r.extent_u = j.at("extent_u").get<double>();
  r.extent_v = j.at("extent_v").get<double>();
  r.box_w = j.at("box_w").get<double>();
  r.box_h = j.at("box_h").get<double>();
  r.profile = j.at("profile").get<std::vector<double>>();
  if (j.contains("mask")) {
    const Json& m = j.at("mask");
    r.mask.size = m.at("size").get<int>();
    r.mask.scale = m.at("scale").get<double>();
    r.mask.cells = hex_decode(m.at("data").get<std::string>());
    if (r.mask.cells.size() != static_cast<std::size_t>(r.mask.size) * r.mask.size) {
      throw IoError("calibration mask size mismatch");
    }
  }
  return r;
}

std::vector<const CalibrationRow*> detected_rows(const CalibrationCurve& c) {
  std::vector<const CalibrationRow*> out;
  for (const auto& r : c.rows) {
    if (r.detected()) out.push_back(&r);
  }
  if (out.empty()) throw CalibrationError("calibration curve " + c.variant + " has no detected rows");
  return out;
}

}  // namespace

std::size_t CalibrationCurve::floor_index() const {
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].detected()) return i;
  }
  throw CalibrationError("calibration curve " + variant + " has no detected rows");
}

bool CalibrationCurve::oriented(double isotropy_threshold) const {
  return rows.back().eccentricity >= isotropy_threshold;
}

std::vector<std::string> CalibrationTable::class_names() const {
  std::set<std::string> names;
  for (const auto& c : curves) names.insert(c.class_name);
  return {names.begin(), names.end()};
}

const CalibrationCurve& CalibrationTable::curve(const std::string& variant) const {
  for (const auto& c : curves) {
    if (c.variant == variant) return c;
  }
  throw ContractViolation("no calibration curve for " + variant);
}

std::vector<double> force_grid(double step, double max_force) {
  if (!(step > 0.0) || !(max_force > 0.0)) throw ConfigError("force grid needs positive step and range");
  const long n = std::lround(max_force / step);
  std::vector<double> out;
  for (long i = 0; i <= n; ++i) out.push_back(std::min(max_force, static_cast<double>(i) * step));
  return out;
}

std::string calibration_hash(const SimParams& sim, const DecoderParams& dec,
                             const std::vector<double>& forces) {
  const Json j{{"sim", to_json(sim)}, {"decoder", to_json(dec)}, {"forces", forces}};
  return fnv1a_hex(canonical_dump(j));
}

CalibrationTable build_calibration(const std::vector<ProbeSpec>& probes, const SimParams& sim,
                                   const DecoderParams& dec, const std::vector<double>& forces,
                                   int threads) {
  sim.validate();
  dec.validate();
  if (probes.empty()) throw ConfigError("calibration needs at least one probe");
  if (forces.empty() || forces.front() != 0.0 ||
      !std::is_sorted(forces.begin(), forces.end(), std::less_equal<>())) {
    throw ConfigError("calibration forces must start at 0 and increase strictly");
  }
  CalibrationTable table;
  table.param_hash = calibration_hash(sim, dec, forces);
  table.forces = forces;
  std::set<std::string> seen;
  for (const ProbeSpec& p : probes) {
    validate_probe(p);
    CalibrationCurve c;
    c.class_name = probe_class(p);
    c.variant = probe_label(p);
    c.probe = p;
    c.rows.resize(forces.size());
    if (!seen.insert(c.variant).second) throw ConfigError("duplicate calibration probe " + c.variant);
    table.curves.push_back(std::move(c));
  }
  const TactileImage reference = reference_image(sim);
  const std::size_t nf = forces.size();
  parallel_for(table.curves.size() * nf, threads, [&](std::size_t i) {
    CalibrationCurve& c = table.curves[i / nf];
    c.rows[i % nf] = analyze_row(c.probe, forces[i % nf], sim, dec, reference);
  });
  for (const auto& c : table.curves) check_curve(c);
  return table;
}

void save_calibration(const CalibrationTable& table, const std::filesystem::path& path) {
  Json j;
  j["version"] = 1;
  j["param_hash"] = table.param_hash;
  j["forces"] = table.forces;
  Json curves = Json::array();
  for (const auto& c : table.curves) {
    Json rows = Json::array();
    for (const auto& r : c.rows) rows.push_back(row_to_json(r));
    curves.push_back(Json{{"class", c.class_name},
                          {"variant", c.variant},
                          {"probe", to_json(c.probe)},
                          {"rows", rows}});
  }
  j["curves"] = curves;
  std::ofstream out(path);
  if (!out) throw IoError("cannot write calibration " + path.string());
  out << j.dump(1) << '\n';
  if (!out) throw IoError("failed writing calibration " + path.string());
}

CalibrationTable load_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read calibration " + path.string());
  CalibrationTable table;
  try {
    const Json j = Json::parse(in);
    if (j.at("version").get<int>() != 1) throw IoError("unsupported calibration version");
    table.param_hash = j.at("param_hash").get<std::string>();
    table.forces = j.at("forces").get<std::vector<double>>();
    for (const Json& cj : j.at("curves")) {
      CalibrationCurve c;
      c.class_name = cj.at("class").get<std::string>();
      c.variant = cj.at("variant").get<std::string>();
      c.probe = probe_from_json(cj.at("probe"));
      for (const Json& rj : cj.at("rows")) c.rows.push_back(row_from_json(rj));
      table.curves.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed calibration " + path.string() + ": " + e.what());
  }
  return table;
}

ForceEstimate estimate_force(const Blob& blob, const CalibrationCurve& curve) {
  const auto rows = detected_rows(curve);
  ForceEstimate est;
  const CalibrationRow& lo = *rows.front();
  const CalibrationRow& hi = *rows.back();
  if (blob.mass < lo.mass) {
    const std::size_t fi = curve.floor_index();
    const double f0 = fi > 0 ? curve.rows[fi - 1].force : 0.0;
    est.force = f0 + (lo.force - f0) * std::max(0.0, blob.mass) / lo.mass;
    est.out_of_range = true;
    return est;
  }
  if (blob.mass > hi.mass) {
    est.force = hi.force;
    est.out_of_range = true;
    return est;
  }
  std::vector<double> x, y;
  for (const auto* r : rows) {
    x.push_back(r->mass);
    y.push_back(r->force);
  }
  est.force = std::clamp(Pchip(std::move(x), std::move(y))(blob.mass), lo.force, hi.force);
  return est;
}

CalibrationRow interpolate_row(const CalibrationCurve& curve, double force) {
  const auto rows = detected_rows(curve);
  if (force <= rows.front()->force) return *rows.front();
  if (force >= rows.back()->force) return *rows.back();
  std::size_t k = 1;
  while (rows[k]->force < force) ++k;
  const CalibrationRow& a = *rows[k - 1];
  const CalibrationRow& b = *rows[k];
  const double t = (force - a.force) / (b.force - a.force);
  auto lerp = [t](double u, double v) { return u + t * (v - u); };
  CalibrationRow r = t < 0.5 ? a : b;
  r.force = force;
  r.area = lerp(a.area, b.area);
  r.mass = lerp(a.mass, b.mass);
  r.contrast = lerp(a.contrast, b.contrast);
  r.eccentricity = lerp(a.eccentricity, b.eccentricity);
  r.centroid_offset = {lerp(a.centroid_offset.x, b.centroid_offset.x),
                       lerp(a.centroid_offset.y, b.centroid_offset.y)};
  r.extent_u = lerp(a.extent_u, b.extent_u);
  r.extent_v = lerp(a.extent_v, b.extent_v);
  r.box_w = lerp(a.box_w, b.box_w);
  r.box_h = lerp(a.box_h, b.box_h);
  for (std::size_t i = 0; i < r.profile.size() && i < a.profile.size() && i < b.profile.size(); ++i) {
    r.profile[i] = lerp(a.profile[i], b.profile[i]);
  }
  return r;
}

Decoder::Decoder(CalibrationTable table, const SimParams& sim, const DecoderParams& params)
    : table_(std::move(table)), params_(params), max_force_(sim.material.max_force) {
  params_.validate();
  const std::string expected = calibration_hash(sim, params_, table_.forces);
  if (expected != table_.param_hash) throw StaleCalibrationError(expected, table_.param_hash);
  if (table_.curves.empty()) throw ContractViolation("calibration table has no curves");
}

std::vector<Detection> Decoder::decode(const TactileImage& img, const TactileImage& reference) const {
  const DeviationMap dev = prepare_deviation(img, reference, params_);
  const double thr = params_.threshold();
  const std::vector<Blob> blobs = extract_blobs(dev, thr, params_.min_area, params_.merge_gap);
  if (blobs.empty()) return {};
  const Raster<int> labels = blob_groups(dev, thr, params_.merge_gap);
  const std::vector<std::string> classes = table_.class_names();

  std::vector<Detection> out;
  for (const Blob& blob : blobs) {
    PoseEstimate pose;
    try {
      pose = estimate_pose(blob, params_.isotropy_threshold);
    } catch (const DecodeError&) {
      continue;
    }
    const CoarseMask coarse = coarse_mask(blob, dev.width, dev.height, dev.scale, params_);
    const std::vector<double> profile = radial_profile(dev, labels, blob, params_);

    struct Candidate {
      const CalibrationCurve* curve = nullptr;
      ForceEstimate force;
      CalibrationRow row;
      ClassMatch match;
    };
    bool have = false;
    Candidate best;
    for (const std::string& cls : classes) {
      Candidate cand;
      double best_sse = 0.0;
      for (const CalibrationCurve& c : table_.curves) {
        if (c.class_name != cls) continue;
        const ForceEstimate fe = estimate_force(blob, c);
        CalibrationRow row = interpolate_row(c, fe.force);
        double sse = 0.0;
        for (std::size_t i = 0; i < profile.size(); ++i) {
          const double ref = i < row.profile.size() ? row.profile[i] : 0.0;
          sse += (profile[i] - ref) * (profile[i] - ref);
        }
        if (!cand.curve || sse < best_sse) {
          best_sse = sse;
          cand.curve = &c;
          cand.force = fe;
          cand.row = std::move(row);
        }
      }
      cand.match = match_template(coarse, blob.centroid, ClassTemplate{cls, cand.row.mask}, params_);
      if (!have || cand.match.score > best.match.score) {
        best = std::move(cand);
        have = true;
      }
    }
    if (!have) continue;

    const CalibrationRow& row = best.row;
    Detection det;
    det.class_name = best.curve->class_name;
    det.variant = best.curve->variant;
    det.force = std::clamp(best.force.force, 0.0, max_force_);
    det.force_out_of_range = best.force.out_of_range;
    det.score = std::clamp(best.match.score, 0.0, 1.0);
    double full = 0.0;
    if (row.eccentricity >= params_.isotropy_threshold) {
      const double t0 = normalize_angle(pose.principal_angle - row.principal_angle).value();
      auto circ = [](double a, double b) {
        const double d = std::fmod(std::abs(a - b), 360.0);
        return std::min(d, 360.0 - d);
      };
      full = circ(t0, best.match.rotation) <= circ(t0 + 180.0, best.match.rotation) ? t0
                                                                                     : t0 + 180.0;
    } else {
      det.low_confidence_pose = true;
    }
    const Vec2 center = blob.centroid - rotate(row.centroid_offset, full);
    const double rad = full * std::numbers::pi / 180.0;
    const auto [eu, ev] = projected_extents(blob, dev, {std::cos(rad), std::sin(rad)}, params_);
    const double w = std::max(dev.scale, row.box_w + eu - row.extent_u);
    const double h = std::max(dev.scale, row.box_h + ev - row.extent_v);
    det.box = make_box(center.x, center.y, w, h, full);
    det.theta = det.box.theta;
    out.push_back(std::move(det));
  }
  return out;
}

}  // namespace tactwin
