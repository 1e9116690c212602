#include "tactwin/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "tactwin/errors.hpp"
#include "tactwin/serialize.hpp"

namespace tactwin {

MatchResult match_detections(const std::vector<Detection>& dets,
                             const std::vector<GroundTruth>& truths, double iou_threshold,
                             bool class_aware) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  MatchResult out;
  std::vector<bool> taken(truths.size(), false);
  for (std::size_t d : order) {
    std::ptrdiff_t best = -1;
    double best_iou = 0.0;
    for (std::size_t t = 0; t < truths.size(); ++t) {
      if (taken[t]) continue;
      if (class_aware && truths[t].class_name != dets[d].class_name) continue;
      const double iou = rotated_iou(dets[d].box, truths[t].box);
      if (iou >= iou_threshold && (best < 0 || iou > best_iou)) {
        best = static_cast<std::ptrdiff_t>(t);
        best_iou = iou;
      }
    }
    if (best < 0) {
      out.false_positives.push_back(d);
    } else {
      taken[best] = true;
      out.pairs.push_back({d, static_cast<std::size_t>(best), best_iou});
    }
  }
  for (std::size_t t = 0; t < truths.size(); ++t) {
    if (!taken[t]) out.false_negatives.push_back(t);
  }
  std::sort(out.false_positives.begin(), out.false_positives.end());
  return out;
}

namespace {

template <class T, class Err>
std::optional<double> mean_error(const std::vector<T>& pred, const std::vector<T>& truth, Err err) {
  if (pred.size() != truth.size()) throw ContractViolation("MAE inputs differ in length");
  if (pred.empty()) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += err(pred[i], truth[i]);
  return sum / static_cast<double>(pred.size());
}

}  // namespace

std::optional<double> mae(const std::vector<double>& pred, const std::vector<double>& truth) {
  return mean_error(pred, truth, [](double a, double b) { return std::abs(a - b); });
}

std::optional<double> angle_mae(const std::vector<AngleDeg>& pred, const std::vector<AngleDeg>& truth) {
  return mean_error(pred, truth, [](AngleDeg a, AngleDeg b) { return angle_error(a, b); });
}

std::optional<double> location_mae(const std::vector<Vec2>& pred, const std::vector<Vec2>& truth) {
  return mean_error(pred, truth, [](Vec2 a, Vec2 b) { return norm(a - b); });
}

std::optional<double> f1_score(std::optional<double> precision, std::optional<double> recall) {
  if (!precision || !recall) return std::nullopt;
  const double s = *precision + *recall;
  return s > 0.0 ? 2.0 * *precision * *recall / s : 0.0;
}

PrecisionRecall precision_recall_ap(const std::vector<EvalSample>& samples, double iou_threshold,
                                    const std::string& class_name) {
  struct Ranked {
    double score;
    std::size_t sample;
    std::size_t det;
    bool tp;
  };
  std::vector<Ranked> ranked;
  PrecisionRecall out;
  for (std::size_t s = 0; s < samples.size(); ++s) {
    const EvalSample& sm = samples[s];
    std::vector<Detection> dets;
    std::vector<GroundTruth> truths;
    for (const auto& d : sm.detections) {
      if (class_name.empty() || d.class_name == class_name) dets.push_back(d);
    }
    for (const auto& t : sm.truths) {
      if (class_name.empty() || t.class_name == class_name) truths.push_back(t);
    }
    out.truths += truths.size();
    const MatchResult m = match_detections(dets, truths, iou_threshold, true);
    std::vector<bool> tp(dets.size(), false);
    for (const auto& p : m.pairs) tp[p.detection] = true;
    for (std::size_t d = 0; d < dets.size(); ++d) ranked.push_back({dets[d].score, s, d, tp[d]});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    (ranked[i].tp ? out.true_positives : out.false_positives) += 1;
    // one operating point per distinct score
    if (i + 1 < ranked.size() && ranked[i + 1].score == ranked[i].score) continue;
    const double prec = static_cast<double>(out.true_positives) /
                        static_cast<double>(out.true_positives + out.false_positives);
    const double rec = out.truths ? static_cast<double>(out.true_positives) / out.truths : 0.0;
    out.curve.emplace_back(rec, prec);
  }
  if (!ranked.empty()) {
    out.precision = static_cast<double>(out.true_positives) / static_cast<double>(ranked.size());
  }
  if (out.truths > 0) {
    out.recall = static_cast<double>(out.true_positives) / static_cast<double>(out.truths);
    double ap = 0.0;
    double prev_recall = 0.0;
    for (std::size_t i = 0; i < out.curve.size(); ++i) {
      double envelope = 0.0;
      for (std::size_t j = i; j < out.curve.size(); ++j) {
        envelope = std::max(envelope, out.curve[j].second);
      }
      ap += (out.curve[i].first - prev_recall) * envelope;
      prev_recall = out.curve[i].first;
    }
    out.ap = ap;
  }
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

std::optional<double> ConfusionMatrix::recall(std::size_t gt_class) const {
  const auto& row = counts[gt_class];
  const std::size_t total = std::accumulate(row.begin(), row.end(), std::size_t{0});
  if (total == 0) return std::nullopt;
  return static_cast<double>(row[gt_class]) / static_cast<double>(total);
}

ConfusionMatrix confusion_matrix(const std::vector<EvalSample>& samples,
                                 const std::vector<std::string>& classes, double iou_threshold) {
  ConfusionMatrix cm;
  cm.classes = classes;
  cm.counts.assign(classes.size(), std::vector<std::size_t>(classes.size() + 1, 0));
  auto index = [&](const std::string& name) {
    const auto it = std::find(classes.begin(), classes.end(), name);
    if (it == classes.end()) throw ContractViolation("class '" + name + "' not in the class list");
    return static_cast<std::size_t>(it - classes.begin());
  };
  for (const EvalSample& s : samples) {
    const MatchResult m = match_detections(s.detections, s.truths, iou_threshold, false);
    for (const auto& p : m.pairs) {
      ++cm.counts[index(s.truths[p.truth].class_name)][index(s.detections[p.detection].class_name)];
    }
    for (std::size_t t : m.false_negatives) ++cm.counts[index(s.truths[t].class_name)].back();
  }
  return cm;
}

MetricsReport evaluate(const std::vector<EvalSample>& samples, std::vector<std::string> classes,
                       const std::vector<std::string>& oriented_classes, double iou_threshold) {
  std::set<std::string> all(classes.begin(), classes.end());
  for (const auto& s : samples) {
    for (const auto& t : s.truths) all.insert(t.class_name);
    for (const auto& d : s.detections) all.insert(d.class_name);
  }
  classes.assign(all.begin(), all.end());
  const std::set<std::string> oriented(oriented_classes.begin(), oriented_classes.end());

  MetricsReport r;
  r.iou_threshold = iou_threshold;
  r.samples = samples.size();
  r.classes = classes;
  for (const auto& c : classes) {
    if (oriented.count(c)) r.oriented_classes.push_back(c);
  }

  struct Errors {
    std::vector<double> fp, ft;
    std::vector<AngleDeg> ap, at;
    std::vector<Vec2> lp, lt;
  };
  std::vector<Errors> per(classes.size());
  Errors pooled;
  std::vector<std::size_t> truths(classes.size(), 0), dets(classes.size(), 0), matched(classes.size(), 0);
  auto idx = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(classes.begin(), classes.end(), n) - classes.begin());
  };
  for (const EvalSample& s : samples) {
    for (const auto& t : s.truths) ++truths[idx(t.class_name)];
    for (const auto& d : s.detections) ++dets[idx(d.class_name)];
    const MatchResult m = match_detections(s.detections, s.truths, iou_threshold, false);
    for (const auto& p : m.pairs) {
      const Detection& d = s.detections[p.detection];
      const GroundTruth& t = s.truths[p.truth];
      const std::size_t k = idx(t.class_name);
      ++matched[k];
      for (Errors* e : {&per[k], &pooled}) {
        e->fp.push_back(d.force);
        e->ft.push_back(t.force);
        e->lp.push_back(d.box.center());
        e->lt.push_back(t.box.center());
        if (oriented.count(t.class_name)) {
          e->ap.push_back(d.theta);
          e->at.push_back(t.theta);
        }
      }
    }
  }
  auto fill = [&](ClassMetrics& m, const Errors& e, const PrecisionRecall& pr) {
    m.force_mae = mae(e.fp, e.ft);
    m.angle_mae = angle_mae(e.ap, e.at);
    m.location_mae = location_mae(e.lp, e.lt);
    m.precision = pr.precision;
    m.recall = pr.recall;
    m.ap50 = pr.ap;
    m.f1 = pr.f1;
  };
  double ap_sum = 0.0;
  std::size_t ap_count = 0;
  for (std::size_t k = 0; k < classes.size(); ++k) {
    ClassMetrics m;
    m.name = classes[k];
    m.truths = truths[k];
    m.detections = dets[k];
    m.matched = matched[k];
    fill(m, per[k], precision_recall_ap(samples, iou_threshold, classes[k]));
    if (m.ap50) {
      ap_sum += *m.ap50;
      ++ap_count;
    }
    r.per_class.push_back(m);
  }
  r.overall.name = "overall";
  r.overall.truths = std::accumulate(truths.begin(), truths.end(), std::size_t{0});
  r.overall.detections = std::accumulate(dets.begin(), dets.end(), std::size_t{0});
  r.overall.matched = std::accumulate(matched.begin(), matched.end(), std::size_t{0});
  fill(r.overall, pooled, precision_recall_ap(samples, iou_threshold, ""));
  if (ap_count) r.map50 = ap_sum / static_cast<double>(ap_count);
  r.confusion = confusion_matrix(samples, classes, iou_threshold);
  return r;
}

namespace {

Json opt_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::optional<double> opt_from(const Json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

Json metrics_json(const ClassMetrics& m) {
  return Json{{"name", m.name},
              {"truths", m.truths},
              {"detections", m.detections},
              {"matched", m.matched},
              {"force_mae", opt_json(m.force_mae)},
              {"angle_mae", opt_json(m.angle_mae)},
              {"location_mae", opt_json(m.location_mae)},
              {"precision", opt_json(m.precision)},
              {"recall", opt_json(m.recall)},
              {"ap50", opt_json(m.ap50)},
              {"f1", opt_json(m.f1)}};
}

ClassMetrics metrics_from(const Json& j) {
  ClassMetrics m;
  m.name = j.at("name").get<std::string>();
  m.truths = j.at("truths").get<std::size_t>();
  m.detections = j.at("detections").get<std::size_t>();
  m.matched = j.at("matched").get<std::size_t>();
  m.force_mae = opt_from(j.at("force_mae"));
  m.angle_mae = opt_from(j.at("angle_mae"));
  m.location_mae = opt_from(j.at("location_mae"));
  m.precision = opt_from(j.at("precision"));
  m.recall = opt_from(j.at("recall"));
  m.ap50 = opt_from(j.at("ap50"));
  m.f1 = opt_from(j.at("f1"));
  return m;
}

std::string cell(const std::optional<double>& v, int width) {
  char buf[32];
  if (v) {
    std::snprintf(buf, sizeof buf, "%*.4f", width, *v);
  } else {
    std::snprintf(buf, sizeof buf, "%*s", width, "n/a");
  }
  return buf;
}

}  // namespace

std::string report_table(const MetricsReport& r) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-12s %6s %6s %6s %12s %14s %15s %10s %10s %10s %10s\n", "class",
                "truth", "dets", "match", "force[N]", "angle[deg]", "location[mm]", "precision",
                "recall", "ap50", "f1");
  os << buf;
  auto row = [&](const ClassMetrics& m) {
    std::snprintf(buf, sizeof buf, "%-12s %6zu %6zu %6zu", m.name.c_str(), m.truths, m.detections,
                  m.matched);
    os << buf << ' ' << cell(m.force_mae, 12) << ' ' << cell(m.angle_mae, 14) << ' '
       << cell(m.location_mae, 15) << ' ' << cell(m.precision, 10) << ' ' << cell(m.recall, 10)
       << ' ' << cell(m.ap50, 10) << ' ' << cell(m.f1, 10) << '\n';
  };
  for (const auto& m : r.per_class) row(m);
  row(r.overall);
  os << "map50 " << cell(r.map50, 0) << '\n';
  os << "\nconfusion (rows: truth, columns: detected, last: missed)\n";
  std::snprintf(buf, sizeof buf, "%-12s", "");
  os << buf;
  for (const auto& c : r.confusion.classes) {
    std::snprintf(buf, sizeof buf, " %10.10s", c.c_str());
    os << buf;
  }
  os << "     missed\n";
  for (std::size_t i = 0; i < r.confusion.classes.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%-12s", r.confusion.classes[i].c_str());
    os << buf;
    for (std::size_t v : r.confusion.counts[i]) {
      std::snprintf(buf, sizeof buf, " %10zu", v);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

void write_report(const MetricsReport& r, const std::filesystem::path& path) {
  Json j;
  j["version"] = r.version;
  j["iou_threshold"] = r.iou_threshold;
  j["samples"] = r.samples;
  j["units"] = Json{{"force_mae", "N"}, {"angle_mae", "deg"}, {"location_mae", "mm"}};
  j["classes"] = r.classes;
  j["oriented_classes"] = r.oriented_classes;
  j["overall"] = metrics_json(r.overall);
  j["map50"] = opt_json(r.map50);
  Json per = Json::array();
  for (const auto& m : r.per_class) per.push_back(metrics_json(m));
  j["per_class"] = per;
  j["confusion"] = Json{{"classes", r.confusion.classes}, {"counts", r.confusion.counts}};
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report " + path.string());
  out << j.dump(2) << '\n';
  std::filesystem::path txt = path;
  txt.replace_extension(".txt");
  std::ofstream table(txt);
  if (!table) throw IoError("cannot write report table " + txt.string());
  table << report_table(r);
  if (!out || !table) throw IoError("failed writing report " + path.string());
}

MetricsReport read_report(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read report " + path.string());
  MetricsReport r;
  try {
    const Json j = Json::parse(in);
    r.version = j.at("version").get<int>();
    r.iou_threshold = j.at("iou_threshold").get<double>();
    r.samples = j.at("samples").get<std::size_t>();
    r.classes = j.at("classes").get<std::vector<std::string>>();
    r.oriented_classes = j.at("oriented_classes").get<std::vector<std::string>>();
    r.overall = metrics_from(j.at("overall"));
    r.map50 = opt_from(j.at("map50"));
    for (const auto& m : j.at("per_class")) r.per_class.push_back(metrics_from(m));
    r.confusion.classes = j.at("confusion").at("classes").get<std::vector<std::string>>();
    r.confusion.counts =
        j.at("confusion").at("counts").get<std::vector<std::vector<std::size_t>>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed report " + path.string() + ": " + e.what());
  }
  return r;
}

}  // namespace tactwin
