#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "tactwin/eval.hpp"

using namespace tactwin;
using doctest::Approx;

namespace {

GroundTruth truth(const std::string& cls, double x, double force = 1.0, double theta = 0.0) {
  return {make_box(x, 0.0, 2.0, 1.0, theta), cls, AngleDeg(theta), force};
}

Detection det(const std::string& cls, double x, double score, double force = 1.0, double theta = 0.0) {
  Detection d;
  d.box = make_box(x, 0.0, 2.0, 1.0, theta);
  d.class_name = cls;
  d.theta = AngleDeg(theta);
  d.force = force;
  d.score = score;
  return d;
}

}  // namespace

TEST_CASE("greedy matching") {
  const std::vector<GroundTruth> gts{truth("a", 0.0), truth("a", 5.0)};
  const MatchResult all = match_detections({det("a", 0.0, 0.9), det("a", 5.0, 0.8)}, gts);
  CHECK(all.pairs.size() == 2);
  CHECK(all.false_positives.empty());
  CHECK(all.false_negatives.empty());

  const MatchResult fp = match_detections({det("a", 0.0, 0.9)}, {});
  CHECK(fp.false_positives == std::vector<std::size_t>{0});

  const MatchResult dup = match_detections({det("a", 0.1, 0.6), det("a", 0.0, 0.9)}, {truth("a", 0.0)});
  REQUIRE(dup.pairs.size() == 1);
  CHECK(dup.pairs[0].detection == 1);
  CHECK(dup.false_positives == std::vector<std::size_t>{0});

  const MatchResult tie = match_detections({det("a", 0.0, 0.5), det("a", 0.0, 0.5)}, {truth("a", 0.0)});
  CHECK(tie.pairs[0].detection == 0);

  CHECK(match_detections({det("b", 0.0, 0.9)}, {truth("a", 0.0)}, 0.5, true).pairs.empty());
  CHECK(match_detections({det("b", 0.0, 0.9)}, {truth("a", 0.0)}, 0.5, false).pairs.size() == 1);
}

TEST_CASE("mean absolute errors") {
  CHECK(*mae({1.0, 2.0}, {1.5, 2.5}) == Approx(0.5));
  CHECK(*angle_mae({AngleDeg(1.0), AngleDeg(90.0)}, {AngleDeg(179.0), AngleDeg(90.0)}) == Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(mae({}, {}).has_value());
  CHECK_FALSE(angle_mae({}, {}).has_value());
  CHECK(*location_mae({{0, 0}, {1, 1}}, {{3, 4}, {1, 1}}) == Approx(2.5));

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-5, 5);
  std::vector<double> p(50), t(50);
  for (std::size_t i = 0; i < 50; ++i) {
    p[i] = u(rng);
    t[i] = u(rng);
  }
  double direct = 0.0;
  for (std::size_t i = 0; i < 50; ++i) direct += std::abs(p[i] - t[i]);
  CHECK(std::abs(*mae(p, t) - direct / 50.0) < 1e-12);
}

TEST_CASE("precision, recall and all-point AP") {
  const std::vector<EvalSample> perfect{{{det("a", 0.0, 0.9)}, {truth("a", 0.0)}},
                                        {{det("a", 3.0, 0.8)}, {truth("a", 3.0)}}};
  const PrecisionRecall p = precision_recall_ap(perfect, 0.5);
  CHECK(*p.precision == 1.0);
  CHECK(*p.recall == 1.0);
  CHECK(*p.ap == 1.0);
  CHECK(*p.f1 == 1.0);

  // score order TP, FP, TP over two truths
  const std::vector<EvalSample> mixed{{{det("a", 0.0, 0.9), det("a", 10.0, 0.8), det("a", 5.0, 0.7)},
                                       {truth("a", 0.0), truth("a", 5.0)}}};
  const PrecisionRecall m = precision_recall_ap(mixed, 0.5);
  CHECK(*m.ap == Approx(0.5 + 0.5 * 2.0 / 3.0).epsilon(1e-12));
  CHECK(*m.precision == Approx(2.0 / 3.0));
  CHECK(*m.recall == 1.0);

  CHECK(*f1_score(0.9286, 0.8966) == Approx(0.9123).epsilon(1e-4));
  CHECK_FALSE(f1_score(std::nullopt, 0.5).has_value());
  const PrecisionRecall empty = precision_recall_ap({}, 0.5);
  CHECK_FALSE(empty.recall.has_value());
  CHECK_FALSE(empty.ap.has_value());
  CHECK_FALSE(empty.precision.has_value());

  std::vector<EvalSample> shuffled = mixed;
  shuffled.push_back(perfect[0]);
  shuffled.push_back(perfect[1]);
  const double ap = *precision_recall_ap(shuffled, 0.5).ap;
  std::reverse(shuffled.begin(), shuffled.end());
  CHECK(*precision_recall_ap(shuffled, 0.5).ap == Approx(ap).epsilon(1e-12));
}

TEST_CASE("confusion matrix") {
  const std::vector<std::string> classes{"body", "head"};
  const ConfusionMatrix ok = confusion_matrix({{{det("body", 0, 0.9)}, {truth("body", 0)}},
                                               {{det("head", 0, 0.9)}, {truth("head", 0)}}},
                                              classes, 0.5);
  CHECK(ok.counts[0][0] == 1);
  CHECK(ok.counts[1][1] == 1);
  CHECK(ok.counts[0][1] == 0);
  CHECK(*ok.recall(0) == 1.0);

  const ConfusionMatrix off = confusion_matrix({{{det("body", 0, 0.9)}, {truth("head", 0)}},
                                                {{}, {truth("body", 0)}}},
                                               classes, 0.5);
  CHECK(off.counts[1][0] == 1);
  CHECK(off.missed(0) == 1);
  CHECK(*off.recall(1) == 0.0);
}

TEST_CASE("report round trip and schema") {
  const std::vector<EvalSample> samples{
      {{det("strip", 0.0, 0.9, 1.2, 10.0)}, {truth("strip", 0.1, 1.0, 12.0)}},
      {{det("sphere", 3.0, 0.8, 2.0)}, {truth("sphere", 3.0, 2.5)}}};
  const MetricsReport r = evaluate(samples, {"strip", "sphere", "circle"}, {"strip"}, 0.5);
  CHECK(r.per_class.size() == 3);
  CHECK(r.classes == std::vector<std::string>{"circle", "sphere", "strip"});
  const ClassMetrics& circle = r.per_class[0];
  CHECK(circle.truths == 0);
  CHECK_FALSE(circle.recall.has_value());
  CHECK_FALSE(circle.force_mae.has_value());
  CHECK(*r.per_class[2].angle_mae == Approx(2.0).epsilon(1e-9));
  CHECK_FALSE(r.per_class[1].angle_mae.has_value());
  CHECK(*r.overall.force_mae == Approx(0.35).epsilon(1e-12));

  const auto path = std::filesystem::temp_directory_path() / "tactwin_unit_report.json";
  write_report(r, path);
  CHECK(read_report(path) == r);
  std::ifstream in(path);
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  CHECK(text.find("\"angle_mae\": \"deg\"") != std::string::npos);
  auto txt = path;
  txt.replace_extension(".txt");
  CHECK(std::filesystem::exists(txt));
  std::filesystem::remove(path);
  std::filesystem::remove(txt);
  CHECK(report_table(r).find("angle[deg]") != std::string::npos);
}
