#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>

#include "tactwin/cli.hpp"
#include "tactwin/config.hpp"
#include "tactwin/errors.hpp"

using namespace tactwin;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "tactwin");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

}  // namespace

TEST_CASE("config rejects unknown and nested owned keys") {
  RunConfig c;
  CHECK_THROWS_WITH_AS(merge_json(Json::parse(R"({"sim": {"sensor": {"pixels": 3}}})"), c),
                       "unknown field 'sim.sensor.pixels'", ConfigError);
  CHECK_THROWS_AS(merge_json(Json::parse(R"({"dataset": {"seed": 3}})"), c), ConfigError);
  CHECK_THROWS_AS(merge_json(Json::parse(R"({"decoder": {"noise_sigma": 0.1}})"), c), ConfigError);
  CHECK_THROWS_AS(merge_json(Json::parse(R"({"seed": "x"})"), c), ConfigError);

  RunConfig d;
  merge_json(Json::parse(R"({"seed": 9, "noise_sigma": 0.02, "loss": {"csl": {"sigma": 3}}})"), d);
  CHECK(d.dataset.seed == 9);
  CHECK(d.roundtrip.seed == 9);
  CHECK(d.decoder.noise_sigma == 0.02);
  CHECK(d.dataset.scenarios.noise_sigma == 0.02);
  CHECK(d.toy.loss.csl.sigma == 3.0);
  d.validate();

  RunConfig e;
  merge_json(to_json(d), e);
  CHECK(to_json(e) == to_json(d));
}

TEST_CASE("config file errors map to exit codes") {
  TempDir tmp("tactwin_unit_cli_config");
  { std::ofstream(tmp / "bad.json") << R"({"toy": {"epochs": -1}})"; }
  const Run bad = cli({"resolution", "--config", tmp / "bad.json", "--out", tmp / "s.csv"});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("toy.epochs") != std::string::npos);
  CHECK(cli({"resolution", "--config", tmp / "missing.json", "--out", tmp / "s.csv"}).code == kExitIo);
  CHECK(cli({"resolution", "--bogus"}).code == kExitConfig);
  CHECK(cli({}).code == kExitConfig);
}

TEST_CASE("generate is deterministic and validates the force range") {
  TempDir tmp("tactwin_unit_cli_generate");
  const Run bad = cli({"generate", "--out", tmp / "x", "--count", "4", "--force-range", "5:1"});
  CHECK(bad.code == kExitConfig);
  CHECK(bad.err.find("force_range") != std::string::npos);
  CHECK(cli({"generate", "--out", tmp / "x", "--force-range", "abc"}).code == kExitConfig);
  CHECK(cli({"generate", "--out", tmp / "x", "--probe", "strip", "--diameters", "10"}).code == kExitConfig);

  const std::vector<std::string> args{"--count", "6", "--seed", "7", "--probe", "sphere", "--diameters",
                                      "10,15,20,25,30", "--force-range", "0:10"};
  auto with = [&](const std::string& out, const std::string& threads) {
    std::vector<std::string> a{"generate", "--out", out, "--threads", threads};
    a.insert(a.end(), args.begin(), args.end());
    return cli(a);
  };
  const Run a = with(tmp / "a", "1");
  REQUIRE(a.code == kExitOk);
  CHECK(a.out.find("train") != std::string::npos);
  REQUIRE(with(tmp / "b", "2").code == kExitOk);
  CHECK(slurp(tmp / "a/manifest.json") == slurp(tmp / "b/manifest.json"));
  CHECK(slurp(tmp / "a/annotations.jsonl") == slurp(tmp / "b/annotations.jsonl"));
  CHECK(slurp(tmp / "a/effective_config.json") == slurp(tmp / "b/effective_config.json"));
  CHECK(fs::exists(tmp / "a/run.log"));
  const Json manifest = Json::parse(slurp(tmp / "a/manifest.json"));
  CHECK(manifest["spec"]["scenarios"]["probes"].size() == 5);
  CHECK(manifest["spec"]["scenarios"]["force_max"] == 10.0);
}

TEST_CASE("calibrate, decode and eval pipeline") {
  TempDir tmp("tactwin_unit_cli_pipeline");
  REQUIRE(cli({"generate", "--out", tmp / "ds", "--count", "8", "--seed", "3", "--probe", "sphere",
               "--diameters", "10", "--force-range", "1:5"})
              .code == kExitOk);
  const Run cal = cli({"calibrate", "--dataset", tmp / "ds", "--out", tmp / "cal/cal.json"});
  REQUIRE(cal.code == kExitOk);
  REQUIRE(cli({"decode", "--dataset", tmp / "ds", "--calibration", tmp / "cal/cal.json", "--out",
               tmp / "det/det.jsonl"})
              .code == kExitOk);
  const Run ev = cli({"eval", "--dataset", tmp / "ds", "--detections", tmp / "det/det.jsonl", "--calibration",
                      tmp / "cal/cal.json", "--out", tmp / "rep/report.json"});
  REQUIRE(ev.code == kExitOk);
  const MetricsReport r = read_report(tmp / "rep/report.json");
  CHECK(r.samples == 8);
  REQUIRE(r.overall.force_mae);
  CHECK(*r.overall.force_mae <= 0.05);
  CHECK(*r.overall.recall == 1.0);
  CHECK(fs::exists(tmp / "rep/report.txt"));
  CHECK(fs::exists(tmp / "det/effective_config.json"));

  const Run stale = cli({"decode", "--dataset", tmp / "ds", "--calibration", tmp / "cal/cal.json", "--out",
                         tmp / "det/stale.jsonl", "--noise", "0.02"});
  CHECK(stale.code == kExitStaleCalibration);
  const Json cal_json = Json::parse(slurp(tmp / "cal/cal.json"));
  CHECK(stale.err.find(cal_json["param_hash"].get<std::string>()) != std::string::npos);
  CHECK(stale.err.find("config hash") != std::string::npos);

  fs::create_directories(tmp / "refs");
  fs::copy_file(tmp / "ds/reference.pgm", tmp / "refs/a.pgm");
  const Run ref = cli({"decode", "--images", tmp / "refs", "--reference", tmp / "ds/reference.pgm",
                       "--calibration", tmp / "cal/cal.json", "--out", tmp / "refs.jsonl"});
  CHECK(ref.code == kExitOk);
  CHECK(fs::file_size(tmp / "refs.jsonl") == 0);

  CHECK(cli({"decode", "--dataset", tmp / "nope", "--calibration", tmp / "cal/cal.json", "--out",
             tmp / "x.jsonl"})
            .code == kExitIo);
}

TEST_CASE("train-toy writes a curve, resumes and flags divergence") {
  TempDir tmp("tactwin_unit_cli_toy");
  REQUIRE(cli({"generate", "--out", tmp / "ds", "--count", "12", "--seed", "5", "--force-range", "0:3"}).code ==
          kExitOk);
  const Run flat = cli({"train-toy", "--dataset", tmp / "ds", "--out", tmp / "flat/head.json", "--lr", "0",
                        "--epochs", "3"});
  REQUIRE(flat.code == kExitOk);
  std::istringstream rows(slurp(tmp / "flat/curve.csv"));
  std::string header, r0, r1, r2;
  std::getline(rows, header);
  std::getline(rows, r0);
  std::getline(rows, r1);
  std::getline(rows, r2);
  CHECK(header == "epoch,total,obj,cls,csl,force,box");
  CHECK(r0.substr(r0.find(',')) == r2.substr(r2.find(',')));

  REQUIRE(cli({"train-toy", "--dataset", tmp / "ds", "--out", tmp / "a/head.json", "--epochs", "6"}).code == kExitOk);
  REQUIRE(cli({"train-toy", "--dataset", tmp / "ds", "--out", tmp / "b/head.json", "--epochs", "5"}).code == kExitOk);
  REQUIRE(cli({"train-toy", "--dataset", tmp / "ds", "--out", tmp / "c/head.json", "--epochs", "1", "--resume",
               tmp / "b/head.json"})
              .code == kExitOk);
  std::istringstream full(slurp(tmp / "a/curve.csv"));
  std::string line, last;
  while (std::getline(full, line)) last = line;
  std::istringstream resumed(slurp(tmp / "c/curve.csv"));
  std::getline(resumed, line);
  std::getline(resumed, line);
  CHECK(line == last);
  CHECK(slurp(tmp / "a/head.json") == slurp(tmp / "c/head.json"));

  const Run diverge = cli({"train-toy", "--dataset", tmp / "ds", "--out", tmp / "d/head.json", "--lr", "1e4",
                           "--epochs", "40"});
  CHECK(diverge.code == kExitDiverged);
  CHECK(fs::exists(tmp / "d/curve.csv"));
}

TEST_CASE("resolution emits both orientations") {
  TempDir tmp("tactwin_unit_cli_res");
  const Run r = cli({"resolution", "--out", tmp / "sweep.csv"});
  REQUIRE(r.code == kExitOk);
  CHECK(r.out.find("horizontal limit") != std::string::npos);
  CHECK(r.out.find("vertical limit") != std::string::npos);
  const std::string csv = slurp(tmp / "sweep.csv");
  CHECK(csv.rfind("orientation,frequency_lp_mm,modulation,resolvable\n", 0) == 0);
  CHECK(csv.find("\nvertical,") != std::string::npos);
}
