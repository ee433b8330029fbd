#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "litept/cli.hpp"

using namespace litept;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "litept");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path tmp(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "litept_cli_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("params subcommand prints the total") {
  CliResult r = run_cli({"params", "--model", "s"});
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("total") != std::string::npos);
  REQUIRE(r.out.find("12713888") != std::string::npos);
}

TEST_CASE("params emits valid json") {
  CliResult r = run_cli({"params", "--model", "micro", "--format", "json"});
  REQUIRE(r.code == 0);
  validate_report_json(nlohmann::json::parse(r.out));
}

TEST_CASE("unknown flags are usage errors") {
  CliResult r = run_cli({"params", "--frobnicate"});
  REQUIRE(r.code == 1);
  REQUIRE_FALSE(r.err.empty());
}

TEST_CASE("missing subcommand is a usage error") {
  CliResult r = run_cli({});
  REQUIRE(r.code == 1);
}

TEST_CASE("forward on a missing file exits with the data code and names the path") {
  CliResult r = run_cli({"forward", "--model", "micro", "--input", "/nonexistent/scene.lptc",
                         "--out", tmp("x.lptc").string()});
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("/nonexistent/scene.lptc") != std::string::npos);
}

TEST_CASE("make-scene then forward round-trips through the file formats") {
  auto scene_path = tmp("scene.lptc");
  CliResult mk = run_cli({"make-scene", "--seed", "3", "--points", "400", "--out", scene_path.string()});
  REQUIRE(mk.code == 0);
  REQUIRE(std::filesystem::exists(scene_path));

  auto logits_path = tmp("logits.lptc");
  CliResult fw = run_cli({"forward", "--model", "micro", "--input", scene_path.string(), "--out",
                          logits_path.string(), "--seed", "5"});
  REQUIRE(fw.code == 0);
  PointBatch logits = read_binary(logits_path.string());
  REQUIRE(logits.features.cols() == 4);
  REQUIRE(logits.num_points() >= 1);

  // ascii input path: same command accepts a .txt scene
  auto ascii_path = tmp("scene.txt");
  CliResult mk2 = run_cli({"make-scene", "--seed", "3", "--points", "50", "--out", ascii_path.string()});
  REQUIRE(mk2.code == 0);
  CliResult fw2 = run_cli({"forward", "--model", "micro", "--input", ascii_path.string(), "--out",
                           tmp("logits2.lptc").string(), "--seed", "5", "--ascii-labels"});
  REQUIRE(fw2.code == 0);
}

TEST_CASE("forward is byte-deterministic") {
  auto scene_path = tmp("det_scene.lptc");
  run_cli({"make-scene", "--seed", "11", "--points", "500", "--out", scene_path.string()});
  auto a = tmp("det_a.lptc"), b = tmp("det_b.lptc");
  REQUIRE(run_cli({"forward", "--model", "micro", "--input", scene_path.string(), "--out",
                   a.string(), "--seed", "7"})
              .code == 0);
  REQUIRE(run_cli({"forward", "--model", "micro", "--input", scene_path.string(), "--out",
                   b.string(), "--seed", "7"})
              .code == 0);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  REQUIRE(sa.str() == sb.str());
}

TEST_CASE("train-toy emits a csv curve and a final accuracy") {
  CliResult r = run_cli({"train-toy", "--model", "micro", "--steps", "8", "--points", "150",
                         "--seed", "2"});
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("step,loss") != std::string::npos);
  REQUIRE(r.out.find("final_accuracy=") != std::string::npos);
}

TEST_CASE("train-toy can checkpoint and forward can restore") {
  auto w_path = tmp("trained.lptw");
  CliResult tr = run_cli({"train-toy", "--model", "micro", "--steps", "6", "--points", "150",
                          "--seed", "4", "--save-weights", w_path.string()});
  REQUIRE(tr.code == 0);
  REQUIRE(std::filesystem::exists(w_path));

  auto scene_path = tmp("ckpt_scene.lptc");
  run_cli({"make-scene", "--seed", "4", "--points", "150", "--out", scene_path.string()});
  auto a = tmp("ckpt_a.lptc"), b = tmp("ckpt_b.lptc");
  // restored weights beat a fresh seed at reproducing themselves
  REQUIRE(run_cli({"forward", "--model", "micro", "--input", scene_path.string(), "--out",
                   a.string(), "--weights", w_path.string()})
              .code == 0);
  REQUIRE(run_cli({"forward", "--model", "micro", "--input", scene_path.string(), "--out",
                   b.string(), "--weights", w_path.string()})
              .code == 0);
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  REQUIRE(sa.str() == sb.str());
}

TEST_CASE("unwritable output paths are I/O errors") {
  CliResult r = run_cli({"params", "--model", "micro", "--out", "/nonexistent-dir/report.json"});
  REQUIRE(r.code == 2);
  REQUIRE(r.err.find("/nonexistent-dir/report.json") != std::string::npos);
}

TEST_CASE("gradcheck prints PASS at the micro scale") {
  CliResult r = run_cli({"gradcheck", "--model", "micro", "--seed", "1", "--samples", "6",
                         "--points", "90"});
  REQUIRE(r.code == 0);
  REQUIRE(r.out.find("PASS") != std::string::npos);
}

TEST_CASE("bench emits a latency report") {
  CliResult r = run_cli({"bench", "--model", "micro", "--points", "1200", "--reps", "3",
                         "--warmup", "0", "--format", "json"});
  REQUIRE(r.code == 0);
  const nlohmann::json j = nlohmann::json::parse(r.out);
  validate_report_json(j);
  REQUIRE(j["flavor"] == "latency");
  REQUIRE(j["meta"]["points"].get<long long>() >= 1);
}

TEST_CASE("rope flags reach the model config") {
  CliResult r = run_cli({"train-toy", "--model", "micro", "--steps", "2", "--points", "80",
                         "--no-rope", "--rope-base", "10", "--curve", "hilbert"});
  REQUIRE(r.code == 0);
  CliResult sph = run_cli({"train-toy", "--model", "micro", "--steps", "2", "--points", "80",
                           "--rope-mode", "spherical", "--rope-split", "2:2:2"});
  REQUIRE(sph.code == 0);
  CliResult bad = run_cli({"train-toy", "--model", "micro", "--steps", "2", "--points", "80",
                           "--rope-split", "5:5:8"});
  REQUIRE(bad.code == 2);  // odd sub-dimension is a config error
}

TEST_CASE("help output enumerates every registered flag") {
  // reflection check: every flag name of every subcommand appears in --help
  const std::vector<std::pair<std::string, std::vector<std::string>>> expected = {
      {"params", {"--model", "--rope-base", "--rope-mode", "--rope-split", "--curve", "--no-rope",
                  "--in-channels", "--classes", "--format", "--out"}},
      {"forward", {"--model", "--input", "--out", "--weights", "--seed", "--grid-size",
                   "--ascii-labels"}},
      {"bench", {"--model", "--points", "--extent", "--reps", "--warmup", "--seed", "--format",
                 "--out"}},
      {"gradcheck", {"--model", "--seed", "--samples", "--points"}},
      {"train-toy", {"--model", "--steps", "--lr", "--wd", "--seed", "--points", "--extent",
                     "--out", "--no-rope", "--save-weights"}},
      {"make-scene", {"--seed", "--points", "--extent", "--classes", "--out"}},
  };
  for (const auto& [sub, flags] : expected) {
    CliResult r = run_cli({sub, "--help"});
    REQUIRE(r.code == 0);
    for (const std::string& flag : flags) {
      INFO(sub << " help is missing " << flag);
      REQUIRE(r.out.find(flag) != std::string::npos);
    }
  }
  CliResult top = run_cli({"--help"});
  REQUIRE(top.code == 0);
  for (const char* sub : {"params", "forward", "bench", "gradcheck", "train-toy", "make-scene"})
    REQUIRE(top.out.find(sub) != std::string::npos);
}

TEST_CASE("LITEPT_THREADS overrides the flag") {
  setenv("LITEPT_THREADS", "2", 1);
  CliResult r = run_cli({"params", "--model", "micro"});
  REQUIRE(r.code == 0);
  REQUIRE(thread_count() == 2);
  unsetenv("LITEPT_THREADS");
  thread_count() = 1;
}
