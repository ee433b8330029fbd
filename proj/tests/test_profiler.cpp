#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "litept/profiler.hpp"

using namespace litept;
using Catch::Approx;

TEST_CASE("parameter report fractions sum to one and match count_params") {
  for (const char* name : {"s", "micro"}) {
    const ModelConfig cfg = preset(name);
    const ProfileReport report = profile_params(cfg);
    const ParamTable table = count_params(cfg);
    REQUIRE(report.rows.size() == table.rows.size());
    double frac_sum = 0.0;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      REQUIRE(report.rows[i].stage == table.rows[i].stage);
      REQUIRE(report.rows[i].kind == table.rows[i].kind);
      REQUIRE(report.rows[i].params == table.rows[i].count);
      frac_sum += report.rows[i].param_fraction;
    }
    REQUIRE(frac_sum == Approx(1.0).margin(1e-9));
    REQUIRE(report.total_params == table.total);
  }
}

TEST_CASE("parameter report is bit-stable across runs") {
  const ProfileReport a = profile_params(preset("s"));
  const ProfileReport b = profile_params(preset("s"));
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    REQUIRE(a.rows[i].params == b.rows[i].params);
    REQUIRE(a.rows[i].param_fraction == b.rows[i].param_fraction);
  }
}

TEST_CASE("attention stages dominate the preset-s parameter budget") {
  const ProfileReport report = profile_params(preset("s"));
  auto stage_total = [&](const std::string& stage) {
    long long n = 0;
    for (const ProfileRow& r : report.rows)
      if (r.stage == stage) n += r.params;
    return n;
  };
  const long long conv_stages = stage_total("E0") + stage_total("E1") + stage_total("E2");
  const long long attn_stages = stage_total("E3") + stage_total("E4");
  REQUIRE(attn_stages > conv_stages);
}

namespace {
ProfileReport micro_latency_report(int reps = 4) {
  const ModelConfig cfg = micro_preset();
  PointBatch scene = voxelize(make_synthetic_scene(31, 2500, 2.0, 4), cfg.grid_size);
  ModelWeights w = build_model(cfg, 1);
  return profile_latency(w, scene, reps, 1);
}
}  // namespace

TEST_CASE("latency report satisfies the composition law") {
  const ProfileReport report = micro_latency_report();
  REQUIRE_FALSE(report.rows.empty());
  double max_row = 0.0, frac_sum = 0.0;
  for (const ProfileRow& r : report.rows) {
    REQUIRE(r.time_us >= 0.0);
    max_row = std::max(max_row, r.time_us);
    frac_sum += r.time_fraction;
  }
  REQUIRE(report.total_time_us >= max_row);
  REQUIRE(frac_sum == Approx(1.0).margin(1e-6));
  REQUIRE(report.meta.reps == 4);
  REQUIRE(report.meta.warmup == 1);
}

TEST_CASE("latency report schema is independent of the rep count") {
  const ProfileReport a = micro_latency_report(3);
  const ProfileReport b = micro_latency_report(6);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    REQUIRE(a.rows[i].stage == b.rows[i].stage);
    REQUIRE(a.rows[i].kind == b.rows[i].kind);
    REQUIRE(a.rows[i].params == b.rows[i].params);
    REQUIRE(a.rows[i].points == b.rows[i].points);
  }
}

TEST_CASE("early stages process the most points") {
  const ProfileReport report = micro_latency_report();
  index_t e0 = 0, last = 0;
  for (const ProfileRow& r : report.rows) {
    if (r.stage == "E0") e0 = r.points;
    if (r.stage == "E2") last = r.points;
  }
  REQUIRE(e0 > 0);
  REQUIRE(last > 0);
  REQUIRE(e0 >= last);
}

TEST_CASE("latency profiling rejects batches too small for the stages") {
  const ModelConfig cfg = micro_preset();
  ModelWeights w = build_model(cfg, 1);
  PointBatch empty;
  empty.coords = Matrix(0, 3);
  empty.features = Matrix(0, 3);
  empty.batch_offsets = {0};
  REQUIRE_THROWS_AS(profile_latency(w, empty, 3, 0), DataError);
  PointBatch scene = voxelize(make_synthetic_scene(1, 50, 2.0, 4), cfg.grid_size);
  REQUIRE_THROWS_AS(profile_latency(w, scene, 2, 0), ConfigError);  // reps < 3
}

TEST_CASE("json report round-trips through the schema validator") {
  const ProfileReport report = profile_params(preset("micro"));
  std::ostringstream out;
  emit_report(report, ReportFormat::Json, out);
  const nlohmann::json parsed = nlohmann::json::parse(out.str());
  validate_report_json(parsed);
  REQUIRE(parsed["total_params"].get<long long>() == report.total_params);
  REQUIRE(parsed["schema_version"] == 1);

  nlohmann::json broken = parsed;
  broken.erase("rows");
  REQUIRE_THROWS_AS(validate_report_json(broken), DataError);
}

TEST_CASE("csv report has one line per row plus a header") {
  const ProfileReport report = profile_params(preset("micro"));
  std::ostringstream out;
  emit_report(report, ReportFormat::Csv, out);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  REQUIRE(lines == report.rows.size() + 1);
}

TEST_CASE("text bars are proportional to the fractions") {
  const ProfileReport report = profile_params(preset("s"));
  std::ostringstream out;
  emit_report(report, ReportFormat::Text, out);
  const std::string text = out.str();
  for (const ProfileRow& row : report.rows) {
    const int expect = bar_width(row.param_fraction);
    // find the row's line and count its bar characters
    const std::string key = row.stage + "/" + row.kind;
    const auto at = text.find(key);
    REQUIRE(at != std::string::npos);
    const auto eol = text.find('\n', at);
    const std::string line = text.substr(at, eol - at);
    const auto hashes = std::count(line.begin(), line.end(), '#');
    REQUIRE(hashes == expect);
  }
}
