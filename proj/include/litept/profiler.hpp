#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "litept/network.hpp"

#ifndef LITEPT_GIT_REVISION
#define LITEPT_GIT_REVISION "unknown"
#endif

namespace litept {

struct ProfileRow {
  std::string stage;
  std::string kind;
  long long params = 0;
  index_t points = 0;        // points processed at that stage (latency reports)
  double time_us = 0.0;      // median wall time per forward
  double param_fraction = 0.0;
  double time_fraction = 0.0;
};

struct ProfileMeta {
  std::string model;
  index_t points = 0;
  int reps = 0;
  int warmup = 0;
  int threads = 1;
  std::string timestamp;
  std::string git_revision = LITEPT_GIT_REVISION;
};

struct ProfileReport {
  int schema_version = 1;
  std::string flavor;  // "params" or "latency"
  std::vector<ProfileRow> rows;
  long long total_params = 0;
  double total_time_us = 0.0;  // median of whole-forward wall times
  ProfileMeta meta;
};

namespace detail {
inline std::string iso_timestamp() {
  const std::time_t now = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&now, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}
}  // namespace detail

/// Parameter breakdown. Delegates to count_params and adds fractions; the
/// result is hardware-independent and bit-stable.
inline ProfileReport profile_params(const ModelConfig& cfg) {
  ProfileReport report;
  report.flavor = "params";
  const ParamTable table = count_params(cfg);
  report.total_params = table.total;
  for (const ParamRow& r : table.rows) {
    ProfileRow row;
    row.stage = r.stage;
    row.kind = r.kind;
    row.params = r.count;
    row.param_fraction = table.total ? static_cast<double>(r.count) / static_cast<double>(table.total) : 0.0;
    report.rows.push_back(std::move(row));
  }
  report.meta.model = cfg.name;
  report.meta.timestamp = detail::iso_timestamp();
  return report;
}

/// Per-stage latency breakdown: instrumented forwards, median over `reps`
/// repetitions after `warmup` discarded runs.
inline ProfileReport profile_latency(ModelWeights& weights, const PointBatch& batch, int reps = 30,
                                     int warmup = 5) {
  require<ConfigError>(reps >= 3, "profile_latency: reps must be >= 3, got ", reps);
  require<ConfigError>(warmup >= 0, "profile_latency: warmup must be >= 0");
  require<DataError>(batch.num_points() > 0,
                     "profile_latency: empty batch cannot exercise the stages");

  struct RowAgg {
    std::string stage, kind;
    index_t points = 0;
    std::vector<double> seconds;
  };
  std::vector<RowAgg> agg;
  auto row_for = [&](const std::string& stage, const std::string& kind) -> RowAgg& {
    for (RowAgg& r : agg)
      if (r.stage == stage && r.kind == kind) return r;
    agg.push_back(RowAgg{stage, kind, 0, {}});
    return agg.back();
  };

  std::vector<double> totals;
  bool record = false;
  ForwardHooks hooks;
  hooks.on_stage = [&](const std::string& stage, const std::string& kind, index_t points, double sec) {
    if (!record) return;
    RowAgg& r = row_for(stage, kind);
    r.points = points;
    r.seconds.push_back(sec);
  };
  ForwardOptions opt;
  opt.bn_mode = BnMode::Eval;
  opt.hooks = &hooks;

  for (int i = 0; i < warmup; ++i) forward(weights, batch, opt);
  record = true;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    forward(weights, batch, opt);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    totals.push_back(dt.count());
  }

  // per-stage parameter totals annotate the first latency row of each stage
  // so stages with several timed sections are not double-counted
  const ParamTable table = count_params(weights.cfg);

  ProfileReport report;
  report.flavor = "latency";
  double sum_us = 0.0;
  std::vector<std::string> annotated;
  for (RowAgg& r : agg) {
    ProfileRow row;
    row.stage = r.stage;
    row.kind = r.kind;
    row.points = r.points;
    row.time_us = detail::median(r.seconds) * 1e6;
    if (std::find(annotated.begin(), annotated.end(), row.stage) == annotated.end()) {
      annotated.push_back(row.stage);
      for (const ParamRow& pr : table.rows)
        if (pr.stage == row.stage) row.params += pr.count;
    }
    sum_us += row.time_us;
    report.rows.push_back(std::move(row));
  }
  for (ProfileRow& row : report.rows) row.time_fraction = sum_us > 0 ? row.time_us / sum_us : 0.0;
  report.total_params = table.total;
  report.total_time_us = detail::median(totals) * 1e6;
  report.meta.model = weights.cfg.name;
  report.meta.points = batch.num_points();
  report.meta.reps = reps;
  report.meta.warmup = warmup;
  report.meta.threads = thread_count();
  report.meta.timestamp = detail::iso_timestamp();
  return report;
}

// --- emission -----------------------------------------------------------------

enum class ReportFormat { Text, Json, Csv };

inline ReportFormat parse_report_format(const std::string& s) {
  if (s == "text") return ReportFormat::Text;
  if (s == "json") return ReportFormat::Json;
  if (s == "csv") return ReportFormat::Csv;
  throw ConfigError(cat("unknown report format '", s, "' (expected text, json or csv)"));
}

inline nlohmann::json report_to_json(const ProfileReport& r) {
  nlohmann::json j;
  j["schema_version"] = r.schema_version;
  j["flavor"] = r.flavor;
  j["total_params"] = r.total_params;
  j["total_time_us"] = r.total_time_us;
  j["meta"] = {{"model", r.meta.model},           {"points", r.meta.points},
               {"reps", r.meta.reps},             {"warmup", r.meta.warmup},
               {"threads", r.meta.threads},       {"timestamp", r.meta.timestamp},
               {"git_revision", r.meta.git_revision}};
  j["rows"] = nlohmann::json::array();
  for (const ProfileRow& row : r.rows)
    j["rows"].push_back({{"stage", row.stage},
                         {"kind", row.kind},
                         {"params", row.params},
                         {"points", row.points},
                         {"time_us", row.time_us},
                         {"param_fraction", row.param_fraction},
                         {"time_fraction", row.time_fraction}});
  return j;
}

/// Structural check of the serialized report; throws DataError on violations.
inline void validate_report_json(const nlohmann::json& j) {
  require<DataError>(j.is_object(), "report: not an object");
  for (const char* key : {"schema_version", "flavor", "total_params", "total_time_us", "meta", "rows"})
    require<DataError>(j.contains(key), "report: missing key ", key);
  require<DataError>(j["schema_version"].is_number_integer(), "report: schema_version not integral");
  require<DataError>(j["rows"].is_array(), "report: rows not an array");
  for (const auto& row : j["rows"]) {
    for (const char* key : {"stage", "kind", "params", "points", "time_us", "param_fraction", "time_fraction"})
      require<DataError>(row.contains(key), "report row: missing key ", key);
    require<DataError>(row["stage"].is_string() && row["kind"].is_string(), "report row: bad stage/kind");
    require<DataError>(row["params"].is_number(), "report row: bad params");
  }
  for (const char* key : {"model", "points", "reps", "warmup", "threads", "timestamp", "git_revision"})
    require<DataError>(j["meta"].contains(key), "report meta: missing key ", key);
}

inline int bar_width(double fraction, int total_width = 40) {
  return static_cast<int>(std::lround(std::clamp(fraction, 0.0, 1.0) * total_width));
}

inline void emit_report(const ProfileReport& r, ReportFormat format, std::ostream& out) {
  switch (format) {
    case ReportFormat::Json:
      out << report_to_json(r).dump(2) << '\n';
      return;
    case ReportFormat::Csv: {
      out << "stage,kind,params,points,time_us,param_fraction,time_fraction\n";
      for (const ProfileRow& row : r.rows)
        out << row.stage << ',' << row.kind << ',' << row.params << ',' << row.points << ','
            << row.time_us << ',' << row.param_fraction << ',' << row.time_fraction << '\n';
      return;
    }
    case ReportFormat::Text: {
      const bool latency = r.flavor == "latency";
      out << "model " << r.meta.model << "  (" << r.flavor << ", git " << r.meta.git_revision << ")\n";
      for (const ProfileRow& row : r.rows) {
        const double frac = latency ? row.time_fraction : row.param_fraction;
        out << cat(row.stage, '/', row.kind);
        for (std::size_t pad = cat(row.stage, '/', row.kind).size(); pad < 12; ++pad) out << ' ';
        if (latency)
          out << cat(row.time_us, " us");
        else
          out << row.params;
        out << "  ";
        const int width = bar_width(frac);
        for (int i = 0; i < width; ++i) out << '#';
        out << '\n';
      }
      if (latency)
        out << "total " << r.total_time_us << " us over " << r.meta.points << " points, median of "
            << r.meta.reps << " reps (" << r.meta.warmup << " warmup), threads " << r.meta.threads
            << '\n';
      else
        out << "total " << r.total_params << " parameters\n";
      return;
    }
  }
}

}  // namespace litept
