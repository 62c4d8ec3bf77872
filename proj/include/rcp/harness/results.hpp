#pragma once

// Aggregation and JSON/CSV serialization of experiment results.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rcp/harness/pipeline.hpp"
#include "rcp/ingest.hpp"
#include "rcp/stats_core.hpp"

namespace rcp::harness {

// Groups by (cell, grid_value, method) in order of first appearance; stdev is
// the across-repetition sample standard deviation (0 for a single repetition).
inline std::vector<AggregateRecord> aggregate(const std::vector<RepetitionRecord>& records) {
  std::vector<AggregateRecord> out;
  std::vector<std::vector<double>> coverage, size;
  for (const auto& r : records) {
    std::size_t k = 0;
    while (k < out.size() && !(out[k].cell == r.cell && out[k].grid_value == r.grid_value &&
                               out[k].method == r.method)) {
      ++k;
    }
    if (k == out.size()) {
      AggregateRecord a;
      a.cell = r.cell;
      a.grid_value = r.grid_value;
      a.method = r.method;
      out.push_back(a);
      coverage.emplace_back();
      size.emplace_back();
    }
    coverage[k].push_back(r.coverage);
    size[k].push_back(r.mean_size);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    const auto c = mean_and_error(coverage[k]);
    const auto s = mean_and_error(size[k]);
    out[k].count = coverage[k].size();
    out[k].coverage_mean = c.mean;
    out[k].coverage_stdev = c.stdev;
    out[k].size_mean = s.mean;
    out[k].size_stdev = s.stdev;
  }
  return out;
}

// Non-finite numbers become null.
inline nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json();
}

inline nlohmann::json to_json(const RepetitionRecord& r) {
  nlohmann::json j;
  j["cell"] = r.cell;
  j["grid_value"] = r.grid_value;
  j["method"] = to_string(r.method);
  j["repetition"] = r.repetition;
  j["seed"] = r.seed;
  j["coverage"] = r.coverage;
  j["mean_size"] = number_or_null(r.mean_size);
  j["threshold_index"] = r.threshold_index ? nlohmann::json(*r.threshold_index) : nlohmann::json();
  j["q_hat"] = number_or_null(r.q_hat);
  j["correction"] = r.correction;
  j["n_infinite"] = r.n_infinite;
  j["resampled"] = r.resampled;
  return j;
}

inline nlohmann::json to_json(const AggregateRecord& a) {
  nlohmann::json j;
  j["cell"] = a.cell;
  j["grid_value"] = a.grid_value;
  j["method"] = to_string(a.method);
  j["count"] = a.count;
  j["coverage_mean"] = a.coverage_mean;
  j["coverage_stdev"] = a.coverage_stdev;
  j["size_mean"] = number_or_null(a.size_mean);
  j["size_stdev"] = number_or_null(a.size_stdev);
  return j;
}

inline nlohmann::json to_json(const ExperimentResult& r) {
  nlohmann::json j;
  j["experiment"] = to_string(r.kind);
  j["complete"] = r.complete;
  if (!r.complete) j["error"] = r.error;
  auto recs = nlohmann::json::array();
  for (const auto& x : r.records) recs.push_back(to_json(x));
  auto aggs = nlohmann::json::array();
  for (const auto& x : r.aggregates) aggs.push_back(to_json(x));
  j["records"] = recs;
  j["aggregates"] = aggs;
  j["metadata"] = r.metadata;
  return j;
}

namespace detail {

// Shortest representation that round-trips.
inline std::string csv_number(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : (v > 0 ? "inf" : "-inf");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace detail

inline void write_records_csv(std::ostream& out, const std::vector<RepetitionRecord>& records) {
  out << "cell,grid_value,method,repetition,seed,coverage,mean_size,threshold_index,q_hat,"
         "correction,n_infinite,resampled\n";
  for (const auto& r : records) {
    out << r.cell << ',' << detail::csv_number(r.grid_value) << ',' << to_string(r.method) << ','
        << r.repetition << ',' << r.seed << ',' << detail::csv_number(r.coverage) << ','
        << detail::csv_number(r.mean_size) << ','
        << (r.threshold_index ? std::to_string(*r.threshold_index) : std::string("inf")) << ','
        << detail::csv_number(r.q_hat) << ',' << detail::csv_number(r.correction) << ','
        << r.n_infinite << ',' << (r.resampled ? 1 : 0) << '\n';
  }
}

inline void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRecord>& aggs) {
  out << "cell,grid_value,method,count,coverage_mean,coverage_stdev,size_mean,size_stdev\n";
  for (const auto& a : aggs) {
    out << a.cell << ',' << detail::csv_number(a.grid_value) << ',' << to_string(a.method) << ','
        << a.count << ',' << detail::csv_number(a.coverage_mean) << ','
        << detail::csv_number(a.coverage_stdev) << ',' << detail::csv_number(a.size_mean) << ','
        << detail::csv_number(a.size_stdev) << '\n';
  }
}

enum class PlotMetric { coverage, size };

// Long format for plotting: grid_value, method, mean, stdev. Multi-dataset runs
// prefix the method with the dataset name.
inline void write_plot_csv(std::ostream& out, const std::vector<AggregateRecord>& aggs,
                           PlotMetric metric) {
  bool multi_cell = false;
  for (const auto& a : aggs) multi_cell = multi_cell || a.cell != aggs.front().cell;
  out << "grid_value,method,mean,stdev\n";
  for (const auto& a : aggs) {
    const std::string method =
        multi_cell ? a.cell + ":" + to_string(a.method) : std::string(to_string(a.method));
    const double mean = metric == PlotMetric::coverage ? a.coverage_mean : a.size_mean;
    const double sd = metric == PlotMetric::coverage ? a.coverage_stdev : a.size_stdev;
    out << detail::csv_number(a.grid_value) << ',' << method << ',' << detail::csv_number(mean)
        << ',' << detail::csv_number(sd) << '\n';
  }
}

}  // namespace rcp::harness
