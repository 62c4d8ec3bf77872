#pragma once

// CSV score files: header `p_1,...,p_K,label` (class probabilities) or
// `s_1,...,s_K,label` (precomputed scores), one row per example, 1-based labels.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "rcp/crcp.hpp"
#include "rcp/error.hpp"
#include "rcp/random.hpp"
#include "rcp/synth.hpp"

namespace rcp {

enum class ScoreKind { probabilities, scores };

struct ScoreFile {
  ScoreKind kind = ScoreKind::probabilities;
  std::size_t K = 0;
  std::vector<double> values;        // n x K, row-major
  std::vector<std::size_t> labels;   // 0-based in memory

  std::size_t n() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values).subspan(r * K, K);
  }
};

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                     : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r')) {
      field.remove_suffix(1);
    }
    out.push_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  // strtod: exact round trip of 17-digit decimals, available on every libstdc++.
  const std::string buf(s);
  char* end = nullptr;
  const double v = std::strtod(buf.c_str(), &end);
  if (end != buf.c_str() + buf.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline constexpr double kProbabilitySumTolerance = 1e-6;

inline ScoreFile parse_score_file(std::istream& in, std::optional<std::size_t> expected_K = {}) {
  std::string line;
  std::size_t line_no = 0;
  // Header.
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string::npos) break;
  }
  if (line_no == 0 || line.find_first_not_of(" \t\r") == std::string::npos) {
    throw ParseError("missing header", line_no == 0 ? 1 : line_no);
  }
  ScoreFile sf;
  const auto header = detail::split_csv(line);
  if (header.size() < 3 || header.back() != "label") {
    throw ParseError("header must be p_1,...,p_K,label or s_1,...,s_K,label", line_no);
  }
  sf.K = header.size() - 1;
  const char prefix = header.front().empty() ? '\0' : header.front().front();
  if (prefix == 'p') {
    sf.kind = ScoreKind::probabilities;
  } else if (prefix == 's') {
    sf.kind = ScoreKind::scores;
  } else {
    throw ParseError("header must start with p_1 or s_1", line_no);
  }
  for (std::size_t k = 0; k < sf.K; ++k) {
    const std::string want = std::string(1, prefix) + "_" + std::to_string(k + 1);
    if (header[k] != want) throw ParseError("expected column '" + want + "'", line_no);
  }
  if (expected_K && *expected_K != sf.K) {
    throw ParseError("file has K=" + std::to_string(sf.K) + " but K=" +
                         std::to_string(*expected_K) + " was expected",
                     line_no);
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fields = detail::split_csv(line);
    if (fields.size() != sf.K + 1) {
      throw ParseError("expected " + std::to_string(sf.K + 1) + " fields, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    double sum = 0.0;
    for (std::size_t k = 0; k < sf.K; ++k) {
      const auto v = detail::parse_double(fields[k]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("malformed number '" + std::string(fields[k]) + "'", line_no);
      }
      if (sf.kind == ScoreKind::probabilities && *v < 0.0) {
        throw ParseError("negative probability", line_no);
      }
      sum += *v;
      sf.values.push_back(*v);
    }
    if (sf.kind == ScoreKind::probabilities && std::abs(sum - 1.0) > kProbabilitySumTolerance) {
      throw ParseError("probabilities sum to " + detail::format_double(sum), line_no);
    }
    const auto label = detail::parse_int(fields.back());
    if (!label) throw ParseError("malformed label '" + std::string(fields.back()) + "'", line_no);
    if (*label < 1 || static_cast<std::size_t>(*label) > sf.K) {
      throw ParseError("label " + std::to_string(*label) + " outside 1.." + std::to_string(sf.K),
                       line_no);
    }
    sf.labels.push_back(static_cast<std::size_t>(*label - 1));
  }
  if (sf.labels.empty()) throw ParseError("no data rows", line_no);
  return sf;
}

inline ScoreFile load_score_file(const std::string& path,
                                 std::optional<std::size_t> expected_K = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open score file " + path);
  try {
    return parse_score_file(in, expected_K);
  } catch (const ParseError& e) {
    throw ParseError(e.reason(), e.line(), path);
  }
}

inline void write_score_file(std::ostream& out, const ScoreFile& sf) {
  const char prefix = sf.kind == ScoreKind::probabilities ? 'p' : 's';
  for (std::size_t k = 0; k < sf.K; ++k) out << prefix << '_' << (k + 1) << ',';
  out << "label\n";
  for (std::size_t r = 0; r < sf.n(); ++r) {
    for (double v : sf.row(r)) out << detail::format_double(v) << ',';
    out << (sf.labels[r] + 1) << '\n';
  }
}

inline void write_score_file(const std::string& path, const ScoreFile& sf) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write score file " + path);
  write_score_file(out, sf);
}

inline ScoreFile score_file_from_probabilities(const Matrix& probs,
                                               std::span<const std::size_t> labels) {
  ScoreFile sf;
  sf.kind = ScoreKind::probabilities;
  sf.K = static_cast<std::size_t>(probs.cols());
  sf.values.assign(probs.data(), probs.data() + probs.size());
  sf.labels.assign(labels.begin(), labels.end());
  return sf;
}

// APS matrix for probability files (one u per row, shared by all classes);
// score files pass through unchanged.
inline CalibrationMatrix scores_from_probabilities(const ScoreFile& sf, bool randomize, Rng& rng) {
  if (sf.kind == ScoreKind::scores) return CalibrationMatrix(sf.K, sf.values, sf.labels);
  std::vector<double> scores;
  scores.reserve(sf.values.size());
  for (std::size_t r = 0; r < sf.n(); ++r) {
    const double u = randomize ? uniform01(rng) : 1.0;
    const auto row = aps_scores_all(sf.row(r), u);
    scores.insert(scores.end(), row.begin(), row.end());
  }
  return CalibrationMatrix(sf.K, std::move(scores), sf.labels);
}

// Sidecar pairing a noisy-label calibration file, a clean test file and a noise model.
struct IngestSidecar {
  std::string calibration;
  std::string test;
  std::string noise_model;
};

inline IngestSidecar load_sidecar(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open sidecar " + path);
  try {
    nlohmann::json j;
    in >> j;
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
      const std::filesystem::path fp(p);
      return (fp.is_absolute() ? fp : base / fp).string();
    };
    IngestSidecar s;
    s.calibration = resolve(j.at("calibration").get<std::string>());
    s.test = resolve(j.at("test").get<std::string>());
    s.noise_model = resolve(j.at("noise_model").get<std::string>());
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("invalid sidecar " + path + ": " + e.what());
  }
}

}  // namespace rcp
