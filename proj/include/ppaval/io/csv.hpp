#pragma once

// Hourly CSV files: header row, first column an ISO-8601 UTC timestamp, numeric columns
// after it. Values are written with 9 significant digits so identical runs give
// identical bytes.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ppaval/series.hpp"

namespace ppaval::io {

namespace fs = std::filesystem;

struct CsvSchema {
  std::vector<std::string> required;  ///< columns that must be present
  std::vector<std::string> optional;  ///< loaded when present; others are ignored unless keep_all
  bool keep_all = true;
};

enum class GapPolicy { Report, Fail, ForwardFill, Linear };

inline GapPolicy parse_gap_policy(const std::string& s) {
  if (s == "report") return GapPolicy::Report;
  if (s == "fail") return GapPolicy::Fail;
  if (s == "forward-fill") return GapPolicy::ForwardFill;
  if (s == "linear") return GapPolicy::Linear;
  throw std::invalid_argument("unknown gap policy '" + s + "' (report, fail, forward-fill, linear)");
}

struct LoadedCsv {
  HourlyFrame frame;
  std::vector<Timestamp> gaps;  ///< missing hours between the first and last row
};

namespace detail {

inline std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cell += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  out.push_back(cell);
  for (auto& s : out) {
    const auto b = s.find_first_not_of(" \t"), e = s.find_last_not_of(" \t");
    s = b == std::string::npos ? "" : s.substr(b, e - b + 1);
  }
  return out;
}

inline double parse_number(const std::string& cell, const std::string& where) {
  if (cell.empty() || cell == "NaN" || cell == "nan" || cell == "NA") return std::nan("");
  char* end = nullptr;
  const double v = std::strtod(cell.c_str(), &end);
  if (end == cell.c_str() || *end != '\0') throw DataError(where + ": '" + cell + "' is not a number");
  return v;
}

inline std::string format_number(double v) {
  if (std::isnan(v)) return "NaN";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v == 0.0 ? 0.0 : v);
  return buf;
}

}  // namespace detail

/// Reads an hourly CSV; rejects duplicate or decreasing timestamps and reports gaps.
inline LoadedCsv load_hourly_csv(const fs::path& path, const CsvSchema& schema = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // UTF-8 BOM
  const auto header = detail::split_row(line);
  if (header.size() < 2) throw DataError(path.string() + ": need a timestamp column and at least one value column");

  std::vector<int> keep;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const auto& name = header[c];
    const bool listed = std::find(schema.required.begin(), schema.required.end(), name) != schema.required.end() ||
                        std::find(schema.optional.begin(), schema.optional.end(), name) != schema.optional.end();
    if (schema.keep_all || listed) keep.push_back(static_cast<int>(c));
  }
  for (const auto& name : schema.required)
    if (std::find(header.begin() + 1, header.end(), name) == header.end())
      throw DataError(path.string() + ": missing required column '" + name + "'");

  std::vector<Timestamp> ts;
  std::vector<std::vector<double>> cols(keep.size());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_row(line);
    const std::string where = path.string() + " line " + std::to_string(row);
    if (cells.size() != header.size())
      throw DataError(where + ": expected " + std::to_string(header.size()) + " fields, found " +
                      std::to_string(cells.size()));
    const Timestamp t = time::parse_iso8601(cells[0]);
    if (!ts.empty() && t == ts.back()) throw DataError(where + ": duplicate timestamp " + cells[0]);
    if (!ts.empty() && t < ts.back()) throw DataError(where + ": timestamps not increasing at " + cells[0]);
    if (t % time::kHour != 0) throw DataError(where + ": timestamp " + cells[0] + " is not on the hour");
    ts.push_back(t);
    for (std::size_t k = 0; k < keep.size(); ++k)
      cols[k].push_back(detail::parse_number(cells[static_cast<std::size_t>(keep[k])], where));
  }

  LoadedCsv out;
  out.frame.timestamps = ts;
  for (std::size_t k = 0; k < keep.size(); ++k)
    out.frame.set(header[static_cast<std::size_t>(keep[k])],
                  Eigen::Map<const Vector>(cols[k].data(), static_cast<Eigen::Index>(cols[k].size())));
  for (std::size_t k = 1; k < ts.size(); ++k)
    for (Timestamp t = ts[k - 1] + time::kHour; t < ts[k]; t += time::kHour) out.gaps.push_back(t);
  return out;
}

/// Completes the hourly grid of a loaded file according to `policy`.
inline HourlyFrame fill_gaps(const LoadedCsv& loaded, GapPolicy policy) {
  if (loaded.gaps.empty() || policy == GapPolicy::Report) return loaded.frame;
  if (policy == GapPolicy::Fail)
    throw DataError(std::to_string(loaded.gaps.size()) + " missing hour(s), first at " +
                    time::format_iso8601(loaded.gaps.front()));
  const auto& src = loaded.frame;
  const Timestamp first = src.timestamps.front(), last = src.timestamps.back();
  const int T = static_cast<int>((last - first) / time::kHour) + 1;
  HourlyFrame out;
  out.timestamps = time::hourly_grid(first, T);
  for (const auto& [name, v] : src.columns) {
    Vector filled(T);
    std::size_t k = 0;
    for (int t = 0; t < T; ++t) {
      const Timestamp ts = out.timestamps[static_cast<std::size_t>(t)];
      while (k + 1 < src.timestamps.size() && src.timestamps[k + 1] <= ts) ++k;
      if (src.timestamps[k] == ts) {
        filled[t] = v[static_cast<Eigen::Index>(k)];
      } else if (policy == GapPolicy::ForwardFill) {
        filled[t] = v[static_cast<Eigen::Index>(k)];
      } else {
        const double t0 = static_cast<double>(src.timestamps[k]), t1 = static_cast<double>(src.timestamps[k + 1]);
        const double w = (static_cast<double>(ts) - t0) / (t1 - t0);
        filled[t] = (1.0 - w) * v[static_cast<Eigen::Index>(k)] + w * v[static_cast<Eigen::Index>(k + 1)];
      }
    }
    out.set(name, std::move(filled));
  }
  return out;
}

/// Writes timestamps plus the given columns in the given order.
inline void write_hourly_csv(const fs::path& path, const std::vector<Timestamp>& timestamps,
                             const std::vector<std::pair<std::string, Vector>>& columns) {
  for (const auto& [name, v] : columns)
    if (v.size() != static_cast<Eigen::Index>(timestamps.size()))
      throw DataError("write_hourly_csv: column '" + name + "' length differs from the timestamps");
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "timestamp";
  for (const auto& [name, v] : columns) out << ',' << name;
  out << '\n';
  for (std::size_t t = 0; t < timestamps.size(); ++t) {
    out << time::format_iso8601(timestamps[t]);
    for (const auto& [name, v] : columns) out << ',' << detail::format_number(v[static_cast<Eigen::Index>(t)]);
    out << '\n';
  }
}

/// Writes every column of a frame in name order.
inline void write_frame(const fs::path& path, const HourlyFrame& frame) {
  std::vector<std::pair<std::string, Vector>> cols(frame.columns.begin(), frame.columns.end());
  write_hourly_csv(path, frame.timestamps, cols);
}

/// Sign convention for cross-border flows in residual demand.
enum class NetImportSign { Subtract, Add };

/**
 * load - sum(renewables) - (imports - exports) with the default sign; negative values are
 * passed through with a warning. Empty flow vectors count as zero.
 */
inline Vector residual_demand(const Vector& load, const std::vector<Vector>& renewables, const Vector& imports = {},
                              const Vector& exports = {}, NetImportSign sign = NetImportSign::Subtract) {
  Vector r = load;
  auto check = [&](const Vector& v, const char* what) {
    if (v.size() != load.size()) throw DataError(std::string("residual_demand: ") + what + " grid differs from load");
  };
  for (const auto& v : renewables) {
    check(v, "renewable series");
    r -= v;
  }
  Vector net = Vector::Zero(load.size());
  if (imports.size()) {
    check(imports, "imports");
    net += imports;
  }
  if (exports.size()) {
    check(exports, "exports");
    net -= exports;
  }
  r += sign == NetImportSign::Subtract ? Vector(-net) : net;
  const auto negative = (r.array() < 0.0).count();
  if (negative > 0) log::warn("residual demand negative in " + std::to_string(negative) + " period(s)");
  return r;
}

/// Rounds to 9 significant digits so JSON output matches the CSV precision.
inline double round9(double v) {
  if (!std::isfinite(v)) return v;
  return std::strtod(detail::format_number(v).c_str(), nullptr);
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace ppaval::io
