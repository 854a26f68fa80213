#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ppaval/common.hpp"
#include "ppaval/time.hpp"

namespace ppaval {

using time::Timestamp;

/// Named hourly series sharing one timestamp grid.
struct HourlyFrame {
  std::vector<Timestamp> timestamps;
  std::map<std::string, Vector> columns;

  [[nodiscard]] int size() const { return static_cast<int>(timestamps.size()); }
  [[nodiscard]] bool has(const std::string& name) const { return columns.count(name) > 0; }

  [[nodiscard]] const Vector& at(const std::string& name) const {
    auto it = columns.find(name);
    if (it == columns.end()) throw DataError("missing series '" + name + "'");
    return it->second;
  }

  void set(const std::string& name, Vector values) {
    if (values.size() != size())
      throw DataError("series '" + name + "' has " + std::to_string(values.size()) + " values for " +
                      std::to_string(size()) + " timestamps");
    columns[name] = std::move(values);
  }

  /// Rows [begin, begin + count).
  [[nodiscard]] HourlyFrame slice(int begin, int count) const {
    require(begin >= 0 && count >= 0 && begin + count <= size(), "HourlyFrame::slice: range out of bounds");
    HourlyFrame out;
    out.timestamps.assign(timestamps.begin() + begin, timestamps.begin() + begin + count);
    for (const auto& [name, v] : columns) out.columns[name] = v.segment(begin, count);
    return out;
  }
};

/// Set of holiday dates (UTC day numbers).
struct HolidayCalendar {
  std::set<std::int64_t> days;

  void add(int year, int month, int day) { days.insert(time::days_from_civil({year, month, day})); }
  [[nodiscard]] bool contains_day(std::int64_t day) const { return days.count(day) > 0; }
  [[nodiscard]] bool contains(Timestamp t) const { return contains_day(time::day_number(t)); }
};

}  // namespace ppaval
