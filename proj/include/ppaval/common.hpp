#pragma once

#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace ppaval {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Malformed input data: wrong dimensions, missing series, inconsistent files.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An optimization problem could not be solved to the requested accuracy.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace log {

enum class Level { Debug = 0, Info = 1, Warning = 2, Error = 3, Off = 4 };

inline Level& threshold() {
  static Level level = Level::Warning;
  return level;
}

inline void write(Level level, std::string_view msg) {
  if (level < threshold()) return;
  static constexpr const char* kTags[] = {"debug", "info", "warning", "error"};
  std::fprintf(stderr, "[ppaval %s] %.*s\n", kTags[static_cast<int>(level)],
               static_cast<int>(msg.size()), msg.data());
}

inline void info(std::string_view msg) { write(Level::Info, msg); }
inline void warn(std::string_view msg) { write(Level::Warning, msg); }

}  // namespace log

inline void require(bool condition, const std::string& what) {
  if (!condition) throw std::invalid_argument(what);
}

}  // namespace ppaval
