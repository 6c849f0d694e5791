#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace ducd {

// Error hierarchy. Every failure mode surfaces as one of these; tests match
// on the concrete type.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Dimension / shape contract violations (mismatched operands, bad dims).
struct ShapeError : Error {
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Bad values: non-binary labels, out-of-range inputs, non-scalar loss.
struct ValueError : Error {
  explicit ValueError(const std::string& msg) : Error(msg) {}
};

// Configuration problems: unknown keys, invalid hyperparameters,
// attention applied above the spatial cap.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

// File parse/serialization failures.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

// Training-loop failures: missing gradients, non-finite loss, missing data.
struct TrainError : Error {
  explicit TrainError(const std::string& msg) : Error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

template <typename... Args>
std::string cat(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

}  // namespace ducd
