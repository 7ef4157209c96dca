#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace inertdrift {

/// Every failure raised by the library carries a short machine-readable code
/// ("invalid-argument", "insufficient-data", "empty-measure", ...) next to the
/// human-readable message. The CLI maps codes to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

namespace errc {
inline constexpr const char* invalid_argument = "invalid-argument";
inline constexpr const char* insufficient_data = "insufficient-data";
inline constexpr const char* empty_measure = "empty-measure";
inline constexpr const char* binning_mismatch = "binning-mismatch";
inline constexpr const char* binning_too_narrow = "binning-too-narrow";
inline constexpr const char* missing_artifact = "missing-artifact";
inline constexpr const char* config = "config";
inline constexpr const char* numeric = "numeric";
inline constexpr const char* abort_budget = "abort-budget";
inline constexpr const char* io = "io";
}  // namespace errc

inline void require(bool condition, const char* code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace inertdrift
