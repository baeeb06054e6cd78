#pragma once

#include <stdexcept>
#include <string>

namespace fededs {

enum class ErrorKind {
  kConfig,
  kDimension,
  kIndex,
  kNumeric,
  kFormat,
  kProtocol,
  kIo,
};

const char* ErrorKindName(ErrorKind kind);

// Single exception type for the library; the kind drives CLI exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error ConfigError(const std::string& m) { return {ErrorKind::kConfig, m}; }
inline Error DimensionError(const std::string& m) { return {ErrorKind::kDimension, m}; }
inline Error IndexError(const std::string& m) { return {ErrorKind::kIndex, m}; }
inline Error NumericError(const std::string& m) { return {ErrorKind::kNumeric, m}; }
inline Error FormatError(const std::string& m) { return {ErrorKind::kFormat, m}; }
inline Error ProtocolError(const std::string& m) { return {ErrorKind::kProtocol, m}; }
inline Error IoError(const std::string& m) { return {ErrorKind::kIo, m}; }

// 0 success, 2 configuration, 3 numeric, 4 I/O.
int ExitCodeFor(ErrorKind kind);

}  // namespace fededs
