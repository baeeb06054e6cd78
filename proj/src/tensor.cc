#include "fededs/tensor.h"

#include <cmath>
#include <sstream>

#include "fededs/errors.h"

namespace fededs {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kIndex: return "index error";
    case ErrorKind::kNumeric: return "numeric error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kProtocol: return "protocol error";
    case ErrorKind::kIo: return "I/O error";
  }
  return "error";
}

int ExitCodeFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kNumeric: return 3;
    case ErrorKind::kIo:
    case ErrorKind::kFormat: return 4;
    default: return 2;
  }
}

size_t ShapeProduct(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

std::string ShapeString(const std::vector<size_t>& shape) {
  std::ostringstream os;
  os << "(";
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ")";
  return os.str();
}

Tensor::Tensor(std::vector<size_t> shape) : shape_(std::move(shape)) {
  for (size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor dimension must be positive");
  }
  data_.assign(ShapeProduct(shape_), 0.0);
}

Tensor::Tensor(std::vector<size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (size_t d : shape_) {
    if (d == 0) throw DimensionError("tensor dimension must be positive");
  }
  if (ShapeProduct(shape_) != data_.size()) {
    throw DimensionError("tensor shape " + ShapeString(shape_) + " holds " +
                         std::to_string(ShapeProduct(shape_)) +
                         " values, got " + std::to_string(data_.size()));
  }
  CheckFinite(data_, "tensor data");
}

Tensor Tensor::FromVector(std::vector<double> values) {
  std::vector<size_t> shape{values.size()};
  return Tensor(std::move(shape), std::move(values));
}

void CheckFinite(std::span<const double> values, const std::string& what) {
  for (size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw NumericError(what + " has non-finite value at index " +
                         std::to_string(i));
    }
  }
}

void CheckFinite(double value, const std::string& what) {
  if (!std::isfinite(value)) throw NumericError(what + " is not finite");
}

}  // namespace fededs
