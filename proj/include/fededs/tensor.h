#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace fededs {

// Dense row-major float64 tensor. Holds input samples; model internals work
// on flat spans.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<size_t> shape);
  Tensor(std::vector<size_t> shape, std::vector<double> data);

  static Tensor FromVector(std::vector<double> values);

  const std::vector<size_t>& shape() const { return shape_; }
  size_t size() const { return data_.size(); }
  std::span<const double> data() const { return data_; }
  std::span<double> mutable_data() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double operator[](size_t i) const { return data_[i]; }
  double& operator[](size_t i) { return data_[i]; }

  bool operator==(const Tensor& other) const = default;

 private:
  std::vector<size_t> shape_;
  std::vector<double> data_;
};

size_t ShapeProduct(const std::vector<size_t>& shape);
std::string ShapeString(const std::vector<size_t>& shape);

// Throws a numeric error naming `what` if any value is NaN or infinite.
void CheckFinite(std::span<const double> values, const std::string& what);
void CheckFinite(double value, const std::string& what);

}  // namespace fededs
