#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace mlmcmc {

/// A parameter value theta in a finite-dimensional real space.
class Point {
 public:
  Point() = default;
  explicit Point(std::vector<double> coords) : coords_(std::move(coords)) {}
  Point(std::initializer_list<double> coords) : coords_(coords) {}

  std::size_t dim() const { return coords_.size(); }
  double operator[](std::size_t i) const { return coords_[i]; }
  double& operator[](std::size_t i) { return coords_[i]; }

  std::span<const double> coords() const { return coords_; }
  std::span<double> coords() { return coords_; }

  bool all_finite() const;

  /// Bitwise coordinate equality; this is the synchronization test.
  friend bool same_bits(const Point& a, const Point& b);
  friend bool operator==(const Point& a, const Point& b) { return same_bits(a, b); }

 private:
  std::vector<double> coords_;
};

/// Throws std::domain_error if any coordinate is NaN or infinite.
void require_finite(const Point& theta, const char* what);

}  // namespace mlmcmc
