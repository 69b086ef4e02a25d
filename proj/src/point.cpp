#include "mlmcmc/point.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>
#include <string>

namespace mlmcmc {

bool Point::all_finite() const {
  for (double c : coords_) {
    if (!std::isfinite(c)) return false;
  }
  return true;
}

bool same_bits(const Point& a, const Point& b) {
  if (a.coords_.size() != b.coords_.size()) return false;
  if (a.coords_.empty()) return true;
  return std::memcmp(a.coords_.data(), b.coords_.data(), a.coords_.size() * sizeof(double)) == 0;
}

void require_finite(const Point& theta, const char* what) {
  if (!theta.all_finite()) {
    throw std::domain_error(std::string(what) + ": non-finite coordinate");
  }
}

}  // namespace mlmcmc
