#pragma once

#include <algorithm>
#include <cmath>

namespace oracle {

/// Central difference of f at one coordinate. `set(v)` writes the
/// coordinate, `f()` evaluates the scalar function.
template <class Set, class F>
double central_difference(double x0, Set&& set, F&& f, double h = 1e-6) {
  set(x0 + h);
  const double up = f();
  set(x0 - h);
  const double down = f();
  set(x0);
  return (up - down) / (2.0 * h);
}

inline double relative_error(double a, double b) {
  return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), 1e-6});
}

}  // namespace oracle
