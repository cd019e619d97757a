#pragma once

// Independent reference computations shared by the unit and acceptance
// tests. Nothing here calls into the library's numeric code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace oracle {

// Direct sum of lambda^(N-n) * a[n] in long double, powers built by repeated
// multiplication from the newest sample backwards.
inline long double convolution(double lambda, const std::vector<int>& a) {
  long double total = 0.0L;
  long double f = lambda;
  for (std::size_t i = a.size(); i-- > 0;) {
    total += f * a[i];
    f *= lambda;
  }
  return total;
}

inline double bisect(const std::function<double(double)>& g, double lo,
                     double hi, int iterations = 200) {
  for (int i = 0; i < iterations; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) > 0.0) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Steady-state fraction by bisection on (1-1/C) x^r + x - 1/C.
inline double calibration_root(std::size_t classes, double r) {
  const double c = static_cast<double>(classes);
  return bisect(
      [&](double x) { return (1.0 - 1.0 / c) * std::pow(x, r) + x - 1.0 / c; },
      0.0, 1.0);
}

// Per-sample TAL loss with explicit per-class negative scales, written
// without the max-shift trick, in long double.
inline long double tal_sample_loss(const std::vector<double>& z,
                                   std::size_t label,
                                   const std::vector<double>& scale) {
  long double denom = 0.0L;
  for (std::size_t k = 0; k < z.size(); ++k) {
    const long double e = std::exp(static_cast<long double>(z[k]));
    denom += k == label ? e : e * scale[k];
  }
  return std::log(denom) - static_cast<long double>(z[label]);
}

}  // namespace oracle
