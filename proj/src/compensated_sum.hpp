#pragma once

#include <cmath>

namespace tal::detail {

// Neumaier summation.
class CompensatedSum {
 public:
  void add(double term) {
    const double t = sum_ + term;
    comp_ += std::abs(sum_) >= std::abs(term) ? (sum_ - t) + term
                                              : (term - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace tal::detail
