#pragma once

// Frequency-alignment calibration.
//
// Under temporally uniform, class-balanced supervision the attenuated Q
// recursion has a steady state x* = Q*/q_max solving
//
//   g(x) = (1 - 1/C) x^r + x - 1/C = 0,   x in (0, 1),
//
// and alpha = 1 / (x*)^r restores unit negative weight at that state.
// Neither x* nor alpha depends on lambda.

#include <cstddef>
#include <optional>

namespace tal {

struct CalibrationResult {
  double x_star = 0.0;
  double alpha = 0.0;
  std::size_t class_count = 0;
  double r = 1.0;
  double residual = 0.0;  // |g(x_star)|
  int iterations = 0;     // 0 for closed forms
};

// Unique root in (0,1). Closed form for r == 1 and r == 2, bracketed Newton
// otherwise. Throws Error(kDomain) for C < 2 or r < 1, SolverError if the
// iteration fails to reach the residual tolerance.
CalibrationResult solve_calibration(std::size_t class_count, double r);

// Always takes the numeric path, regardless of r.
CalibrationResult solve_calibration_numeric(std::size_t class_count, double r);

// Closed-form x* for r in {1, 2}; nullopt for any other exponent.
std::optional<double> calibration_closed_form(std::size_t class_count,
                                              double r);

// Steady-state root for a general positive prior p in (0, 1):
// (1-p) x^r + x - p = 0. Internal: used for fixed-point checks under
// non-uniform class frequencies.
double steady_state_fraction(double prior, double r);

// g evaluated at x for class count C.
double calibration_residual(std::size_t class_count, double r, double x);

// alpha * w(x* q_max) evaluated through the loss weight path; equals 1 at
// calibration. Uses lambda = 0.9 for the kernel (the result is lambda-free).
double degeneracy_check(std::size_t class_count, double r);

}  // namespace tal
