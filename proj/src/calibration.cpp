#include "tal/calibration.hpp"

#include <cmath>
#include <string>

#include "tal/error.hpp"
#include "tal/io.hpp"
#include "tal/kernel_q.hpp"
#include "tal/tal_loss.hpp"

namespace tal {

namespace {

constexpr double kResidualTol = 1e-14;
constexpr int kMaxIterations = 200;

void validate(std::size_t class_count, double r) {
  if (class_count < 2) {
    throw Error(ErrorKind::kDomain,
                "calibration needs at least 2 classes, got " +
                    std::to_string(class_count));
  }
  if (!(r >= 1.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::kDomain,
                "calibration exponent must be finite and >= 1, got " +
                    io::format_double(r));
  }
}

double g(double p, double r, double x) {
  return (1.0 - p) * std::pow(x, r) + x - p;
}

double g_prime(double p, double r, double x) {
  return (1.0 - p) * r * std::pow(x, r - 1.0) + 1.0;
}

struct Root {
  double x;
  double residual;
  int iterations;
};

// Newton from x0 = p, guarded by the sign-change bracket [lo, hi]. g is
// strictly increasing, so the bracket always contains the root.
Root bracketed_newton(double p, double r) {
  double lo = 0.0;
  double hi = 1.0;
  double x = p;
  double gx = g(p, r, x);
  for (int it = 1; it <= kMaxIterations; ++it) {
    if (std::abs(gx) <= kResidualTol) return {x, std::abs(gx), it - 1};
    if (gx < 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    double next = x - gx / g_prime(p, r, x);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) break;  // stalled at machine precision
    x = next;
    gx = g(p, r, x);
  }
  if (std::abs(gx) <= kResidualTol) return {x, std::abs(gx), kMaxIterations};
  throw SolverError("calibration root finder did not converge", std::abs(gx));
}

CalibrationResult make_result(std::size_t class_count, double r, double x,
                              int iterations) {
  CalibrationResult out;
  out.x_star = x;
  out.alpha = 1.0 / std::pow(x, r);
  out.class_count = class_count;
  out.r = r;
  out.residual = std::abs(calibration_residual(class_count, r, x));
  out.iterations = iterations;
  return out;
}

}  // namespace

double calibration_residual(std::size_t class_count, double r, double x) {
  return g(1.0 / static_cast<double>(class_count), r, x);
}

std::optional<double> calibration_closed_form(std::size_t class_count,
                                              double r) {
  validate(class_count, r);
  const double c = static_cast<double>(class_count);
  if (r == 1.0) return 1.0 / (2.0 * c - 1.0);
  if (r == 2.0) {
    // Root of (1-p)x^2 + x - p written without the cancelling subtraction.
    const double p = 1.0 / c;
    return 2.0 * p / (1.0 + std::sqrt(1.0 + 4.0 * p * (1.0 - p)));
  }
  return std::nullopt;
}

CalibrationResult solve_calibration_numeric(std::size_t class_count,
                                            double r) {
  validate(class_count, r);
  const Root root = bracketed_newton(1.0 / static_cast<double>(class_count), r);
  return make_result(class_count, r, root.x, root.iterations);
}

CalibrationResult solve_calibration(std::size_t class_count, double r) {
  if (auto x = calibration_closed_form(class_count, r)) {
    return make_result(class_count, r, *x, 0);
  }
  return solve_calibration_numeric(class_count, r);
}

double steady_state_fraction(double prior, double r) {
  if (!(prior > 0.0 && prior < 1.0)) {
    throw Error(ErrorKind::kDomain, "prior must lie in (0, 1)");
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::kDomain, "exponent must be positive");
  }
  return bracketed_newton(prior, r).x;
}

double degeneracy_check(std::size_t class_count, double r) {
  const auto cal = solve_calibration(class_count, r);
  const MemoryKernel kernel(0.9);
  const TalConfig config(kernel, r, class_count);
  return config.negative_scale(cal.x_star * kernel.q_max());
}

}  // namespace tal
