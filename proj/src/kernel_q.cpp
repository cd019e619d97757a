#include "tal/kernel_q.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <string>

#include "compensated_sum.hpp"
#include "tal/error.hpp"
#include "tal/io.hpp"

namespace tal {

namespace {

void check_polarities(std::span<const int> polarities, std::size_t classes) {
  if (polarities.size() != classes) {
    throw Error(ErrorKind::kDimension,
                "polarity vector has " + std::to_string(polarities.size()) +
                    " entries, state has " + std::to_string(classes));
  }
  for (int a : polarities) {
    if (a != 1 && a != -1) {
      throw Error(ErrorKind::kDomain, "polarity must be +1 or -1");
    }
  }
}

void check_batch(std::span<const std::size_t> pos_counts, std::size_t classes,
                 std::size_t batch_size) {
  if (batch_size == 0) {
    throw Error(ErrorKind::kEmptyInput, "update_batched: empty batch");
  }
  if (pos_counts.size() != classes) {
    throw Error(ErrorKind::kDimension,
                "positive-count vector has " +
                    std::to_string(pos_counts.size()) + " entries, state has " +
                    std::to_string(classes));
  }
  for (std::size_t c : pos_counts) {
    if (c > batch_size) {
      throw Error(ErrorKind::kDomain,
                  "positive count exceeds batch size");
    }
  }
}

// Attenuated step lambda * (q + delta) on a (hi, lo) pair, using the exact
// error terms of fma and two-sum.
struct Split {
  double hi;
  double lo;
};

Split two_sum(double a, double b) {
  const double s = a + b;
  const double bb = s - a;
  return {s, (a - (s - bb)) + (b - bb)};
}

Split quick_two_sum(double a, double b) {
  const double s = a + b;
  return {s, b - (s - a)};
}

Split attenuate(double lambda, double hi, double lo, double delta) {
  const Split t = two_sum(hi, delta);
  const Split u = quick_two_sum(t.hi, t.lo + lo);
  const double p = lambda * u.hi;
  const double p_err = std::fma(lambda, u.hi, -p);
  return quick_two_sum(p, std::fma(lambda, u.lo, p_err));
}

struct Step {
  std::vector<double> hi;
  std::vector<double> lo;
};

// In exact arithmetic the attenuated updates map [0, q_max) into itself, but
// q_max itself is rounded, so a trajectory near saturation can land on or
// just past it. Results within a few ulps of a bound are moved to the nearest
// interior double; anything further out is left for the range check.
void settle_rounding(Step& next, double q_max) {
  const double slack = 8.0 * std::numeric_limits<double>::epsilon() * q_max;
  const double top = std::nextafter(q_max, 0.0);
  for (std::size_t k = 0; k < next.hi.size(); ++k) {
    double& v = next.hi[k];
    if (v > top && v <= q_max + slack) {
      v = top;
      next.lo[k] = 0.0;
    } else if (v < 0.0 && v >= -slack) {
      v = 0.0;
      next.lo[k] = 0.0;
    } else if (v == top && next.lo[k] > 0.0) {
      next.lo[k] = 0.0;
    } else if (v == 0.0 && next.lo[k] < 0.0) {
      next.lo[k] = 0.0;
    }
  }
}

// Shared body of the batched update; the caller decides what a range
// violation means.
Step batched_step(const QState& state, const MemoryKernel& kernel, double r,
                  std::span<const std::size_t> pos_counts,
                  std::size_t batch_size) {
  const double lambda = kernel.lambda();
  const double n = static_cast<double>(batch_size);
  const auto lo = state.residuals();
  Step next{std::vector<double>(state.class_count()),
            std::vector<double>(state.class_count())};
  for (std::size_t k = 0; k < next.hi.size(); ++k) {
    const double q = state[k];
    const double s = negative_weight(q, kernel, r);
    const double np = static_cast<double>(pos_counts[k]);
    const double nn = static_cast<double>(batch_size - pos_counts[k]);
    const Split v = attenuate(lambda, q, lo[k], np / n - (nn / n) * s);
    next.hi[k] = v.hi;
    next.lo[k] = v.lo;
  }
  settle_rounding(next, kernel.q_max());
  return next;
}

std::size_t count_violations(std::span<const double> q, double q_max) {
  std::size_t bad = 0;
  for (double v : q) {
    if (!(v >= 0.0 && v < q_max)) ++bad;
  }
  return bad;
}

}  // namespace

MemoryKernel::MemoryKernel(double lambda) : lambda_(lambda) {
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw Error(ErrorKind::kDomain,
                "memory parameter lambda must lie in (0, 1), got " +
                    io::format_double(lambda));
  }
}

double MemoryKernel::weight(std::size_t n) const {
  return std::pow(lambda_, static_cast<double>(n + 1));
}

std::vector<double> MemoryKernel::weights(std::size_t count) const {
  std::vector<double> f(count);
  for (std::size_t n = 0; n < count; ++n) f[n] = weight(n);
  return f;
}

PolaritySequence::PolaritySequence(std::size_t class_id,
                                   std::vector<int> values)
    : class_id_(class_id), values_(std::move(values)) {
  for (int a : values_) {
    if (a != 1 && a != -1) {
      throw Error(ErrorKind::kDomain, "polarity must be +1 or -1");
    }
  }
}

QState::QState(std::vector<double> q, std::vector<double> lo,
               std::uint64_t step)
    : q_(std::move(q)), lo_(std::move(lo)), step_(step) {
  if (lo_.size() != q_.size()) {
    throw Error(ErrorKind::kDimension, "QState residual vector size mismatch");
  }
}

void QState::grow_to(std::size_t new_count) {
  if (new_count < q_.size()) {
    throw Error(ErrorKind::kDimension, "QState cannot shrink");
  }
  q_.resize(new_count, 0.0);
  lo_.resize(new_count, 0.0);
}

double q_from_convolution(const MemoryKernel& kernel,
                          const PolaritySequence& seq) {
  return q_from_convolution(kernel.weights(seq.size()), seq);
}

double q_from_convolution(std::span<const double> kernel_weights,
                          const PolaritySequence& seq) {
  if (seq.empty()) {
    throw Error(ErrorKind::kEmptyInput, "q_from_convolution: empty sequence");
  }
  if (kernel_weights.size() < seq.size()) {
    throw Error(ErrorKind::kDimension,
                "kernel shorter than the polarity sequence");
  }
  const auto a = seq.values();
  const std::size_t len = a.size();
  // Compensated so the reference is accurate to ~1 ulp of the result.
  detail::CompensatedSum sum;
  for (std::size_t n = 0; n < len; ++n) {
    sum.add(kernel_weights[len - 1 - n] * static_cast<double>(a[n]));
  }
  return sum.value();
}

double negative_weight(double q, const MemoryKernel& kernel, double r) {
  if (q <= 0.0) return 0.0;
  return std::pow(q / kernel.q_max(), r);
}

void validate_attenuation_domain(const MemoryKernel& kernel, double r) {
  if (!(r >= 1.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::kDomain,
                "exponent r must be finite and >= 1, got " +
                    io::format_double(r));
  }
  if (kernel.lambda() < 0.5) {
    throw Error(ErrorKind::kDomain,
                "memory parameter lambda must be >= 0.5 for attenuated "
                "updates, got " +
                    io::format_double(kernel.lambda()));
  }
}

QState update_plain(const QState& state, const MemoryKernel& kernel,
                    std::span<const int> polarities) {
  check_polarities(polarities, state.class_count());
  std::vector<double> next(state.class_count());
  for (std::size_t k = 0; k < next.size(); ++k) {
    next[k] = kernel.lambda() * (state[k] + static_cast<double>(polarities[k]));
  }
  return QState(std::move(next), state.step() + 1);
}

QState update_tal(const QState& state, const MemoryKernel& kernel, double r,
                  std::span<const int> polarities) {
  validate_attenuation_domain(kernel, r);
  check_polarities(polarities, state.class_count());
  const double lambda = kernel.lambda();
  const auto lo = state.residuals();
  Step next{std::vector<double>(state.class_count()),
            std::vector<double>(state.class_count())};
  for (std::size_t k = 0; k < next.hi.size(); ++k) {
    const double q = state[k];
    const double delta =
        polarities[k] > 0 ? 1.0 : -negative_weight(q, kernel, r);
    const Split v = attenuate(lambda, q, lo[k], delta);
    next.hi[k] = v.hi;
    next.lo[k] = v.lo;
  }
  settle_rounding(next, kernel.q_max());
  if (count_violations(next.hi, kernel.q_max()) != 0) {
    throw Error(ErrorKind::kInvariant, "update_tal left [0, q_max)");
  }
  return QState(std::move(next.hi), std::move(next.lo), state.step() + 1);
}

QState update_batched(const QState& state, const MemoryKernel& kernel,
                      double r, std::span<const std::size_t> pos_counts,
                      std::size_t batch_size) {
  validate_attenuation_domain(kernel, r);
  check_batch(pos_counts, state.class_count(), batch_size);
  auto next = batched_step(state, kernel, r, pos_counts, batch_size);
  if (count_violations(next.hi, kernel.q_max()) != 0) {
    throw Error(ErrorKind::kInvariant, "update_batched left [0, q_max)");
  }
  return QState(std::move(next.hi), std::move(next.lo), state.step() + 1);
}

RelaxedUpdate update_batched_relaxed(const QState& state,
                                     const MemoryKernel& kernel, double r,
                                     std::span<const std::size_t> pos_counts,
                                     std::size_t batch_size) {
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw Error(ErrorKind::kDomain, "exponent r must be positive");
  }
  check_batch(pos_counts, state.class_count(), batch_size);
  auto next = batched_step(state, kernel, r, pos_counts, batch_size);
  const std::size_t bad = count_violations(next.hi, kernel.q_max());
  return {QState(std::move(next.hi), std::move(next.lo), state.step() + 1),
          bad};
}

bool in_range(const QState& state, const MemoryKernel& kernel) {
  return count_violations(state.values(), kernel.q_max()) == 0;
}

void QTrajectory::record(const QState& state) { record(state.step(), state); }

void QTrajectory::record(std::uint64_t step, const QState& state) {
  for (std::size_t k = 0; k < state.class_count(); ++k) {
    rows_.push_back({step, k, state[k]});
  }
}

void QTrajectory::write_csv(std::ostream& out) const {
  out << "step,class_id,q_value\n";
  for (const auto& row : rows_) {
    out << row.step << ',' << row.class_id << ','
        << io::format_double(row.q_value) << '\n';
  }
}

}  // namespace tal
