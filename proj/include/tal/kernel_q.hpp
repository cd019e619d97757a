#pragma once

// Temporal positive-supervision strength Q.
//
// Q_k[N] = sum_{n<N} f[N-1-n] * a_k[n] with the exponential memory kernel
// f[n] = lambda^(n+1). The convolution form is kept as the reference
// evaluation; training advances Q with the O(1) recursions below.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace tal {

class MemoryKernel {
 public:
  // Throws Error(kDomain) unless 0 < lambda < 1.
  explicit MemoryKernel(double lambda);

  double lambda() const noexcept { return lambda_; }

  // Asymptotic supremum of Q under all-positive supervision.
  double q_max() const noexcept { return lambda_ / (1.0 - lambda_); }

  // f[n] = lambda^(n+1).
  double weight(std::size_t n) const;

  // f[0..count-1].
  std::vector<double> weights(std::size_t count) const;

 private:
  double lambda_;
};

// Polarity of one class over a stream: +1 positive sample, -1 negative.
class PolaritySequence {
 public:
  // Throws Error(kDomain) if any entry is not exactly +1 or -1.
  PolaritySequence(std::size_t class_id, std::vector<int> values);

  std::size_t class_id() const noexcept { return class_id_; }
  std::span<const int> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

 private:
  std::size_t class_id_;
  std::vector<int> values_;
};

// Per-class Q vector plus the number of updates applied so far.
// Single writer: exactly one updater advances a given state.
//
// The attenuated updates carry a low-order term per class so that long
// saturated runs track the exact trajectory to ~1 ulp instead of stalling
// u / (2 (1 - lambda)) below it. values() returns the rounded value.
class QState {
 public:
  QState() = default;
  explicit QState(std::size_t class_count)
      : q_(class_count, 0.0), lo_(class_count, 0.0) {}
  QState(std::vector<double> q, std::uint64_t step)
      : q_(std::move(q)), lo_(q_.size(), 0.0), step_(step) {}
  // Throws Error(kDimension) if the two vectors differ in length.
  QState(std::vector<double> q, std::vector<double> lo, std::uint64_t step);

  std::size_t class_count() const noexcept { return q_.size(); }
  std::uint64_t step() const noexcept { return step_; }
  std::span<const double> values() const noexcept { return q_; }
  double operator[](std::size_t k) const { return q_.at(k); }
  std::span<const double> residuals() const noexcept { return lo_; }

  // Appends zero-initialised entries so that class_count() == new_count.
  // Shrinking is rejected with Error(kDimension).
  void grow_to(std::size_t new_count);

  friend bool operator==(const QState&, const QState&) = default;

 private:
  std::vector<double> q_;
  std::vector<double> lo_;
  std::uint64_t step_ = 0;
};

// Reference evaluation of Q from the full sequence (direct summation).
// Throws Error(kEmptyInput) for an empty sequence.
double q_from_convolution(const MemoryKernel& kernel,
                          const PolaritySequence& seq);

// Same sum against an arbitrary kernel given as f[0..], which must hold at
// least seq.size() entries. Used for non-exponential decreasing kernels.
double q_from_convolution(std::span<const double> kernel_weights,
                          const PolaritySequence& seq);

// Negative-supervision sensitivity w(q) = (q / q_max)^r. Negative q (only
// reachable when r < 1) maps to 0.
double negative_weight(double q, const MemoryKernel& kernel, double r);

// Rejects (lambda, r) outside the range where [0, q_max) is provably
// invariant: requires lambda >= 1/2 and r >= 1. Throws Error(kDomain).
void validate_attenuation_domain(const MemoryKernel& kernel, double r);

// Unattenuated recursion q' = lambda (q + a). Oracle path only: it can drive
// Q negative and performs no range check.
QState update_plain(const QState& state, const MemoryKernel& kernel,
                    std::span<const int> polarities);

// Attenuated recursion: q' = lambda (q + 1) on a positive sample and
// q' = lambda (q - w(q)) on a negative one. Checks the range invariant after
// the step and throws Error(kInvariant) on violation.
QState update_tal(const QState& state, const MemoryKernel& kernel, double r,
                  std::span<const int> polarities);

// Minibatch form: q' = lambda (q + Np/N - (Nn/N) s) with s = w(q).
// With batch_size == 1 this is bit-identical to update_tal.
QState update_batched(const QState& state, const MemoryKernel& kernel,
                      double r, std::span<const std::size_t> pos_counts,
                      std::size_t batch_size);

// update_batched for exponents outside the proven domain (0 < r < 1, or
// lambda < 1/2). Range violations are counted instead of thrown.
struct RelaxedUpdate {
  QState state;
  std::size_t range_violations = 0;
};
RelaxedUpdate update_batched_relaxed(const QState& state,
                                     const MemoryKernel& kernel, double r,
                                     std::span<const std::size_t> pos_counts,
                                     std::size_t batch_size);

// True iff every q[k] lies in [0, q_max).
bool in_range(const QState& state, const MemoryKernel& kernel);

// Q snapshots exportable as CSV rows (step, class_id, q_value).
class QTrajectory {
 public:
  struct Row {
    std::uint64_t step;
    std::size_t class_id;
    double q_value;
  };

  void record(const QState& state);
  void record(std::uint64_t step, const QState& state);
  std::span<const Row> rows() const noexcept { return rows_; }
  void write_csv(std::ostream& out) const;

 private:
  std::vector<Row> rows_;
};

}  // namespace tal
