#pragma once

// Supervision streams for single-label class-incremental training and the
// temporal-imbalance verification harness.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

#include "tal/kernel_q.hpp"

namespace tal {

struct TaskSpec {
  std::size_t task_id = 0;
  std::vector<std::size_t> new_class_ids;
  std::size_t samples_per_class = 0;
  std::size_t replay_per_old_class = 0;
};

struct TaskSchedule {
  std::vector<TaskSpec> tasks;
  std::uint64_t shuffle_seed = 0;

  // Total number of distinct classes across all tasks.
  std::size_t class_count() const;

  // Class ids introduced by tasks [0, task_index), ascending.
  std::vector<std::size_t> classes_before(std::size_t task_index) const;

  // Throws Error(kSchedule) for an empty schedule, a task without classes or
  // samples, or class ids repeated across tasks. Class ids must form the
  // contiguous range [0, class_count()).
  void validate() const;
};

// One label per step plus the induced per-class polarities
// a_k[n] = +1 if label[n] == k else -1.
class SupervisionTrace {
 public:
  SupervisionTrace(std::vector<std::size_t> labels, std::size_t class_count);

  std::size_t length() const noexcept { return labels_.size(); }
  std::size_t class_count() const noexcept { return class_count_; }
  std::span<const std::size_t> labels() const noexcept { return labels_; }

  int polarity(std::size_t class_id, std::size_t step) const;
  PolaritySequence sequence(std::size_t class_id) const;
  // Polarity of every class at one step (length class_count()).
  std::vector<int> polarities_at(std::size_t step) const;

  // S_k[n] = number of positives for class k in steps 0..n.
  std::vector<std::size_t> cumulative_positives(std::size_t class_id) const;
  std::size_t total_positives(std::size_t class_id) const;

  // CSV (step,label).
  void write_labels_csv(std::ostream& out) const;
  // CSV (step,class,cumulative_positives) in step-major order.
  void write_s_curves_csv(std::ostream& out) const;

 private:
  std::vector<std::size_t> labels_;
  std::size_t class_count_;
};

// Step-per-sample stream: within each task the new-class samples and the
// replay exemplars of all earlier classes are shuffled uniformly.
SupervisionTrace generate_stream(const TaskSchedule& schedule,
                                 std::uint64_t seed);
inline SupervisionTrace generate_stream(const TaskSchedule& schedule) {
  return generate_stream(schedule, schedule.shuffle_seed);
}

// S[n] of a polarity sequence.
std::vector<std::size_t> cumulative_positives(const PolaritySequence& seq);

// Phi(N) = f[0] S[N-1] - sum_{n<N-1} (f[N-2-n] - f[N-1-n]) S[n], the
// summation-by-parts form; Q = 2 Phi - sum_{n<N} f[n].
double summation_by_parts_phi(std::span<const double> kernel_weights,
                              std::span<const std::size_t> cumulative);

struct Theorem1Verdict {
  double q_a = 0.0;
  double q_b = 0.0;
  double phi_a = 0.0;
  double phi_b = 0.0;
  bool dominance_held = false;    // S_a[n] >= S_b[n] for all n
  bool strict_dominance = false;  // ... and S_a[n] > S_b[n] for some n
  bool conclusion_held = false;   // Q_a <= Q_b
  bool strict_conclusion = false; // Q_a < Q_b
  double identity_residual = 0.0; // max |Q - (2 Phi - sum f)| over a, b
};

// Evaluates both classes along both routes. Throws Error(kPrecondition) if
// the totals differ and Error(kInvariant) if the two routes disagree by more
// than 1e-10 * max(1, |Q|).
Theorem1Verdict compare_sequences(std::span<const double> kernel_weights,
                                  const PolaritySequence& a,
                                  const PolaritySequence& b);

// Random equal-count pair of length `length` with `positives` positives each,
// where the first sequence's positives never come later than the second's
// (S_first[n] >= S_second[n] for all n). Class ids are 0 and 1. Throws
// Error(kDomain) if positives > length.
std::pair<PolaritySequence, PolaritySequence> random_dominance_pair(
    std::uint64_t seed, std::size_t length, std::size_t positives);

Theorem1Verdict verify_theorem1(const MemoryKernel& kernel,
                                const SupervisionTrace& trace,
                                std::size_t class_a, std::size_t class_b);

}  // namespace tal
