#include "tal/stream_lab.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <string>

#include "compensated_sum.hpp"
#include "tal/error.hpp"
#include "tal/rng.hpp"

namespace tal {

std::size_t TaskSchedule::class_count() const {
  std::size_t n = 0;
  for (const auto& t : tasks) n += t.new_class_ids.size();
  return n;
}

std::vector<std::size_t> TaskSchedule::classes_before(
    std::size_t task_index) const {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < task_index && t < tasks.size(); ++t) {
    out.insert(out.end(), tasks[t].new_class_ids.begin(),
               tasks[t].new_class_ids.end());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void TaskSchedule::validate() const {
  if (tasks.empty()) {
    throw Error(ErrorKind::kSchedule, "schedule has no tasks");
  }
  std::set<std::size_t> seen;
  for (const auto& t : tasks) {
    if (t.new_class_ids.empty()) {
      throw Error(ErrorKind::kSchedule,
                  "task " + std::to_string(t.task_id) + " introduces no class");
    }
    if (t.samples_per_class == 0) {
      throw Error(ErrorKind::kSchedule,
                  "task " + std::to_string(t.task_id) + " has no samples");
    }
    for (std::size_t c : t.new_class_ids) {
      if (!seen.insert(c).second) {
        throw Error(ErrorKind::kSchedule,
                    "class " + std::to_string(c) + " appears in two tasks");
      }
    }
  }
  if (*seen.rbegin() + 1 != seen.size()) {
    throw Error(ErrorKind::kSchedule,
                "class ids must be contiguous from 0");
  }
}

SupervisionTrace::SupervisionTrace(std::vector<std::size_t> labels,
                                   std::size_t class_count)
    : labels_(std::move(labels)), class_count_(class_count) {
  for (std::size_t y : labels_) {
    if (y >= class_count_) {
      throw Error(ErrorKind::kIndex, "trace label " + std::to_string(y) +
                                         " outside [0, " +
                                         std::to_string(class_count_) + ")");
    }
  }
}

int SupervisionTrace::polarity(std::size_t class_id, std::size_t step) const {
  if (class_id >= class_count_) {
    throw Error(ErrorKind::kIndex, "class id out of range");
  }
  return labels_.at(step) == class_id ? 1 : -1;
}

PolaritySequence SupervisionTrace::sequence(std::size_t class_id) const {
  if (class_id >= class_count_) {
    throw Error(ErrorKind::kIndex, "class id out of range");
  }
  std::vector<int> a(labels_.size());
  for (std::size_t n = 0; n < labels_.size(); ++n) {
    a[n] = labels_[n] == class_id ? 1 : -1;
  }
  return PolaritySequence(class_id, std::move(a));
}

std::vector<int> SupervisionTrace::polarities_at(std::size_t step) const {
  std::vector<int> a(class_count_, -1);
  a[labels_.at(step)] = 1;
  return a;
}

std::vector<std::size_t> SupervisionTrace::cumulative_positives(
    std::size_t class_id) const {
  return tal::cumulative_positives(sequence(class_id));
}

std::size_t SupervisionTrace::total_positives(std::size_t class_id) const {
  if (class_id >= class_count_) {
    throw Error(ErrorKind::kIndex, "class id out of range");
  }
  return static_cast<std::size_t>(
      std::count(labels_.begin(), labels_.end(), class_id));
}

void SupervisionTrace::write_labels_csv(std::ostream& out) const {
  out << "step,label\n";
  for (std::size_t n = 0; n < labels_.size(); ++n) {
    out << n << ',' << labels_[n] << '\n';
  }
}

void SupervisionTrace::write_s_curves_csv(std::ostream& out) const {
  out << "step,class,cumulative_positives\n";
  std::vector<std::size_t> s(class_count_, 0);
  for (std::size_t n = 0; n < labels_.size(); ++n) {
    ++s[labels_[n]];
    for (std::size_t k = 0; k < class_count_; ++k) {
      out << n << ',' << k << ',' << s[k] << '\n';
    }
  }
}

SupervisionTrace generate_stream(const TaskSchedule& schedule,
                                 std::uint64_t seed) {
  schedule.validate();
  rng::Engine eng(seed);
  std::vector<std::size_t> labels;
  for (std::size_t t = 0; t < schedule.tasks.size(); ++t) {
    const auto& task = schedule.tasks[t];
    std::vector<std::size_t> block;
    for (std::size_t c : task.new_class_ids) {
      block.insert(block.end(), task.samples_per_class, c);
    }
    for (std::size_t c : schedule.classes_before(t)) {
      block.insert(block.end(), task.replay_per_old_class, c);
    }
    rng::shuffle(block, eng);
    labels.insert(labels.end(), block.begin(), block.end());
  }
  return SupervisionTrace(std::move(labels), schedule.class_count());
}

std::vector<std::size_t> cumulative_positives(const PolaritySequence& seq) {
  std::vector<std::size_t> s(seq.size());
  std::size_t running = 0;
  const auto a = seq.values();
  for (std::size_t n = 0; n < a.size(); ++n) {
    if (a[n] > 0) ++running;
    s[n] = running;
  }
  return s;
}

double summation_by_parts_phi(std::span<const double> kernel_weights,
                              std::span<const std::size_t> cumulative) {
  const std::size_t len = cumulative.size();
  if (len == 0) {
    throw Error(ErrorKind::kEmptyInput, "summation_by_parts_phi: empty input");
  }
  if (kernel_weights.size() < len) {
    throw Error(ErrorKind::kDimension,
                "kernel shorter than the cumulative sequence");
  }
  detail::CompensatedSum tail;
  for (std::size_t n = 0; n + 1 < len; ++n) {
    const double delta =
        kernel_weights[len - 2 - n] - kernel_weights[len - 1 - n];
    tail.add(delta * static_cast<double>(cumulative[n]));
  }
  return kernel_weights[0] * static_cast<double>(cumulative[len - 1]) -
         tail.value();
}

Theorem1Verdict compare_sequences(std::span<const double> kernel_weights,
                                  const PolaritySequence& a,
                                  const PolaritySequence& b) {
  if (a.size() != b.size()) {
    throw Error(ErrorKind::kDimension, "sequences differ in length");
  }
  const auto s_a = cumulative_positives(a);
  const auto s_b = cumulative_positives(b);
  if (s_a.empty()) {
    throw Error(ErrorKind::kEmptyInput, "compare_sequences: empty sequences");
  }
  if (s_a.back() != s_b.back()) {
    throw Error(ErrorKind::kPrecondition,
                "classes have unequal positive totals (" +
                    std::to_string(s_a.back()) + " vs " +
                    std::to_string(s_b.back()) + ")");
  }

  Theorem1Verdict v;
  v.q_a = q_from_convolution(kernel_weights, a);
  v.q_b = q_from_convolution(kernel_weights, b);
  v.phi_a = summation_by_parts_phi(kernel_weights, s_a);
  v.phi_b = summation_by_parts_phi(kernel_weights, s_b);

  detail::CompensatedSum f_total;
  for (std::size_t n = 0; n < a.size(); ++n) f_total.add(kernel_weights[n]);
  const double err_a = std::abs(v.q_a - (2.0 * v.phi_a - f_total.value()));
  const double err_b = std::abs(v.q_b - (2.0 * v.phi_b - f_total.value()));
  v.identity_residual = std::max(err_a, err_b);
  const double scale = std::max({1.0, std::abs(v.q_a), std::abs(v.q_b)});
  if (v.identity_residual > 1e-10 * scale) {
    throw Error(ErrorKind::kInvariant,
                "direct and summation-by-parts evaluations disagree");
  }

  v.dominance_held = true;
  for (std::size_t n = 0; n < s_a.size(); ++n) {
    if (s_a[n] < s_b[n]) v.dominance_held = false;
    if (s_a[n] > s_b[n]) v.strict_dominance = true;
  }
  v.strict_dominance = v.strict_dominance && v.dominance_held;
  v.conclusion_held = v.q_a <= v.q_b;
  v.strict_conclusion = v.q_a < v.q_b;
  return v;
}

std::pair<PolaritySequence, PolaritySequence> random_dominance_pair(
    std::uint64_t seed, std::size_t length, std::size_t positives) {
  if (positives > length) {
    throw Error(ErrorKind::kDomain, "more positives than steps");
  }
  rng::Engine eng(seed);
  auto draw = [&] {
    std::vector<std::size_t> idx(length);
    for (std::size_t i = 0; i < length; ++i) idx[i] = i;
    rng::shuffle(idx, eng);
    idx.resize(positives);
    std::sort(idx.begin(), idx.end());
    return idx;
  };
  const auto u = draw();
  const auto v = draw();
  // Elementwise min/max of two increasing position lists stay increasing.
  std::vector<int> early(length, -1);
  std::vector<int> late(length, -1);
  for (std::size_t i = 0; i < positives; ++i) {
    early[std::min(u[i], v[i])] = 1;
    late[std::max(u[i], v[i])] = 1;
  }
  return {PolaritySequence(0, std::move(early)),
          PolaritySequence(1, std::move(late))};
}

Theorem1Verdict verify_theorem1(const MemoryKernel& kernel,
                                const SupervisionTrace& trace,
                                std::size_t class_a, std::size_t class_b) {
  if (trace.length() == 0) {
    throw Error(ErrorKind::kEmptyInput, "verify_theorem1: empty trace");
  }
  const auto f = kernel.weights(trace.length());
  return compare_sequences(f, trace.sequence(class_a), trace.sequence(class_b));
}

}  // namespace tal
