#pragma once

// Temporal-Adjusted Loss.
//
// For a sample with logits z and label y, every non-true logit is shifted by
// the stabilised log-weight l_k = log(alpha * max(s_k, eps)), s_k = w(Q_k):
//
//   z~_k = z_k + l_k  (k != y),    z~_y = z_y,
//   loss = logsumexp(z~) - z_y.
//
// Q enters as a constant: no gradient flows into it. The batch loss is the
// mean over samples.

#include <Eigen/Core>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "tal/calibration.hpp"
#include "tal/kernel_q.hpp"

namespace tal {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Labels = std::vector<std::size_t>;

inline constexpr double kDefaultEpsilon = 1e-12;

class TalConfig {
 public:
  // Solves the calibration for (class_count, r). Enforces lambda >= 1/2,
  // r >= 1 and epsilon in (0, 1e-6]; throws Error(kDomain) otherwise.
  TalConfig(MemoryKernel kernel, double r, std::size_t class_count,
            double epsilon = kDefaultEpsilon);

  // Exploratory configuration for 0 < r < 1 (or lambda < 1/2), outside the
  // range where Q's invariant interval is proven. alpha comes from the same
  // steady-state equation; Q range violations are tolerated and counted.
  static TalConfig relaxed(MemoryKernel kernel, double r,
                           std::size_t class_count,
                           double epsilon = kDefaultEpsilon);

  const MemoryKernel& kernel() const noexcept { return kernel_; }
  double r() const noexcept { return r_; }
  std::size_t class_count() const noexcept { return class_count_; }
  double alpha() const noexcept { return alpha_; }
  double x_star() const noexcept { return x_star_; }
  double epsilon() const noexcept { return epsilon_; }
  bool is_relaxed() const noexcept { return relaxed_; }

  // alpha * max(w(q), eps): multiplicative weight on a negative logit.
  double negative_scale(double q) const;

  // log(negative_scale(q_k)) for every class.
  std::vector<double> log_weights(const QState& q) const;

 private:
  TalConfig(MemoryKernel kernel, double r, std::size_t class_count,
            double epsilon, double x_star, bool relaxed);

  MemoryKernel kernel_;
  double r_;
  std::size_t class_count_;
  double epsilon_;
  double x_star_;
  double alpha_;
  bool relaxed_;
};

struct LossOutput {
  double loss = 0.0;               // batch mean
  std::vector<double> per_sample;  // unreduced losses
  Matrix grad_logits;              // d loss / d logits, N x C
};

// Throws Error(kNumericInput) for non-finite logits, Error(kIndex) for an
// out-of-range label, Error(kDimension) on shape mismatch and
// Error(kEmptyInput) for an empty batch.
LossOutput tal_forward(const TalConfig& config, const Matrix& logits,
                       std::span<const std::size_t> labels,
                       const QState& q_snapshot);

// Standard softmax cross-entropy with mean reduction.
LossOutput ce_forward(const Matrix& logits,
                      std::span<const std::size_t> labels);

// Per-class label histogram of a batch.
std::vector<std::size_t> label_histogram(std::span<const std::size_t> labels,
                                         std::size_t class_count);

struct TrainingStepResult {
  LossOutput output;
  QState q_state;
  std::size_t range_violations = 0;  // nonzero only for relaxed configs
};

// Loss against the pre-update snapshot, then one batched Q advance driven
// by the label histogram. The order is fixed: loss first, update second.
TrainingStepResult training_step(const TalConfig& config,
                                 const QState& q_state, const Matrix& logits,
                                 std::span<const std::size_t> labels);

}  // namespace tal
