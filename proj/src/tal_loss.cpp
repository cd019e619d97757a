#include "tal/tal_loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tal/error.hpp"
#include "tal/io.hpp"

namespace tal {

namespace {

void check_inputs(const Matrix& logits, std::span<const std::size_t> labels) {
  if (logits.rows() == 0 || labels.empty()) {
    throw Error(ErrorKind::kEmptyInput, "loss: empty batch");
  }
  if (static_cast<std::size_t>(logits.rows()) != labels.size()) {
    throw Error(ErrorKind::kDimension,
                "loss: " + std::to_string(logits.rows()) + " logit rows vs " +
                    std::to_string(labels.size()) + " labels");
  }
  if (!logits.allFinite()) {
    throw Error(ErrorKind::kNumericInput, "loss: non-finite logits");
  }
  const auto classes = static_cast<std::size_t>(logits.cols());
  for (std::size_t y : labels) {
    if (y >= classes) {
      throw Error(ErrorKind::kIndex, "loss: label " + std::to_string(y) +
                                         " outside [0, " +
                                         std::to_string(classes) + ")");
    }
  }
}

// Softmax cross-entropy over logits whose non-true columns are shifted by
// log_weights (empty span = plain cross-entropy).
LossOutput shifted_softmax_loss(const Matrix& logits,
                                std::span<const std::size_t> labels,
                                std::span<const double> log_weights) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  const bool shifted = !log_weights.empty();

  LossOutput out;
  out.per_sample.resize(static_cast<std::size_t>(n));
  out.grad_logits.resize(n, c);

  std::vector<double> row(static_cast<std::size_t>(c));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto y = static_cast<Eigen::Index>(labels[static_cast<std::size_t>(i)]);
    const double z_y = logits(i, y);
    double m = -HUGE_VAL;
    for (Eigen::Index k = 0; k < c; ++k) {
      double v = logits(i, k);
      if (shifted && k != y) v += log_weights[static_cast<std::size_t>(k)];
      row[static_cast<std::size_t>(k)] = v;
      m = std::max(m, v);
    }
    double others = 0.0;
    for (Eigen::Index k = 0; k < c; ++k) {
      const double e = std::exp(row[static_cast<std::size_t>(k)] - m);
      row[static_cast<std::size_t>(k)] = e;
      if (k != y) others += e;
    }
    const double e_y = row[static_cast<std::size_t>(y)];
    const double sum = e_y + others;
    // Both branches are sums of nonnegative terms, so the loss is >= 0.
    const double loss =
        z_y == m ? std::log1p(others) : std::log(sum) + (m - z_y);
    out.per_sample[static_cast<std::size_t>(i)] = loss;
    total += loss;

    const double scale = inv_n / sum;
    for (Eigen::Index k = 0; k < c; ++k) {
      out.grad_logits(i, k) = row[static_cast<std::size_t>(k)] * scale;
    }
    out.grad_logits(i, y) -= inv_n;
  }
  out.loss = total * inv_n;
  return out;
}

}  // namespace

TalConfig::TalConfig(MemoryKernel kernel, double r, std::size_t class_count,
                     double epsilon)
    : kernel_(kernel),
      r_(r),
      class_count_(class_count),
      epsilon_(epsilon),
      x_star_(0.0),
      alpha_(0.0),
      relaxed_(false) {
  validate_attenuation_domain(kernel_, r_);
  if (!(epsilon > 0.0 && epsilon <= 1e-6)) {
    throw Error(ErrorKind::kDomain, "epsilon must lie in (0, 1e-6], got " +
                                        io::format_double(epsilon));
  }
  const auto cal = solve_calibration(class_count, r);
  x_star_ = cal.x_star;
  alpha_ = cal.alpha;
}

TalConfig::TalConfig(MemoryKernel kernel, double r, std::size_t class_count,
                     double epsilon, double x_star, bool relaxed)
    : kernel_(kernel),
      r_(r),
      class_count_(class_count),
      epsilon_(epsilon),
      x_star_(x_star),
      alpha_(1.0 / std::pow(x_star, r)),
      relaxed_(relaxed) {}

TalConfig TalConfig::relaxed(MemoryKernel kernel, double r,
                             std::size_t class_count, double epsilon) {
  if (class_count < 2) {
    throw Error(ErrorKind::kDomain, "calibration needs at least 2 classes");
  }
  if (!(epsilon > 0.0 && epsilon <= 1e-6)) {
    throw Error(ErrorKind::kDomain, "epsilon must lie in (0, 1e-6]");
  }
  const double x =
      steady_state_fraction(1.0 / static_cast<double>(class_count), r);
  return TalConfig(kernel, r, class_count, epsilon, x, true);
}

double TalConfig::negative_scale(double q) const {
  return alpha_ * std::max(negative_weight(q, kernel_, r_), epsilon_);
}

std::vector<double> TalConfig::log_weights(const QState& q) const {
  std::vector<double> out(q.class_count());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = std::log(negative_scale(q[k]));
  }
  return out;
}

LossOutput tal_forward(const TalConfig& config, const Matrix& logits,
                       std::span<const std::size_t> labels,
                       const QState& q_snapshot) {
  check_inputs(logits, labels);
  const auto classes = static_cast<std::size_t>(logits.cols());
  if (classes != config.class_count() ||
      q_snapshot.class_count() != config.class_count()) {
    throw Error(ErrorKind::kDimension,
                "tal_forward: logits have " + std::to_string(classes) +
                    " columns, Q has " +
                    std::to_string(q_snapshot.class_count()) +
                    ", config expects " + std::to_string(config.class_count()));
  }
  if (!config.is_relaxed() && !in_range(q_snapshot, config.kernel())) {
    throw Error(ErrorKind::kDomain, "tal_forward: Q outside [0, q_max)");
  }
  const auto lw = config.log_weights(q_snapshot);
  return shifted_softmax_loss(logits, labels, lw);
}

LossOutput ce_forward(const Matrix& logits,
                      std::span<const std::size_t> labels) {
  check_inputs(logits, labels);
  return shifted_softmax_loss(logits, labels, {});
}

std::vector<std::size_t> label_histogram(std::span<const std::size_t> labels,
                                         std::size_t class_count) {
  std::vector<std::size_t> counts(class_count, 0);
  for (std::size_t y : labels) {
    if (y >= class_count) {
      throw Error(ErrorKind::kIndex, "label " + std::to_string(y) +
                                         " outside [0, " +
                                         std::to_string(class_count) + ")");
    }
    ++counts[y];
  }
  return counts;
}

TrainingStepResult training_step(const TalConfig& config,
                                 const QState& q_state, const Matrix& logits,
                                 std::span<const std::size_t> labels) {
  TrainingStepResult result;
  result.output = tal_forward(config, logits, labels, q_state);
  const auto counts = label_histogram(labels, config.class_count());
  if (config.is_relaxed()) {
    auto relaxed = update_batched_relaxed(q_state, config.kernel(), config.r(),
                                          counts, labels.size());
    result.q_state = std::move(relaxed.state);
    result.range_violations = relaxed.range_violations;
  } else {
    result.q_state = update_batched(q_state, config.kernel(), config.r(),
                                    counts, labels.size());
  }
  return result;
}

}  // namespace tal
