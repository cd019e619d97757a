#pragma once

// Desk-scale class-incremental trainer: Gaussian class clusters, a linear or
// one-hidden-layer softmax classifier trained with plain SGD, herding replay,
// and either cross-entropy or the temporal-adjusted loss.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tal/kernel_q.hpp"
#include "tal/metrics.hpp"
#include "tal/stream_lab.hpp"
#include "tal/tal_loss.hpp"

namespace tal {

struct GaussianTaskParams {
  std::size_t class_count = 10;
  std::size_t dim = 16;
  std::size_t tasks = 5;
  std::size_t per_class = 100;       // training samples per class
  std::size_t test_per_class = 100;  // balanced test split
  double sep = 3.0;                  // minimum pairwise distance of means
  double noise = 1.0;                // isotropic standard deviation
  std::size_t replay_per_class = 20;
  std::uint64_t seed = 0;
};

struct SyntheticDataset {
  Matrix class_means;  // C x d
  double noise = 1.0;
  Matrix train_x;
  Labels train_y;
  Matrix test_x;
  Labels test_y;

  std::size_t class_count() const {
    return static_cast<std::size_t>(class_means.rows());
  }
  std::size_t dim() const {
    return static_cast<std::size_t>(class_means.cols());
  }
  // Row indices of the training samples of one class.
  std::vector<std::size_t> train_indices(std::size_t class_id) const;
};

struct GaussianTasks {
  SyntheticDataset dataset;
  TaskSchedule schedule;
};

// Means are drawn uniformly on a sphere of radius sep with rejection until
// every pair is at least sep apart. Task t introduces classes
// [t*C/tasks, (t+1)*C/tasks). Throws Error(kDomain) if C is not divisible by
// tasks or sep <= 0, and Error(kGeneration) when separation cannot be met.
GaussianTasks make_gaussian_tasks(const GaussianTaskParams& params);

class Classifier {
 public:
  // hidden == 0 gives a linear softmax head; otherwise one ReLU layer.
  // Hidden weights are seeded; the output head starts at zero.
  Classifier(std::size_t dim, std::size_t hidden, std::uint64_t seed);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t hidden() const noexcept { return hidden_; }
  std::size_t class_count() const noexcept {
    return static_cast<std::size_t>(head_w_.cols());
  }

  // Appends zero-initialised output columns.
  void grow_to(std::size_t class_count);

  Matrix logits(const Matrix& x) const;
  std::vector<std::size_t> predict(const Matrix& x) const;

  // Backpropagates grad_logits (d loss / d logits for the batch x) and
  // applies one SGD step with learning rate lr.
  void sgd_step(const Matrix& x, const Matrix& grad_logits, double lr);

 private:
  Matrix features(const Matrix& x) const;

  std::size_t dim_;
  std::size_t hidden_;
  Matrix hidden_w_;                   // d x H
  Eigen::RowVectorXd hidden_b_;       // H
  Matrix head_w_;                     // F x C (F = H or d)
  Eigen::RowVectorXd head_b_;         // C
};

enum class LossKind { kCrossEntropy, kTal };

const char* to_string(LossKind kind) noexcept;

struct TrainConfig {
  LossKind loss = LossKind::kTal;
  double lambda = 0.995;
  double r = 1.0;
  double epsilon = kDefaultEpsilon;
  double learning_rate = 0.05;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::size_t hidden = 0;
  std::size_t replay_per_class = 20;
  std::uint64_t seed = 0;
  // Q is recorded every q_trace_stride optimiser steps (0 disables).
  std::size_t q_trace_stride = 1;
};

struct StepEvent {
  std::size_t task = 0;
  std::size_t epoch = 0;
  std::uint64_t step = 0;
  std::size_t batch_size = 0;
  double loss = 0.0;
};

struct RunResult {
  MetricsReport report;
  QTrajectory q_trajectory;
  std::vector<StepEvent> events;
  QState final_q;
  // Number of Q entries that left [0, q_max) (relaxed exponents only).
  std::size_t range_violations = 0;
};

// Herding: greedily picks `count` rows whose running mean stays closest to
// the mean of `samples`. Returns row indices into `samples`.
std::vector<std::size_t> herding_select(const Matrix& samples,
                                        std::size_t count);

// Trains task by task. Under TAL the calibration is re-solved whenever the
// number of seen classes grows; under CE, Q is still tracked with the same
// (lambda, r) for diagnostics but never enters the loss. Q is advanced only
// on training batches. Throws TrainingError on a non-finite loss.
RunResult train_incremental(const TrainConfig& config,
                            const SyntheticDataset& dataset,
                            const TaskSchedule& schedule);

// Convenience summaries of a finished run.
struct RunDiagnostics {
  std::optional<double> age_asymmetry_correlation;
  std::optional<double> q_recall_correlation;
  // Macro-averaged final precision / recall over the first task's classes.
  std::optional<double> earliest_precision;
  std::optional<double> earliest_recall;
  double earliest_final_accuracy = 0.0;
};

RunDiagnostics diagnose(const RunResult& run, const TaskSchedule& schedule);

}  // namespace tal
