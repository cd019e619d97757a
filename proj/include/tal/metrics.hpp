#pragma once

// Classification metrics for class-incremental runs: per-class precision and
// recall, accuracy matrices, forgetting curves and rank-correlation
// diagnostics.

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace tal {

class ConfusionMatrix {
 public:
  // Rows are true labels, columns predictions. Throws Error(kEmptyInput) for
  // empty input, Error(kDimension) for length mismatch, Error(kIndex) for
  // out-of-range ids.
  ConfusionMatrix(std::span<const std::size_t> predictions,
                  std::span<const std::size_t> labels,
                  std::size_t class_count);

  std::size_t class_count() const noexcept { return classes_; }
  std::size_t at(std::size_t truth, std::size_t predicted) const;
  std::size_t total() const noexcept { return total_; }

 private:
  std::size_t classes_;
  std::size_t total_ = 0;
  std::vector<std::size_t> counts_;
};

struct ClassMetrics {
  std::size_t class_id = 0;
  // nullopt when the class was never predicted (precision is 0/0).
  std::optional<double> precision;
  // nullopt when the class has no test samples.
  std::optional<double> recall;
  std::size_t support = 0;
  std::size_t predicted = 0;
  std::size_t true_positives = 0;
};

std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& cm);

std::vector<ClassMetrics> confusion_and_prf(
    std::span<const std::size_t> predictions,
    std::span<const std::size_t> labels, std::size_t class_count);

// Fraction of matching entries. Throws on empty or mismatched input.
double accuracy(std::span<const std::size_t> predictions,
                std::span<const std::size_t> labels);

// Ranks starting at 1, ties receive the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> values);

std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y);

// Spearman rank correlation (Pearson on average ranks). nullopt when fewer
// than two points or either side is constant.
std::optional<double> spearman(std::span<const double> x,
                               std::span<const double> y);

struct AsymmetryReport {
  // precision - recall per class; nullopt where either is undefined.
  std::vector<std::optional<double>> index;
  // Spearman(precision - recall, age) over classes with a defined index.
  std::optional<double> age_correlation;
  std::size_t excluded = 0;
};

// class_age[k] grows with the age of class k (older = larger). A positive
// correlation means older classes lean towards precision over recall.
// Throws Error(kPrecondition) for fewer than 3 classes.
AsymmetryReport asymmetry_index(std::span<const ClassMetrics> per_class,
                                std::span<const double> class_age);

// Lower-triangular matrix: row t holds the accuracy on tasks 0..t measured
// right after training task t.
using AccuracyMatrix = std::vector<std::vector<double>>;

// curves[j][i] = accuracy on task j after training task j + i.
std::vector<std::vector<double>> forgetting_curve(
    const AccuracyMatrix& accuracy_matrix);

struct PerClassRecord {
  std::size_t task_id = 0;
  std::size_t class_id = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::size_t support = 0;
  double q_value = 0.0;
};

struct MetricsReport {
  AccuracyMatrix accuracy_matrix;
  // Accuracy on every class seen so far, after each task.
  std::vector<double> task_accuracy;
  std::vector<PerClassRecord> per_class;

  // Mean of task_accuracy.
  double a_mean() const;
  // task_accuracy of the final task.
  double a_last() const;
  // Per-class records after the final task.
  std::vector<PerClassRecord> final_per_class() const;
};

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (n - 1)
};

MeanStd mean_std(std::span<const double> values);

}  // namespace tal
