#include "tal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tal/error.hpp"

namespace tal {

namespace {

void check_pair(std::span<const std::size_t> predictions,
                std::span<const std::size_t> labels) {
  if (predictions.empty() || labels.empty()) {
    throw Error(ErrorKind::kEmptyInput, "metrics: empty input");
  }
  if (predictions.size() != labels.size()) {
    throw Error(ErrorKind::kDimension,
                "metrics: " + std::to_string(predictions.size()) +
                    " predictions vs " + std::to_string(labels.size()) +
                    " labels");
  }
}

}  // namespace

ConfusionMatrix::ConfusionMatrix(std::span<const std::size_t> predictions,
                                 std::span<const std::size_t> labels,
                                 std::size_t class_count)
    : classes_(class_count), counts_(class_count * class_count, 0) {
  check_pair(predictions, labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes_ || predictions[i] >= classes_) {
      throw Error(ErrorKind::kIndex, "metrics: class id out of range");
    }
    ++counts_[labels[i] * classes_ + predictions[i]];
  }
  total_ = labels.size();
}

std::size_t ConfusionMatrix::at(std::size_t truth,
                                std::size_t predicted) const {
  if (truth >= classes_ || predicted >= classes_) {
    throw Error(ErrorKind::kIndex, "confusion matrix index out of range");
  }
  return counts_[truth * classes_ + predicted];
}

std::vector<ClassMetrics> class_metrics(const ConfusionMatrix& cm) {
  const std::size_t c = cm.class_count();
  std::vector<ClassMetrics> out(c);
  for (std::size_t k = 0; k < c; ++k) {
    auto& m = out[k];
    m.class_id = k;
    m.true_positives = cm.at(k, k);
    for (std::size_t j = 0; j < c; ++j) {
      m.support += cm.at(k, j);
      m.predicted += cm.at(j, k);
    }
    if (m.predicted > 0) {
      m.precision = static_cast<double>(m.true_positives) /
                    static_cast<double>(m.predicted);
    }
    if (m.support > 0) {
      m.recall = static_cast<double>(m.true_positives) /
                 static_cast<double>(m.support);
    }
  }
  return out;
}

std::vector<ClassMetrics> confusion_and_prf(
    std::span<const std::size_t> predictions,
    std::span<const std::size_t> labels, std::size_t class_count) {
  return class_metrics(ConfusionMatrix(predictions, labels, class_count));
}

double accuracy(std::span<const std::size_t> predictions,
                std::span<const std::size_t> labels) {
  check_pair(predictions, labels);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (predictions[i] == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

std::optional<double> pearson(std::span<const double> x,
                              std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::kDimension, "pearson: length mismatch");
  }
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

std::optional<double> spearman(std::span<const double> x,
                               std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorKind::kDimension, "spearman: length mismatch");
  }
  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  return pearson(rx, ry);
}

AsymmetryReport asymmetry_index(std::span<const ClassMetrics> per_class,
                                std::span<const double> class_age) {
  if (per_class.size() < 3) {
    throw Error(ErrorKind::kPrecondition,
                "asymmetry correlation needs at least 3 classes");
  }
  if (class_age.size() != per_class.size()) {
    throw Error(ErrorKind::kDimension, "asymmetry_index: age length mismatch");
  }
  AsymmetryReport report;
  std::vector<double> diffs;
  std::vector<double> ages;
  for (std::size_t k = 0; k < per_class.size(); ++k) {
    const auto& m = per_class[k];
    if (m.precision && m.recall) {
      const double d = *m.precision - *m.recall;
      report.index.emplace_back(d);
      diffs.push_back(d);
      ages.push_back(class_age[k]);
    } else {
      report.index.emplace_back(std::nullopt);
      ++report.excluded;
    }
  }
  if (diffs.size() >= 3) report.age_correlation = spearman(diffs, ages);
  return report;
}

std::vector<std::vector<double>> forgetting_curve(
    const AccuracyMatrix& accuracy_matrix) {
  const std::size_t tasks = accuracy_matrix.size();
  std::vector<std::vector<double>> curves(tasks);
  for (std::size_t t = 0; t < tasks; ++t) {
    if (accuracy_matrix[t].size() != t + 1) {
      throw Error(ErrorKind::kDimension,
                  "accuracy matrix row " + std::to_string(t) +
                      " must hold " + std::to_string(t + 1) + " entries");
    }
    for (std::size_t j = 0; j <= t; ++j) {
      curves[j].push_back(accuracy_matrix[t][j]);
    }
  }
  return curves;
}

double MetricsReport::a_mean() const {
  if (task_accuracy.empty()) {
    throw Error(ErrorKind::kEmptyInput, "report has no tasks");
  }
  return std::accumulate(task_accuracy.begin(), task_accuracy.end(), 0.0) /
         static_cast<double>(task_accuracy.size());
}

double MetricsReport::a_last() const {
  if (task_accuracy.empty()) {
    throw Error(ErrorKind::kEmptyInput, "report has no tasks");
  }
  return task_accuracy.back();
}

std::vector<PerClassRecord> MetricsReport::final_per_class() const {
  std::vector<PerClassRecord> out;
  if (task_accuracy.empty()) return out;
  const std::size_t last = task_accuracy.size() - 1;
  for (const auto& rec : per_class) {
    if (rec.task_id == last) out.push_back(rec);
  }
  return out;
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  if (values.empty()) return out;
  const double n = static_cast<double>(values.size());
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.stddev = std::sqrt(ss / (n - 1.0));
  }
  return out;
}

}  // namespace tal
