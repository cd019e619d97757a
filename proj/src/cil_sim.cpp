#include "tal/cil_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "tal/error.hpp"
#include "tal/rng.hpp"

namespace tal {

namespace {

constexpr std::size_t kMeanAttempts = 10000;

Matrix gather_rows(const Matrix& source, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) =
        source.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

void fill_split(const Matrix& means, double noise, std::size_t per_class,
                std::uint64_t seed, Matrix& x, Labels& y) {
  const auto classes = static_cast<std::size_t>(means.rows());
  const auto dim = means.cols();
  rng::Engine eng(seed);
  x.resize(static_cast<Eigen::Index>(classes * per_class), dim);
  y.resize(classes * per_class);
  std::size_t row = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i, ++row) {
      for (Eigen::Index j = 0; j < dim; ++j) {
        x(static_cast<Eigen::Index>(row), j) =
            means(static_cast<Eigen::Index>(c), j) +
            noise * rng::standard_normal(eng);
      }
      y[row] = c;
    }
  }
}

// Classes introduced by each task must extend the seen range contiguously.
std::vector<std::size_t> seen_counts(const TaskSchedule& schedule) {
  std::vector<std::size_t> counts;
  std::size_t seen = 0;
  for (const auto& task : schedule.tasks) {
    auto ids = task.new_class_ids;
    std::sort(ids.begin(), ids.end());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] != seen + i) {
        throw Error(ErrorKind::kSchedule,
                    "task " + std::to_string(task.task_id) +
                        " must introduce the next contiguous class ids");
      }
    }
    seen += ids.size();
    counts.push_back(seen);
  }
  return counts;
}

TalConfig make_config(const TrainConfig& config, std::size_t classes) {
  const MemoryKernel kernel(config.lambda);
  if (config.r >= 1.0 && config.lambda >= 0.5) {
    return TalConfig(kernel, config.r, classes, config.epsilon);
  }
  return TalConfig::relaxed(kernel, config.r, classes, config.epsilon);
}

}  // namespace

std::vector<std::size_t> SyntheticDataset::train_indices(
    std::size_t class_id) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < train_y.size(); ++i) {
    if (train_y[i] == class_id) out.push_back(i);
  }
  return out;
}

GaussianTasks make_gaussian_tasks(const GaussianTaskParams& p) {
  if (p.tasks == 0 || p.class_count == 0 || p.class_count % p.tasks != 0) {
    throw Error(ErrorKind::kDomain,
                "class count must be a positive multiple of the task count");
  }
  if (!(p.sep > 0.0) || !std::isfinite(p.sep)) {
    throw Error(ErrorKind::kDomain, "separation must be positive");
  }
  if (p.dim == 0 || p.per_class == 0 || p.test_per_class == 0) {
    throw Error(ErrorKind::kDomain, "dimension and split sizes must be positive");
  }
  if (!(p.noise >= 0.0) || !std::isfinite(p.noise)) {
    throw Error(ErrorKind::kDomain, "noise must be nonnegative");
  }

  const auto classes = static_cast<Eigen::Index>(p.class_count);
  const auto dim = static_cast<Eigen::Index>(p.dim);
  Matrix means(classes, dim);
  rng::Engine eng(rng::derive_seed(p.seed, 0));
  for (Eigen::Index c = 0; c < classes; ++c) {
    bool placed = false;
    for (std::size_t attempt = 0; attempt < kMeanAttempts && !placed; ++attempt) {
      Eigen::RowVectorXd v(dim);
      for (Eigen::Index j = 0; j < dim; ++j) v(j) = rng::standard_normal(eng);
      const double norm = v.norm();
      if (norm == 0.0) continue;
      v *= p.sep / norm;
      placed = true;
      for (Eigen::Index o = 0; o < c; ++o) {
        if ((means.row(o) - v).norm() < p.sep) {
          placed = false;
          break;
        }
      }
      if (placed) means.row(c) = v;
    }
    if (!placed) {
      throw Error(ErrorKind::kGeneration,
                  "could not place class mean " + std::to_string(c) +
                      " at separation " + std::to_string(p.sep));
    }
  }

  GaussianTasks out;
  out.dataset.class_means = std::move(means);
  out.dataset.noise = p.noise;
  fill_split(out.dataset.class_means, p.noise, p.per_class,
             rng::derive_seed(p.seed, 1), out.dataset.train_x,
             out.dataset.train_y);
  fill_split(out.dataset.class_means, p.noise, p.test_per_class,
             rng::derive_seed(p.seed, 2), out.dataset.test_x,
             out.dataset.test_y);

  const std::size_t per_task = p.class_count / p.tasks;
  out.schedule.shuffle_seed = rng::derive_seed(p.seed, 3);
  for (std::size_t t = 0; t < p.tasks; ++t) {
    TaskSpec task;
    task.task_id = t;
    for (std::size_t i = 0; i < per_task; ++i) {
      task.new_class_ids.push_back(t * per_task + i);
    }
    task.samples_per_class = p.per_class;
    task.replay_per_old_class = t == 0 ? 0 : p.replay_per_class;
    out.schedule.tasks.push_back(std::move(task));
  }
  return out;
}

Classifier::Classifier(std::size_t dim, std::size_t hidden, std::uint64_t seed)
    : dim_(dim), hidden_(hidden) {
  if (dim == 0) throw Error(ErrorKind::kDomain, "classifier needs dim > 0");
  const auto d = static_cast<Eigen::Index>(dim);
  const auto h = static_cast<Eigen::Index>(hidden);
  if (hidden > 0) {
    rng::Engine eng(seed);
    const double scale = std::sqrt(2.0 / static_cast<double>(dim));
    hidden_w_.resize(d, h);
    for (Eigen::Index i = 0; i < d; ++i) {
      for (Eigen::Index j = 0; j < h; ++j) {
        hidden_w_(i, j) = scale * rng::standard_normal(eng);
      }
    }
    hidden_b_ = Eigen::RowVectorXd::Zero(h);
    head_w_ = Matrix::Zero(h, 0);
  } else {
    head_w_ = Matrix::Zero(d, 0);
  }
  head_b_ = Eigen::RowVectorXd::Zero(0);
}

void Classifier::grow_to(std::size_t class_count) {
  const auto old = head_w_.cols();
  const auto next = static_cast<Eigen::Index>(class_count);
  if (next < old) {
    throw Error(ErrorKind::kDimension, "classifier head cannot shrink");
  }
  head_w_.conservativeResize(Eigen::NoChange, next);
  head_w_.rightCols(next - old).setZero();
  head_b_.conservativeResize(next);
  head_b_.tail(next - old).setZero();
}

Matrix Classifier::features(const Matrix& x) const {
  if (hidden_ == 0) return x;
  Matrix pre = x * hidden_w_;
  pre.rowwise() += hidden_b_;
  return pre.cwiseMax(0.0);
}

Matrix Classifier::logits(const Matrix& x) const {
  if (static_cast<std::size_t>(x.cols()) != dim_) {
    throw Error(ErrorKind::kDimension, "classifier input has wrong width");
  }
  Matrix z = features(x) * head_w_;
  z.rowwise() += head_b_;
  return z;
}

std::vector<std::size_t> Classifier::predict(const Matrix& x) const {
  const Matrix z = logits(x);
  std::vector<std::size_t> out(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    z.row(i).maxCoeff(&best);
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

void Classifier::sgd_step(const Matrix& x, const Matrix& grad_logits,
                          double lr) {
  if (grad_logits.rows() != x.rows() || grad_logits.cols() != head_w_.cols()) {
    throw Error(ErrorKind::kDimension, "gradient shape mismatch");
  }
  if (hidden_ == 0) {
    head_w_.noalias() -= lr * (x.transpose() * grad_logits);
    head_b_ -= lr * grad_logits.colwise().sum();
    return;
  }
  Matrix pre = x * hidden_w_;
  pre.rowwise() += hidden_b_;
  const Matrix act = pre.cwiseMax(0.0);
  Matrix grad_act = grad_logits * head_w_.transpose();
  grad_act = grad_act.cwiseProduct(
      (pre.array() > 0.0).cast<double>().matrix());
  head_w_.noalias() -= lr * (act.transpose() * grad_logits);
  head_b_ -= lr * grad_logits.colwise().sum();
  hidden_w_.noalias() -= lr * (x.transpose() * grad_act);
  hidden_b_ -= lr * grad_act.colwise().sum();
}

const char* to_string(LossKind kind) noexcept {
  return kind == LossKind::kTal ? "TAL" : "CE";
}

std::vector<std::size_t> herding_select(const Matrix& samples,
                                        std::size_t count) {
  const auto n = static_cast<std::size_t>(samples.rows());
  count = std::min(count, n);
  std::vector<std::size_t> chosen;
  if (count == 0) return chosen;
  const Eigen::RowVectorXd mu = samples.colwise().mean();
  Eigen::RowVectorXd running = Eigen::RowVectorXd::Zero(samples.cols());
  std::vector<bool> used(n, false);
  for (std::size_t i = 1; i <= count; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (used[j]) continue;
      const double dist =
          (mu - (running + samples.row(static_cast<Eigen::Index>(j))) /
                    static_cast<double>(i))
              .squaredNorm();
      if (dist < best) {
        best = dist;
        best_idx = j;
      }
    }
    used[best_idx] = true;
    running += samples.row(static_cast<Eigen::Index>(best_idx));
    chosen.push_back(best_idx);
  }
  return chosen;
}

RunResult train_incremental(const TrainConfig& config,
                            const SyntheticDataset& dataset,
                            const TaskSchedule& schedule) {
  schedule.validate();
  const auto seen = seen_counts(schedule);
  if (seen.back() > dataset.class_count()) {
    throw Error(ErrorKind::kSchedule, "schedule uses more classes than the dataset");
  }
  if (seen.front() < 2) {
    throw Error(ErrorKind::kSchedule,
                "the first task must introduce at least two classes");
  }
  if (config.batch_size == 0 || config.epochs == 0) {
    throw Error(ErrorKind::kDomain, "batch size and epochs must be positive");
  }
  if (!(config.learning_rate > 0.0) || !std::isfinite(config.learning_rate)) {
    throw Error(ErrorKind::kDomain, "learning rate must be positive");
  }

  const std::size_t tasks = schedule.tasks.size();
  // Largest replay count any later task asks for, per introducing task.
  std::vector<std::size_t> keep(tasks, 0);
  for (std::size_t t = 0; t < tasks; ++t) {
    for (std::size_t later = t + 1; later < tasks; ++later) {
      keep[t] = std::max(keep[t], schedule.tasks[later].replay_per_old_class);
    }
  }

  Classifier clf(dataset.dim(), config.hidden, rng::derive_seed(config.seed, 7));
  rng::Engine order_rng(rng::derive_seed(config.seed, 11));
  QState q;
  RunResult result;
  std::map<std::size_t, std::vector<std::size_t>> exemplars;
  std::uint64_t step = 0;

  for (std::size_t t = 0; t < tasks; ++t) {
    const auto& task = schedule.tasks[t];
    const std::size_t classes = seen[t];
    clf.grow_to(classes);
    q.grow_to(classes);
    const TalConfig tal = make_config(config, classes);

    std::vector<std::size_t> pool;
    for (std::size_t c : task.new_class_ids) {
      auto rows = dataset.train_indices(c);
      if (rows.size() > task.samples_per_class) rows.resize(task.samples_per_class);
      pool.insert(pool.end(), rows.begin(), rows.end());
    }
    for (const auto& [cls, rows] : exemplars) {
      const std::size_t take = std::min(rows.size(), task.replay_per_old_class);
      pool.insert(pool.end(), rows.begin(),
                  rows.begin() + static_cast<std::ptrdiff_t>(take));
    }

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      rng::shuffle(pool, order_rng);
      for (std::size_t begin = 0; begin < pool.size();
           begin += config.batch_size) {
        const std::size_t end = std::min(pool.size(), begin + config.batch_size);
        const std::span<const std::size_t> rows(pool.data() + begin, end - begin);
        const Matrix xb = gather_rows(dataset.train_x, rows);
        Labels yb(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
          yb[i] = dataset.train_y[rows[i]];
        }
        const Matrix z = clf.logits(xb);
        if (!z.allFinite()) {
          throw TrainingError("non-finite logits", static_cast<long>(step));
        }

        LossOutput out;
        if (config.loss == LossKind::kTal) {
          auto res = training_step(tal, q, z, yb);
          out = std::move(res.output);
          q = std::move(res.q_state);
          result.range_violations += res.range_violations;
        } else {
          out = ce_forward(z, yb);
          const auto counts = label_histogram(yb, classes);
          if (tal.is_relaxed()) {
            auto rel = update_batched_relaxed(q, tal.kernel(), tal.r(), counts,
                                              yb.size());
            q = std::move(rel.state);
            result.range_violations += rel.range_violations;
          } else {
            q = update_batched(q, tal.kernel(), tal.r(), counts, yb.size());
          }
        }
        if (!std::isfinite(out.loss)) {
          throw TrainingError("non-finite loss", static_cast<long>(step));
        }
        clf.sgd_step(xb, out.grad_logits, config.learning_rate);
        ++step;
        result.events.push_back({t, epoch, step, yb.size(), out.loss});
        if (config.q_trace_stride > 0 && step % config.q_trace_stride == 0) {
          result.q_trajectory.record(step, q);
        }
      }
    }

    if (keep[t] > 0) {
      for (std::size_t c : task.new_class_ids) {
        const auto rows = dataset.train_indices(c);
        const auto picked = herding_select(gather_rows(dataset.train_x, rows),
                                           keep[t]);
        auto& dst = exemplars[c];
        for (std::size_t i : picked) dst.push_back(rows[i]);
      }
    }

    // Evaluate on the balanced test split restricted to seen classes.
    std::vector<std::size_t> test_rows;
    for (std::size_t i = 0; i < dataset.test_y.size(); ++i) {
      if (dataset.test_y[i] < classes) test_rows.push_back(i);
    }
    const auto preds = clf.predict(gather_rows(dataset.test_x, test_rows));
    Labels truth(test_rows.size());
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      truth[i] = dataset.test_y[test_rows[i]];
    }
    std::vector<double> row;
    for (std::size_t j = 0; j <= t; ++j) {
      const auto& ids = schedule.tasks[j].new_class_ids;
      std::size_t hits = 0;
      std::size_t total = 0;
      for (std::size_t i = 0; i < truth.size(); ++i) {
        if (std::find(ids.begin(), ids.end(), truth[i]) == ids.end()) continue;
        ++total;
        if (preds[i] == truth[i]) ++hits;
      }
      row.push_back(total == 0 ? 0.0
                               : static_cast<double>(hits) /
                                     static_cast<double>(total));
    }
    result.report.accuracy_matrix.push_back(std::move(row));
    result.report.task_accuracy.push_back(accuracy(preds, truth));
    for (const auto& m : confusion_and_prf(preds, truth, classes)) {
      result.report.per_class.push_back(
          {t, m.class_id, m.precision, m.recall, m.support, q[m.class_id]});
    }
  }
  result.final_q = q;
  return result;
}

RunDiagnostics diagnose(const RunResult& run, const TaskSchedule& schedule) {
  RunDiagnostics d;
  const auto final_records = run.report.final_per_class();
  if (final_records.empty()) return d;

  std::map<std::size_t, std::size_t> task_of;
  for (std::size_t t = 0; t < schedule.tasks.size(); ++t) {
    for (std::size_t c : schedule.tasks[t].new_class_ids) task_of[c] = t;
  }
  const double last = static_cast<double>(schedule.tasks.size() - 1);

  std::vector<ClassMetrics> metrics;
  std::vector<double> ages;
  std::vector<double> qs;
  std::vector<double> recalls;
  for (const auto& rec : final_records) {
    ClassMetrics m;
    m.class_id = rec.class_id;
    m.precision = rec.precision;
    m.recall = rec.recall;
    m.support = rec.support;
    metrics.push_back(m);
    ages.push_back(last - static_cast<double>(task_of.at(rec.class_id)));
    if (rec.recall) {
      qs.push_back(rec.q_value);
      recalls.push_back(*rec.recall);
    }
  }
  if (metrics.size() >= 3) {
    d.age_asymmetry_correlation = asymmetry_index(metrics, ages).age_correlation;
  }
  d.q_recall_correlation = spearman(qs, recalls);

  double p_sum = 0.0;
  double r_sum = 0.0;
  std::size_t p_n = 0;
  std::size_t r_n = 0;
  for (const auto& rec : final_records) {
    if (task_of.at(rec.class_id) != 0) continue;
    if (rec.precision) {
      p_sum += *rec.precision;
      ++p_n;
    }
    if (rec.recall) {
      r_sum += *rec.recall;
      ++r_n;
    }
  }
  if (p_n > 0) d.earliest_precision = p_sum / static_cast<double>(p_n);
  if (r_n > 0) d.earliest_recall = r_sum / static_cast<double>(r_n);
  d.earliest_final_accuracy = run.report.accuracy_matrix.back().front();
  return d;
}

}  // namespace tal
