#include "tal/bench.hpp"

#include <algorithm>
#include <chrono>
#include <limits>

#include "tal/error.hpp"
#include "tal/io.hpp"
#include "tal/rng.hpp"
#include "tal/tal_loss.hpp"

namespace tal {

namespace {

constexpr double kOverheadRatio = 0.25;

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx == 0.0 ? 0.0 : sxy / sxx;
}

template <typename Fn>
double time_per_call(std::size_t reps, Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  double sink = 0.0;
  for (std::size_t i = 0; i < reps; ++i) sink += fn();
  const auto stop = std::chrono::steady_clock::now();
  if (!(sink == sink)) throw Error(ErrorKind::kNumericInput, "bench produced NaN");
  return std::chrono::duration<double, std::micro>(stop - start).count() /
         static_cast<double>(reps);
}

}  // namespace

BenchReport run_loss_bench(const BenchOptions& options) {
  if (options.batches.empty() || options.classes.empty() || options.rounds == 0) {
    throw Error(ErrorKind::kEmptyInput, "bench grid is empty");
  }
  BenchReport report;
  rng::Engine eng(options.seed);
  for (std::size_t n : options.batches) {
    for (std::size_t c : options.classes) {
      if (n == 0 || c < 2) throw Error(ErrorKind::kDomain, "bench cell needs N >= 1 and C >= 2");
      Matrix logits(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
      for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
          logits(i, j) = rng::standard_normal(eng);
        }
      }
      Labels labels(n);
      for (auto& y : labels) y = rng::uniform_below(eng, c);
      const TalConfig config(MemoryKernel(0.995), 1.0, c);
      std::vector<double> qs(c);
      for (auto& q : qs) q = rng::uniform01(eng) * config.kernel().q_max() * 0.99;
      const QState q(qs, 0);

      const std::size_t reps =
          std::max<std::size_t>(1, options.work_per_round / (n * c));
      BenchCell cell{n, c, std::numeric_limits<double>::infinity(),
                     std::numeric_limits<double>::infinity()};
      for (std::size_t round = 0; round < options.rounds; ++round) {
        cell.ce_us = std::min(cell.ce_us, time_per_call(reps, [&] {
          return ce_forward(logits, labels).loss;
        }));
        cell.tal_us = std::min(cell.tal_us, time_per_call(reps, [&] {
          return tal_forward(config, logits, labels, q).loss;
        }));
      }
      report.cells.push_back(cell);
    }
  }

  std::vector<double> size;
  std::vector<double> ce;
  std::vector<double> overhead;
  for (const auto& cell : report.cells) {
    size.push_back(static_cast<double>(cell.batch * cell.classes));
    ce.push_back(cell.ce_us);
    overhead.push_back(cell.overhead_us());
  }
  report.ce_slope = slope(size, ce);
  report.overhead_slope = slope(size, overhead);
  report.overhead_bounded =
      report.ce_slope > 0.0 && report.overhead_slope <= kOverheadRatio * report.ce_slope;
  return report;
}

std::string bench_csv(const BenchReport& report) {
  std::string out = "batch,classes,ce_us,tal_us,overhead_us\n";
  for (const auto& c : report.cells) {
    out += std::to_string(c.batch) + ',' + std::to_string(c.classes) + ',' +
           io::format_double(c.ce_us) + ',' + io::format_double(c.tal_us) +
           ',' + io::format_double(c.overhead_us()) + '\n';
  }
  return out;
}

}  // namespace tal
