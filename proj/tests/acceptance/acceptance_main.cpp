// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when everything passes).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "tal/bench.hpp"
#include "tal/calibration.hpp"
#include "tal/cli.hpp"
#include "tal/error.hpp"
#include "tal/experiment.hpp"
#include "tal/io.hpp"
#include "tal/kernel_q.hpp"
#include "tal/rng.hpp"
#include "tal/stream_lab.hpp"
#include "tal/tal_loss.hpp"

namespace {

using namespace tal;
namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Calibration closed forms over C = 2..1000.
Outcome ac1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_alpha = 0.0;
  double worst_quad = 0.0;
  for (std::size_t c = 2; c <= 1000; ++c) {
    const auto lin = solve_calibration(c, 1.0);
    worst_alpha = std::max(worst_alpha, std::fabs(lin.alpha - (2.0 * c - 1.0)));
    const double closed = *calibration_closed_form(c, 2.0);
    const double numeric = solve_calibration_numeric(c, 2.0).x_star;
    worst_quad = std::max(worst_quad, std::fabs(closed - numeric));
  }
  const double elapsed = seconds_since(t0);
  return {worst_alpha <= 1e-10 && worst_quad <= 1e-12 && elapsed < 1.0,
          "max|alpha-(2C-1)|=" + fmt(worst_alpha) + " max|x_closed-x_newton|=" +
              fmt(worst_quad) + " time=" + fmt(elapsed) + "s"};
}

// All-positive and all-negative boundary trajectories.
Outcome ac2() {
  double worst = 0.0;
  bool zero_held = true;
  for (double lambda : {0.5, 0.9, 0.995}) {
    const MemoryKernel k(lambda);
    QState pos(1);
    QState neg(1);
    long double lam_n = 1.0L;
    for (int n = 1; n <= 10000; ++n) {
      pos = update_tal(pos, k, 1.0, std::vector<int>{1});
      neg = update_tal(neg, k, 1.0, std::vector<int>{-1});
      lam_n *= lambda;
      const long double expected =
          static_cast<long double>(lambda) / (1.0L - lambda) * (1.0L - lam_n);
      worst = std::max(worst, static_cast<double>(std::fabs(pos[0] - expected)));
      zero_held = zero_held && neg[0] == 0.0;
    }
  }
  return {worst <= 1e-12 && zero_held,
          "max|Q-Qmax(1-l^N)|=" + fmt(worst) +
              " all-negative=" + (zero_held ? "0 exactly" : "nonzero")};
}

// Plain recursion against the direct convolution.
Outcome ac3() {
  rng::Engine eng(20240503);
  const double lambdas[] = {0.5, 0.9, 0.99, 0.995, 0.999};
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double lambda = lambdas[i % 5];
    const MemoryKernel k(lambda);
    const std::size_t n = 1 + rng::uniform_below(eng, 10000);
    const double p = rng::uniform01(eng);
    std::vector<int> a(n);
    for (auto& v : a) v = rng::uniform01(eng) < p ? 1 : -1;
    QState q(1);
    for (int v : a) q = update_plain(q, k, std::vector<int>{v});
    const double conv = q_from_convolution(k, PolaritySequence(0, a));
    const double denom = std::fabs(conv);
    const double rel = denom == 0.0 ? std::fabs(q[0]) : std::fabs(q[0] - conv) / denom;
    worst = std::max(worst, rel);
  }
  return {worst < 1e-10, "1000 streams, max relative error=" + fmt(worst)};
}

// Ordering of equal-count dominance pairs.
Outcome ac4() {
  std::size_t violations = 0;
  std::size_t strict_pairs = 0;
  std::size_t strict_violations = 0;
  double worst_identity = 0.0;
  double worst_oracle = 0.0;
  rng::Engine eng(99);
  for (std::size_t i = 0; i < 500; ++i) {
    const double lambda = i % 2 == 0 ? 0.9 : 0.99;
    const MemoryKernel k(lambda);
    // Oldest weight stays above 1e-6 so kernel differences are resolvable.
    const std::size_t cap = lambda == 0.9 ? 131 : 1374;
    const std::size_t n = 2 + rng::uniform_below(eng, cap - 1);
    const std::size_t p = 1 + rng::uniform_below(eng, n - 1);
    const auto [a, b] = random_dominance_pair(rng::derive_seed(7, i), n, p);
    const auto v = compare_sequences(k.weights(n), a, b);
    if (!v.dominance_held) ++violations;
    if (!v.conclusion_held) ++violations;
    if (v.strict_dominance) {
      ++strict_pairs;
      if (!v.strict_conclusion) ++strict_violations;
    }
    worst_identity = std::max(worst_identity, v.identity_residual);
    const std::vector<int> va(a.values().begin(), a.values().end());
    const std::vector<int> vb(b.values().begin(), b.values().end());
    worst_oracle = std::max(
        {worst_oracle,
         static_cast<double>(std::fabs(v.q_a - oracle::convolution(lambda, va))),
         static_cast<double>(std::fabs(v.q_b - oracle::convolution(lambda, vb)))});
  }
  return {violations == 0 && strict_violations == 0 && worst_identity <= 1e-10 &&
              worst_oracle <= 1e-10,
          "500 pairs (" + std::to_string(strict_pairs) + " strict), violations=" +
              std::to_string(violations + strict_violations) +
              " max|Q-(2Phi-sum f)|=" + fmt(worst_identity) +
              " max|Q-longdouble|=" + fmt(worst_oracle)};
}

// Range invariance of the attenuated recursion.
Outcome ac5() {
  std::size_t violations = 0;
  std::size_t steps = 0;
  rng::Engine eng(5);
  const double lambdas[] = {0.5, 0.99, 0.9995};
  const double exponents[] = {1.0, 2.0, 5.0};
  const std::size_t per_cell = 1000000 / 9 + 1;
  for (double lambda : lambdas) {
    for (double r : exponents) {
      const MemoryKernel k(lambda);
      QState q(1);
      double p = 0.5;
      for (std::size_t s = 0; s < per_cell; ++s) {
        // Regime switches drive Q towards both ends of its range.
        if (s % 5000 == 0) p = rng::uniform01(eng);
        const int a = rng::uniform01(eng) < p ? 1 : -1;
        try {
          q = update_tal(q, k, r, std::vector<int>{a});
        } catch (const Error&) {
          ++violations;
          q = QState(1);
        }
        const double w = negative_weight(q[0], k, r);
        if (!(q[0] >= 0.0 && q[0] < k.q_max())) ++violations;
        if (!(w >= 0.0 && w < 1.0)) ++violations;
        ++steps;
      }
    }
  }
  return {violations == 0 && steps >= 1000000,
          std::to_string(steps) + " steps, violations=" + std::to_string(violations)};
}

// Analytical gradient against central differences.
Outcome ac6() {
  rng::Engine eng(6);
  double worst = 0.0;
  const double h = 1e-5;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng::uniform_below(eng, 8);
    const std::size_t c = 2 + rng::uniform_below(eng, 11);
    const double lambda = 0.5 + 0.4995 * rng::uniform01(eng);
    const double r = 1.0 + 4.0 * rng::uniform01(eng);
    const TalConfig cfg(MemoryKernel(lambda), r, c);
    std::vector<double> qs(c);
    std::vector<double> scale(c);
    for (std::size_t k = 0; k < c; ++k) {
      qs[k] = rng::uniform01(eng) < 0.1 ? 0.0 : rng::uniform01(eng) * cfg.kernel().q_max();
      const double w = std::pow(qs[k] / cfg.kernel().q_max(), r);
      scale[k] = cfg.alpha() * std::max(w, cfg.epsilon());
    }
    const QState q(qs, 0);
    Labels y(n);
    for (auto& v : y) v = rng::uniform_below(eng, c);
    Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = 2.0 * rng::standard_normal(eng);
    }
    auto loss = [&](const Matrix& m) {
      long double total = 0.0L;
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        std::vector<double> row(m.row(i).data(), m.row(i).data() + m.cols());
        total += oracle::tal_sample_loss(row, y[static_cast<std::size_t>(i)], scale);
      }
      return static_cast<double>(total / m.rows());
    };
    const auto out = tal_forward(cfg, z, y, q);
    double diff = 0.0;
    double norm = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        Matrix zp = z;
        Matrix zm = z;
        zp(i, j) += h;
        zm(i, j) -= h;
        const double fd = (loss(zp) - loss(zm)) / (2 * h);
        diff += (out.grad_logits(i, j) - fd) * (out.grad_logits(i, j) - fd);
        norm += fd * fd;
      }
    }
    worst = std::max(worst, std::sqrt(diff / norm));
  }
  return {worst < 1e-6, "200 instances, max relative error=" + fmt(worst)};
}

// Degeneracy to cross-entropy and convergence to the steady state.
Outcome ac7() {
  rng::Engine eng(7);
  double worst_loss = 0.0;
  double worst_grad = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t c = 2 + rng::uniform_below(eng, 50);
    const double r = 1.0 + 5.0 * rng::uniform01(eng);
    const TalConfig cfg(MemoryKernel(0.9 + 0.09 * rng::uniform01(eng)), r, c);
    const QState q(std::vector<double>(c, cfg.x_star() * cfg.kernel().q_max()), 0);
    const std::size_t n = 1 + rng::uniform_below(eng, 16);
    Matrix z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = 3.0 * rng::standard_normal(eng);
    }
    Labels y(n);
    for (auto& v : y) v = rng::uniform_below(eng, c);
    const auto a = tal_forward(cfg, z, y, q);
    const auto b = ce_forward(z, y);
    for (std::size_t i = 0; i < n; ++i) {
      worst_loss = std::max(worst_loss, std::fabs(a.per_sample[i] - b.per_sample[i]));
    }
    worst_grad = std::max(worst_grad, (a.grad_logits - b.grad_logits).cwiseAbs().maxCoeff());
  }

  const std::size_t c = 5;
  const MemoryKernel k(0.9);
  const double x_star = solve_calibration(c, 1.0).x_star;
  QState q(c);
  for (int step = 0; step < 100000; ++step) {
    std::vector<std::size_t> counts(c, 0);
    for (int i = 0; i < 128; ++i) ++counts[rng::uniform_below(eng, c)];
    q = update_batched(q, k, 1.0, counts, 128);
  }
  double gap = 0.0;
  for (std::size_t i = 0; i < c; ++i) {
    gap = std::max(gap, std::fabs(q[i] / k.q_max() - x_star));
  }
  return {worst_loss < 1e-12 && worst_grad < 1e-12 && gap < 0.01,
          "max|lTAL-lCE|=" + fmt(worst_loss) + " max|dgrad|=" + fmt(worst_grad) +
              " max|Q/Qmax-x*|=" + fmt(gap)};
}

ExperimentSpec desk_spec(LossKind loss) {
  ExperimentSpec spec;
  spec.dataset.class_count = 10;
  spec.dataset.dim = 16;
  spec.dataset.tasks = 5;
  spec.dataset.per_class = 100;
  spec.dataset.replay_per_class = 20;
  spec.train.replay_per_class = 20;
  spec.train.loss = loss;
  spec.train.lambda = 0.995;
  spec.train.r = 1.0;
  spec.train.q_trace_stride = 0;
  spec.seeds = {0, 1, 2, 3, 4};
  return spec;
}

// Desk-scale class-incremental directional checks.
Outcome ac8() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto ce = run_experiment(desk_spec(LossKind::kCrossEntropy));
  const auto tal = run_experiment(desk_spec(LossKind::kTal));
  const double elapsed = seconds_since(t0);

  int asym_seeds = 0;
  int closer_seeds = 0;
  double ce_last = 0.0;
  double tal_last = 0.0;
  double ce_abs = 0.0;
  double tal_abs = 0.0;
  int paired = 0;
  for (std::size_t i = 0; i < ce.size(); ++i) {
    const auto& d = ce[i].diagnostics;
    if (d.age_asymmetry_correlation && *d.age_asymmetry_correlation > 0.0 &&
        d.earliest_recall && d.earliest_precision &&
        *d.earliest_recall < *d.earliest_precision) {
      ++asym_seeds;
    }
    ce_last += ce[i].run.report.a_last() / static_cast<double>(ce.size());
    tal_last += tal[i].run.report.a_last() / static_cast<double>(tal.size());
    const auto& a = d.age_asymmetry_correlation;
    const auto& b = tal[i].diagnostics.age_asymmetry_correlation;
    if (a && b) {
      ++paired;
      ce_abs += std::fabs(*a);
      tal_abs += std::fabs(*b);
      if (std::fabs(*b) < std::fabs(*a)) ++closer_seeds;
    }
  }
  ce_abs /= std::max(paired, 1);
  tal_abs /= std::max(paired, 1);
  const bool a_ok = asym_seeds >= 4;
  const bool b_ok = tal_last > ce_last;
  const bool c_ok = paired > 0 && tal_abs < ce_abs;
  return {a_ok && b_ok && c_ok && elapsed < 120.0,
          "(a) CE asymmetry on " + std::to_string(asym_seeds) + "/5 seeds; (b) A_Last TAL=" +
              fmt(tal_last) + " CE=" + fmt(ce_last) + "; (c) mean|corr| TAL=" +
              fmt(tal_abs) + " CE=" + fmt(ce_abs) + " (closer on " +
              std::to_string(closer_seeds) + "/" + std::to_string(paired) +
              " seeds); time=" + fmt(elapsed) + "s"};
}

// Loss micro-benchmark.
Outcome ac9() {
  const auto report = run_loss_bench(BenchOptions{});
  return {report.cells.size() == 16 && report.overhead_bounded,
          "16 cells, CE slope=" + fmt(report.ce_slope * 1e3) +
              "ns/logit, TAL overhead slope=" + fmt(report.overhead_slope * 1e3) +
              "ns/logit (limit 0.25x)"};
}

// Byte-identical CLI outputs across repeated runs.
Outcome ac10() {
  const fs::path root = fs::temp_directory_path() / "tal_acceptance_cli";
  fs::remove_all(root);
  fs::create_directories(root);
  io::write_file_atomic(root / "spec.ini", desk_spec(LossKind::kTal).canonical_text());
  const std::string spec = (root / "spec.ini").string();

  const std::vector<std::vector<std::string>> commands = {
      {"train", "--spec", spec},
      {"ablate", "--spec", spec},
      {"simulate-stream"},
      {"verify-theorem1"},
      {"calibrate", "--classes", "100", "--exponent", "5"},
  };
  std::size_t files = 0;
  std::size_t mismatches = 0;
  bool ran = true;
  for (std::size_t i = 0; i < commands.size(); ++i) {
    std::vector<fs::path> dirs;
    for (int rep = 0; rep < 2; ++rep) {
      const fs::path dir = root / (std::to_string(i) + "_" + std::to_string(rep));
      auto args = commands[i];
      args.insert(args.begin(), "talctl");
      args.push_back("--output-dir");
      args.push_back(dir.string());
      std::ostringstream out;
      std::ostringstream err;
      if (cli::run(args, out, err) != 0) ran = false;
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      ++files;
      const auto other = dirs[1] / entry.path().filename();
      if (!fs::exists(other) || io::read_file(entry.path()) != io::read_file(other)) {
        ++mismatches;
      }
    }
  }
  fs::remove_all(root);
  return {ran && files > 0 && mismatches == 0,
          std::to_string(files) + " files from " + std::to_string(commands.size()) +
              " subcommands, mismatches=" + std::to_string(mismatches)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"AC1 calibration closed form", ac1},
      {"AC2 boundary trajectories", ac2},
      {"AC3 recursion-convolution equivalence", ac3},
      {"AC4 equal-count ordering", ac4},
      {"AC5 range invariance", ac5},
      {"AC6 gradient correctness", ac6},
      {"AC7 cross-entropy degeneracy", ac7},
      {"AC8 desk-scale incremental learning", ac8},
      {"AC9 loss micro-benchmark", ac9},
      {"AC10 CLI determinism", ac10},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed;
}
