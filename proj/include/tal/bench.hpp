#pragma once

// Per-batch wall-clock cost of the TAL forward/backward pass against plain
// cross-entropy on identical inputs.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace tal {

struct BenchCell {
  std::size_t batch = 0;
  std::size_t classes = 0;
  double ce_us = 0.0;   // microseconds per call, best round
  double tal_us = 0.0;
  double overhead_us() const { return tal_us - ce_us; }
};

struct BenchOptions {
  std::vector<std::size_t> batches{32, 64, 128, 256};
  std::vector<std::size_t> classes{5, 20, 100, 500};
  std::size_t rounds = 7;
  // Each round repeats a call until roughly this many logits were processed.
  std::size_t work_per_round = 400000;
  std::uint64_t seed = 0;
};

struct BenchReport {
  std::vector<BenchCell> cells;
  // Least-squares slopes of time against N*C, in microseconds per logit.
  double ce_slope = 0.0;
  double overhead_slope = 0.0;
  // Overhead slope is at most a quarter of the CE slope: TAL adds a bounded
  // per-element term rather than cost that scales like the loss itself.
  bool overhead_bounded = false;
};

BenchReport run_loss_bench(const BenchOptions& options);

// CSV (batch,classes,ce_us,tal_us,overhead_us).
std::string bench_csv(const BenchReport& report);

}  // namespace tal
