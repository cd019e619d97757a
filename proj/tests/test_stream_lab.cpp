#include <gtest/gtest.h>

#include <algorithm>
#include <sstream>

#include "tal/error.hpp"
#include "tal/rng.hpp"
#include "tal/stream_lab.hpp"

namespace tal {
namespace {

TaskSchedule one_class_tasks(std::size_t tasks, std::size_t samples,
                             std::size_t replay) {
  TaskSchedule s;
  for (std::size_t t = 0; t < tasks; ++t) {
    s.tasks.push_back({t, {t}, samples, t == 0 ? 0 : replay});
  }
  return s;
}

TEST(Schedule, Validation) {
  EXPECT_THROW(TaskSchedule{}.validate(), Error);
  TaskSchedule dup;
  dup.tasks = {{0, {0, 1}, 5, 0}, {1, {1}, 5, 0}};
  EXPECT_THROW(dup.validate(), Error);
  TaskSchedule gap;
  gap.tasks = {{0, {0, 2}, 5, 0}};
  EXPECT_THROW(gap.validate(), Error);
  TaskSchedule empty_task;
  empty_task.tasks = {{0, {}, 5, 0}};
  EXPECT_THROW(empty_task.validate(), Error);
  TaskSchedule ok;
  ok.tasks = {{0, {1, 0}, 5, 0}, {1, {2}, 5, 1}};
  EXPECT_NO_THROW(ok.validate());
  EXPECT_EQ(ok.class_count(), 3u);
  EXPECT_EQ(ok.classes_before(1), (std::vector<std::size_t>{0, 1}));
}

TEST(Stream, TwoSequentialClassesWithoutReplay) {
  const auto trace = generate_stream(one_class_tasks(2, 10, 0), 1);
  ASSERT_EQ(trace.length(), 20u);
  const auto s0 = trace.cumulative_positives(0);
  const auto s1 = trace.cumulative_positives(1);
  for (std::size_t n = 0; n < 20; ++n) {
    EXPECT_EQ(s0[n], std::min<std::size_t>(n + 1, 10));
    EXPECT_EQ(s1[n], n < 10 ? 0 : n - 9);
  }
}

TEST(Stream, EarlierClassDominatesLaterClass) {
  TaskSchedule s;
  s.tasks = {{0, {0, 1}, 50, 0}, {1, {2, 3}, 50, 0}, {2, {4, 5}, 50, 0}};
  const auto trace = generate_stream(s, 3);
  const auto early = trace.cumulative_positives(1);
  const auto late = trace.cumulative_positives(4);
  for (std::size_t n = 0; n < trace.length(); ++n) EXPECT_GE(early[n], late[n]);
}

TEST(Stream, ReplayKeepsOldClassesRising) {
  const auto trace = generate_stream(one_class_tasks(3, 10, 2), 5);
  EXPECT_EQ(trace.length(), 10u + 12u + 14u);
  EXPECT_EQ(trace.total_positives(0), 14u);
  EXPECT_EQ(trace.total_positives(1), 12u);
  EXPECT_EQ(trace.total_positives(2), 10u);
  const auto s0 = trace.cumulative_positives(0);
  EXPECT_EQ(s0[9], 10u);
  EXPECT_GT(s0.back(), s0[9]);
}

TEST(Stream, SameSeedSameTrace) {
  const auto s = one_class_tasks(4, 20, 3);
  const auto a = generate_stream(s, 42);
  const auto b = generate_stream(s, 42);
  const auto c = generate_stream(s, 43);
  EXPECT_TRUE(std::equal(a.labels().begin(), a.labels().end(), b.labels().begin()));
  EXPECT_FALSE(std::equal(a.labels().begin(), a.labels().end(), c.labels().begin()));
}

TEST(Stream, PolaritiesAndCsv) {
  const SupervisionTrace t({1, 0, 1}, 2);
  EXPECT_EQ(t.polarity(1, 0), 1);
  EXPECT_EQ(t.polarity(0, 0), -1);
  EXPECT_EQ(t.polarities_at(1), (std::vector<int>{1, -1}));
  const auto seq = t.sequence(1);
  EXPECT_EQ(std::vector<int>(seq.values().begin(), seq.values().end()),
            (std::vector<int>{1, -1, 1}));
  std::ostringstream labels;
  t.write_labels_csv(labels);
  EXPECT_EQ(labels.str(), "step,label\n0,1\n1,0\n2,1\n");
  std::ostringstream curves;
  t.write_s_curves_csv(curves);
  EXPECT_EQ(curves.str(),
            "step,class,cumulative_positives\n0,0,0\n0,1,1\n1,0,1\n1,1,1\n"
            "2,0,1\n2,1,2\n");
  EXPECT_THROW(SupervisionTrace({2}, 2), Error);
}

TEST(Theorem1, FrontVersusBackLoadedIsStrict) {
  const MemoryKernel k(0.9);
  const PolaritySequence front(0, {1, 1, 1, -1, -1, -1});
  const PolaritySequence back(1, {-1, -1, -1, 1, 1, 1});
  const auto v = compare_sequences(k.weights(6), front, back);
  EXPECT_TRUE(v.dominance_held);
  EXPECT_TRUE(v.strict_dominance);
  EXPECT_TRUE(v.strict_conclusion);
  EXPECT_LT(v.q_a, v.q_b);
  EXPECT_LT(v.phi_a, v.phi_b);
}

TEST(Theorem1, IdenticalSequencesTie) {
  const MemoryKernel k(0.99);
  const PolaritySequence a(0, {1, -1, 1, 1, -1});
  const auto v = compare_sequences(k.weights(5), a, PolaritySequence(1, {1, -1, 1, 1, -1}));
  EXPECT_EQ(v.q_a, v.q_b);
  EXPECT_TRUE(v.conclusion_held);
  EXPECT_FALSE(v.strict_dominance);
}

TEST(Theorem1, UnequalTotalsRejected) {
  const MemoryKernel k(0.9);
  try {
    compare_sequences(k.weights(3), PolaritySequence(0, {1, 1, -1}),
                      PolaritySequence(1, {1, -1, -1}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kPrecondition);
  }
}

TEST(Theorem1, RandomPairsHoldOnBothRoutes) {
  for (double lambda : {0.9, 0.99}) {
    const MemoryKernel k(lambda);
    const std::size_t cap = lambda == 0.9 ? 120 : 1200;
    rng::Engine eng(17);
    for (std::uint64_t i = 0; i < 100; ++i) {
      const std::size_t n = 2 + rng::uniform_below(eng, cap - 1);
      const std::size_t p = 1 + rng::uniform_below(eng, n - 1);
      const auto [a, b] = random_dominance_pair(i, n, p);
      const auto v = compare_sequences(k.weights(n), a, b);
      ASSERT_TRUE(v.dominance_held);
      EXPECT_TRUE(v.conclusion_held);
      EXPECT_EQ(v.q_a <= v.q_b, v.phi_a <= v.phi_b);
      if (v.strict_dominance) EXPECT_TRUE(v.strict_conclusion);
      EXPECT_LT(v.identity_residual, 1e-10);
    }
  }
}

TEST(Theorem1, HoldsForNonExponentialDecreasingKernel) {
  std::vector<double> f;
  for (int n = 0; n < 50; ++n) f.push_back(1.0 / (1.0 + n));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto [a, b] = random_dominance_pair(seed, 50, 17);
    EXPECT_TRUE(compare_sequences(f, a, b).conclusion_held);
  }
}

TEST(Theorem1, FromTrace) {
  const auto trace = generate_stream(one_class_tasks(2, 10, 0), 0);
  const auto v = verify_theorem1(MemoryKernel(0.9), trace, 0, 1);
  EXPECT_TRUE(v.strict_conclusion);
}

TEST(SummationByParts, MatchesDirectQ) {
  const MemoryKernel k(0.95);
  const PolaritySequence a(0, {1, -1, -1, 1, 1, -1, 1});
  const auto w = k.weights(7);
  const auto s = cumulative_positives(a);
  double sum_f = 0.0;
  for (double v : w) sum_f += v;
  EXPECT_NEAR(2.0 * summation_by_parts_phi(w, s) - sum_f, q_from_convolution(k, a),
              1e-14);
}

}  // namespace
}  // namespace tal
