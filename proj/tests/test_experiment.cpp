#include <gtest/gtest.h>

#include <filesystem>

#include "tal/error.hpp"
#include "tal/experiment.hpp"
#include "tal/io.hpp"

namespace tal {
namespace {

ErrorKind parse_kind(std::string_view text) {
  try {
    parse_experiment_spec(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kIo;
}

constexpr const char* kSmall = R"(
[dataset]
classes = 6
tasks = 3
dim = 8
per_class = 30
test_per_class = 20
sep = 3.5

[schedule]
replay_per_class = 5
epochs = 3
batch_size = 16

[loss]
kind = CE
lambda = 0.99
r = 2

[run]
seeds = 3, 1
jobs = 2

[ablate]
lambdas = 0.99
exponents = 0.5, 2
)";

TEST(Spec, DefaultsWhenEmpty) {
  const auto spec = parse_experiment_spec("");
  EXPECT_EQ(spec.dataset.class_count, 10u);
  EXPECT_EQ(spec.train.loss, LossKind::kTal);
  EXPECT_EQ(spec.seeds.size(), 5u);
  EXPECT_DOUBLE_EQ(spec.train.lambda, 0.995);
}

TEST(Spec, ParsesAllSections) {
  const auto spec = parse_experiment_spec(kSmall);
  EXPECT_EQ(spec.dataset.class_count, 6u);
  EXPECT_EQ(spec.dataset.tasks, 3u);
  EXPECT_DOUBLE_EQ(spec.dataset.sep, 3.5);
  EXPECT_EQ(spec.dataset.replay_per_class, 5u);
  EXPECT_EQ(spec.train.replay_per_class, 5u);
  EXPECT_EQ(spec.train.loss, LossKind::kCrossEntropy);
  EXPECT_DOUBLE_EQ(spec.train.r, 2.0);
  EXPECT_EQ(spec.seeds, (std::vector<std::uint64_t>{3, 1}));
  EXPECT_EQ(spec.jobs, 2u);
  EXPECT_EQ(spec.ablate_exponents, (std::vector<double>{0.5, 2.0}));
}

TEST(Spec, CanonicalTextRoundTrips) {
  const auto spec = parse_experiment_spec(kSmall);
  const auto text = spec.canonical_text();
  EXPECT_EQ(parse_experiment_spec(text).canonical_text(), text);
  EXPECT_NE(text.find("epsilon = 1e-12"), std::string::npos);
}

TEST(Spec, RejectsUnknownAndInvalid) {
  EXPECT_EQ(parse_kind("[dataset]\ncolour = red\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[extras]\na = 1\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[dataset]\nclasses = ten\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[dataset]\nclasses = 10x\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[dataset]\nclasses = 9\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[loss]\nkind = focal\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[loss]\nlambda = 0.3\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[loss]\nr = 0.5\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[run]\nseeds = 1,1\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[run]\nseeds =\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[schedule]\nreplay_per_class = 500\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[ablate]\nexponents = 0\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("orphan = 1\n"), ErrorKind::kConfig);
  EXPECT_EQ(parse_kind("[dataset\n"), ErrorKind::kConfig);
}

TEST(Spec, MissingFile) {
  EXPECT_THROW(load_experiment_spec("/nonexistent/spec.ini"), Error);
}

TEST(Experiment, ThreadCountDoesNotChangeResults) {
  auto spec = parse_experiment_spec(kSmall);
  spec.jobs = 1;
  const auto serial = run_experiment(spec);
  spec.jobs = 3;
  const auto parallel = run_experiment(spec);
  ASSERT_EQ(serial.size(), 2u);
  EXPECT_EQ(serial[0].seed, 3u);
  EXPECT_EQ(accuracy_matrix_csv(serial), accuracy_matrix_csv(parallel));
  EXPECT_EQ(per_class_csv(serial), per_class_csv(parallel));
  EXPECT_EQ(events_jsonl(serial), events_jsonl(parallel));
  EXPECT_EQ(q_trajectory_csv(serial), q_trajectory_csv(parallel));
}

TEST(Experiment, TableHeaders) {
  const auto spec = parse_experiment_spec(kSmall);
  const auto runs = run_experiment(spec);
  EXPECT_EQ(accuracy_matrix_csv(runs).rfind("seed,after_task,eval_task,accuracy\n", 0),
            0u);
  EXPECT_EQ(summary_csv(runs, LossKind::kCrossEntropy).substr(0, 15), "seed,loss,a_mea");
  const auto stats = summary_stats_csv(runs);
  EXPECT_NE(stats.find("\na_last,"), std::string::npos);
  const auto events = events_jsonl(runs);
  EXPECT_EQ(events.rfind("{\"seed\":3,\"task\":0,\"epoch\":0,\"step\":1,", 0), 0u);
}

TEST(Ablation, GridIsComplete) {
  auto spec = parse_experiment_spec(kSmall);
  const auto cells = run_ablation(spec);
  ASSERT_EQ(cells.size(), 1u + 1 * 2);
  EXPECT_EQ(cells[0].loss, LossKind::kCrossEntropy);
  int ce = 0;
  for (const auto& c : cells) ce += c.loss == LossKind::kCrossEntropy;
  EXPECT_EQ(ce, 1);
  EXPECT_TRUE(cells[1].relaxed);
  EXPECT_FALSE(cells[2].relaxed);
  for (const auto& c : cells) EXPECT_EQ(c.a_last.size(), 2u);
  const auto csv = ablation_csv(cells);
  EXPECT_NE(csv.find("\nCE,,,baseline,2,"), std::string::npos);
}

TEST(Plotdata, ReshapesTrainOutput) {
  const auto dir = std::filesystem::temp_directory_path() / "tal_plotdata_test";
  std::filesystem::create_directories(dir);
  io::write_file_atomic(dir / "accuracy_matrix.csv",
                        "seed,after_task,eval_task,accuracy\n0,0,0,0.9\n0,1,0,0.7\n");
  io::write_file_atomic(dir / "per_class.csv",
                        "seed,task_id,class_id,precision,recall,support,q_value\n"
                        "0,1,3,,0,10,1.5\n");
  EXPECT_EQ(plotdata_long_csv(dir),
            "seed,series,group,x,value\n0,forgetting,0,0,0.9\n0,forgetting,0,1,0.7\n"
            "0,recall,3,1,0\n0,q_value,3,1,1.5\n");
  io::write_file_atomic(dir / "per_class.csv", "a,b\n");
  EXPECT_THROW(plotdata_long_csv(dir), Error);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace tal
