#include "tal/experiment.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "tal/error.hpp"
#include "tal/io.hpp"

namespace tal {

namespace {

namespace pt = boost::property_tree;

[[noreturn]] void config_error(const std::string& msg) {
  throw Error(ErrorKind::kConfig, msg);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string s = trim(raw);
  T value{};
  const auto* first = s.data();
  const auto* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (s.empty() || ec != std::errc{} || ptr != last) {
    config_error("key '" + key + "': cannot parse '" + s + "'");
  }
  return value;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& raw) {
  std::vector<T> out;
  std::stringstream ss(raw);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  if (out.empty()) config_error("key '" + key + "': empty list");
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += io::format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

LossKind parse_loss_kind(const std::string& raw) {
  const std::string s = trim(raw);
  if (s == "CE" || s == "ce") return LossKind::kCrossEntropy;
  if (s == "TAL" || s == "tal") return LossKind::kTal;
  config_error("loss.kind must be CE or TAL, got '" + s + "'");
}

// Runs fn(i) for i in [0, n) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::string csv_line(std::initializer_list<std::string> cells) {
  std::string out;
  bool first = true;
  for (const auto& c : cells) {
    if (!first) out += ',';
    out += c;
    first = false;
  }
  out += '\n';
  return out;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::stringstream in(io::read_file(path));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace

void ExperimentSpec::validate() const {
  const auto& d = dataset;
  if (d.class_count < 2) config_error("dataset.classes must be >= 2");
  if (d.tasks == 0) config_error("dataset.tasks must be >= 1");
  if (d.class_count % d.tasks != 0) {
    config_error("dataset.classes must be divisible by dataset.tasks");
  }
  if (d.class_count / d.tasks < 2) {
    config_error("each task must introduce at least two classes");
  }
  if (d.dim == 0) config_error("dataset.dim must be >= 1");
  if (d.per_class == 0) config_error("dataset.per_class must be >= 1");
  if (d.test_per_class == 0) config_error("dataset.test_per_class must be >= 1");
  if (!(d.sep > 0.0)) config_error("dataset.sep must be > 0");
  if (!(d.noise >= 0.0)) config_error("dataset.noise must be >= 0");
  if (d.replay_per_class > d.per_class) {
    config_error("schedule.replay_per_class exceeds dataset.per_class");
  }
  const auto& t = train;
  if (t.epochs == 0) config_error("schedule.epochs must be >= 1");
  if (t.batch_size == 0) config_error("schedule.batch_size must be >= 1");
  if (!(t.learning_rate > 0.0)) config_error("schedule.learning_rate must be > 0");
  if (!(t.lambda >= 0.5 && t.lambda < 1.0)) {
    config_error("loss.lambda must lie in [0.5, 1)");
  }
  if (!(t.r >= 1.0)) config_error("loss.r must be >= 1");
  if (!(t.epsilon > 0.0 && t.epsilon <= 1e-6)) {
    config_error("loss.epsilon must lie in (0, 1e-6]");
  }
  if (seeds.empty()) config_error("run.seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    config_error("run.seeds must be distinct");
  }
  if (jobs == 0) config_error("run.jobs must be >= 1");
  for (double l : ablate_lambdas) {
    if (!(l >= 0.5 && l < 1.0)) config_error("ablate.lambdas must lie in [0.5, 1)");
  }
  for (double r : ablate_exponents) {
    if (!(r > 0.0)) config_error("ablate.exponents must be > 0");
  }
}

std::string ExperimentSpec::canonical_text() const {
  std::ostringstream o;
  o << "[dataset]\n"
    << "classes = " << dataset.class_count << '\n'
    << "dim = " << dataset.dim << '\n'
    << "tasks = " << dataset.tasks << '\n'
    << "per_class = " << dataset.per_class << '\n'
    << "test_per_class = " << dataset.test_per_class << '\n'
    << "sep = " << io::format_double(dataset.sep) << '\n'
    << "noise = " << io::format_double(dataset.noise) << '\n'
    << "\n[schedule]\n"
    << "replay_per_class = " << dataset.replay_per_class << '\n'
    << "epochs = " << train.epochs << '\n'
    << "batch_size = " << train.batch_size << '\n'
    << "learning_rate = " << io::format_double(train.learning_rate) << '\n'
    << "hidden = " << train.hidden << '\n'
    << "\n[loss]\n"
    << "kind = " << to_string(train.loss) << '\n'
    << "lambda = " << io::format_double(train.lambda) << '\n'
    << "r = " << io::format_double(train.r) << '\n'
    << "epsilon = " << io::format_double(train.epsilon) << '\n'
    << "\n[run]\n"
    << "seeds = " << join(seeds) << '\n'
    << "q_trace_stride = " << train.q_trace_stride << '\n'
    << "\n[ablate]\n"
    << "lambdas = " << join(ablate_lambdas) << '\n'
    << "exponents = " << join(ablate_exponents) << '\n';
  return o.str();
}

ExperimentSpec parse_experiment_spec(std::string_view text) {
  pt::ptree tree;
  try {
    std::istringstream in{std::string(text)};
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    config_error(std::string("malformed spec: ") + e.message() + " (line " +
                 std::to_string(e.line()) + ")");
  }

  ExperimentSpec spec;
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      config_error("key '" + section + "' must live inside a section");
    }
    for (const auto& [key, node] : body) {
      const std::string full = section + "." + key;
      const std::string v = node.data();
      if (section == "dataset") {
        if (key == "classes") spec.dataset.class_count = parse_number<std::size_t>(full, v);
        else if (key == "dim") spec.dataset.dim = parse_number<std::size_t>(full, v);
        else if (key == "tasks") spec.dataset.tasks = parse_number<std::size_t>(full, v);
        else if (key == "per_class") spec.dataset.per_class = parse_number<std::size_t>(full, v);
        else if (key == "test_per_class") spec.dataset.test_per_class = parse_number<std::size_t>(full, v);
        else if (key == "sep") spec.dataset.sep = parse_number<double>(full, v);
        else if (key == "noise") spec.dataset.noise = parse_number<double>(full, v);
        else config_error("unknown key '" + full + "'");
      } else if (section == "schedule") {
        if (key == "replay_per_class") spec.dataset.replay_per_class = parse_number<std::size_t>(full, v);
        else if (key == "epochs") spec.train.epochs = parse_number<std::size_t>(full, v);
        else if (key == "batch_size") spec.train.batch_size = parse_number<std::size_t>(full, v);
        else if (key == "learning_rate") spec.train.learning_rate = parse_number<double>(full, v);
        else if (key == "hidden") spec.train.hidden = parse_number<std::size_t>(full, v);
        else config_error("unknown key '" + full + "'");
      } else if (section == "loss") {
        if (key == "kind") spec.train.loss = parse_loss_kind(v);
        else if (key == "lambda") spec.train.lambda = parse_number<double>(full, v);
        else if (key == "r") spec.train.r = parse_number<double>(full, v);
        else if (key == "epsilon") spec.train.epsilon = parse_number<double>(full, v);
        else config_error("unknown key '" + full + "'");
      } else if (section == "run") {
        if (key == "seeds") spec.seeds = parse_list<std::uint64_t>(full, v);
        else if (key == "output_dir") spec.output_dir = trim(v);
        else if (key == "jobs") spec.jobs = parse_number<std::size_t>(full, v);
        else if (key == "q_trace_stride") spec.train.q_trace_stride = parse_number<std::size_t>(full, v);
        else config_error("unknown key '" + full + "'");
      } else if (section == "ablate") {
        if (key == "lambdas") spec.ablate_lambdas = parse_list<double>(full, v);
        else if (key == "exponents") spec.ablate_exponents = parse_list<double>(full, v);
        else config_error("unknown key '" + full + "'");
      } else {
        config_error("unknown section [" + section + "]");
      }
    }
  }
  spec.train.replay_per_class = spec.dataset.replay_per_class;
  spec.validate();
  return spec;
}

ExperimentSpec load_experiment_spec(const std::filesystem::path& path) {
  if (!std::filesystem::is_regular_file(path)) {
    config_error("spec file not found: " + path.string());
  }
  return parse_experiment_spec(io::read_file(path));
}

SeedRun run_seed(const ExperimentSpec& spec, const TrainConfig& train,
                 std::uint64_t seed) {
  GaussianTaskParams params = spec.dataset;
  params.seed = seed;
  const auto tasks = make_gaussian_tasks(params);
  TrainConfig cfg = train;
  cfg.seed = seed;
  SeedRun out;
  out.seed = seed;
  out.run = train_incremental(cfg, tasks.dataset, tasks.schedule);
  out.diagnostics = diagnose(out.run, tasks.schedule);
  return out;
}

std::vector<SeedRun> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<SeedRun> runs(spec.seeds.size());
  parallel_for(spec.seeds.size(), spec.jobs, [&](std::size_t i) {
    runs[i] = run_seed(spec, spec.train, spec.seeds[i]);
  });
  return runs;
}

std::vector<AblationCell> run_ablation(const ExperimentSpec& spec) {
  spec.validate();
  std::vector<AblationCell> cells;
  AblationCell ce;
  ce.loss = LossKind::kCrossEntropy;
  ce.lambda = spec.train.lambda;
  ce.r = spec.train.r;
  cells.push_back(ce);
  for (double l : spec.ablate_lambdas) {
    for (double r : spec.ablate_exponents) {
      AblationCell cell;
      cell.loss = LossKind::kTal;
      cell.lambda = l;
      cell.r = r;
      cell.relaxed = r < 1.0;
      cells.push_back(cell);
    }
  }

  const std::size_t seeds = spec.seeds.size();
  std::vector<SeedRun> runs(cells.size() * seeds);
  parallel_for(runs.size(), spec.jobs, [&](std::size_t i) {
    const auto& cell = cells[i / seeds];
    TrainConfig cfg = spec.train;
    cfg.loss = cell.loss;
    cfg.lambda = cell.lambda;
    cfg.r = cell.r;
    cfg.q_trace_stride = 0;
    runs[i] = run_seed(spec, cfg, spec.seeds[i % seeds]);
  });
  for (std::size_t i = 0; i < runs.size(); ++i) {
    auto& cell = cells[i / seeds];
    cell.a_mean.push_back(runs[i].run.report.a_mean());
    cell.a_last.push_back(runs[i].run.report.a_last());
    cell.range_violations += runs[i].run.range_violations;
  }
  return cells;
}

std::string accuracy_matrix_csv(const std::vector<SeedRun>& runs) {
  std::string out = "seed,after_task,eval_task,accuracy\n";
  for (const auto& r : runs) {
    const auto& m = r.run.report.accuracy_matrix;
    for (std::size_t t = 0; t < m.size(); ++t) {
      for (std::size_t j = 0; j < m[t].size(); ++j) {
        out += csv_line({std::to_string(r.seed), std::to_string(t),
                         std::to_string(j), io::format_double(m[t][j])});
      }
    }
  }
  return out;
}

std::string per_class_csv(const std::vector<SeedRun>& runs) {
  std::string out = "seed,task_id,class_id,precision,recall,support,q_value\n";
  for (const auto& r : runs) {
    for (const auto& rec : r.run.report.per_class) {
      out += csv_line({std::to_string(r.seed), std::to_string(rec.task_id),
                       std::to_string(rec.class_id),
                       io::format_optional(rec.precision),
                       io::format_optional(rec.recall),
                       std::to_string(rec.support),
                       io::format_double(rec.q_value)});
    }
  }
  return out;
}

std::string q_trajectory_csv(const std::vector<SeedRun>& runs) {
  std::string out = "seed,step,class_id,q_value\n";
  for (const auto& r : runs) {
    for (const auto& row : r.run.q_trajectory.rows()) {
      out += csv_line({std::to_string(r.seed), std::to_string(row.step),
                       std::to_string(row.class_id),
                       io::format_double(row.q_value)});
    }
  }
  return out;
}

std::string summary_csv(const std::vector<SeedRun>& runs, LossKind loss) {
  std::string out =
      "seed,loss,a_mean,a_last,age_asymmetry_corr,q_recall_corr,"
      "earliest_precision,earliest_recall,earliest_final_accuracy,"
      "range_violations\n";
  for (const auto& r : runs) {
    const auto& d = r.diagnostics;
    out += csv_line({std::to_string(r.seed), to_string(loss),
                     io::format_double(r.run.report.a_mean()),
                     io::format_double(r.run.report.a_last()),
                     io::format_optional(d.age_asymmetry_correlation),
                     io::format_optional(d.q_recall_correlation),
                     io::format_optional(d.earliest_precision),
                     io::format_optional(d.earliest_recall),
                     io::format_double(d.earliest_final_accuracy),
                     std::to_string(r.run.range_violations)});
  }
  return out;
}

std::string summary_stats_csv(const std::vector<SeedRun>& runs) {
  std::string out = "metric,mean,std,n\n";
  auto emit = [&](const char* name, auto getter) {
    std::vector<double> values;
    for (const auto& r : runs) {
      if (auto v = getter(r)) values.push_back(*v);
    }
    const auto ms = mean_std(values);
    out += csv_line({name, io::format_double(ms.mean),
                     io::format_double(ms.stddev),
                     std::to_string(values.size())});
  };
  emit("a_mean", [](const SeedRun& r) { return std::optional(r.run.report.a_mean()); });
  emit("a_last", [](const SeedRun& r) { return std::optional(r.run.report.a_last()); });
  emit("age_asymmetry_corr", [](const SeedRun& r) { return r.diagnostics.age_asymmetry_correlation; });
  emit("q_recall_corr", [](const SeedRun& r) { return r.diagnostics.q_recall_correlation; });
  emit("earliest_final_accuracy", [](const SeedRun& r) {
    return std::optional(r.diagnostics.earliest_final_accuracy);
  });
  return out;
}

std::string events_jsonl(const std::vector<SeedRun>& runs) {
  std::string out;
  for (const auto& r : runs) {
    for (const auto& e : r.run.events) {
      nlohmann::ordered_json j;
      j["seed"] = r.seed;
      j["task"] = e.task;
      j["epoch"] = e.epoch;
      j["step"] = e.step;
      j["batch_size"] = e.batch_size;
      j["loss"] = e.loss;
      out += j.dump();
      out += '\n';
    }
  }
  return out;
}

std::string ablation_csv(const std::vector<AblationCell>& cells) {
  std::string out =
      "loss,lambda,r,domain,seeds,a_mean_mean,a_mean_std,a_last_mean,"
      "a_last_std,range_violations\n";
  for (const auto& c : cells) {
    const auto am = mean_std(c.a_mean);
    const auto al = mean_std(c.a_last);
    const bool ce = c.loss == LossKind::kCrossEntropy;
    out += csv_line({to_string(c.loss), ce ? "" : io::format_double(c.lambda),
                     ce ? "" : io::format_double(c.r),
                     ce ? "baseline" : (c.relaxed ? "relaxed" : "proven"),
                     std::to_string(c.a_mean.size()),
                     io::format_double(am.mean), io::format_double(am.stddev),
                     io::format_double(al.mean), io::format_double(al.stddev),
                     std::to_string(c.range_violations)});
  }
  return out;
}

std::string plotdata_long_csv(const std::filesystem::path& train_dir) {
  const auto acc = read_csv(train_dir / "accuracy_matrix.csv");
  const auto per_class = read_csv(train_dir / "per_class.csv");
  if (acc.empty() || acc.front().size() != 4 || per_class.empty() ||
      per_class.front().size() != 7) {
    throw Error(ErrorKind::kConfig, "plotdata: unexpected report schema in " +
                                        train_dir.string());
  }
  std::string out = "seed,series,group,x,value\n";
  for (std::size_t i = 1; i < acc.size(); ++i) {
    const auto& r = acc[i];
    if (r.size() != 4) throw Error(ErrorKind::kConfig, "plotdata: bad accuracy row");
    out += csv_line({r[0], "forgetting", r[2], r[1], r[3]});
  }
  static constexpr std::array<const char*, 3> kSeries{"precision", "recall",
                                                      "q_value"};
  static constexpr std::array<std::size_t, 3> kColumn{3, 4, 6};
  for (std::size_t s = 0; s < kSeries.size(); ++s) {
    for (std::size_t i = 1; i < per_class.size(); ++i) {
      const auto& r = per_class[i];
      if (r.size() != 7) throw Error(ErrorKind::kConfig, "plotdata: bad per-class row");
      if (r[kColumn[s]].empty()) continue;
      out += csv_line({r[0], kSeries[s], r[2], r[1], r[kColumn[s]]});
    }
  }
  return out;
}

}  // namespace tal
