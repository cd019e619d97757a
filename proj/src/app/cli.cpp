#include "tal/cli.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tal/bench.hpp"
#include "tal/calibration.hpp"
#include "tal/experiment.hpp"
#include "tal/io.hpp"
#include "tal/rng.hpp"
#include "tal/stream_lab.hpp"

namespace tal::cli {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

constexpr const char* kExitTable =
    "Exit codes:\n"
    "  0  success\n"
    "  1  internal error\n"
    "  2  usage error (unknown subcommand, bad flag)\n"
    "  3  configuration or schedule error (malformed or invalid spec)\n"
    "  4  file system error\n"
    "  5  parameter outside its domain\n"
    "  6  invalid input data (shape, index, empty, non-finite)\n"
    "  7  violated precondition\n"
    "  8  calibration solver failed to converge\n"
    "  9  invariant violation\n"
    " 10  training diverged or dataset generation failed\n"
    "Failures print {\"error\":{\"kind\",\"message\",\"exit_code\"}} on stderr.";

// Ordered set of result files for one run. Nothing touches the disk until
// commit(), so a failing command leaves no partial outputs.
class OutputSet {
 public:
  void add(std::string name, std::string content) {
    files_[std::move(name)] = std::move(content);
  }

  void commit(const fs::path& dir, const std::string& command,
              const std::string& spec_text,
              const std::vector<std::uint64_t>& seeds) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
      throw Error(ErrorKind::kIo,
                  "cannot create " + dir.string() + ": " + ec.message());
    }
    json manifest;
    manifest["schema_version"] = kSchemaVersion;
    manifest["library_version"] = kLibraryVersion;
    manifest["command"] = command;
    manifest["spec_sha256"] = io::sha256_hex(spec_text);
    manifest["seeds"] = seeds;
    manifest["spec"] = spec_text;
    json digests = json::object();
    for (const auto& [name, content] : files_) {
      io::write_file_atomic(dir / name, content);
      digests[name] = io::sha256_hex(content);
    }
    manifest["files"] = digests;
    io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  }

 private:
  std::map<std::string, std::string> files_;
};

fs::path resolve_output_dir(const std::string& flag,
                            const std::string& from_spec) {
  if (!flag.empty()) return flag;
  if (!from_spec.empty()) return from_spec;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "tal_output";
}

std::string kv(const std::string& key, const std::string& value) {
  return key + "=" + value + "\n";
}

void print_error(std::ostream& err, const std::string& kind,
                 const std::string& message, int code) {
  json rec;
  rec["error"]["kind"] = kind;
  rec["error"]["message"] = message;
  rec["error"]["exit_code"] = code;
  err << rec.dump() << '\n';
}

// ---- calibrate ----------------------------------------------------------

struct CalibrateArgs {
  std::size_t classes = 10;
  double exponent = 1.0;
  std::string output_dir;
};

int do_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const auto closed = calibration_closed_form(a.classes, a.exponent);
  const auto res = solve_calibration(a.classes, a.exponent);
  std::string text;
  text += kv("class_count", std::to_string(res.class_count));
  text += kv("exponent", io::format_double(res.r));
  text += kv("x_star", io::format_double(res.x_star));
  text += kv("alpha", io::format_double(res.alpha));
  text += kv("residual", io::format_double(res.residual));
  text += kv("iterations", std::to_string(res.iterations));
  text += kv("method", closed ? "closed_form" : "newton");
  out << text;
  if (!a.output_dir.empty()) {
    OutputSet files;
    files.add("calibration.txt", text);
    files.commit(a.output_dir, "calibrate",
                 kv("classes", std::to_string(a.classes)) +
                     kv("exponent", io::format_double(a.exponent)),
                 {});
  }
  return kExitOk;
}

// ---- simulate-stream ----------------------------------------------------

struct StreamArgs {
  std::size_t tasks = 5;
  std::size_t classes_per_task = 2;
  std::size_t samples_per_class = 100;
  std::size_t replay = 20;
  std::uint64_t seed = 0;
  double lambda = 0.995;
  double exponent = 1.0;
  std::string output_dir;
};

int do_simulate_stream(const StreamArgs& a, std::ostream& out) {
  const MemoryKernel kernel(a.lambda);
  validate_attenuation_domain(kernel, a.exponent);
  TaskSchedule schedule;
  schedule.shuffle_seed = a.seed;
  for (std::size_t t = 0; t < a.tasks; ++t) {
    TaskSpec task;
    task.task_id = t;
    for (std::size_t i = 0; i < a.classes_per_task; ++i) {
      task.new_class_ids.push_back(t * a.classes_per_task + i);
    }
    task.samples_per_class = a.samples_per_class;
    task.replay_per_old_class = t == 0 ? 0 : a.replay;
    schedule.tasks.push_back(std::move(task));
  }
  schedule.validate();
  const auto trace = generate_stream(schedule);

  QState q(trace.class_count());
  QTrajectory traj;
  for (std::size_t n = 0; n < trace.length(); ++n) {
    q = update_tal(q, kernel, a.exponent, trace.polarities_at(n));
    traj.record(q);
  }

  std::ostringstream labels;
  trace.write_labels_csv(labels);
  std::ostringstream curves;
  trace.write_s_curves_csv(curves);
  std::ostringstream qcsv;
  traj.write_csv(qcsv);

  const std::string spec =
      kv("tasks", std::to_string(a.tasks)) +
      kv("classes_per_task", std::to_string(a.classes_per_task)) +
      kv("samples_per_class", std::to_string(a.samples_per_class)) +
      kv("replay", std::to_string(a.replay)) +
      kv("lambda", io::format_double(a.lambda)) +
      kv("exponent", io::format_double(a.exponent));
  const fs::path dir = resolve_output_dir(a.output_dir, "");
  OutputSet files;
  files.add("trace.csv", labels.str());
  files.add("s_curves.csv", curves.str());
  files.add("q_trajectory.csv", qcsv.str());
  files.commit(dir, "simulate-stream", spec, {a.seed});

  out << kv("steps", std::to_string(trace.length()));
  out << kv("classes", std::to_string(trace.class_count()));
  for (std::size_t k = 0; k < trace.class_count(); ++k) {
    out << kv("final_q." + std::to_string(k), io::format_double(q[k]));
  }
  out << kv("output_dir", dir.string());
  return kExitOk;
}

// ---- verify-theorem1 ----------------------------------------------------

struct TheoremArgs {
  std::size_t pairs = 500;
  std::vector<double> lambdas{0.9, 0.99};
  std::size_t max_length = 0;
  std::uint64_t seed = 0;
  std::string output_dir;
};

// Longest stream whose oldest kernel weight stays above 1e-6, so weight
// differences remain resolvable in double precision.
std::size_t default_max_length(double lambda) {
  const double n = std::floor(std::log(1e-6) / std::log(lambda));
  return static_cast<std::size_t>(std::clamp(n, 2.0, 10000.0));
}

int do_verify_theorem1(const TheoremArgs& a, std::ostream& out,
                       std::ostream& err) {
  if (a.pairs == 0 || a.lambdas.empty()) {
    throw Error(ErrorKind::kEmptyInput, "need at least one pair and one lambda");
  }
  std::vector<MemoryKernel> kernels;
  for (double l : a.lambdas) kernels.emplace_back(l);

  std::string csv =
      "pair,lambda,length,positives,q_a,q_b,strict_dominance,conclusion_held,"
      "strict_conclusion,identity_residual\n";
  std::size_t violations = 0;
  std::size_t strict_pairs = 0;
  std::size_t strict_violations = 0;
  double worst_residual = 0.0;
  rng::Engine eng(rng::derive_seed(a.seed, 0));
  for (std::size_t i = 0; i < a.pairs; ++i) {
    const auto& kernel = kernels[i % kernels.size()];
    const std::size_t cap =
        a.max_length ? a.max_length : default_max_length(kernel.lambda());
    if (cap < 2) throw Error(ErrorKind::kDomain, "max length must be >= 2");
    const std::size_t length = 2 + rng::uniform_below(eng, cap - 1);
    const std::size_t positives = 1 + rng::uniform_below(eng, length - 1);
    const auto [first, second] = random_dominance_pair(
        rng::derive_seed(a.seed, i + 1), length, positives);
    const auto w = kernel.weights(length);
    const auto v = compare_sequences(w, first, second);
    if (!v.dominance_held) {
      throw Error(ErrorKind::kInvariant, "generated pair is not dominated");
    }
    if (!v.conclusion_held) ++violations;
    if (v.strict_dominance) {
      ++strict_pairs;
      if (!v.strict_conclusion) ++strict_violations;
    }
    worst_residual = std::max(worst_residual, v.identity_residual);
    csv += std::to_string(i) + ',' + io::format_double(kernel.lambda()) + ',' +
           std::to_string(length) + ',' + std::to_string(positives) + ',' +
           io::format_double(v.q_a) + ',' + io::format_double(v.q_b) + ',' +
           (v.strict_dominance ? "1" : "0") + ',' +
           (v.conclusion_held ? "1" : "0") + ',' +
           (v.strict_conclusion ? "1" : "0") + ',' +
           io::format_double(v.identity_residual) + '\n';
  }

  const bool ok = violations == 0 && strict_violations == 0;
  out << kv("pairs", std::to_string(a.pairs))
      << kv("strict_pairs", std::to_string(strict_pairs))
      << kv("violations", std::to_string(violations))
      << kv("strict_violations", std::to_string(strict_violations))
      << kv("max_identity_residual", io::format_double(worst_residual))
      << kv("verdict", ok ? "pass" : "fail");

  if (!a.output_dir.empty()) {
    std::string lambdas;
    for (double l : a.lambdas) {
      lambdas += (lambdas.empty() ? "" : ",") + io::format_double(l);
    }
    OutputSet files;
    files.add("theorem1.csv", csv);
    files.commit(a.output_dir, "verify-theorem1",
                 kv("pairs", std::to_string(a.pairs)) + kv("lambdas", lambdas) +
                     kv("max_length", std::to_string(a.max_length)),
                 {a.seed});
  }
  if (!ok) {
    print_error(err, to_string(ErrorKind::kInvariant),
                "ordering violated on " +
                    std::to_string(violations + strict_violations) + " pairs",
                kExitInvariant);
    return kExitInvariant;
  }
  return kExitOk;
}

// ---- train / ablate -----------------------------------------------------

struct SpecArgs {
  std::string spec;
  std::string output_dir;
  std::size_t jobs = 0;
};

ExperimentSpec load_spec(const SpecArgs& a) {
  auto spec = load_experiment_spec(a.spec);
  if (a.jobs > 0) spec.jobs = a.jobs;
  return spec;
}

int do_train(const SpecArgs& a, std::ostream& out) {
  const auto spec = load_spec(a);
  const fs::path dir = resolve_output_dir(a.output_dir, spec.output_dir);
  const auto runs = run_experiment(spec);

  OutputSet files;
  files.add("accuracy_matrix.csv", accuracy_matrix_csv(runs));
  files.add("per_class.csv", per_class_csv(runs));
  files.add("q_trajectory.csv", q_trajectory_csv(runs));
  files.add("summary.csv", summary_csv(runs, spec.train.loss));
  files.add("summary_stats.csv", summary_stats_csv(runs));
  files.add("events.jsonl", events_jsonl(runs));
  files.commit(dir, "train", spec.canonical_text(), spec.seeds);

  std::vector<double> a_mean;
  std::vector<double> a_last;
  for (const auto& r : runs) {
    a_mean.push_back(r.run.report.a_mean());
    a_last.push_back(r.run.report.a_last());
  }
  const auto m = mean_std(a_mean);
  const auto l = mean_std(a_last);
  out << kv("loss", to_string(spec.train.loss))
      << kv("seeds", std::to_string(runs.size()))
      << kv("a_mean", io::format_double(m.mean))
      << kv("a_mean_std", io::format_double(m.stddev))
      << kv("a_last", io::format_double(l.mean))
      << kv("a_last_std", io::format_double(l.stddev))
      << kv("output_dir", dir.string());
  return kExitOk;
}

int do_ablate(const SpecArgs& a, std::ostream& out) {
  const auto spec = load_spec(a);
  const fs::path dir = resolve_output_dir(a.output_dir, spec.output_dir);
  const auto cells = run_ablation(spec);
  const std::string table = ablation_csv(cells);
  OutputSet files;
  files.add("ablation.csv", table);
  files.commit(dir, "ablate", spec.canonical_text(), spec.seeds);
  out << table;
  return kExitOk;
}

// ---- bench-loss ---------------------------------------------------------

struct BenchArgs {
  std::size_t rounds = 7;
  std::string output_dir;
};

int do_bench(const BenchArgs& a, std::ostream& out) {
  BenchOptions opts;
  opts.rounds = a.rounds;
  const auto report = run_loss_bench(opts);
  const std::string table = bench_csv(report);
  out << table
      << kv("ce_slope_us_per_logit", io::format_double(report.ce_slope))
      << kv("overhead_slope_us_per_logit",
            io::format_double(report.overhead_slope))
      << kv("overhead_bounded", report.overhead_bounded ? "true" : "false");
  if (!a.output_dir.empty()) {
    OutputSet files;
    files.add("bench.csv", table);
    files.commit(a.output_dir, "bench-loss",
                 kv("rounds", std::to_string(a.rounds)), {opts.seed});
  }
  return kExitOk;
}

// ---- plotdata -----------------------------------------------------------

struct PlotArgs {
  std::string input;
  std::string output_dir;
};

int do_plotdata(const PlotArgs& a, std::ostream& out) {
  const fs::path input(a.input);
  if (!fs::is_directory(input)) {
    throw Error(ErrorKind::kIo, "input directory not found: " + a.input);
  }
  const fs::path dir = resolve_output_dir(a.output_dir, "");
  std::error_code ec;
  if (fs::exists(dir) && fs::equivalent(dir, input, ec)) {
    throw Error(ErrorKind::kConfig, "output directory must differ from input");
  }
  const std::string table = plotdata_long_csv(input);
  std::string spec;
  for (const char* name : {"accuracy_matrix.csv", "per_class.csv"}) {
    spec += kv(std::string("input.") + name,
               io::sha256_hex(io::read_file(input / name)));
  }
  OutputSet files;
  files.add("plotdata.csv", table);
  files.commit(dir, "plotdata", spec, {});
  out << kv("output_dir", dir.string());
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kSchedule:
      return kExitConfig;
    case ErrorKind::kIo:
      return kExitIo;
    case ErrorKind::kDomain:
      return kExitDomain;
    case ErrorKind::kDimension:
    case ErrorKind::kIndex:
    case ErrorKind::kEmptyInput:
    case ErrorKind::kNumericInput:
      return kExitInput;
    case ErrorKind::kPrecondition:
      return kExitPrecondition;
    case ErrorKind::kSolver:
      return kExitSolver;
    case ErrorKind::kInvariant:
      return kExitInvariant;
    case ErrorKind::kTraining:
    case ErrorKind::kGeneration:
      return kExitRuntime;
  }
  return kExitInternal;
}

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Temporal-adjusted loss toolkit", "talctl"};
  app.footer(kExitTable);
  app.require_subcommand(1);

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Solve the calibration for alpha");
  c->add_option("--classes", cal.classes, "Number of classes C (>= 2)")->required();
  c->add_option("--exponent", cal.exponent, "Attenuation exponent r (>= 1)")->required();
  c->add_option("--output-dir", cal.output_dir, "Also write calibration.txt here");

  StreamArgs st;
  auto* s = app.add_subcommand("simulate-stream",
                               "Generate a supervision stream and its Q trajectory");
  s->add_option("--tasks", st.tasks, "Number of tasks")->capture_default_str();
  s->add_option("--classes-per-task", st.classes_per_task)->capture_default_str();
  s->add_option("--samples-per-class", st.samples_per_class)->capture_default_str();
  s->add_option("--replay", st.replay, "Replay samples per old class")->capture_default_str();
  s->add_option("--seed", st.seed)->capture_default_str();
  s->add_option("--lambda", st.lambda, "Memory kernel decay")->capture_default_str();
  s->add_option("--exponent", st.exponent, "Attenuation exponent r")->capture_default_str();
  s->add_option("--output-dir", st.output_dir);

  TheoremArgs th;
  auto* t = app.add_subcommand("verify-theorem1",
                               "Check Q ordering on random dominance pairs");
  t->add_option("--pairs", th.pairs)->capture_default_str();
  t->add_option("--lambdas", th.lambdas)->delimiter(',')->capture_default_str();
  t->add_option("--max-length", th.max_length,
                "Longest stream (0: derived from lambda)")->capture_default_str();
  t->add_option("--seed", th.seed)->capture_default_str();
  t->add_option("--output-dir", th.output_dir, "Also write theorem1.csv here");

  SpecArgs tr;
  auto* r = app.add_subcommand("train", "Multi-seed class-incremental run");
  r->add_option("--spec", tr.spec, "Experiment spec (INI)")->required();
  r->add_option("--output-dir", tr.output_dir);
  r->add_option("--jobs", tr.jobs, "Worker threads (overrides the spec)");

  SpecArgs ab;
  auto* b = app.add_subcommand("ablate", "CE baseline plus the (lambda, r) grid");
  b->add_option("--spec", ab.spec, "Experiment spec (INI)")->required();
  b->add_option("--output-dir", ab.output_dir);
  b->add_option("--jobs", ab.jobs, "Worker threads (overrides the spec)");

  BenchArgs be;
  auto* m = app.add_subcommand("bench-loss", "Per-batch CE vs TAL timing table");
  m->add_option("--rounds", be.rounds)->capture_default_str();
  m->add_option("--output-dir", be.output_dir, "Also write bench.csv here");

  PlotArgs pl;
  auto* p = app.add_subcommand("plotdata", "Long-format table from a train output");
  p->add_option("--input", pl.input, "Directory written by train")->required();
  p->add_option("--output-dir", pl.output_dir);

  std::vector<std::string> rest(args.size() > 1 ? args.begin() + 1 : args.end(),
                                args.end());
  std::reverse(rest.begin(), rest.end());
  try {
    app.parse(rest);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    print_error(err, "usage", e.what(), kExitUsage);
    return kExitUsage;
  }

  try {
    if (c->parsed()) return do_calibrate(cal, out);
    if (s->parsed()) return do_simulate_stream(st, out);
    if (t->parsed()) return do_verify_theorem1(th, out, err);
    if (r->parsed()) return do_train(tr, out);
    if (b->parsed()) return do_ablate(ab, out);
    if (m->parsed()) return do_bench(be, out);
    if (p->parsed()) return do_plotdata(pl, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.kind());
    print_error(err, to_string(e.kind()), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    print_error(err, "internal", e.what(), kExitInternal);
    return kExitInternal;
  }
  print_error(err, "usage", "no subcommand", kExitUsage);
  return kExitUsage;
}

}  // namespace tal::cli
