#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bhmm/em.hpp"
#include "bhmm/error.hpp"
#include "bhmm/ftd.hpp"
#include "bhmm/io.hpp"
#include "bhmm/synth.hpp"

namespace bhmm {

namespace {

namespace fs = std::filesystem;

struct SimulateOptions {
  std::size_t length = 1000;
  double coverage_mean = 25.0;
  int states = 4;
  int cells = 1;
  double low_max = 0.3;
  double high_min = 0.7;
  double transition_mix = 0.2;
  std::uint64_t seed = 0;
  std::string out = "simulated";
};

struct LoadFlags {
  std::string input;
  std::string context;
  bool merge_replicates = false;
  std::uint64_t bin_size = 100;
  double train_frac = 0.9;
};

struct FitOptions {
  LoadFlags load;
  std::string algo = "ftd";
  int states = 4;
  int granularity = 30;
  int power_iters = 30;
  int restarts = 10;
  bool spectral_joint = false;
  int threads = 1;
  int em_iters = 1000;
  double em_tolerance = 1e-3;
  bool em_fixed = false;
  int em_rounds = 3;
  std::uint64_t seed = 0;
  std::string out = "model.json";
};

struct EvalOptions {
  LoadFlags load;
  std::string model;
  std::optional<double> diff_threshold;
};

struct BenchmarkOptions {
  std::vector<std::size_t> lengths = {128, 256, 512, 1024, 2048, 4096, 8192};
  int trials = 20;
  double coverage_mean = 25.0;
  int states = 4;
  int granularity = 30;
  int power_iters = 30;
  int restarts = 10;
  int em_iters = 1000;
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out = "benchmark.csv";
};

std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::vector<double> flatten(const Eigen::MatrixXd& m) {
  std::vector<double> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) out.push_back(m(i, j));
  }
  return out;
}

void print_matrix(std::ostream& out, const std::string& name, const Eigen::MatrixXd& m) {
  out << name << ":\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    out << ' ';
    for (Eigen::Index j = 0; j < m.cols(); ++j) out << ' ' << std::fixed << std::setprecision(4) << m(i, j);
    out << '\n';
  }
  out.unsetf(std::ios::floatfield);
}

void add_load_flags(CLI::App* cmd, LoadFlags& f) {
  cmd->add_option("-i,--input", f.input, "Methylation TSV")->required();
  cmd->add_option("--context", f.context, "Keep only rows with this context (e.g. CG)");
  cmd->add_flag("--merge-replicates", f.merge_replicates,
                "Sum columns whose labels share the prefix before '.'");
  cmd->add_option("--bin-size", f.bin_size, "Required bin_start multiple (0 disables)");
  cmd->add_option("--train-frac", f.train_frac, "Leading fraction used for training")
      ->check(CLI::Range(0.0, 1.0));
}

MethylationData load(const LoadFlags& f) {
  LoadOptions opts;
  if (!f.context.empty()) opts.context_filter = f.context;
  opts.merge_replicates = f.merge_replicates;
  opts.bin_size = f.bin_size;
  return load_methylation_tsv(f.input, opts);
}

std::size_t train_length(std::size_t n, double frac) {
  return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n)));
}

std::map<std::string, std::string> load_config(const LoadFlags& f) {
  return {{"input", f.input},
          {"context", f.context},
          {"merge_replicates", f.merge_replicates ? "true" : "false"},
          {"bin_size", std::to_string(f.bin_size)},
          {"train_frac", format_double(f.train_frac)}};
}

int run_simulate(const SimulateOptions& o, std::ostream& out) {
  SynthConfig cfg;
  cfg.num_states = o.states;
  cfg.low_max = o.low_max;
  cfg.high_min = o.high_min;
  cfg.transition_mix = o.transition_mix;
  cfg.coverage_mean = o.coverage_mean;
  cfg.lengths = {o.length};

  HmmParams truth = generate_params(cfg, derive_seed(o.seed, {0}));
  if (o.cells > 1) {
    Eigen::MatrixXd p(o.cells, o.states);
    p.row(0) = truth.meth_probs.row(0);
    for (int k = 1; k < o.cells; ++k) {
      p.row(k) = generate_params(cfg, derive_seed(o.seed, {0, static_cast<std::uint64_t>(k)}))
                     .meth_probs.row(0);
    }
    truth.meth_probs = p;
  }
  const auto seq = sample_sequence(truth, o.length, o.coverage_mean, derive_seed(o.seed, {1}));

  std::vector<std::string> cells;
  for (int k = 0; k < o.cells; ++k) cells.push_back("c" + std::to_string(k + 1));
  std::ostringstream tsv;
  write_methylation_tsv(tsv, cells, records_from_sequence(seq, "chrS", 100, "CG"));
  std::istringstream check(tsv.str());
  const auto digest = read_methylation_tsv(check).digest;

  const fs::path data_path = o.out + ".tsv";
  const fs::path model_path = o.out + ".truth.json";
  {
    std::ofstream f(data_path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + data_path.string());
    f << tsv.str();
  }
  ModelFile model;
  model.cells = cells;
  model.params = truth;
  model.a_hat = empirical_a(seq);
  model.provenance.seed = o.seed;
  model.provenance.input_digest = digest;
  model.provenance.algorithm = "truth";
  model.provenance.config = {{"command", "simulate"},
                             {"length", std::to_string(o.length)},
                             {"coverage_mean", format_double(o.coverage_mean)},
                             {"states", std::to_string(o.states)},
                             {"cells", std::to_string(o.cells)},
                             {"low_max", format_double(o.low_max)},
                             {"high_min", format_double(o.high_min)},
                             {"transition_mix", format_double(o.transition_mix)}};
  save_model(model, model_path);
  out << "wrote " << data_path.string() << " (" << seq.size() << " positions, " << o.cells
      << " cell" << (o.cells == 1 ? "" : "s") << ")\n";
  out << "wrote " << model_path.string() << '\n';
  return kExitOk;
}

int run_fit(const FitOptions& o, std::ostream& out, std::ostream& err) {
  const auto data = load(o.load);
  const std::size_t n_train = train_length(data.sequence.size(), o.load.train_frac);
  const auto train = data.sequence.slice(0, n_train);
  const auto test = data.sequence.slice(n_train, data.sequence.size());

  FtdConfig ftd;
  ftd.num_states = o.states;
  ftd.granularity = o.granularity;
  ftd.power.iters_per_component = o.power_iters;
  ftd.power.restarts = o.restarts;
  ftd.power.seed = o.seed;
  ftd.stabilize = !o.spectral_joint;
  ftd.threads = o.threads;

  ModelFile model;
  model.cells = data.cells;
  model.a_hat = empirical_a(train);
  auto& diag = model.diagnostics;
  const auto start = std::chrono::steady_clock::now();
  auto record_ftd = [&](const RecoveredModel& r) {
    model.granularity = o.granularity;
    const auto& d = r.diagnostics;
    diag["ftd_triples"] = {static_cast<double>(d.triples)};
    diag["ftd_feature_lookups"] = {static_cast<double>(d.feature_lookups)};
    diag["ftd_asymmetry"] = {d.asymmetry};
    diag["ftd_whitening_residual"] = {d.whitening_residual};
    diag["ftd_eigenvalues"] = d.eigenvalues;
    diag["ftd_deflation_residuals"] = d.deflation_residuals;
    diag["ftd_c_clamped_mass"] = {d.c_clamped_mass};
    diag["ftd_h_clamped_mass"] = {d.h_clamped_mass};
    diag["ftd_ls_objective"] = {d.ls_objective};
    diag["ftd_ls_iterations"] = {static_cast<double>(d.ls_iterations)};
    diag["ftd_ls_converged"] = {d.ls_converged ? 1.0 : 0.0};
    diag["ftd_raw_probs"] = flatten(d.raw_probs);
  };
  auto record_em = [&](const EmTrace& t) {
    diag["em_log_likelihoods"] = t.log_likelihoods;
    diag["em_iterations"] = {static_cast<double>(t.iterations)};
    diag["em_converged"] = {t.converged ? 1.0 : 0.0};
    for (const auto& w : t.warnings) err << "warning: " << w << '\n';
  };

  if (o.algo == "ftd") {
    const auto r = fit_ftd(train, ftd);
    record_ftd(r);
    model.params = r.params;
  } else if (o.algo == "em") {
    EmConfig em;
    em.max_iters = o.em_iters;
    em.rel_ll_tolerance = o.em_tolerance;
    em.fixed_iterations = o.em_fixed;
    em.seed = o.seed;
    const auto t = em_fit(train, o.states, em);
    record_em(t);
    model.params = t.params;
  } else {
    const auto r = ftd_then_em(train, ftd, o.em_rounds);
    record_ftd(r.ftd);
    record_em(r.em);
    model.params = r.em.params;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  diag["seconds"] = {seconds};

  auto try_ll = [&](const Sequence& s, const char* what) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    try {
      return log_likelihood(model.params, s);
    } catch (const NumericalError& e) {
      err << "warning: " << what << " log-likelihood: " << e.what() << '\n';
      return std::nullopt;
    }
  };
  const auto train_ll = try_ll(train, "train");
  const auto test_ll = try_ll(test, "test");
  if (train_ll) diag["train_log_likelihood"] = {*train_ll};
  if (test_ll) diag["test_log_likelihood"] = {*test_ll};

  model.provenance.seed = o.seed;
  model.provenance.input_digest = data.digest;
  model.provenance.algorithm = o.algo;
  model.provenance.timestamp = utc_timestamp();
  model.provenance.config = load_config(o.load);
  model.provenance.config.merge(std::map<std::string, std::string>{
      {"command", "fit"},
      {"states", std::to_string(o.states)},
      {"granularity", std::to_string(o.granularity)},
      {"power_iters", std::to_string(o.power_iters)},
      {"restarts", std::to_string(o.restarts)},
      {"spectral_joint", o.spectral_joint ? "true" : "false"},
      {"threads", std::to_string(o.threads)},
      {"em_iters", std::to_string(o.em_iters)},
      {"em_tolerance", format_double(o.em_tolerance)},
      {"em_fixed", o.em_fixed ? "true" : "false"},
      {"em_rounds", std::to_string(o.em_rounds)}});
  save_model(model, o.out);

  out << "algorithm " << o.algo << '\n';
  out << "train_positions " << train.size() << '\n';
  out << "test_positions " << test.size() << '\n';
  out << "seconds " << format_double(seconds) << '\n';
  if (train_ll) out << "train_log_likelihood " << format_double(*train_ll) << '\n';
  if (test_ll) out << "test_log_likelihood " << format_double(*test_ll) << '\n';
  print_matrix(out, "meth_probs", model.params.meth_probs);
  out << "wrote " << o.out << '\n';
  return kExitOk;
}

int run_eval(const EvalOptions& o, std::ostream& out) {
  const auto model = load_model(o.model);
  const auto data = load(o.load);
  if (static_cast<int>(data.sequence.num_cells()) != model.num_cells()) {
    throw DataError("model has " + std::to_string(model.num_cells()) + " cells, data has " +
                    std::to_string(data.sequence.num_cells()));
  }
  const std::size_t n_train = train_length(data.sequence.size(), o.load.train_frac);
  const auto test = data.sequence.slice(n_train, data.sequence.size());
  if (test.empty()) throw DataError("no test positions (train fraction leaves nothing)");
  const double ll = log_likelihood(model.params, test);
  out << "test_positions " << test.size() << '\n';
  out << "test_log_likelihood " << format_double(ll) << '\n';
  out << "per_position " << format_double(ll / static_cast<double>(test.size())) << '\n';
  print_matrix(out, "meth_probs", model.params.meth_probs);
  if (o.diff_threshold) {
    const auto states = differential_states(model.params.meth_probs, *o.diff_threshold);
    out << "differential_states";
    for (int h : states) out << ' ' << h;
    out << '\n';
    for (int h : states) {
      out << "  state " << h << ": " << model.cells.at(0) << '=' << format_double(model.params.meth_probs(0, h))
          << ' ' << model.cells.at(1) << '=' << format_double(model.params.meth_probs(1, h)) << '\n';
    }
  }
  return kExitOk;
}

int run_benchmark_cmd(const BenchmarkOptions& o, std::ostream& out) {
  SynthConfig cfg;
  cfg.num_states = o.states;
  cfg.coverage_mean = o.coverage_mean;
  cfg.lengths = o.lengths;
  cfg.trials = o.trials;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  cfg.ftd.granularity = o.granularity;
  cfg.ftd.power.iters_per_component = o.power_iters;
  cfg.ftd.power.restarts = o.restarts;
  cfg.em.max_iters = o.em_iters;
  const auto report = run_benchmark(cfg);

  const fs::path rows_path = o.out;
  const fs::path summary_path = rows_path.parent_path() / "summary.csv";
  {
    std::ofstream f(rows_path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + rows_path.string());
    write_rows_csv(report, f);
  }
  {
    std::ofstream f(summary_path, std::ios::trunc);
    if (!f) throw DataError("cannot write " + summary_path.string());
    write_summary_csv(report, f);
  }
  write_summary_csv(report, out);
  out << "wrote " << rows_path.string() << " and " << summary_path.string() << '\n';
  return kExitOk;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Binomial HMM learning by feature-map tensor decomposition", "bhmm"};
  app.require_subcommand(1);

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Sample a synthetic dataset and its truth model");
  simulate->add_option("--length", sim.length, "Number of positions")->check(CLI::Range(std::size_t{3}, std::size_t{1} << 40));
  simulate->add_option("--coverage-mean", sim.coverage_mean, "Poisson coverage mean")->check(CLI::PositiveNumber);
  simulate->add_option("--states", sim.states, "Hidden states")->check(CLI::Range(1, 64));
  simulate->add_option("--cells", sim.cells, "Cell types")->check(CLI::Range(1, 16));
  simulate->add_option("--low-max", sim.low_max, "Upper end of the low-state p range")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--high-min", sim.high_min, "Lower end of the high-state p range")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--transition-mix", sim.transition_mix, "Identity weight in T")->check(CLI::Range(0.0, 1.0));
  simulate->add_option("--seed", sim.seed, "Master seed");
  simulate->add_option("--out", sim.out, "Output prefix (<prefix>.tsv, <prefix>.truth.json)");

  FitOptions fit;
  auto* fitcmd = app.add_subcommand("fit", "Learn a model from a methylation TSV");
  add_load_flags(fitcmd, fit.load);
  fitcmd->add_option("--algo", fit.algo, "ftd, em or ftd+em")
      ->check(CLI::IsMember({"ftd", "em", "ftd+em"}));
  fitcmd->add_option("--states", fit.states, "Hidden states m")->check(CLI::Range(1, 64));
  fitcmd->add_option("--granularity", fit.granularity, "Beta map bins D")
      ->check(CLI::Range(1, kMaxGranularity));
  fitcmd->add_option("--power-iters", fit.power_iters, "Power iterations per restart")
      ->check(CLI::PositiveNumber);
  fitcmd->add_option("--restarts", fit.restarts, "Power method restarts")->check(CLI::PositiveNumber);
  fitcmd->add_flag("--spectral-joint", fit.spectral_joint,
                   "Recover pi and T by pseudoinverses instead of constrained least squares");
  fitcmd->add_option("--threads", fit.threads, "Worker threads")->check(CLI::PositiveNumber);
  fitcmd->add_option("--em-iters", fit.em_iters, "EM iteration cap")->check(CLI::PositiveNumber);
  fitcmd->add_option("--em-tolerance", fit.em_tolerance, "EM relative log-likelihood tolerance")
      ->check(CLI::PositiveNumber);
  fitcmd->add_flag("--em-fixed", fit.em_fixed, "Run exactly --em-iters EM iterations");
  fitcmd->add_option("--em-rounds", fit.em_rounds, "EM rounds after FTD for ftd+em")
      ->check(CLI::NonNegativeNumber);
  fitcmd->add_option("--seed", fit.seed, "Seed for the power method and EM initialization");
  fitcmd->add_option("-o,--out", fit.out, "Model file to write");

  EvalOptions ev;
  auto* evalcmd = app.add_subcommand("eval", "Score a model on the held-out suffix of a TSV");
  add_load_flags(evalcmd, ev.load);
  evalcmd->add_option("-m,--model", ev.model, "Model file")->required();
  evalcmd->add_option("--diff-threshold", ev.diff_threshold,
                      "List states whose two cell probabilities differ by at least this")
      ->check(CLI::Range(0.0, 1.0));

  BenchmarkOptions bench;
  auto* benchcmd = app.add_subcommand("benchmark", "Synthetic FTD vs EM sweep");
  benchcmd->add_option("--lengths", bench.lengths, "Sequence lengths")->delimiter(',');
  benchcmd->add_option("--trials", bench.trials, "Trials per length")->check(CLI::PositiveNumber);
  benchcmd->add_option("--coverage-mean", bench.coverage_mean, "Poisson coverage mean")
      ->check(CLI::PositiveNumber);
  benchcmd->add_option("--states", bench.states, "Hidden states")->check(CLI::Range(1, 64));
  benchcmd->add_option("--granularity", bench.granularity, "Beta map bins D")
      ->check(CLI::Range(1, kMaxGranularity));
  benchcmd->add_option("--power-iters", bench.power_iters, "Power iterations per restart")
      ->check(CLI::PositiveNumber);
  benchcmd->add_option("--restarts", bench.restarts, "Power method restarts")->check(CLI::PositiveNumber);
  benchcmd->add_option("--em-iters", bench.em_iters, "EM iteration cap")->check(CLI::PositiveNumber);
  benchcmd->add_option("--seed", bench.seed, "Master seed");
  benchcmd->add_option("--threads", bench.threads, "Worker threads")->check(CLI::PositiveNumber);
  benchcmd->add_option("-o,--out", bench.out, "Row CSV (summary.csv is written alongside)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate) return run_simulate(sim, out);
    if (*fitcmd) return run_fit(fit, out, err);
    if (*evalcmd) return run_eval(ev, out);
    if (*benchcmd) return run_benchmark_cmd(bench, out);
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << '\n';
    return kExitData;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace bhmm
