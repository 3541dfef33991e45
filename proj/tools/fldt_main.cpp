// Command-line frontend: simulation sweeps, session evaluation, and
// privacy-preserving source aggregation. All outputs are deterministic in
// (config, seed) and independent of the worker count.

#include <CLI11.hpp>
#include <json.hpp>

#include <array>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fldt/dataset.hpp"
#include "fldt/errors.hpp"
#include "fldt/numeric.hpp"
#include "fldt/parallel.hpp"
#include "fldt/simlab.hpp"
#include "fldt/transfer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::array<fldt::Classifier, 4> kClassifiers = {
    fldt::Classifier::Target, fldt::Classifier::Source,
    fldt::Classifier::Optimal, fldt::Classifier::Oracle};

int default_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// ---------------------------------------------------------------------------
// JSON config merging: the file provides defaults, flags override.

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw fldt::ConfigError(path.string() + ": cannot open config");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw fldt::ConfigError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) {
    throw fldt::ConfigError(path.string() + ": config must be a JSON object");
  }
  return j;
}

class ConfigMerger {
 public:
  ConfigMerger(const CLI::App& app, const json& config) : app_(app) {
    if (!config.is_null()) config_ = config;
  }

  template <typename T>
  void apply(const std::string& key, const std::string& flag, T& value) {
    known_.insert(key);
    if (config_.is_null() || !config_.contains(key)) return;
    if (app_.count(flag) > 0) return;  // flags win over the file
    try {
      value = config_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw fldt::ConfigError("config key '" + key + "': " + e.what());
    }
  }

  void reject_unknown() const {
    if (config_.is_null()) return;
    for (const auto& [key, unused] : config_.items()) {
      (void)unused;
      if (!known_.contains(key)) {
        throw fldt::ConfigError("config: unknown key '" + key + "'");
      }
    }
  }

 private:
  const CLI::App& app_;
  json config_;
  std::set<std::string> known_;
};

// ---------------------------------------------------------------------------
// Output helpers. Floats are always written with 17 significant digits.

std::string csv_double(double v) { return fldt::format_g17(v); }

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw fldt::Error(path.string() + ": cannot write");
  out << content;
}

class JsonWriter {
 public:
  void begin_object() {
    out_ << "{";
    fresh_ = true;
  }
  void end_object() {
    out_ << "}";
    fresh_ = false;
  }
  void begin_array(const std::string& key) {
    comma();
    out_ << quote(key) << ": [";
    fresh_ = true;
  }
  void end_array() {
    out_ << "]";
    fresh_ = false;
  }
  void item_separator() { out_ << ", "; }
  void field(const std::string& key, const std::string& v) {
    comma();
    out_ << quote(key) << ": " << quote(v);
  }
  void field(const std::string& key, double v) {
    comma();
    out_ << quote(key) << ": " << fldt::format_g17(v);
  }
  void field(const std::string& key, int v) {
    comma();
    out_ << quote(key) << ": " << v;
  }
  void field(const std::string& key, std::uint64_t v) {
    comma();
    out_ << quote(key) << ": " << v;
  }
  void field(const std::string& key, bool v) {
    comma();
    out_ << quote(key) << ": " << (v ? "true" : "false");
  }
  void raw(const std::string& s) { out_ << s; }
  std::string str() const { return out_.str(); }

 private:
  static std::string quote(const std::string& s) { return "\"" + s + "\""; }
  void comma() {
    if (!fresh_) out_ << ", ";
    fresh_ = false;
  }
  std::ostringstream out_;
  bool fresh_ = true;
};

// ---------------------------------------------------------------------------
// simulate

struct SimulateOpts {
  std::string experiment;
  int replicates = 200;
  int b_samples = 100;
  int test_size = 10000;
  int d = 10;
  int n = 20;
  int j = 100;
  double kappa = 10.0;
  double grid_step = 0.1;
  bool plug_in = true;
  std::uint64_t seed = 0;
  int threads = default_threads();
  std::string out;
  bool to_stdout = false;
};

fldt::SimResult run_experiment(const SimulateOpts& o) {
  fldt::SimConfig base;
  base.d = o.d;
  base.n = o.n;
  base.j_count = o.j;
  base.kappa = o.kappa;
  base.replicates = o.replicates;
  base.b_samples = o.b_samples;
  base.grid = fldt::AlphaGrid::regular(o.grid_step);
  base.test_size = o.test_size;
  base.seed = o.seed;
  base.plug_in = o.plug_in;

  if (o.experiment == "validation") {
    const std::vector<int> ns = {10, 20, 50, 100};
    const std::vector<int> js = {10, 100, 1000};
    return fldt::run_validation(base, ns, js, o.threads);
  }
  if (o.experiment == "kappa") {
    const std::vector<double> kappas = {0.1, 1.0, 10.0, 100.0, 1000.0};
    return fldt::run_kappa_sweep(base, kappas, o.threads);
  }
  if (o.experiment == "dimension") {
    const std::vector<int> ds = {2, 5, 10, 20, 50};
    return fldt::run_dimension_sweep(base, ds, o.threads);
  }
  throw fldt::ConfigError("unknown experiment '" + o.experiment +
                          "' (expected validation, kappa, or dimension)");
}

int cmd_simulate(const SimulateOpts& o) {
  std::cerr << "simulate: experiment=" << o.experiment
            << " replicates=" << o.replicates << " seed=" << o.seed
            << " threads=" << o.threads << "\n";
  const fldt::SimResult result = run_experiment(o);

  std::ostringstream csv;
  csv << "experiment,d,n,J,kappa,classifier,analytical_acc,empirical_acc,"
         "closed_form_acc,mean_alpha,replicates,seed\n";
  for (const auto& agg : result.aggregates()) {
    csv << agg.key.experiment << "," << agg.key.d << "," << agg.key.n << ","
        << agg.key.j_count << "," << csv_double(agg.key.kappa) << ","
        << fldt::classifier_name(agg.classifier) << ","
        << csv_double(agg.analytical_acc) << ","
        << csv_double(agg.empirical_acc) << ","
        << csv_double(agg.closed_form_acc) << ","
        << csv_double(agg.mean_alpha) << "," << agg.replicates << "," << o.seed
        << "\n";
  }

  JsonWriter summary;
  summary.begin_object();
  summary.field("command", std::string("simulate"));
  summary.field("experiment", o.experiment);
  summary.field("seed", o.seed);
  summary.field("replicates", o.replicates);
  summary.field("b_samples", o.b_samples);
  summary.field("test_size", o.test_size);
  summary.field("grid_step", o.grid_step);
  summary.field("plug_in", o.plug_in);
  summary.begin_array("cells");
  bool first = true;
  for (const auto& agg : result.aggregates()) {
    if (!first) summary.item_separator();
    first = false;
    JsonWriter row;
    row.begin_object();
    row.field("experiment", agg.key.experiment);
    row.field("d", agg.key.d);
    row.field("n", agg.key.n);
    row.field("j", agg.key.j_count);
    row.field("kappa", agg.key.kappa);
    row.field("classifier",
              std::string(fldt::classifier_name(agg.classifier)));
    row.field("analytical_acc", agg.analytical_acc);
    row.field("empirical_acc", agg.empirical_acc);
    row.field("closed_form_acc", agg.closed_form_acc);
    row.field("mean_alpha", agg.mean_alpha);
    row.field("replicates", agg.replicates);
    row.end_object();
    summary.raw(row.str());
  }
  summary.end_array();
  summary.end_object();

  const fs::path out_dir(o.out);
  write_file(out_dir / ("simulate_" + o.experiment + ".csv"), csv.str());
  write_file(out_dir / ("simulate_" + o.experiment + "_summary.json"),
             summary.str() + "\n");
  if (o.to_stdout) std::cout << csv.str();
  std::cerr << "simulate: wrote "
            << (out_dir / ("simulate_" + o.experiment + ".csv")).string()
            << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// eval

struct EvalOpts {
  std::string sessions;
  std::string source_vectors;
  std::string privacy_aggregate;
  std::vector<double> proportions = {0.05, 0.1, 0.2, 0.5};
  int splits = 100;
  int b_samples = 100;
  double grid_step = 0.1;
  std::uint64_t seed = 0;
  int threads = default_threads();
  std::string out;
  bool to_stdout = false;
};

struct SessionCell {
  const fldt::SessionDataset* session = nullptr;
  double p = 0.0;
  fldt::SessionEvalResult result;
  std::string fatal;  // nonempty when the whole (session, p) cell failed
};

int cmd_eval(const EvalOpts& o) {
  if (o.source_vectors.empty() == o.privacy_aggregate.empty()) {
    throw fldt::ConfigError(
        "eval: exactly one of --source-vectors / --privacy-aggregate is "
        "required");
  }
  const fldt::SourceSummary sources =
      o.source_vectors.empty()
          ? fldt::load_source_aggregate(o.privacy_aggregate)
          : fldt::summarize_sources(
                fldt::load_source_vectors(o.source_vectors));

  std::vector<fldt::SessionDataset> sessions = fldt::load_sessions(o.sessions);
  std::sort(
      sessions.begin(), sessions.end(),
      [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
  if (sessions.empty()) {
    throw fldt::ConfigError("eval: no sessions found at " + o.sessions);
  }
  std::cerr << "eval: " << sessions.size() << " sessions, "
            << o.proportions.size() << " proportions, splits=" << o.splits
            << " seed=" << o.seed << " threads=" << o.threads << "\n";

  const fldt::AlphaGrid grid = fldt::AlphaGrid::regular(o.grid_step);
  std::vector<SessionCell> cells;
  for (const auto& session : sessions) {
    for (double p : o.proportions) {
      cells.push_back({&session, p, {}, {}});
    }
  }
  fldt::parallel_for(static_cast<int>(cells.size()), o.threads, [&](int i) {
    SessionCell& cell = cells[static_cast<std::size_t>(i)];
    const fldt::SplitSpec spec{cell.p, o.splits, o.seed};
    try {
      cell.result = fldt::evaluate_transfer(*cell.session, sources, spec, grid,
                                            o.b_samples);
    } catch (const fldt::Error& e) {
      cell.fatal = e.what();
    }
  });

  // Per-split records.
  std::ostringstream records;
  records << "session_id,p,split_index,classifier,balanced_accuracy,alpha\n";
  long total_records = 0;
  for (const auto& cell : cells) {
    for (const auto& rec : cell.result.records) {
      records << rec.session_id << "," << csv_double(rec.p) << ","
              << rec.split_index << ","
              << fldt::classifier_name(rec.classifier) << ","
              << csv_double(rec.balanced_accuracy) << ",";
      if (rec.has_alpha) records << csv_double(rec.alpha);
      records << "\n";
      ++total_records;
    }
  }

  // Per-(session, p) aggregates with the paired split-level test.
  std::ostringstream agg;
  agg << "session_id,p,n_splits,n_skipped,skipped,acc_source,acc_target,"
         "acc_optimal,acc_oracle,alpha_optimal,alpha_oracle,"
         "p_value_optimal_vs_target\n";
  // Per-session mean accuracy per classifier, keyed by p, for the study test.
  std::map<double, std::vector<std::array<double, 4>>> session_means;
  for (const auto& cell : cells) {
    agg << cell.session->session_id << "," << csv_double(cell.p) << ",";
    if (!cell.fatal.empty()) {
      std::string reason = cell.fatal;
      std::replace(reason.begin(), reason.end(), ',', ';');
      agg << 0 << "," << o.splits << "," << reason << ",,,,,,,\n";
      continue;
    }
    const int n_splits =
        static_cast<int>(cell.result.records.size() / kClassifiers.size());
    agg << n_splits << "," << cell.result.skipped.size() << ",,";
    if (n_splits == 0) {
      agg << ",,,,,,\n";
      continue;
    }
    std::array<fldt::KahanSum, 4> acc_sums;
    fldt::KahanSum alpha_opt, alpha_orc;
    std::vector<double> paired;
    for (int s = 0; s < n_splits; ++s) {
      const auto base = static_cast<std::size_t>(s) * kClassifiers.size();
      std::array<double, 4> split_acc{};
      for (std::size_t k = 0; k < kClassifiers.size(); ++k) {
        split_acc[k] = cell.result.records[base + k].balanced_accuracy;
        acc_sums[k].add(split_acc[k]);
      }
      alpha_opt.add(cell.result.records[base + 2].alpha);
      alpha_orc.add(cell.result.records[base + 3].alpha);
      paired.push_back(split_acc[2] - split_acc[0]);  // optimal - target
    }
    const double inv = 1.0 / n_splits;
    // Column order: source, target, optimal, oracle.
    agg << csv_double(acc_sums[1].value() * inv) << ","
        << csv_double(acc_sums[0].value() * inv) << ","
        << csv_double(acc_sums[2].value() * inv) << ","
        << csv_double(acc_sums[3].value() * inv) << ","
        << csv_double(alpha_opt.value() * inv) << ","
        << csv_double(alpha_orc.value() * inv) << ",";
    try {
      agg << csv_double(fldt::signed_rank_test(paired));
    } catch (const fldt::TooFewPairsError&) {
      // column left empty
    }
    agg << "\n";
    session_means[cell.p].push_back(
        {acc_sums[0].value() * inv, acc_sums[1].value() * inv,
         acc_sums[2].value() * inv, acc_sums[3].value() * inv});
  }

  // Study-level paired tests across sessions, one row per (p, comparison).
  std::ostringstream pvals;
  pvals << "p,comparison,n_sessions,p_value\n";
  for (double p : o.proportions) {
    const auto it = session_means.find(p);
    static const std::vector<std::array<double, 4>> kNone;
    const auto& means = it == session_means.end() ? kNone : it->second;
    const auto emit = [&](const char* name, int lhs, int rhs) {
      std::vector<double> diffs;
      for (const auto& m : means) {
        diffs.push_back(m[static_cast<std::size_t>(lhs)] -
                        m[static_cast<std::size_t>(rhs)]);
      }
      pvals << csv_double(p) << "," << name << "," << means.size() << ",";
      try {
        pvals << csv_double(fldt::signed_rank_test(diffs));
      } catch (const fldt::TooFewPairsError&) {
      }
      pvals << "\n";
    };
    emit("optimal_vs_target", 2, 0);
    emit("optimal_vs_source", 2, 1);
  }

  const fs::path out_dir(o.out);
  write_file(out_dir / "eval_records.csv", records.str());
  write_file(out_dir / "eval_aggregate.csv", agg.str());
  write_file(out_dir / "eval_pvalues.csv", pvals.str());
  if (o.to_stdout) std::cout << agg.str();
  std::cerr << "eval: wrote " << total_records << " records to "
            << (out_dir / "eval_records.csv").string() << "\n";
  return total_records > 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// aggregate-sources

struct AggregateOpts {
  std::string source_vectors;
  std::string out;
  std::string out_file = "source_aggregate.json";
};

int cmd_aggregate_sources(const AggregateOpts& o) {
  const auto vectors = fldt::load_source_vectors(o.source_vectors);
  const fldt::SourceSummary summary = fldt::summarize_sources(vectors);
  fs::create_directories(o.out);
  fldt::save_source_aggregate(summary, fs::path(o.out) / o.out_file);
  std::cerr << "aggregate-sources: J=" << summary.j_count
            << " resultant_length=" << summary.resultant_length << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Multi-source transfer learning for Fisher's Linear Discriminant: "
      "simulation sweeps, session evaluation, and source aggregation"};
  app.require_subcommand(1);

  std::string config_path;

  SimulateOpts sim;
  CLI::App* simulate = app.add_subcommand(
      "simulate", "Run a simulation sweep and write CSV/JSON results");
  simulate->add_option("--config", config_path, "JSON config file");
  simulate->add_option("--experiment", sim.experiment,
                       "validation | kappa | dimension");
  simulate->add_option("--replicates", sim.replicates, "Replicates per cell");
  simulate->add_option("--b-samples", sim.b_samples,
                       "Monte-Carlo samples per grid point");
  simulate->add_option("--test-size", sim.test_size, "Held-out test samples");
  simulate->add_option("--d", sim.d, "Dimension (fixed axes only)");
  simulate->add_option("--n", sim.n, "Target training samples");
  simulate->add_option("--j", sim.j, "Source task count");
  simulate->add_option("--kappa", sim.kappa, "vMF concentration");
  simulate->add_option("--grid-step", sim.grid_step, "Alpha grid step");
  simulate->add_option("--plug-in", sim.plug_in,
                       "Use estimated (nu, Sigma) in the risk machinery");
  simulate->add_option("--seed", sim.seed, "RNG seed");
  simulate->add_option("--threads", sim.threads, "Worker threads");
  simulate->add_option("--out", sim.out, "Output directory");
  simulate->add_flag("--stdout", sim.to_stdout,
                     "Also stream the result CSV to standard output");

  EvalOpts ev;
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "Evaluate transfer on session datasets");
  eval_cmd->add_option("--config", config_path, "JSON config file");
  eval_cmd->add_option("--sessions", ev.sessions,
                       "Session CSV directory or manifest JSON");
  eval_cmd->add_option("--source-vectors", ev.source_vectors,
                       "Source projection vector CSV");
  eval_cmd->add_option("--privacy-aggregate", ev.privacy_aggregate,
                       "Pre-aggregated source summary JSON");
  eval_cmd->add_option("--proportions", ev.proportions,
                       "Training proportions p")
      ->delimiter(',');
  eval_cmd->add_option("--splits", ev.splits, "Train/test splits per session");
  eval_cmd->add_option("--b-samples", ev.b_samples,
                       "Monte-Carlo samples per grid point");
  eval_cmd->add_option("--grid-step", ev.grid_step, "Alpha grid step");
  eval_cmd->add_option("--seed", ev.seed, "RNG seed");
  eval_cmd->add_option("--threads", ev.threads, "Worker threads");
  eval_cmd->add_option("--out", ev.out, "Output directory");
  eval_cmd->add_flag("--stdout", ev.to_stdout,
                     "Also stream the aggregate CSV to standard output");

  AggregateOpts agg;
  CLI::App* aggregate = app.add_subcommand(
      "aggregate-sources",
      "Reduce source projection vectors to the shareable aggregate");
  aggregate->add_option("--config", config_path, "JSON config file");
  aggregate->add_option("--source-vectors", agg.source_vectors,
                        "Source projection vector CSV");
  aggregate->add_option("--out", agg.out, "Output directory");
  aggregate->add_option("--out-file", agg.out_file, "Aggregate file name");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    const json config =
        config_path.empty() ? json() : load_config_file(config_path);

    if (simulate->parsed()) {
      ConfigMerger merge(*simulate, config);
      merge.apply("experiment", "--experiment", sim.experiment);
      merge.apply("replicates", "--replicates", sim.replicates);
      merge.apply("b_samples", "--b-samples", sim.b_samples);
      merge.apply("test_size", "--test-size", sim.test_size);
      merge.apply("d", "--d", sim.d);
      merge.apply("n", "--n", sim.n);
      merge.apply("j", "--j", sim.j);
      merge.apply("kappa", "--kappa", sim.kappa);
      merge.apply("grid_step", "--grid-step", sim.grid_step);
      merge.apply("plug_in", "--plug-in", sim.plug_in);
      merge.apply("seed", "--seed", sim.seed);
      merge.apply("threads", "--threads", sim.threads);
      merge.apply("out", "--out", sim.out);
      merge.reject_unknown();
      if (sim.experiment.empty()) {
        throw fldt::ConfigError("simulate: --experiment is required");
      }
      if (sim.out.empty()) {
        throw fldt::ConfigError("simulate: --out is required");
      }
      return cmd_simulate(sim);
    }
    if (eval_cmd->parsed()) {
      ConfigMerger merge(*eval_cmd, config);
      merge.apply("sessions", "--sessions", ev.sessions);
      merge.apply("source_vectors", "--source-vectors", ev.source_vectors);
      merge.apply("privacy_aggregate", "--privacy-aggregate",
                  ev.privacy_aggregate);
      merge.apply("proportions", "--proportions", ev.proportions);
      merge.apply("splits", "--splits", ev.splits);
      merge.apply("b_samples", "--b-samples", ev.b_samples);
      merge.apply("grid_step", "--grid-step", ev.grid_step);
      merge.apply("seed", "--seed", ev.seed);
      merge.apply("threads", "--threads", ev.threads);
      merge.apply("out", "--out", ev.out);
      merge.reject_unknown();
      if (ev.sessions.empty()) {
        throw fldt::ConfigError("eval: --sessions is required");
      }
      if (ev.out.empty()) throw fldt::ConfigError("eval: --out is required");
      return cmd_eval(ev);
    }
    ConfigMerger merge(*aggregate, config);
    merge.apply("source_vectors", "--source-vectors", agg.source_vectors);
    merge.apply("out", "--out", agg.out);
    merge.apply("out_file", "--out-file", agg.out_file);
    merge.reject_unknown();
    if (agg.source_vectors.empty()) {
      throw fldt::ConfigError(
          "aggregate-sources: --source-vectors is required");
    }
    if (agg.out.empty()) {
      throw fldt::ConfigError("aggregate-sources: --out is required");
    }
    return cmd_aggregate_sources(agg);
  } catch (const fldt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fldt::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const fldt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
