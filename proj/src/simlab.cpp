#include "fldt/simlab.hpp"

#include <cmath>

#include "fldt/errors.hpp"
#include "fldt/numeric.hpp"
#include "fldt/parallel.hpp"

namespace fldt {

double balanced_accuracy(std::span<const int> predictions,
                         std::span<const int> truth) {
  if (predictions.size() != truth.size()) {
    throw DimensionMismatchError("balanced_accuracy: length mismatch");
  }
  long tp = 0, fn = 0, tn = 0, fp = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == 1) {
      (predictions[i] == 1 ? tp : fn)++;
    } else {
      (predictions[i] == 0 ? tn : fp)++;
    }
  }
  if (tp + fn == 0 || tn + fp == 0) {
    throw MissingClassError("balanced_accuracy: a class is absent in truth");
  }
  return 0.5 * (static_cast<double>(tp) / static_cast<double>(tp + fn) +
                static_cast<double>(tn) / static_cast<double>(tn + fp));
}

void SimConfig::validate() const {
  if (d < 2) throw InvariantViolationError("SimConfig: d must be >= 2");
  if (n < 3) throw InvariantViolationError("SimConfig: n must be >= 3");
  if (j_count < 1) throw InvariantViolationError("SimConfig: j_count >= 1");
  if (!(kappa >= 0.0)) throw InvariantViolationError("SimConfig: kappa >= 0");
  if (replicates < 1) {
    throw InvariantViolationError("SimConfig: replicates >= 1");
  }
  if (b_samples < 1) throw InvariantViolationError("SimConfig: b_samples >= 1");
  if (test_size < 2) throw InvariantViolationError("SimConfig: test_size >= 2");
  if (!grid.has_endpoints()) {
    throw InvariantViolationError(
        "SimConfig: grid must contain both endpoints 0 and 1");
  }
}

namespace {

// Resamples until both classes are present (needed by the pooled covariance
// and by balanced accuracy; at pi = 0.5 a miss is rare but not impossible).
std::vector<LabeledSample> sample_task_both_classes(const TaskDistribution& t,
                                                    int n, RngStream& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    auto samples = sample_task(t, n, rng);
    int n1 = 0;
    for (const auto& s : samples) n1 += s.y;
    if (n1 >= 1 && n1 <= n - 1) return samples;
  }
  throw MissingClassError("sample_task_both_classes: draw kept missing a class");
}

double accuracy_closed_form(const Eigen::VectorXd& w,
                            const Eigen::VectorXd& nu_true,
                            const Eigen::MatrixXd& sigma_true) {
  if (w.norm() < 1e-12) return 0.5;
  return 1.0 - closed_form_risk(w, nu_true, sigma_true);
}

double accuracy_empirical(const Eigen::VectorXd& w,
                          std::span<const LabeledSample> test) {
  std::vector<int> preds(test.size()), truth(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    preds[i] = predict_raw(w, test[i].x);
    truth[i] = test[i].y;
  }
  return balanced_accuracy(preds, truth);
}

}  // namespace

ReplicateRecord run_replicate(const SimConfig& cfg, int replicate_index) {
  cfg.validate();
  const RngStream base =
      RngStream(cfg.seed, cfg.cell_id).substream(
          static_cast<std::uint64_t>(replicate_index));
  RngStream s_model = base.substream(0);
  RngStream s_sources = base.substream(1);
  RngStream s_train = base.substream(2);
  RngStream s_test = base.substream(3);
  RngStream s_curve = base.substream(4);

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(cfg.d);
  mu[0] = 1.0;
  const VmfModel prior(mu, cfg.kappa);
  const Eigen::MatrixXd identity =
      Eigen::MatrixXd::Identity(cfg.d, cfg.d);

  // The true projection vector doubles as the class-1 mean (Sigma = I), so
  // the task is conformant by construction.
  const Eigen::VectorXd nu_true = sample_vmf(prior, 1, s_model).front();
  const auto source_vectors = sample_vmf(prior, cfg.j_count, s_sources);
  const SourceSummary sources = summarize_sources(source_vectors);

  const TaskDistribution task(nu_true, identity, 0.5);
  const auto train = sample_task_both_classes(task, cfg.n, s_train);

  const ClassStats stats = estimate_class_stats(train);
  const Eigen::VectorXd tau = 0.5 * (stats.nu1 - stats.nu0);
  Eigen::LLT<Eigen::MatrixXd> llt(stats.sigma_pooled);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("run_replicate: pooled covariance not SPD");
  }
  Eigen::VectorXd omega_raw = llt.solve(tau);
  ProjectionVector omega0 = ProjectionVector::normalized(omega_raw);

  // Plug-in mode estimates the risk machinery's (nu, Sigma) from data; the
  // validation protocol substitutes the population values instead. The
  // target discriminant itself is always fit from the training sample.
  const Eigen::VectorXd& nu_plug = cfg.plug_in ? tau : nu_true;
  const Eigen::MatrixXd& sigma_plug =
      cfg.plug_in ? stats.sigma_pooled : identity;
  Eigen::MatrixXd sigma_omega =
      projection_covariance(nu_plug, sigma_plug, cfg.n);

  const FldFit fit{std::move(omega_raw), omega0,        nu_plug,
                   sigma_plug,           cfg.n,         std::move(sigma_omega)};
  const RiskCurve curve =
      optimal_alpha(fit, sources, cfg.grid, cfg.b_samples, s_curve);

  const auto test = sample_task_both_classes(task, cfg.test_size, s_test);
  const auto [alpha_oracle, oracle_acc] =
      oracle_alpha(omega0.vec(), sources.mu_hat, cfg.grid, test);

  const Eigen::VectorXd w_optimal =
      combine(curve.alpha_star, omega0.vec(), sources.mu_hat);
  const Eigen::VectorXd w_oracle =
      combine(alpha_oracle, omega0.vec(), sources.mu_hat);

  ReplicateRecord rec;
  rec.of(Classifier::Target) = {1.0 - curve.risk_at(1.0),
                                accuracy_empirical(omega0.vec(), test),
                                accuracy_closed_form(omega0.vec(), nu_true,
                                                     identity),
                                1.0};
  rec.of(Classifier::Source) = {1.0 - curve.risk_at(0.0),
                                accuracy_empirical(sources.mu_hat, test),
                                accuracy_closed_form(sources.mu_hat, nu_true,
                                                     identity),
                                0.0};
  rec.of(Classifier::Optimal) = {1.0 - curve.min_risk(),
                                 accuracy_empirical(w_optimal, test),
                                 accuracy_closed_form(w_optimal, nu_true,
                                                      identity),
                                 curve.alpha_star};
  rec.of(Classifier::Oracle) = {1.0 - curve.risk_at(alpha_oracle), oracle_acc,
                                accuracy_closed_form(w_oracle, nu_true,
                                                     identity),
                                alpha_oracle};
  return rec;
}

namespace {

constexpr std::array<Classifier, 4> kClassifiers = {
    Classifier::Target, Classifier::Source, Classifier::Optimal,
    Classifier::Oracle};

CellResult run_cell(const SimConfig& cfg, const CellKey& key, int threads) {
  CellResult cell;
  cell.key = key;
  cell.config = cfg;
  cell.records.resize(static_cast<std::size_t>(cfg.replicates));
  parallel_for(cfg.replicates, threads, [&](int r) {
    cell.records[static_cast<std::size_t>(r)] = run_replicate(cfg, r);
  });
  return cell;
}

double mean_over(const std::vector<ReplicateRecord>& records,
                 Classifier c, double (*pick)(const ClassifierOutcome&)) {
  KahanSum acc;
  for (const auto& r : records) acc.add(pick(r.of(c)));
  return acc.value() / static_cast<double>(records.size());
}

}  // namespace

double CellResult::mean_abs_gap(Classifier c) const {
  KahanSum acc;
  for (const auto& r : records) {
    acc.add(std::abs(r.of(c).analytical_acc - r.of(c).empirical_acc));
  }
  return acc.value() / static_cast<double>(records.size());
}

double CellResult::mean_analytical(Classifier c) const {
  return mean_over(records, c,
                   [](const ClassifierOutcome& o) { return o.analytical_acc; });
}

double CellResult::mean_empirical(Classifier c) const {
  return mean_over(records, c,
                   [](const ClassifierOutcome& o) { return o.empirical_acc; });
}

double CellResult::mean_closed_form(Classifier c) const {
  return mean_over(records, c, [](const ClassifierOutcome& o) {
    return o.closed_form_acc;
  });
}

double CellResult::max_closed_form(Classifier c) const {
  double best = 0.0;
  for (const auto& r : records) {
    best = std::max(best, r.of(c).closed_form_acc);
  }
  return best;
}

double CellResult::mean_alpha(Classifier c) const {
  return mean_over(records, c,
                   [](const ClassifierOutcome& o) { return o.alpha; });
}

std::vector<CellAggregate> SimResult::aggregates() const {
  std::vector<CellAggregate> out;
  out.reserve(cells.size() * kClassifiers.size());
  for (const auto& cell : cells) {
    for (Classifier c : kClassifiers) {
      out.push_back({cell.key, c, cell.mean_analytical(c),
                     cell.mean_empirical(c), cell.mean_closed_form(c),
                     cell.mean_alpha(c),
                     static_cast<int>(cell.records.size())});
    }
  }
  return out;
}

SimResult run_validation(SimConfig base, std::span<const int> ns,
                         std::span<const int> js, int threads) {
  base.plug_in = false;  // the validation protocol knows (nu, Sigma)
  SimResult result;
  std::uint64_t cell_id = 0;
  for (int j : js) {
    for (int n : ns) {
      SimConfig cfg = base;
      cfg.n = n;
      cfg.j_count = j;
      cfg.cell_id = cell_id++;
      result.cells.push_back(run_cell(
          cfg, {"validation", cfg.d, n, j, cfg.kappa}, threads));
    }
  }
  return result;
}

SimResult run_kappa_sweep(SimConfig base, std::span<const double> kappas,
                          int threads) {
  SimResult result;
  std::uint64_t cell_id = 0;
  for (double kappa : kappas) {
    SimConfig cfg = base;
    cfg.kappa = kappa;
    cfg.cell_id = cell_id++;
    result.cells.push_back(run_cell(
        cfg, {"kappa", cfg.d, cfg.n, cfg.j_count, kappa}, threads));
  }
  return result;
}

SimResult run_dimension_sweep(SimConfig base, std::span<const int> ds,
                              int threads) {
  SimResult result;
  std::uint64_t cell_id = 0;
  for (int d : ds) {
    SimConfig cfg = base;
    cfg.d = d;
    cfg.cell_id = cell_id++;
    result.cells.push_back(run_cell(
        cfg, {"dimension", d, cfg.n, cfg.j_count, cfg.kappa}, threads));
  }
  return result;
}

}  // namespace fldt
