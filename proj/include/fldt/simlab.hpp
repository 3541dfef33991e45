#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fldt/transfer.hpp"

namespace fldt {

/// Mean of the per-class recalls. Both classes must appear in `truth`.
double balanced_accuracy(std::span<const int> predictions,
                         std::span<const int> truth);

/// Parameters of one simulation cell. The generative model is fixed to the
/// symmetric two-Gaussian task with Sigma = I, pi = 0.5 and a vMF prior with
/// mean direction e1, so the drawn projection vector doubles as the class-1
/// mean and the conformance constraint holds exactly.
struct SimConfig {
  int d = 10;
  int n = 20;
  int j_count = 100;
  double kappa = 10.0;
  int replicates = 200;
  int b_samples = 100;
  AlphaGrid grid = AlphaGrid::regular(0.1);
  int test_size = 10000;
  std::uint64_t seed = 0;
  // true: use (nu, Sigma) estimated from the training data inside the risk
  // machinery; false: use the population values (the validation protocol).
  bool plug_in = true;
  // Stream separation between sweep cells; replicate r of this cell draws
  // from RngStream(seed, cell_id).substream(r).
  std::uint64_t cell_id = 0;

  void validate() const;
};

struct ClassifierOutcome {
  double analytical_acc = 0.0;   // 1 - approximated expected risk
  double empirical_acc = 0.0;    // balanced accuracy on the fresh test set
  double closed_form_acc = 0.0;  // 1 - exact risk against the true task
  double alpha = 0.0;
};

struct ReplicateRecord {
  std::array<ClassifierOutcome, 4> outcomes;  // indexed by Classifier

  const ClassifierOutcome& of(Classifier c) const {
    return outcomes[static_cast<std::size_t>(c)];
  }
  ClassifierOutcome& of(Classifier c) {
    return outcomes[static_cast<std::size_t>(c)];
  }
};

struct CellKey {
  std::string experiment;
  int d = 0;
  int n = 0;
  int j_count = 0;
  double kappa = 0.0;
};

struct CellResult {
  CellKey key;
  SimConfig config;
  std::vector<ReplicateRecord> records;

  /// Mean of |analytical - empirical| over replicates.
  double mean_abs_gap(Classifier c) const;
  double mean_analytical(Classifier c) const;
  double mean_empirical(Classifier c) const;
  double mean_closed_form(Classifier c) const;
  double max_closed_form(Classifier c) const;
  double mean_alpha(Classifier c) const;
};

struct CellAggregate {
  CellKey key;
  Classifier classifier = Classifier::Target;
  double analytical_acc = 0.0;
  double empirical_acc = 0.0;
  double closed_form_acc = 0.0;
  double mean_alpha = 0.0;
  int replicates = 0;
};

struct SimResult {
  std::vector<CellResult> cells;

  /// One row per cell x classifier, in cell order.
  std::vector<CellAggregate> aggregates() const;
};

/// Runs one independent replicate of the cell: draws the true task and the
/// source vectors, fits the target discriminant, selects the optimal
/// coefficient, and scores all four classifiers analytically, empirically and
/// in closed form against the true task.
ReplicateRecord run_replicate(const SimConfig& cfg, int replicate_index);

/// Validation protocol: known (nu, Sigma) plug-ins, cells over n x J.
SimResult run_validation(SimConfig base, std::span<const int> ns,
                         std::span<const int> js, int threads);

/// Concentration sweep; uses the configured plug-in mode per cell.
SimResult run_kappa_sweep(SimConfig base, std::span<const double> kappas,
                          int threads);

/// Dimension sweep; uses the configured plug-in mode per cell.
SimResult run_dimension_sweep(SimConfig base, std::span<const int> ds,
                              int threads);

}  // namespace fldt
