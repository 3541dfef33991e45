#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fldt/transfer.hpp"

namespace fldt {

/// Labeled windowed feature vectors for one recording session. Row order is
/// temporal order.
struct SessionDataset {
  std::string session_id;
  Eigen::MatrixXd features;  // n x d
  std::vector<int> labels;   // one of {0, 1} per row

  int dim() const { return static_cast<int>(features.cols()); }
  int size() const { return static_cast<int>(features.rows()); }

  /// n >= 4, at least 2 rows per class, finite features, labels in {0,1}.
  void validate() const;
};

/// Loads either a directory of per-session CSV files (header
/// `label,f1,...,fd`) or a JSON manifest {"sessions":[{"session_id","csv"}]}.
std::vector<SessionDataset> load_sessions(const std::filesystem::path& path);

/// Writes one `<session_id>.csv` per session into `dir`.
void save_sessions(std::span<const SessionDataset> sessions,
                   const std::filesystem::path& dir);

/// Source-vector CSV: one unit vector per row, d columns, no header.
std::vector<Eigen::VectorXd> load_source_vectors(
    const std::filesystem::path& file);
void save_source_vectors(std::span<const Eigen::VectorXd> vectors,
                         const std::filesystem::path& file);

/// Privacy-aggregate JSON holding (mu_hat, psi_scale, j_count,
/// resultant_length); the only thing a source site needs to share.
SourceSummary load_source_aggregate(const std::filesystem::path& file);
void save_source_aggregate(const SourceSummary& summary,
                           const std::filesystem::path& file);

struct SplitSpec {
  double proportion = 0.1;  // p, fraction of each class used for training
  int split_count = 100;
  std::uint64_t seed = 0;
};

struct SplitIndices {
  std::vector<int> train;
  std::vector<int> test;
};

/// Picks, per class, a uniformly random contiguous block of that class's
/// windows of length floor(p * n_c) as training; the remainder is test.
/// Deterministic in (spec.seed, split_index).
SplitIndices consecutive_split(const SessionDataset& ds, const SplitSpec& spec,
                               int split_index);

struct EvalRecord {
  std::string session_id;
  double p = 0.0;
  int split_index = 0;
  Classifier classifier = Classifier::Target;
  double balanced_accuracy = 0.0;
  double alpha = 0.0;
  bool has_alpha = false;  // set for the optimal and oracle rows
};

struct SkippedSplit {
  int split_index = 0;
  std::string reason;
};

struct SessionEvalResult {
  std::string session_id;
  double p = 0.0;
  std::vector<EvalRecord> records;
  std::vector<SkippedSplit> skipped;
};

/// Runs the split protocol on one session: per split, fits the conformance
/// transform and the discriminant on the training block, selects the optimal
/// coefficient against the source summary, and scores the four classifiers on
/// the transformed test block. Splits that fail are recorded as skipped.
SessionEvalResult evaluate_transfer(const SessionDataset& target,
                                    const SourceSummary& sources,
                                    const SplitSpec& spec,
                                    const AlphaGrid& grid, int b_samples);

/// Full-vector mode: aggregates the vectors first, then delegates.
SessionEvalResult evaluate_transfer(const SessionDataset& target,
                                    std::span<const Eigen::VectorXd> sources,
                                    const SplitSpec& spec,
                                    const AlphaGrid& grid, int b_samples);

/// One-sided Wilcoxon signed-rank test for positively shifted paired
/// differences: exact null for n <= 20 nonzero differences, normal
/// approximation with continuity correction above. Zeros are dropped and
/// ties mid-ranked. Needs at least 5 nonzero differences.
double signed_rank_test(std::span<const double> differences);

}  // namespace fldt
