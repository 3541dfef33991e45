#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fldt/dataset.hpp"
#include "fldt/stat.hpp"

namespace fldt::test {

// Session drawn from the conformant simulation model (Sigma = I, nu on the
// unit sphere); labels alternate so both classes have contiguous window runs.
inline SessionDataset synthetic_session(const std::string& id, int d,
                                        int per_class, double kappa,
                                        RngStream& rng) {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  mu[0] = 1.0;
  const Eigen::VectorXd nu = sample_vmf(VmfModel(mu, kappa), 1, rng).front();
  const MvnSampler noise(Eigen::VectorXd::Zero(d),
                         Eigen::MatrixXd::Identity(d, d));
  SessionDataset ds;
  ds.session_id = id;
  ds.features.resize(2 * per_class, d);
  ds.labels.resize(static_cast<std::size_t>(2 * per_class));
  for (int i = 0; i < 2 * per_class; ++i) {
    const int y = i % 2;
    const Eigen::VectorXd x = (y == 1 ? 1.0 : -1.0) * nu + noise.draw(rng);
    ds.features.row(i) = x.transpose();
    ds.labels[static_cast<std::size_t>(i)] = y;
  }
  return ds;
}

struct EvalFixture {
  std::filesystem::path sessions_dir;
  std::filesystem::path source_csv;
};

// Writes a small, fully deterministic evaluation fixture under `root`.
inline EvalFixture write_eval_fixture(const std::filesystem::path& root,
                                      int session_count = 5, int d = 6,
                                      int per_class = 120,
                                      double kappa = 10.0,
                                      std::uint64_t seed = 7070) {
  RngStream rng(seed);
  std::vector<SessionDataset> sessions;
  for (int s = 0; s < session_count; ++s) {
    char name[16];
    std::snprintf(name, sizeof(name), "s%02d", s);
    sessions.push_back(synthetic_session(name, d, per_class, kappa, rng));
  }
  EvalFixture fx;
  fx.sessions_dir = root / "sessions";
  save_sessions(sessions, fx.sessions_dir);

  Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
  mu[0] = 1.0;
  const auto vectors = sample_vmf(VmfModel(mu, kappa), 40, rng);
  fx.source_csv = root / "src.csv";
  save_source_vectors(vectors, fx.source_csv);
  return fx;
}

}  // namespace fldt::test
