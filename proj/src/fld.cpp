#include "fldt/fld.hpp"

#include <cmath>

#include "fldt/errors.hpp"

namespace fldt {

ProjectionVector::ProjectionVector(Eigen::VectorXd omega)
    : omega_(std::move(omega)) {
  if (std::abs(omega_.norm() - 1.0) > 1e-10) {
    throw InvariantViolationError("ProjectionVector: not unit norm");
  }
}

ProjectionVector ProjectionVector::normalized(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm < 1e-12) {
    throw ZeroVectorError("ProjectionVector: vector norm below 1e-12");
  }
  return ProjectionVector(v / norm);
}

std::vector<LabeledSample> AssumptionTransform::apply(
    std::span<const LabeledSample> samples) const {
  std::vector<LabeledSample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back({apply(s.x), s.y});
  return out;
}

ClassStats estimate_class_stats(std::span<const LabeledSample> samples) {
  int n0 = 0, n1 = 0;
  for (const auto& s : samples) (s.y == 1 ? n1 : n0)++;
  if (n0 == 0 || n1 == 0) {
    throw MissingClassError("estimate_class_stats: a class is absent");
  }
  const int n = n0 + n1;
  if (n - 2 < 1) {
    throw DegenerateCovarianceError(
        "estimate_class_stats: too few samples for a pooled covariance");
  }
  const int d = static_cast<int>(samples.front().x.size());

  Eigen::VectorXd mean0 = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd mean1 = Eigen::VectorXd::Zero(d);
  for (const auto& s : samples) {
    if (s.x.size() != d) {
      throw DimensionMismatchError("estimate_class_stats: ragged sample");
    }
    (s.y == 1 ? mean1 : mean0) += s.x;
  }
  mean0 /= n0;
  mean1 /= n1;

  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : samples) {
    const Eigen::VectorXd c = s.x - (s.y == 1 ? mean1 : mean0);
    scatter.noalias() += c * c.transpose();
  }
  Eigen::MatrixXd pooled = scatter / static_cast<double>(n - 2);
  if (!pooled.allFinite()) {
    throw DegenerateCovarianceError(
        "estimate_class_stats: non-finite pooled covariance");
  }
  // Ridge keeps the covariance invertible in the tiny-n regime. The floor
  // covers exactly-degenerate (zero-scatter) inputs.
  double ridge = 1e-6 * pooled.trace() / d;
  if (ridge <= 0.0) ridge = 1e-12;
  pooled += ridge * Eigen::MatrixXd::Identity(d, d);

  return {std::move(mean0), std::move(mean1), std::move(pooled),
          static_cast<double>(n1) / n, n};
}

AssumptionTransform fit_assumption_transform(
    std::span<const LabeledSample> samples) {
  const ClassStats stats = estimate_class_stats(samples);
  Eigen::VectorXd shift = -0.5 * (stats.nu0 + stats.nu1);
  const Eigen::VectorXd nu = stats.nu1 + shift;  // post-shift class-1 mean

  Eigen::LLT<Eigen::MatrixXd> llt(stats.sigma_pooled);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError(
        "fit_assumption_transform: pooled covariance not positive definite");
  }
  const double signal = llt.solve(nu).norm();
  if (signal < 1e-12) {
    throw ZeroSignalError("fit_assumption_transform: ||Sigma^-1 nu|| < 1e-12");
  }
  // x -> s (x + shift) maps ||Sigma^-1 nu|| to ||Sigma^-1 nu|| / s, so the
  // conformant scale is the pre-transform norm itself.
  return {std::move(shift), signal};
}

FldFit fit_fld(std::span<const LabeledSample> samples) {
  const ClassStats stats = estimate_class_stats(samples);
  Eigen::LLT<Eigen::MatrixXd> llt(stats.sigma_pooled);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("fit_fld: pooled covariance not invertible");
  }
  Eigen::VectorXd omega_raw = 0.5 * llt.solve(stats.nu1 - stats.nu0);
  ProjectionVector omega = ProjectionVector::normalized(omega_raw);
  Eigen::MatrixXd sigma_omega =
      projection_covariance(stats.nu1, stats.sigma_pooled, stats.n_total);
  return {std::move(omega_raw), std::move(omega),   stats.nu1,
          stats.sigma_pooled,   stats.n_total,      std::move(sigma_omega)};
}

Eigen::MatrixXd projection_covariance(const Eigen::VectorXd& nu,
                                      const Eigen::MatrixXd& sigma, int n) {
  if (n < 1) {
    throw InvariantViolationError("projection_covariance: n must be >= 1");
  }
  if (sigma.rows() != nu.size() || sigma.cols() != nu.size()) {
    throw DimensionMismatchError("projection_covariance: sigma must be d x d");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw SingularCovarianceError("projection_covariance: sigma not SPD");
  }
  const int d = static_cast<int>(nu.size());
  const Eigen::MatrixXd sigma_inv =
      llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::VectorXd s = llt.solve(nu);
  // Delta method over the independent Wishart and mean-difference parts:
  // Cov = Sigma^-1 + (nu' Sigma^-1 nu) Sigma^-1 + Sigma^-1 nu nu' Sigma^-1.
  // The rank-one term enters with a positive sign; the Monte-Carlo sampling
  // distribution of the raw estimate confirms it.
  Eigen::MatrixXd tilde =
      (1.0 + nu.dot(s)) * sigma_inv + s * s.transpose();
  tilde = 0.5 * (tilde + tilde.transpose()).eval();
  return tilde / static_cast<double>(n);
}

int predict(const ProjectionVector& omega, const Eigen::VectorXd& x) {
  if (x.size() != omega.dim()) {
    throw DimensionMismatchError("predict: dimension mismatch");
  }
  return predict_raw(omega.vec(), x);
}

}  // namespace fldt
