#pragma once

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "fldt/stat.hpp"

namespace fldt {

/// Unit-norm projection direction of a linear discriminant.
class ProjectionVector {
 public:
  /// Validates that omega is unit norm within 1e-10.
  explicit ProjectionVector(Eigen::VectorXd omega);

  /// Normalizes an arbitrary nonzero vector; throws ZeroVectorError below 1e-12.
  static ProjectionVector normalized(const Eigen::VectorXd& v);

  const Eigen::VectorXd& vec() const { return omega_; }
  int dim() const { return static_cast<int>(omega_.size()); }

 private:
  Eigen::VectorXd omega_;
};

struct ClassStats {
  Eigen::VectorXd nu0;            // class-0 sample mean
  Eigen::VectorXd nu1;            // class-1 sample mean
  Eigen::MatrixXd sigma_pooled;   // pooled within-class covariance + ridge
  double pi_hat = 0.0;            // class-1 fraction
  int n_total = 0;
};

/// Translation and scaling that make data conform to the generative
/// assumptions: class-mean midpoint at the origin and ||Sigma^-1 nu|| = 1.
/// Applies as x -> scale * (x + shift).
struct AssumptionTransform {
  Eigen::VectorXd shift;
  double scale = 1.0;

  Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
    return scale * (x + shift);
  }
  std::vector<LabeledSample> apply(std::span<const LabeledSample> samples) const;
};

/// Fitted linear discriminant plus the plug-in asymptotic covariance of the
/// unnormalized estimate.
struct FldFit {
  Eigen::VectorXd omega_raw;      // 1/2 Sigma^-1 (nu1 - nu0), unnormalized
  ProjectionVector omega;         // omega_raw / ||omega_raw||
  Eigen::VectorXd nu_hat;         // class-1 mean used as the risk plug-in
  Eigen::MatrixXd sigma_hat;      // covariance used as the risk plug-in
  int n_total = 0;
  Eigen::MatrixXd sigma_omega;    // Sigma_tilde / n
};

/// Class means, pooled covariance (ridge 1e-6 tr/d) and class-1 fraction.
ClassStats estimate_class_stats(std::span<const LabeledSample> samples);

/// Fits the conformance transform on training data: shift = -(nu0+nu1)/2 and
/// the scale that makes the transformed data satisfy ||Sigma^-1 nu|| = 1.
AssumptionTransform fit_assumption_transform(
    std::span<const LabeledSample> samples);

/// Fits the discriminant on (already transformed) samples.
FldFit fit_fld(std::span<const LabeledSample> samples);

/// Sigma_tilde / n with
/// Sigma_tilde = (1 + nu' Sigma^-1 nu) Sigma^-1 - Sigma^-1 nu nu' Sigma^-1,
/// symmetrized after computation.
Eigen::MatrixXd projection_covariance(const Eigen::VectorXd& nu,
                                      const Eigen::MatrixXd& sigma, int n);

/// 1 if omega . x > 0, else 0 (the tie at exactly 0 goes to class 0).
int predict(const ProjectionVector& omega, const Eigen::VectorXd& x);

/// Same decision rule for an arbitrary (possibly unnormalized) direction.
inline int predict_raw(const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
  return w.dot(x) > 0.0 ? 1 : 0;
}

}  // namespace fldt
