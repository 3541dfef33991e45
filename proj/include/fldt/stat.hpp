#pragma once

#include <Eigen/Dense>
#include <vector>

#include "fldt/rng.hpp"

namespace fldt {

/// One labeled observation. y is 0 or 1.
struct LabeledSample {
  Eigen::VectorXd x;
  int y = 0;
};

/// Symmetric two-Gaussian task: class 1 ~ N(nu, sigma), class 0 ~ N(-nu, sigma),
/// P(y = 1) = pi. The class-0 mean is -nu by construction and never stored.
class TaskDistribution {
 public:
  TaskDistribution(Eigen::VectorXd nu, Eigen::MatrixXd sigma, double pi);

  const Eigen::VectorXd& nu() const { return nu_; }
  const Eigen::MatrixXd& sigma() const { return sigma_; }
  double pi() const { return pi_; }
  int dim() const { return static_cast<int>(nu_.size()); }

 private:
  Eigen::VectorXd nu_;
  Eigen::MatrixXd sigma_;
  double pi_;
};

/// von Mises-Fisher model on the unit (d-1)-sphere. kappa = 0 means uniform.
class VmfModel {
 public:
  VmfModel(Eigen::VectorXd mu, double kappa);

  const Eigen::VectorXd& mu() const { return mu_; }
  double kappa() const { return kappa_; }
  int dim() const { return static_cast<int>(mu_.size()); }

 private:
  Eigen::VectorXd mu_;
  double kappa_;
};

/// Multivariate normal sampler with the covariance factored once.
///
/// Uses Cholesky when the covariance is positive definite and falls back to an
/// eigendecomposition otherwise, clamping slightly negative eigenvalues to
/// zero. Throws NonSymmetricError / IndefiniteCovarianceError on invalid input.
class MvnSampler {
 public:
  MvnSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov);

  Eigen::VectorXd draw(RngStream& rng) const;
  int dim() const { return static_cast<int>(mean_.size()); }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd transform_;  // transform * transform^T == cov (after clamping)
};

/// Draws n samples from the task: y ~ Bernoulli(pi) first, then
/// x ~ N((-1)^(y+1) nu, sigma). Returned in draw order.
std::vector<LabeledSample> sample_task(const TaskDistribution& dist, int n,
                                       RngStream& rng);

/// One draw of mean + L z with L L^T = cov.
Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov, RngStream& rng);

/// Draws `count` unit vectors from V(mu, kappa) by Ulrich-Wood rejection
/// (tangent uniform on the (d-2)-sphere, cosine via the envelope step,
/// Householder rotation from the pole to mu). kappa = 0 dispatches to
/// normalized Gaussian draws.
std::vector<Eigen::VectorXd> sample_vmf(const VmfModel& model, int count,
                                        RngStream& rng);

}  // namespace fldt
