#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fldt/fld.hpp"
#include "fldt/rng.hpp"
#include "fldt/stat.hpp"

namespace fldt {

/// The four decision rules compared throughout: the target-only fit, the
/// average-source direction, the risk-minimizing convex combination, and the
/// test-set-best combination.
enum class Classifier { Target, Source, Optimal, Oracle };

const char* classifier_name(Classifier c);

/// Aggregate of the source projection vectors: mean direction, its isotropic
/// covariance scale, the source count and the mean resultant length. This pair
/// of parameters is all the target side ever needs (privacy mode shares only
/// this summary).
struct SourceSummary {
  Eigen::VectorXd mu_hat;        // omega_bar / ||omega_bar||
  double psi_scale = 0.0;        // Psi = psi_scale * I
  int j_count = 0;
  double resultant_length = 0.0; // ||omega_bar||

  int dim() const { return static_cast<int>(mu_hat.size()); }
  Eigen::MatrixXd psi() const {
    return psi_scale * Eigen::MatrixXd::Identity(dim(), dim());
  }
};

/// Strictly increasing grid of convex coefficients in [0, 1].
class AlphaGrid {
 public:
  explicit AlphaGrid(std::vector<double> values);

  /// {0, step, 2 step, ..., 1}; the default search grid uses step 0.1.
  static AlphaGrid regular(double step = 0.1);

  const std::vector<double>& values() const { return values_; }
  std::size_t size() const { return values_.size(); }
  bool has_endpoints() const {
    return values_.front() == 0.0 && values_.back() == 1.0;
  }

 private:
  std::vector<double> values_;
};

/// Approximated expected risk per grid point plus the selected coefficient.
struct RiskCurve {
  std::vector<double> alphas;
  std::vector<double> risks;
  double alpha_star = 0.0;
  int b_samples = 0;

  double risk_at(double alpha) const;
  double min_risk() const;
};

/// Mean direction, Psi scale and resultant length of unit source vectors.
/// Throws EmptySourcesError on J = 0 and ZeroResultantError when the vectors
/// cancel (||omega_bar|| <= 1e-12).
SourceSummary summarize_sources(std::span<const Eigen::VectorXd> omegas);

/// Maps a sum-parameterized coefficient onto the mean-direction
/// parameterization: alpha / (alpha + J (1 - alpha) ||omega_bar||).
double reparameterize_alpha(double alpha, int j_count, double resultant_length);

/// alpha * omega_target + (1 - alpha) * mu_hat, not renormalized (the risk is
/// scale invariant).
Eigen::VectorXd combine(double alpha, const Eigen::VectorXd& omega_target,
                        const Eigen::VectorXd& mu_hat);

/// Exact 0-1 risk of the rule sign(omega . x) under the symmetric task:
/// Phi(-omega . nu / sqrt(omega' sigma omega)).
double closed_form_risk(const Eigen::VectorXd& omega, const Eigen::VectorXd& nu,
                        const Eigen::MatrixXd& sigma);

/// Monte-Carlo expected risk at one coefficient: draws b_samples vectors from
/// N(alpha w0 + (1-alpha) mu_hat, alpha^2 Sigma_omega + (1-alpha)^2 Psi) and
/// averages the closed-form risk under the fit's plug-in (nu_hat, sigma_hat).
double expected_risk_mc(double alpha, const FldFit& fit,
                        const SourceSummary& sources, int b_samples,
                        RngStream& rng);

/// Evaluates expected_risk_mc on every grid point with an independent
/// substream per alpha value and returns the curve; ties break toward the
/// smallest alpha.
RiskCurve optimal_alpha(const FldFit& fit, const SourceSummary& sources,
                        const AlphaGrid& grid, int b_samples, RngStream rng);

/// Grid coefficient maximizing balanced accuracy on held-out data, with its
/// accuracy. Ties break toward the smallest alpha.
std::pair<double, double> oracle_alpha(const Eigen::VectorXd& omega_target,
                                       const Eigen::VectorXd& mu_hat,
                                       const AlphaGrid& grid,
                                       std::span<const LabeledSample> test);

}  // namespace fldt
