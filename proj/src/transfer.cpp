#include "fldt/transfer.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

#include "fldt/errors.hpp"
#include "fldt/numeric.hpp"
#include "fldt/simlab.hpp"

namespace fldt {

const char* classifier_name(Classifier c) {
  switch (c) {
    case Classifier::Target:
      return "target";
    case Classifier::Source:
      return "source";
    case Classifier::Optimal:
      return "optimal";
    case Classifier::Oracle:
      return "oracle";
  }
  return "?";
}

AlphaGrid::AlphaGrid(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) {
    throw InvariantViolationError("AlphaGrid: empty grid");
  }
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (values_[i] < 0.0 || values_[i] > 1.0) {
      throw InvariantViolationError("AlphaGrid: values must lie in [0, 1]");
    }
    if (i > 0 && values_[i] <= values_[i - 1]) {
      throw InvariantViolationError("AlphaGrid: values must strictly increase");
    }
  }
}

AlphaGrid AlphaGrid::regular(double step) {
  if (!(step > 0.0 && step <= 1.0)) {
    throw InvariantViolationError("AlphaGrid: step must lie in (0, 1]");
  }
  std::vector<double> v;
  const int count = static_cast<int>(std::round(1.0 / step));
  for (int i = 0; i < count; ++i) v.push_back(i * step);
  v.push_back(1.0);
  return AlphaGrid(std::move(v));
}

double RiskCurve::risk_at(double alpha) const {
  for (std::size_t i = 0; i < alphas.size(); ++i) {
    if (alphas[i] == alpha) return risks[i];
  }
  throw InvariantViolationError("RiskCurve: alpha not on the grid");
}

double RiskCurve::min_risk() const {
  return *std::min_element(risks.begin(), risks.end());
}

SourceSummary summarize_sources(std::span<const Eigen::VectorXd> omegas) {
  if (omegas.empty()) {
    throw EmptySourcesError("summarize_sources: no source vectors");
  }
  const int d = static_cast<int>(omegas.front().size());
  Eigen::VectorXd bar = Eigen::VectorXd::Zero(d);
  for (const auto& w : omegas) {
    if (w.size() != d) {
      throw DimensionMismatchError("summarize_sources: ragged source vectors");
    }
    if (std::abs(w.norm() - 1.0) > 1e-6) {
      throw InvariantViolationError(
          "summarize_sources: source vectors must be unit norm");
    }
    bar += w;
  }
  const auto j = static_cast<double>(omegas.size());
  bar /= j;
  const double resultant = bar.norm();
  if (resultant <= 1e-12) {
    throw ZeroResultantError("summarize_sources: zero resultant length");
  }
  Eigen::VectorXd mu_hat = bar / resultant;

  double mean_sq = 0.0;
  for (const auto& w : omegas) {
    const double c = mu_hat.dot(w);
    mean_sq += c * c;
  }
  mean_sq /= j;
  const double numerator = std::max(0.0, 1.0 - mean_sq);
  const double psi_scale = std::sqrt(numerator / (j * resultant));

  return {std::move(mu_hat), psi_scale, static_cast<int>(omegas.size()),
          resultant};
}

double reparameterize_alpha(double alpha, int j_count,
                            double resultant_length) {
  const double denom =
      alpha + static_cast<double>(j_count) * (1.0 - alpha) * resultant_length;
  if (!(denom > 0.0)) {
    throw InvariantViolationError("reparameterize_alpha: zero denominator");
  }
  return alpha / denom;
}

Eigen::VectorXd combine(double alpha, const Eigen::VectorXd& omega_target,
                        const Eigen::VectorXd& mu_hat) {
  if (omega_target.size() != mu_hat.size()) {
    throw DimensionMismatchError("combine: dimension mismatch");
  }
  return alpha * omega_target + (1.0 - alpha) * mu_hat;
}

double closed_form_risk(const Eigen::VectorXd& omega, const Eigen::VectorXd& nu,
                        const Eigen::MatrixXd& sigma) {
  if (omega.size() != nu.size() || sigma.rows() != nu.size() ||
      sigma.cols() != nu.size()) {
    throw DimensionMismatchError("closed_form_risk: dimension mismatch");
  }
  if (omega.norm() < 1e-12) {
    throw ZeroVectorError("closed_form_risk: omega norm below 1e-12");
  }
  const double denom_sq = omega.dot(sigma * omega);
  if (!(denom_sq > 0.0)) {
    throw SingularCovarianceError(
        "closed_form_risk: omega' sigma omega not positive");
  }
  return normal_cdf(-omega.dot(nu) / std::sqrt(denom_sq));
}

double expected_risk_mc(double alpha, const FldFit& fit,
                        const SourceSummary& sources, int b_samples,
                        RngStream& rng) {
  if (b_samples < 1) {
    throw InvariantViolationError("expected_risk_mc: b_samples must be >= 1");
  }
  if (fit.omega.dim() != sources.dim()) {
    throw DimensionMismatchError("expected_risk_mc: dimension mismatch");
  }
  const Eigen::VectorXd omega_alpha =
      combine(alpha, fit.omega.vec(), sources.mu_hat);
  // At the endpoints the quadratic weights zero out one term exactly, so the
  // constructed covariance equals Sigma_omega (alpha=1) or Psi (alpha=0).
  const Eigen::MatrixXd sigma_alpha =
      (alpha * alpha) * fit.sigma_omega +
      (1.0 - alpha) * (1.0 - alpha) * sources.psi();
  const MvnSampler sampler(omega_alpha, sigma_alpha);

  KahanSum acc;
  for (int b = 0; b < b_samples; ++b) {
    Eigen::VectorXd w = sampler.draw(rng);
    int retries = 0;
    while (w.norm() < 1e-12) {
      if (++retries > 100) {
        throw DegenerateDrawError(
            "expected_risk_mc: degenerate draw after 100 retries");
      }
      w = sampler.draw(rng);
    }
    const double q = w.dot(fit.sigma_hat * w);
    acc.add(normal_cdf(-w.dot(fit.nu_hat) / std::sqrt(q)));
  }
  return acc.value() / static_cast<double>(b_samples);
}

RiskCurve optimal_alpha(const FldFit& fit, const SourceSummary& sources,
                        const AlphaGrid& grid, int b_samples, RngStream rng) {
  RiskCurve curve;
  curve.alphas = grid.values();
  curve.b_samples = b_samples;
  curve.risks.reserve(grid.size());

  double best_risk = 0.0;
  double best_alpha = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double alpha = grid.values()[i];
    // Substreams are keyed by the alpha value itself so that a grid point's
    // risk does not depend on which other points the grid contains.
    RngStream sub = rng.substream(std::bit_cast<std::uint64_t>(alpha));
    const double risk = expected_risk_mc(alpha, fit, sources, b_samples, sub);
    curve.risks.push_back(risk);
    if (i == 0 || risk < best_risk) {
      best_risk = risk;
      best_alpha = alpha;
    }
  }
  curve.alpha_star = best_alpha;
  return curve;
}

std::pair<double, double> oracle_alpha(const Eigen::VectorXd& omega_target,
                                       const Eigen::VectorXd& mu_hat,
                                       const AlphaGrid& grid,
                                       std::span<const LabeledSample> test) {
  if (omega_target.size() != mu_hat.size()) {
    throw DimensionMismatchError("oracle_alpha: dimension mismatch");
  }
  std::vector<int> truth;
  truth.reserve(test.size());
  for (const auto& s : test) truth.push_back(s.y);

  double best_alpha = 0.0;
  double best_acc = -1.0;
  std::vector<int> preds(test.size());
  for (double alpha : grid.values()) {
    const Eigen::VectorXd w = combine(alpha, omega_target, mu_hat);
    for (std::size_t i = 0; i < test.size(); ++i) {
      preds[i] = predict_raw(w, test[i].x);
    }
    const double acc = balanced_accuracy(preds, truth);
    if (acc > best_acc) {
      best_acc = acc;
      best_alpha = alpha;
    }
  }
  return {best_alpha, best_acc};
}

}  // namespace fldt
