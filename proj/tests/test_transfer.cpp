#include <doctest.h>

#include <cmath>
#include <vector>

#include "fldt/errors.hpp"
#include "fldt/numeric.hpp"
#include "fldt/simlab.hpp"
#include "fldt/stat.hpp"
#include "fldt/transfer.hpp"
#include "helpers.hpp"

using namespace fldt;
namespace ft = fldt::test;

namespace {

Eigen::VectorXd angle_vector(double degrees) {
  const double rad = degrees * std::numbers::pi / 180.0;
  return Eigen::Vector2d(std::cos(rad), std::sin(rad));
}

// Synthetic fit around a chosen direction with a chosen target covariance.
FldFit make_fit(const Eigen::VectorXd& omega, const Eigen::VectorXd& nu,
                const Eigen::MatrixXd& sigma, const Eigen::MatrixXd& sigma_omega,
                int n = 50) {
  return {omega, ProjectionVector::normalized(omega), nu, sigma, n,
          sigma_omega};
}

SourceSummary make_sources(const Eigen::VectorXd& mu_hat, double psi_scale,
                           int j = 100, double resultant = 0.9) {
  return {mu_hat, psi_scale, j, resultant};
}

}  // namespace

TEST_CASE("summarize_sources basics") {
  SUBCASE("identical vectors give psi = 0") {
    const Eigen::VectorXd u = ft::unit({1.0, 2.0, 2.0});
    const std::vector<Eigen::VectorXd> omegas(5, u);
    const SourceSummary s = summarize_sources(omegas);
    CHECK((s.mu_hat - u).norm() < 1e-12);
    CHECK(s.psi_scale == 0.0);
    CHECK(s.j_count == 5);
    CHECK(s.resultant_length == doctest::Approx(1.0).epsilon(1e-12));
  }

  SUBCASE("antipodal pair has zero resultant") {
    const std::vector<Eigen::VectorXd> omegas = {ft::basis(3, 0),
                                                 -ft::basis(3, 0)};
    CHECK_THROWS_AS(summarize_sources(omegas), ZeroResultantError);
  }

  SUBCASE("no sources") {
    CHECK_THROWS_AS(summarize_sources({}), EmptySourcesError);
  }

  SUBCASE("three vectors at 0/30/60 degrees") {
    const std::vector<Eigen::VectorXd> omegas = {
        angle_vector(0.0), angle_vector(30.0), angle_vector(60.0)};
    const SourceSummary s = summarize_sources(omegas);
    CHECK((s.mu_hat - angle_vector(30.0)).norm() < 1e-12);

    // Independent evaluation of the dispersion formula.
    Eigen::Vector2d bar = Eigen::Vector2d::Zero();
    for (const auto& w : omegas) bar += w;
    bar /= 3.0;
    const Eigen::Vector2d mu = bar.normalized();
    double mean_sq = 0.0;
    for (const auto& w : omegas) mean_sq += std::pow(mu.dot(w), 2) / 3.0;
    const double expected = std::sqrt((1.0 - mean_sq) / (3.0 * bar.norm()));
    CHECK(s.psi_scale == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s.psi_scale == doctest::Approx(0.24699035196556382).epsilon(1e-12));
    CHECK(s.resultant_length ==
          doctest::Approx(0.9106836025229591).epsilon(1e-12));
  }
}

TEST_CASE("reparameterize_alpha") {
  CHECK(reparameterize_alpha(1.0, 7, 0.3) == 1.0);
  CHECK(reparameterize_alpha(0.0, 7, 0.3) == 0.0);
  CHECK(reparameterize_alpha(0.5, 4, 0.5) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("combine endpoints and midpoint") {
  const Eigen::VectorXd e1 = ft::basis(3, 0);
  const Eigen::VectorXd e2 = ft::basis(3, 1);
  CHECK(combine(1.0, e1, e2) == e1);
  CHECK(combine(0.0, e1, e2) == e2);
  const Eigen::VectorXd mid = combine(0.5, e1, e2);
  CHECK(mid[0] == 0.5);
  CHECK(mid[1] == 0.5);
  CHECK(mid[2] == 0.0);
  CHECK_THROWS_AS(combine(0.5, e1, ft::basis(2, 0)), DimensionMismatchError);
}

TEST_CASE("closed_form_risk reference values") {
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  CHECK(closed_form_risk(ft::basis(2, 0), ft::basis(2, 0), eye) ==
        doctest::Approx(0.15865525393145707).epsilon(1e-12));
  // Orthogonal direction carries no signal.
  CHECK(closed_form_risk(ft::basis(2, 1), ft::basis(2, 0), eye) ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK_THROWS_AS(
      closed_form_risk(Eigen::VectorXd::Zero(2), ft::basis(2, 0), eye),
      ZeroVectorError);
}

TEST_CASE("closed_form_risk is scale invariant") {
  RngStream rng(41);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + static_cast<int>(rng.uniform_below(6));
    const Eigen::MatrixXd sigma = ft::random_spd(d, rng);
    const Eigen::VectorXd nu = ft::random_vector(d, rng);
    const Eigen::VectorXd w = ft::random_unit(d, rng);
    const double c = std::exp(3.0 * (rng.uniform() - 0.5));
    const double r1 = closed_form_risk(w, nu, sigma);
    const double r2 = closed_form_risk((c * w).eval(), nu, sigma);
    REQUIRE(std::abs(r1 - r2) < 1e-12);
    REQUIRE(r1 >= 0.0);
    REQUIRE(r1 <= 1.0);
  }
}

TEST_CASE("closed_form_risk matches a 1e7-sample labeling oracle") {
  const Eigen::VectorXd w = ft::unit({1.0, 1.0});
  Eigen::VectorXd nu(2);
  nu << 0.6, 0.8;
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Zero(2, 2);
  sigma(0, 0) = 1.0;
  sigma(1, 1) = 2.0;

  const double risk = closed_form_risk(w, nu, sigma);

  const TaskDistribution dist(nu, sigma, 0.5);
  RngStream rng(42);
  const int n = 10000000;
  const MvnSampler noise(Eigen::VectorXd::Zero(2), sigma);
  long errors = 0;
  for (int i = 0; i < n; ++i) {
    const int y = rng.uniform() < 0.5 ? 1 : 0;
    const Eigen::VectorXd x =
        (y == 1 ? 1.0 : -1.0) * nu + noise.draw(rng);
    if (predict_raw(w, x) != y) ++errors;
  }
  const double empirical = static_cast<double>(errors) / n;
  const double tol = 3.0 * std::sqrt(risk * (1.0 - risk) / n);
  CHECK(std::abs(risk - empirical) < tol);
}

TEST_CASE("expected_risk_mc degenerates to the closed form") {
  const int d = 4;
  const Eigen::VectorXd omega0 = ft::unit({1.0, 0.5, -0.25, 0.0});
  const Eigen::VectorXd nu = ft::unit({0.9, 0.1, 0.2, -0.3});
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(d, d);
  const FldFit fit =
      make_fit(omega0, nu, sigma, Eigen::MatrixXd::Zero(d, d));
  const SourceSummary sources =
      make_sources(ft::unit({1.0, 0.0, 0.1, 0.1}), 0.0);

  const AlphaGrid grid = AlphaGrid::regular(0.1);
  for (int b : {1, 7, 100}) {
    for (double alpha : grid.values()) {
      RngStream rng(43, static_cast<std::uint64_t>(b));
      const double mc = expected_risk_mc(alpha, fit, sources, b, rng);
      const Eigen::VectorXd wa = combine(alpha, omega0, sources.mu_hat);
      CHECK(std::abs(mc - closed_form_risk(wa, nu, sigma)) <= 1e-12);
    }
  }
}

TEST_CASE("expected_risk_mc endpoint covariances are exact") {
  // With Sigma_omega = 0, alpha = 1 must be deterministic even when Psi is
  // large, and symmetrically for alpha = 0.
  const int d = 3;
  const Eigen::VectorXd omega0 = ft::unit({1.0, 0.4, 0.0});
  const Eigen::VectorXd mu_hat = ft::unit({0.8, -0.4, 0.2});
  const Eigen::VectorXd nu = ft::basis(d, 0);
  const Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(d, d);

  const FldFit fit_no_target_noise =
      make_fit(omega0, nu, sigma, Eigen::MatrixXd::Zero(d, d));
  const SourceSummary noisy_sources = make_sources(mu_hat, 5.0);
  RngStream rng(44);
  CHECK(std::abs(expected_risk_mc(1.0, fit_no_target_noise, noisy_sources, 500,
                                  rng) -
                 closed_form_risk(omega0, nu, sigma)) <= 1e-12);

  const FldFit fit_noisy =
      make_fit(omega0, nu, sigma, 5.0 * Eigen::MatrixXd::Identity(d, d));
  const SourceSummary quiet_sources = make_sources(mu_hat, 0.0);
  CHECK(std::abs(expected_risk_mc(0.0, fit_noisy, quiet_sources, 500, rng) -
                 closed_form_risk(mu_hat, nu, sigma)) <= 1e-12);
}

TEST_CASE("expected_risk_mc rejects a degenerate combination point") {
  // Antipodal target and source meet at the zero vector with zero variance,
  // so every draw is degenerate and the retry budget runs out.
  const int d = 3;
  const Eigen::VectorXd e1 = ft::basis(d, 0);
  const FldFit fit = make_fit(e1, e1, Eigen::MatrixXd::Identity(d, d),
                              Eigen::MatrixXd::Zero(d, d));
  const SourceSummary sources = make_sources(-e1, 0.0);
  RngStream rng(45, 9);
  CHECK_THROWS_AS(expected_risk_mc(0.5, fit, sources, 10, rng),
                  DegenerateDrawError);
}

TEST_CASE("expected_risk_mc determinism and range") {
  const int d = 5;
  RngStream setup(45);
  const Eigen::VectorXd omega0 = ft::random_unit(d, setup);
  const Eigen::VectorXd nu = ft::random_unit(d, setup);
  const FldFit fit = make_fit(omega0, nu, Eigen::MatrixXd::Identity(d, d),
                              0.05 * Eigen::MatrixXd::Identity(d, d));
  const SourceSummary sources = make_sources(ft::random_unit(d, setup), 0.02);

  RngStream a(46, 3);
  RngStream b(46, 3);
  const double r1 = expected_risk_mc(0.4, fit, sources, 1000, a);
  const double r2 = expected_risk_mc(0.4, fit, sources, 1000, b);
  CHECK(r1 == r2);
  CHECK(r1 >= 0.0);
  CHECK(r1 <= 1.0);
}

TEST_CASE("expected_risk_mc self-consistency across sample sizes") {
  const int d = 4;
  RngStream setup(47);
  const Eigen::VectorXd omega0 = ft::random_unit(d, setup);
  const FldFit fit = make_fit(omega0, ft::basis(d, 0),
                              Eigen::MatrixXd::Identity(d, d),
                              0.1 * Eigen::MatrixXd::Identity(d, d));
  const SourceSummary sources = make_sources(ft::random_unit(d, setup), 0.05);

  RngStream r1(48, 1);
  RngStream r2(48, 2);
  const double small = expected_risk_mc(0.5, fit, sources, 100000, r1);
  const double large = expected_risk_mc(0.5, fit, sources, 1000000, r2);
  // Conservative bound: per-draw variance is at most 1/4.
  const double tol = 3.0 * std::sqrt(0.25 / 100000.0 + 0.25 / 1000000.0);
  CHECK(std::abs(small - large) < tol);
}

TEST_CASE("expected_risk_mc variance decays as 1/B") {
  const int d = 4;
  RngStream setup(49);
  const Eigen::VectorXd omega0 = ft::random_unit(d, setup);
  const FldFit fit = make_fit(omega0, ft::basis(d, 0),
                              Eigen::MatrixXd::Identity(d, d),
                              0.2 * Eigen::MatrixXd::Identity(d, d));
  const SourceSummary sources = make_sources(ft::random_unit(d, setup), 0.1);

  std::vector<double> log_b, log_var;
  for (int b : {100, 1000, 10000}) {
    double sum = 0.0, sum_sq = 0.0;
    const int seeds = 30;
    for (int s = 0; s < seeds; ++s) {
      RngStream rng(50, static_cast<std::uint64_t>(s));
      const double r = expected_risk_mc(0.5, fit, sources, b, rng);
      sum += r;
      sum_sq += r * r;
    }
    const double mean = sum / seeds;
    const double var = (sum_sq - seeds * mean * mean) / (seeds - 1);
    log_b.push_back(std::log(static_cast<double>(b)));
    log_var.push_back(std::log(var));
  }
  // OLS slope over the three points.
  const double xb = (log_b[0] + log_b[1] + log_b[2]) / 3.0;
  const double yb = (log_var[0] + log_var[1] + log_var[2]) / 3.0;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 3; ++i) {
    num += (log_b[static_cast<std::size_t>(i)] - xb) *
           (log_var[static_cast<std::size_t>(i)] - yb);
    den += std::pow(log_b[static_cast<std::size_t>(i)] - xb, 2);
  }
  const double slope = num / den;
  CHECK(slope > -1.2);
  CHECK(slope < -0.8);
}

TEST_CASE("optimal_alpha basics") {
  const int d = 3;
  const Eigen::VectorXd omega0 = ft::unit({1.0, 0.2, 0.0});
  const FldFit fit = make_fit(omega0, ft::basis(d, 0),
                              Eigen::MatrixXd::Identity(d, d),
                              Eigen::MatrixXd::Zero(d, d));
  const SourceSummary sources = make_sources(ft::unit({1.0, -0.2, 0.1}), 0.0);

  SUBCASE("singleton grid") {
    const RiskCurve curve = optimal_alpha(fit, sources, AlphaGrid({0.5}), 100,
                                          RngStream(51));
    CHECK(curve.alpha_star == 0.5);
    CHECK(curve.risks.size() == 1);
  }

  SUBCASE("exact ties resolve toward the smallest alpha") {
    // Identical target and source vectors with zero covariance: every grid
    // point has exactly the same risk.
    const FldFit tied = make_fit(omega0, ft::basis(d, 0),
                                 Eigen::MatrixXd::Identity(d, d),
                                 Eigen::MatrixXd::Zero(d, d));
    const SourceSummary same = make_sources(omega0, 0.0);
    const RiskCurve curve = optimal_alpha(tied, same, AlphaGrid::regular(0.1),
                                          50, RngStream(52));
    for (double r : curve.risks) CHECK(r == curve.risks.front());
    CHECK(curve.alpha_star == 0.0);
  }

  SUBCASE("risk curve bookkeeping") {
    const RiskCurve curve = optimal_alpha(fit, sources,
                                          AlphaGrid::regular(0.1), 100,
                                          RngStream(53));
    REQUIRE(curve.risks.size() == 11);
    CHECK(curve.min_risk() == curve.risk_at(curve.alpha_star));
    for (double r : curve.risks) {
      CHECK(r >= 0.0);
      CHECK(r <= 1.0);
    }
  }
}

TEST_CASE("optimal_alpha prefers the source as target variance grows") {
  const int d = 5;
  const Eigen::VectorXd nu = ft::basis(d, 0);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  // Biased source, unbiased but noisy target.
  const Eigen::VectorXd mu_hat = ft::unit({1.0, 0.35, 0.0, 0.0, 0.0});
  const SourceSummary sources = make_sources(mu_hat, 0.0);

  auto majority_zero = [&](double target_sd) {
    int zeros = 0, ones = 0;
    for (int rep = 0; rep < 20; ++rep) {
      const FldFit fit = make_fit(nu, nu, eye, target_sd * target_sd * eye);
      const RiskCurve curve =
          optimal_alpha(fit, sources, AlphaGrid::regular(0.1), 1000,
                        RngStream(54, static_cast<std::uint64_t>(rep)));
      if (curve.alpha_star == 0.0) ++zeros;
      if (curve.alpha_star == 1.0) ++ones;
    }
    return std::pair<int, int>{zeros, ones};
  };

  const auto [zeros_noisy, ones_noisy] = majority_zero(3.0);
  CHECK(zeros_noisy > 10);
  const auto [zeros_quiet, ones_quiet] = majority_zero(0.01);
  CHECK(ones_quiet > 10);
  CHECK(zeros_noisy > zeros_quiet);
}

TEST_CASE("optimal_alpha with the true source direction and huge variance") {
  // mu_hat equals the true projection vector; as Sigma_omega grows the
  // selected coefficient should be 0 essentially always.
  const int d = 5;
  const Eigen::VectorXd nu = ft::basis(d, 0);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const SourceSummary sources = make_sources(nu, 0.0);
  RngStream setup(55);
  const Eigen::VectorXd omega0 = ft::unit({1.0, 0.3, -0.2, 0.1, 0.0});
  int zeros = 0;
  for (int rep = 0; rep < 20; ++rep) {
    const FldFit fit = make_fit(omega0, nu, eye, 25.0 * eye);
    const RiskCurve curve =
        optimal_alpha(fit, sources, AlphaGrid::regular(0.1), 1000,
                      RngStream(56, static_cast<std::uint64_t>(rep)));
    if (curve.alpha_star == 0.0) ++zeros;
  }
  CHECK(zeros > 10);
}

TEST_CASE("enlarging the grid never increases the minimum risk") {
  const int d = 4;
  RngStream setup(57);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd omega0 = ft::random_unit(d, setup);
    const FldFit fit = make_fit(omega0, ft::random_unit(d, setup),
                                Eigen::MatrixXd::Identity(d, d),
                                0.3 * Eigen::MatrixXd::Identity(d, d));
    const SourceSummary sources =
        make_sources(ft::random_unit(d, setup), 0.15);
    const RngStream rng(58, static_cast<std::uint64_t>(trial));
    const RiskCurve coarse = optimal_alpha(
        fit, sources, AlphaGrid({0.0, 0.5, 1.0}), 200, rng);
    const RiskCurve fine = optimal_alpha(
        fit, sources, AlphaGrid({0.0, 0.25, 0.5, 0.75, 1.0}), 200, rng);
    // Shared grid points get identical substreams, hence identical risks.
    CHECK(fine.risk_at(0.5) == coarse.risk_at(0.5));
    CHECK(fine.min_risk() <= coarse.min_risk());
  }
}

TEST_CASE("oracle_alpha picks the best grid point") {
  const int d = 2;
  const Eigen::VectorXd e1 = ft::basis(d, 0);
  const Eigen::VectorXd e2 = ft::basis(d, 1);
  const AlphaGrid grid = AlphaGrid::regular(0.1);

  // Separable along e1 only: the +/-50 swing on the second coordinate breaks
  // any combination that puts weight on it, so only the pure e1 rule is
  // perfect on this set.
  std::vector<LabeledSample> test;
  for (double swing : {50.0, -50.0}) {
    test.push_back({Eigen::Vector2d(1.0, swing), 1});
    test.push_back({Eigen::Vector2d(-1.0, swing), 0});
  }

  SUBCASE("target-only separable data selects alpha = 1") {
    const auto [alpha, acc] = oracle_alpha(e1, e2, grid, test);
    CHECK(alpha == 1.0);
    CHECK(acc == 1.0);
  }

  SUBCASE("source-only separable data selects alpha = 0") {
    const auto [alpha, acc] = oracle_alpha(e2, e1, grid, test);
    CHECK(alpha == 0.0);
    CHECK(acc == 1.0);
  }

  SUBCASE("oracle accuracy dominates every grid point") {
    const TaskDistribution dist(ft::unit({0.8, 0.6}),
                                Eigen::MatrixXd::Identity(2, 2), 0.5);
    RngStream drng(60);
    const auto sample = sample_task(dist, 200, drng);
    const Eigen::VectorXd omega0 = ft::random_unit(2, drng);
    const Eigen::VectorXd mu_hat = ft::random_unit(2, drng);
    const auto [alpha, acc] = oracle_alpha(omega0, mu_hat, grid, sample);
    std::vector<int> truth;
    for (const auto& s : sample) truth.push_back(s.y);
    for (double a : grid.values()) {
      const Eigen::VectorXd w = combine(a, omega0, mu_hat);
      std::vector<int> preds;
      for (const auto& s : sample) preds.push_back(predict_raw(w, s.x));
      CHECK(acc >= balanced_accuracy(preds, truth));
    }
  }

  SUBCASE("missing class is rejected") {
    std::vector<LabeledSample> one_class;
    for (int i = 0; i < 10; ++i) one_class.push_back({e1, 1});
    CHECK_THROWS_AS(oracle_alpha(e1, e2, grid, one_class), MissingClassError);
  }
}
