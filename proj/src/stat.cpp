#include "fldt/stat.hpp"

#include <cmath>
#include <string>

#include "fldt/errors.hpp"

namespace fldt {

namespace {

constexpr double kSymmetryTol = 1e-10;
constexpr double kEigenvalueFloor = -1e-6;

void check_symmetric(const Eigen::MatrixXd& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw NonSymmetricError(std::string(what) + ": matrix is not square");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double gap = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (gap > kSymmetryTol * scale) {
    throw NonSymmetricError(std::string(what) + ": asymmetry " +
                            std::to_string(gap));
  }
}

}  // namespace

TaskDistribution::TaskDistribution(Eigen::VectorXd nu, Eigen::MatrixXd sigma,
                                   double pi)
    : nu_(std::move(nu)), sigma_(std::move(sigma)), pi_(pi) {
  if (sigma_.rows() != nu_.size() || sigma_.cols() != nu_.size()) {
    throw DimensionMismatchError("TaskDistribution: sigma must be d x d");
  }
  check_symmetric(sigma_, "TaskDistribution");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma_,
                                                    Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 0.0) {
    throw IndefiniteCovarianceError(
        "TaskDistribution: sigma must be positive definite");
  }
  if (!(pi_ > 0.0 && pi_ < 1.0)) {
    throw InvariantViolationError("TaskDistribution: pi must lie in (0, 1)");
  }
}

VmfModel::VmfModel(Eigen::VectorXd mu, double kappa)
    : mu_(std::move(mu)), kappa_(kappa) {
  if (std::abs(mu_.norm() - 1.0) > 1e-10) {
    throw InvariantViolationError("VmfModel: mu must be unit norm");
  }
  if (!(kappa_ >= 0.0)) {
    throw InvariantViolationError("VmfModel: kappa must be >= 0");
  }
}

MvnSampler::MvnSampler(Eigen::VectorXd mean, const Eigen::MatrixXd& cov)
    : mean_(std::move(mean)) {
  if (cov.rows() != mean_.size() || cov.cols() != mean_.size()) {
    throw DimensionMismatchError("MvnSampler: cov must be d x d");
  }
  check_symmetric(cov, "MvnSampler");

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() == Eigen::Success) {
    transform_ = llt.matrixL();
    return;
  }
  // Semidefinite (or numerically indefinite) covariance: factor by
  // eigendecomposition, clamping small negative eigenvalues to zero.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  if (es.info() != Eigen::Success) {
    throw DegenerateCovarianceError("MvnSampler: eigendecomposition failed");
  }
  Eigen::VectorXd evals = es.eigenvalues();
  if (evals.minCoeff() < kEigenvalueFloor) {
    throw IndefiniteCovarianceError("MvnSampler: eigenvalue " +
                                    std::to_string(evals.minCoeff()) +
                                    " below -1e-6");
  }
  transform_ = es.eigenvectors() *
               evals.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

Eigen::VectorXd MvnSampler::draw(RngStream& rng) const {
  Eigen::VectorXd z(dim());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean_ + transform_ * z;
}

std::vector<LabeledSample> sample_task(const TaskDistribution& dist, int n,
                                       RngStream& rng) {
  if (n < 1) throw InvariantViolationError("sample_task: n must be >= 1");
  MvnSampler noise(Eigen::VectorXd::Zero(dist.dim()), dist.sigma());
  std::vector<LabeledSample> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int y = rng.uniform() < dist.pi() ? 1 : 0;
    const double sign = (y == 1) ? 1.0 : -1.0;
    out.push_back({sign * dist.nu() + noise.draw(rng), y});
  }
  return out;
}

Eigen::VectorXd sample_mvn(const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov, RngStream& rng) {
  return MvnSampler(mean, cov).draw(rng);
}

namespace {

// Marsaglia-Tsang; exact for any shape > 0 given a deterministic stream.
double sample_gamma(double shape, RngStream& rng) {
  if (shape < 1.0) {
    const double g = sample_gamma(shape + 1.0, rng);
    return g * std::pow(rng.uniform_pos(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double sample_beta(double a, double b, RngStream& rng) {
  const double x = sample_gamma(a, rng);
  const double y = sample_gamma(b, rng);
  return x / (x + y);
}

// Unit vector uniform on the (k-1)-sphere in R^k.
Eigen::VectorXd uniform_sphere(int k, RngStream& rng) {
  Eigen::VectorXd v(k);
  for (;;) {
    for (int i = 0; i < k; ++i) v[i] = rng.normal();
    const double norm = v.norm();
    if (norm > 1e-12) return v / norm;
  }
}

}  // namespace

std::vector<Eigen::VectorXd> sample_vmf(const VmfModel& model, int count,
                                        RngStream& rng) {
  const int d = model.dim();
  if (d < 2) {
    throw DimensionTooSmallError("sample_vmf: requires dimension >= 2");
  }
  if (count < 1) {
    throw InvariantViolationError("sample_vmf: count must be >= 1");
  }
  std::vector<Eigen::VectorXd> out;
  out.reserve(static_cast<std::size_t>(count));

  const double kappa = model.kappa();
  if (kappa == 0.0) {
    for (int i = 0; i < count; ++i) out.push_back(uniform_sphere(d, rng));
    return out;
  }

  const double m = static_cast<double>(d - 1);
  // Stable form of (-2k + sqrt(4k^2 + m^2)) / m.
  const double b = m / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m * m));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m * std::log(1.0 - x0 * x0);

  // Householder reflection mapping the pole e1 onto mu.
  Eigen::VectorXd pole = Eigen::VectorXd::Zero(d);
  pole[0] = 1.0;
  Eigen::VectorXd u = pole - model.mu();
  const double u_sq = u.squaredNorm();

  for (int i = 0; i < count; ++i) {
    double w;
    for (;;) {
      const double z = sample_beta(m / 2.0, m / 2.0, rng);
      const double uu = rng.uniform_pos();
      w = (1.0 - (1.0 + b) * z) / (1.0 - (1.0 - b) * z);
      if (kappa * w + m * std::log(1.0 - x0 * w) - c >= std::log(uu)) break;
    }
    const Eigen::VectorXd tangent = uniform_sphere(d - 1, rng);
    Eigen::VectorXd y(d);
    y[0] = w;
    y.tail(d - 1) = std::sqrt(std::max(0.0, 1.0 - w * w)) * tangent;
    if (u_sq > 1e-24) {
      y -= (2.0 * u.dot(y) / u_sq) * u;
    }
    out.push_back(y / y.norm());
  }
  return out;
}

}  // namespace fldt
