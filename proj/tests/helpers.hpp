#pragma once

#include <Eigen/Dense>

#include "fldt/rng.hpp"

namespace fldt::test {

inline Eigen::VectorXd unit(std::initializer_list<double> values) {
  Eigen::VectorXd v(static_cast<int>(values.size()));
  int i = 0;
  for (double x : values) v[i++] = x;
  return v / v.norm();
}

inline Eigen::VectorXd basis(int d, int axis) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
  v[axis] = 1.0;
  return v;
}

inline Eigen::VectorXd random_unit(int d, RngStream& rng) {
  Eigen::VectorXd v(d);
  for (;;) {
    for (int i = 0; i < d; ++i) v[i] = rng.normal();
    const double n = v.norm();
    if (n > 1e-9) return v / n;
  }
}

inline Eigen::VectorXd random_vector(int d, RngStream& rng, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = scale * rng.normal();
  return v;
}

// Well-conditioned random SPD matrix: A A^T / d + eps I.
inline Eigen::MatrixXd random_spd(int d, RngStream& rng, double eps = 0.1) {
  Eigen::MatrixXd a(d, d);
  for (int r = 0; r < d; ++r) {
    for (int c = 0; c < d; ++c) a(r, c) = rng.normal();
  }
  Eigen::MatrixXd s = a * a.transpose() / static_cast<double>(d) +
                      eps * Eigen::MatrixXd::Identity(d, d);
  return 0.5 * (s + s.transpose());
}

}  // namespace fldt::test
