#pragma once

// Test-only oracles. Deliberately independent of the library's solver
// choices: eigenvalues come from classical Jacobi rotations, not from the
// QR-based solver the library caches.

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

inline std::vector<double> jacobi_eigenvalues(Eigen::MatrixXd a) {
  const int n = static_cast<int>(a.rows());
  for (int sweep = 0; sweep < 128; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (std::sqrt(off) < 1e-14 * std::max(1.0, a.cwiseAbs().maxCoeff())) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> ev(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

inline int negative_count(const Eigen::MatrixXd& a) {
  int neg = 0;
  for (double v : jacobi_eigenvalues(a))
    if (v < 0.0) ++neg;
  return neg;
}

/// Endpoint-count spectral flow.
inline int endpoint_flow(const Eigen::MatrixXd& at_start, const Eigen::MatrixXd& at_end) {
  return negative_count(at_start) - negative_count(at_end);
}

/// Net crossings accumulated on a dense sample grid.
inline int dense_crossing_count(const std::function<Eigen::MatrixXd(double)>& sampler, double a,
                                double b, int samples) {
  int net = 0, prev = 0;
  for (int k = 0; k < samples; ++k) {
    const double t = a + (b - a) * k / (samples - 1);
    const int neg = negative_count(sampler(t));
    if (k > 0) net += prev - neg;
    prev = neg;
  }
  return net;
}

}  // namespace oracle
