#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "oracles.hpp"
#include "specflow/operators.hpp"
#include "specflow/rng.hpp"

using namespace specflow;

namespace {

Eigen::MatrixXd diag(std::initializer_list<double> d) {
  Eigen::VectorXd v(static_cast<int>(d.size()));
  int i = 0;
  for (double x : d) v[i++] = x;
  return v.asDiagonal();
}

PairOperator op(const Eigen::MatrixXd& m) {
  return PairOperator(m, GrowthFunction::poly(static_cast<int>(m.rows()), 1.0));
}

Eigen::MatrixXd random_symmetric(Rng& rng, int n) {
  Eigen::MatrixXd m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = rng.uniform(-2.0, 2.0);
  return m;
}

}  // namespace

TEST_CASE("spectrum labels and counts") {
  const PairOperator a = op(diag({-3, 2, 5}));
  const auto labels = a.spectrum();
  CHECK(labels[0].label == -1);
  CHECK(labels[0].value == doctest::Approx(-3));
  CHECK(labels[1].label == 1);
  CHECK(labels[2].label == 2);
  CHECK(a.negative_count() == 1);

  const PairOperator b = op(diag({2, 2}));
  CHECK(b.eigenvalues()[0] == doctest::Approx(2));
  CHECK(b.eigenvalues()[1] == doctest::Approx(2));

  Rng rng(41);
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd m = random_symmetric(rng, 5);
    const PairOperator p = op(m);
    const auto ref = oracle::jacobi_eigenvalues(m);
    int prev_label = std::numeric_limits<int>::min();
    for (int i = 0; i < 5; ++i) {
      CHECK(p.eigenvalues()[i] == doctest::Approx(ref[static_cast<std::size_t>(i)]).epsilon(1e-9));
      const auto le = p.spectrum()[static_cast<std::size_t>(i)];
      if (le.label != 0) {
        CHECK((le.label < 0) == (le.value < 0.0));
        CHECK(le.label > prev_label);
        prev_label = le.label;
      }
    }
  }
}

TEST_CASE("symmetry is enforced") {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.5, -0.5, 1.0;
  CHECK_THROWS_AS(op(m), ValidationError);
}

TEST_CASE("eigenvector residuals and orthonormality") {
  Rng rng(43);
  for (int t = 0; t < 10; ++t) {
    const PairOperator p = op(random_symmetric(rng, 6));
    const Eigen::MatrixXd v = p.eigenvectors();
    CHECK((v.transpose() * v - Eigen::MatrixXd::Identity(6, 6)).cwiseAbs().maxCoeff() <= 1e-10);
    for (int i = 0; i < 6; ++i) {
      const double res = (p.entries() * v.col(i) - p.eigenvalues()[i] * v.col(i)).norm();
      CHECK(res <= 1e-9 * std::max(1.0, std::abs(p.eigenvalues()[i])));
    }
  }
}

TEST_CASE("adapted inner products reproduce eigenvector lengths") {
  {
    const PairOperator a = op(diag({2}));
    const AdaptedInner m = adapted_inner(a);
    const ScaleVector v = Eigen::VectorXd::Ones(1);
    CHECK(m.norm1(v) == doctest::Approx(2.0));
    CHECK(m.norm_half(v) == doctest::Approx(std::sqrt(2.0)));
  }
  {
    const PairOperator a = op(Eigen::MatrixXd::Identity(3, 3));
    const AdaptedInner m = adapted_inner(a);
    Rng rng(2);
    for (int t = 0; t < 10; ++t) {
      Eigen::VectorXd u(3), v(3);
      for (int i = 0; i < 3; ++i) {
        u[i] = rng.gaussian();
        v[i] = rng.gaussian();
      }
      CHECK(m.inner1(u, v) == doctest::Approx(u.dot(v)));
    }
  }
  {
    const PairOperator a = op(diag({-3, 4}));
    const AdaptedInner m = adapted_inner(a);
    CHECK(m.norm_half(Eigen::Vector2d(1, 0)) == doctest::Approx(std::sqrt(3.0)));
    CHECK(m.norm_half(Eigen::Vector2d(0, 1)) == doctest::Approx(2.0));
  }
  Rng rng(9);
  for (int t = 0; t < 10; ++t) {
    const PairOperator a = op(random_symmetric(rng, 5));
    if (!a.invertible()) continue;
    const AdaptedInner m = adapted_inner(a);
    for (int i = 0; i < 5; ++i) {
      const double ev = std::abs(a.eigenvalues()[i]);
      CHECK(std::abs(m.norm1(a.eigenvectors().col(i)) - ev) <= 1e-10 * std::max(1.0, ev));
      CHECK(std::abs(m.norm_half(a.eigenvectors().col(i)) - std::sqrt(ev)) <= 1e-10);
    }
  }
  CHECK_THROWS_AS(adapted_inner(op(diag({1e-12, 1}))), NotInvertible);
}

TEST_CASE("spectral projections") {
  {
    const PairOperator a = op(diag({2, -3}));
    const SpectralProjection plus = spectral_projection(a, +1);
    const SpectralProjection minus = spectral_projection(a, -1);
    CHECK((plus.matrix - diag({1, 0})).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((minus.matrix - diag({0, 1})).cwiseAbs().maxCoeff() <= 1e-12);
  }
  {
    const PairOperator a = op(Eigen::MatrixXd::Identity(3, 3));
    CHECK((spectral_projection(a, +1).matrix - Eigen::MatrixXd::Identity(3, 3))
              .cwiseAbs()
              .maxCoeff() <= 1e-12);
    CHECK(spectral_projection(a, -1).rank() == 0);
  }
  Rng rng(29);
  for (int t = 0; t < 10; ++t) {
    const PairOperator a = op(random_symmetric(rng, 4));
    if (!a.invertible()) continue;
    const SpectralProjection plus = spectral_projection(a, +1);
    const SpectralProjection minus = spectral_projection(a, -1);
    // complement is exact by construction
    CHECK((plus.matrix + minus.matrix - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() ==
          0.0);
    CHECK((plus.matrix * plus.matrix - plus.matrix).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK((minus.matrix * minus.matrix - minus.matrix).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(plus.rank() + minus.rank() == 4);
  }
  CHECK_THROWS_AS(spectral_projection(op(diag({0, 1})), +1), NotInvertible);
}

TEST_CASE("spectral content") {
  const PairOperator a = op(diag({1, 2, 2, 5}));
  CHECK(spectral_content(a, 1.5, 3.0) == 2);
  CHECK(spectral_content(a, 3.0, 1.5) == -2);
  CHECK(spectral_content(a, 0.5, 0.5) == 0);
  CHECK_THROWS_AS(spectral_content(a, 2.0, 3.0), ShiftOnSpectrum);

  // content equals the drop in positive-projection rank across the shift
  Rng rng(31);
  for (int t = 0; t < 10; ++t) {
    const PairOperator b = op(random_symmetric(rng, 5));
    double lam = rng.uniform(-2.5, 2.5), mu = rng.uniform(-2.5, 2.5);
    if (lam > mu) std::swap(lam, mu);
    const auto far = [&](double x) {
      return (b.eigenvalues().array() - x).abs().minCoeff() > 1e-3;
    };
    if (!far(lam) || !far(mu)) continue;
    const int content = spectral_content(b, lam, mu);
    const int rank_drop = spectral_projection(b.shifted(lam), +1).rank() -
                          spectral_projection(b.shifted(mu), +1).rank();
    CHECK(content == rank_drop);
  }
}

TEST_CASE("resolvent shift picks the farthest admissible point") {
  CHECK(resolvent_shift(op(diag({-1, 1})), -2.0, 2.0) == doctest::Approx(0.0));
  CHECK(resolvent_shift(op(diag({1e-9, 1})), 0.5, 2.0) == doctest::Approx(2.0));
  {
    const PairOperator a = op(diag({1, 1.1}));
    const double mu = resolvent_shift(a, 0.0, 3.0);
    CHECK(mu == doctest::Approx(3.0));
    CHECK((a.eigenvalues().array() - mu).abs().minCoeff() == doctest::Approx(1.9));
  }
  // scan oracle
  Rng rng(37);
  for (int t = 0; t < 10; ++t) {
    const PairOperator a = op(random_symmetric(rng, 4));
    const double lo = rng.uniform(-3.0, 0.0), hi = lo + rng.uniform(0.5, 4.0);
    const double mu = resolvent_shift(a, lo, hi);
    const auto dist = [&](double x) { return (a.eigenvalues().array() - x).abs().minCoeff(); };
    double best = 0.0;
    for (int k = 0; k <= 20000; ++k) best = std::max(best, dist(lo + (hi - lo) * k / 20000.0));
    CHECK(dist(mu) >= best - 1e-6);
  }
  CHECK_THROWS_AS(resolvent_shift(op(diag({1.0, 1.2})), 1.0 - 1e-12, 1.0 + 1e-12),
                  WindowTooTight);
}

TEST_CASE("adjoint view") {
  Rng rng(47);
  for (int t = 0; t < 10; ++t) {
    const PairOperator a = op(random_symmetric(rng, 4));
    const PairOperator adj = a.adjoint_view();
    // symmetric coordinates make the representation literal
    CHECK((adj.entries() - a.entries().transpose()).cwiseAbs().maxCoeff() == 0.0);
    const auto ev = oracle::jacobi_eigenvalues(a.entries());
    for (int i = 0; i < 4; ++i)
      CHECK(adj.eigenvalues()[i] ==
            doctest::Approx(ev[static_cast<std::size_t>(i)]).epsilon(1e-9));
    const PairOperator twice = adj.adjoint_view();
    CHECK((twice.entries() - a.entries()).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("type tag") {
  CHECK(op(diag({-1, 1, 2})).type_tag() == SpectralType::Morse);
  CHECK(op(diag({-2, -1, 1})).type_tag() == SpectralType::CoMorse);
  CHECK(op(diag({-2, -1, 1, 2})).type_tag() == SpectralType::Floer);
}
