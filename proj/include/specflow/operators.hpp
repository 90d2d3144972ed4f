#pragma once

#include <Eigen/Core>
#include <vector>

#include "specflow/scale.hpp"

namespace specflow {

enum class SpectralType { Morse, CoMorse, Floer };

struct LabeledEigenvalue {
  int label;     // ..,-2,-1 for negatives outward from 0; 1,2,.. for positives; 0 for kernel modes
  double value;
};

/// Self-adjoint operator of the truncated pair, stored as a symmetric matrix
/// in scale-basis coordinates with a cached eigendecomposition. Immutable
/// after construction.
class PairOperator {
 public:
  PairOperator(Eigen::MatrixXd entries, GrowthFunction gf);

  int dim() const { return static_cast<int>(entries_.rows()); }
  const Eigen::MatrixXd& entries() const { return entries_; }
  const GrowthFunction& growth() const { return gf_; }

  /// Eigenvalues ascending with multiplicity.
  const Eigen::VectorXd& eigenvalues() const { return evals_; }
  /// Matching orthonormal eigenvectors as columns.
  const Eigen::MatrixXd& eigenvectors() const { return evecs_; }

  double inv_margin() const { return inv_margin_; }
  double spectral_radius() const { return spectral_radius_; }

  /// Invertibility threshold delta_inv = 1e-8 * max(1, spectral radius).
  double invertibility_threshold() const;
  bool invertible() const { return inv_margin_ > invertibility_threshold(); }
  void require_invertible(const char* who) const;

  int negative_count() const { return negatives_; }
  int positive_count() const { return dim() - negatives_ - zeros_; }
  int zero_count() const { return zeros_; }

  /// Ascending eigenvalue list with labels: negatives get -1,-2,... outward
  /// from zero, positives 1,2,...; modes within the invertibility threshold
  /// of zero get label 0.
  std::vector<LabeledEigenvalue> spectrum() const;

  /// Diagnostic tag: whichever sign class is smaller wins, ties are Floer.
  SpectralType type_tag() const;

  /// Coordinate representation of the adjoint under the duality and shift
  /// identifications of the scale: the transposed matrix, read one scale
  /// level down. Same spectrum, and an exact involution.
  PairOperator adjoint_view() const;

  /// A - lambda * inclusion, on the same growth function.
  PairOperator shifted(double lambda) const;

 private:
  Eigen::MatrixXd entries_;
  GrowthFunction gf_;
  Eigen::VectorXd evals_;
  Eigen::MatrixXd evecs_;
  double inv_margin_ = 0.0;
  double spectral_radius_ = 0.0;
  int negatives_ = 0;
  int zeros_ = 0;
};

/// Projection onto the positive or negative eigenspaces of an invertible
/// operator, along the complementary ones.
struct SpectralProjection {
  int sign;                        // +1 or -1
  Eigen::MatrixXd basis_columns;   // selected eigenvectors
  Eigen::MatrixXd matrix;          // N x N projector in scale coordinates

  int rank() const { return static_cast<int>(basis_columns.cols()); }
};

/// Throws NotInvertible when the margin rule fails. The two projections sum
/// to the identity exactly as assembled.
SpectralProjection spectral_projection(const PairOperator& a, int sign);

/// Inner products adapted to an invertible operator: the level-1 form is the
/// pull-back <A.,A.>_0 and the level-1/2 form weights eigencomponents by the
/// absolute eigenvalue. Eigenvector lengths come out as |a| and sqrt|a|.
class AdaptedInner {
 public:
  explicit AdaptedInner(const PairOperator& a);

  double inner1(const ScaleVector& u, const ScaleVector& v) const;
  double norm1(const ScaleVector& u) const;
  double inner_half(const ScaleVector& u, const ScaleVector& v) const;
  double norm_half(const ScaleVector& u) const;

  /// Half-norm of the projection onto one sign class.
  double norm_half_signed(const ScaleVector& u, int sign) const;

 private:
  Eigen::MatrixXd entries_;
  Eigen::VectorXd evals_;
  Eigen::MatrixXd evecs_;
};

AdaptedInner adapted_inner(const PairOperator& a);

/// Signed count, with multiplicity, of eigenvalues strictly between the two
/// non-eigenvalues: +count for lam <= mu, the negated reversed count
/// otherwise. Throws ShiftOnSpectrum if an argument sits within the
/// invertibility threshold of the spectrum.
int spectral_content(const PairOperator& a, double lam, double mu);

/// Point of [lo, hi] farthest from the spectrum; ties resolve to the
/// smallest such point. Throws WindowTooTight when even the best margin is
/// below the invertibility threshold.
double resolvent_shift(const PairOperator& a, double lo, double hi);

}  // namespace specflow
