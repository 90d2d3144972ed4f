#pragma once

#include <Eigen/Core>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

#include "specflow/operators.hpp"

namespace specflow {

enum class IntervalKind { Finite, Forward, Backward, Line };

/// Matrix-valued sampler in scale coordinates. Must be continuous; piecewise
/// linear keyframe families are continuous by construction, closed-form
/// families are the caller's responsibility.
using MatrixSampler = std::function<Eigen::MatrixXd(double)>;

/// Continuous family of pair operators over one of the four interval kinds
///   finite [-T, T], forward [0, inf), backward (-inf, 0], line R.
/// Half-infinite and line kinds carry a tail radius: beyond it the sampler
/// must stay within eps_tail of the declared asymptotic operator, with
/// eps_tail below half its invertibility margin.
class OperatorPath {
 public:
  static OperatorPath finite(double horizon, MatrixSampler sampler, GrowthFunction gf);
  static OperatorPath forward(double tail_radius, MatrixSampler sampler, GrowthFunction gf,
                              Eigen::MatrixXd asymptotic_plus);
  static OperatorPath backward(double tail_radius, MatrixSampler sampler, GrowthFunction gf,
                               Eigen::MatrixXd asymptotic_minus);
  static OperatorPath line(double tail_radius, MatrixSampler sampler, GrowthFunction gf,
                           Eigen::MatrixXd asymptotic_minus, Eigen::MatrixXd asymptotic_plus);

  IntervalKind kind() const { return kind_; }
  /// Horizon T for the finite kind, tail radius for the others.
  double horizon() const { return horizon_; }
  const GrowthFunction& growth() const { return gf_; }
  int dim() const { return gf_.size(); }

  Eigen::MatrixXd sample_matrix(double s) const { return sampler_(s); }
  PairOperator sample(double s) const { return PairOperator(sampler_(s), gf_); }

  /// Left and right ends of the effective finite window: [-T, T],
  /// [0, tail], [-tail, 0] or [-tail, tail] depending on the kind.
  double window_start() const;
  double window_end() const;

  /// Defining operators of the class: endpoints for the finite kind, the
  /// time-zero operator and declared asymptotics otherwise.
  const PairOperator& start_operator() const { return *start_; }
  const PairOperator& end_operator() const { return *end_; }
  const PairOperator& asymptotic_plus() const;
  const PairOperator& asymptotic_minus() const;

  /// Measured sup of ||A(s) - asymptotic|| over sampled tail points.
  double tail_epsilon() const { return tail_epsilon_; }

 private:
  OperatorPath(IntervalKind kind, double horizon, MatrixSampler sampler, GrowthFunction gf);

  void validate_endpoints() const;

  IntervalKind kind_;
  double horizon_;
  MatrixSampler sampler_;
  GrowthFunction gf_;
  std::shared_ptr<const PairOperator> start_, end_;       // window endpoints
  std::shared_ptr<const PairOperator> asym_minus_, asym_plus_;
  double tail_epsilon_ = 0.0;
};

/// Net count of eigenvalues crossing zero from negative to positive,
/// evaluated as the endpoint difference of negative-eigenvalue counts. The
/// backward kind goes through the sign-flipped reflected forward path, the
/// line kind through the restriction to the tail window.
int spectral_flow(const OperatorPath& path);

struct CrossingEvent {
  double time;
  int direction;  // +1 upward, -1 downward
};

/// Sorted eigenvalue samples with an inserted zero branch. Branch labels run
/// from -neg(start) to +pos(start) with 0 for the inserted branch; at each
/// grid time the branch values are the sorted multiset spec(A(s)) + {0}.
struct BranchTrace {
  Eigen::VectorXd grid;           // sample times
  std::vector<int> labels;        // size N+1, ascending
  Eigen::MatrixXd branches;       // (N+1) x grid points, row i = branch labels[i]
  std::vector<CrossingEvent> crossings;
  std::vector<double> ambiguous_times;  // grid times with an eigenvalue within delta_cross of 0

  int net_crossings() const;
};

/// Crossing ambiguity threshold for traces.
inline constexpr double kCrossingThreshold = 1e-6;

BranchTrace branch_trace(const OperatorPath& path, int grid_points);

/// Block sum of two paths of the same kind and horizon. The combined growth
/// function is the sorted merge of the two weight lists; coordinates are
/// permuted accordingly, which is an exact level-0 isometry.
OperatorPath direct_sum(const OperatorPath& p1, const OperatorPath& p2);

/// Glue two finite paths, end of `left` onto start of `right`, into a finite
/// path of horizon T1 + T2 (time-shifted so the window stays symmetric).
/// Requires matching growth functions, matching junction operators and an
/// invertible junction.
OperatorPath concatenate(const OperatorPath& left, const OperatorPath& right);

/// Restriction of a path to [a, b] inside its window, recentered as a finite
/// path of horizon (b - a) / 2.
OperatorPath subpath(const OperatorPath& path, double a, double b);

// Samplers for the shipped path families.
MatrixSampler keyframe_sampler(std::vector<double> times, std::vector<Eigen::MatrixXd> frames);
MatrixSampler arctan_sampler();
MatrixSampler affine_sampler(Eigen::MatrixXd a0, Eigen::MatrixXd a1);
MatrixSampler poly_sampler(std::vector<Eigen::MatrixXd> coefficients);

}  // namespace specflow
