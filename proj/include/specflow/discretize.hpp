#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "specflow/path.hpp"

#include <nlohmann/json_fwd.hpp>

namespace specflow {

/// Grid function on a uniform time grid with the quadrature norms of the
/// path spaces: the level-0 norm by trapezoid rule, the level-1 norm adding
/// forward differences for the derivative part.
class DiscretePath {
 public:
  /// nodes has one column per grid point.
  DiscretePath(double t_begin, double t_end, Eigen::MatrixXd nodes, GrowthFunction gf);

  int steps() const { return static_cast<int>(nodes_.cols()) - 1; }
  double dt() const { return dt_; }
  double t_begin() const { return t_begin_; }
  double t_end() const { return t_end_; }
  double time(int j) const { return t_begin_ + j * dt_; }
  const Eigen::MatrixXd& nodes() const { return nodes_; }
  Eigen::MatrixXd& nodes() { return nodes_; }
  const GrowthFunction& growth() const { return gf_; }

  double p0_norm() const;
  double p1_norm() const;
  double p0_norm_squared() const;
  double p1_norm_squared() const;

 private:
  double t_begin_, t_end_, dt_;
  Eigen::MatrixXd nodes_;
  GrowthFunction gf_;
};

/// One step of the residual chain: rows [C | D] acting on two consecutive
/// node blocks, already quadrature-scaled.
struct ChainStep {
  Eigen::MatrixXd C, D;
};

/// Assembled block system: boundary rows on the first node block, a chain of
/// residual row blocks, boundary rows on the last node block. The dense
/// matrix has (rows_per_step * steps + boundary rows) rows and
/// (block_dim * (steps + 1)) columns.
class AugmentedSystem {
 public:
  AugmentedSystem(int block_dim, double dt, std::vector<ChainStep> steps,
                  Eigen::MatrixXd start_rows, Eigen::MatrixXd end_rows);

  int block_dim() const { return block_dim_; }
  int steps() const { return static_cast<int>(chain_.size()); }
  double dt() const { return dt_; }
  long rows() const;
  long cols() const;
  int boundary_rows() const {
    return static_cast<int>(start_rows_.rows() + end_rows_.rows());
  }
  const std::vector<ChainStep>& chain() const { return chain_; }
  const Eigen::MatrixXd& start_rows() const { return start_rows_; }
  const Eigen::MatrixXd& end_rows() const { return end_rows_; }

  Eigen::MatrixXd dense() const;

  /// All singular values, descending, via sequential block QR to a banded
  /// factor followed by band bidiagonalization.
  std::vector<double> singular_values() const;

 private:
  int block_dim_;
  double dt_;
  std::vector<ChainStep> chain_;
  Eigen::MatrixXd start_rows_, end_rows_;
};

struct IndexReport {
  enum class Status { Resolved, Unresolved };

  int dim_ker = 0;
  int dim_coker = 0;
  int index = 0;
  double sv_gap = 0.0;
  int grid_n = 0;
  double tol = 0.0;
  Status status = Status::Unresolved;

  bool resolved() const { return status == Status::Resolved; }
  nlohmann::json to_json() const;
};

inline constexpr double kDefaultRankTol = 1e-8;
inline constexpr double kMinSvGap = 1e3;
inline constexpr int kMaxGrid = 2048;

/// Implicit-midpoint residual rows plus spectral boundary rows for the
/// interval kind of the path: positive projection at the window start and/or
/// negative projection at the window end, each row an endpoint eigenvector
/// scaled by |a|^(1/4). Half-infinite and line kinds are truncated at the
/// tail radius with the tail-side projection added.
AugmentedSystem assemble_augmented(const OperatorPath& path, int grid_n);

/// System for the sign-flipped adjoint path with the adjoint boundary
/// projections.
AugmentedSystem assemble_adjoint_augmented(const OperatorPath& path, int grid_n);

/// Boundary rows built from the shifted endpoint operators A(start) - lam_start
/// and A(end) - lam_end; the residual rows are unchanged.
AugmentedSystem assemble_shifted(const OperatorPath& path, int grid_n, double lam_start,
                                 double lam_end);

/// Low-level variant with explicit boundary row blocks.
AugmentedSystem assemble_with_boundary(const OperatorPath& path, int grid_n,
                                       Eigen::MatrixXd start_rows, Eigen::MatrixXd end_rows);

/// Two half-paths coupled through interpolation-weighted matching rows at the
/// junction: sign-split components match up to the factor r in [0, 1].
AugmentedSystem assemble_interpolation_family(const OperatorPath& left,
                                              const OperatorPath& right, int grid_n, double r);

/// Rank by singular values above tol * sigma_max; kernel and cokernel
/// dimensions from the shape. Unresolved when the gap between the smallest
/// counted-nonzero and the largest counted-zero singular value is below 1e3.
IndexReport numeric_index(const AugmentedSystem& sys, double tol = kDefaultRankTol);

/// numeric_index with grid doubling (up to 2048 steps) until resolved.
IndexReport resolve_index(const OperatorPath& path, int grid_n, double tol = kDefaultRankTol);

struct SubspaceComparison {
  int dim_coker = 0;
  int dim_adjoint_kernel = 0;
  double max_principal_angle = 0.0;
  bool resolved = false;
  bool dims_equal() const { return dim_coker == dim_adjoint_kernel; }
};

/// Principal angles between the left null space of the augmented system and
/// the kernel of the adjoint system, both read at residual midpoints.
SubspaceComparison cokernel_vs_adjoint_kernel(const OperatorPath& path, int grid_n,
                                              double tol = kDefaultRankTol);

/// Closed-form solution of the constant-coefficient boundary value problem
/// d/ds xi + A xi = eta on [-T, T] by eigenmode decomposition: decaying
/// exponentials from the boundary data plus an exactly integrated
/// variation-of-constants term for piecewise linear eta. `x` holds the
/// coefficients on the positive eigenvectors (ascending eigenvalue order),
/// `y` those on the negative ones.
DiscretePath constant_path_solve(const PairOperator& a_const, double horizon,
                                 const DiscretePath& eta, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y);

/// Right-hand side matching assemble_augmented of the constant path, for
/// residual checks of the solver.
Eigen::VectorXd constant_path_rhs(const AugmentedSystem& sys, const PairOperator& a_const,
                                  const DiscretePath& eta, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y);

/// Euclidean norm of M xi - rhs over the residual rows (boundary rows track
/// the data exactly by construction).
double residual_norm(const AugmentedSystem& sys, const DiscretePath& xi,
                     const Eigen::VectorXd& rhs);

/// Discrete path-space norms of the solution against the adapted metric of
/// the constant operator, for the energy bound
///   ||xi||_P1^2 <= 10 ||eta||_P0^2 + 4 ||y||_half^2 + 4 ||x||_half^2.
struct ConstantSolveEnergy {
  double p1_squared;
  double bound;  // right-hand side of the inequality
};
ConstantSolveEnergy constant_solve_energy(const PairOperator& a_const, const DiscretePath& xi,
                                          const DiscretePath& eta, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& y);

/// Empirical constant of the lower estimate: max over sampled paths of
///   ||xi||_P1 / (||xi||_P0 + ||D_A xi||_P0 + ||pi_+ xi(start)||_half +
///                ||pi_- xi(end)||_half).
/// Trials are smoothed nodal gaussians plus the constant-in-time endpoint
/// eigenvectors, so the plug-in lower bound is always included.
double estimate_sample(const OperatorPath& path, int trials, int grid_n = 128,
                       std::uint64_t seed = 0x5eedf10eull);

struct NeumannResult {
  Eigen::MatrixXd inverse;
  double bound;        // ||T^-1|| / (1 - ||T^-1|| ||P||)
  double inv_norm_t;   // ||T^-1||
  double norm_p;       // ||P||
  double measured;     // ||(T+P)^-1||
};

/// Inverse of T + P with the perturbation-series bound certificate. Throws
/// PerturbationTooLarge when ||T^-1|| ||P|| >= 1.
NeumannResult neumann_invert(const Eigen::MatrixXd& t, const Eigen::MatrixXd& p);

struct EvaluationResult {
  ScaleVector endpoint;   // x(0)
  double half_norm;       // ||x(0)||_{1/2}
  double path_norm;       // full L2(H_1) + W^{1,2}(H_0) norm
  double ratio;
  double eps_disc;        // 10 h_t max(1, sqrt h(N))
  bool within_bound;      // ratio <= sqrt(2) + eps_disc
};

/// Endpoint evaluation of a path on the unit interval with the trace bound
/// check.
EvaluationResult evaluation_map(const DiscretePath& xi);

/// Exponential section through x0: coefficient nu decays like
/// exp(-sqrt(h(nu)) s) on [0, 1]. Exact right inverse of the evaluation at
/// node zero, with energy at most twice the half-norm squared of x0.
DiscretePath ev_section(const ScaleVector& x0, const GrowthFunction& gf, int grid_n);

/// Denominator norm used by the evaluation-map ratio (three-term version
/// including the level-0 mass).
double evaluation_path_norm(const DiscretePath& xi);

}  // namespace specflow
