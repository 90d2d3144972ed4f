#include "specflow/discretize.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <lapacke.h>
#include <nlohmann/json.hpp>

#include "specflow/rng.hpp"

namespace specflow {

// ---------------------------------------------------------------------------
// DiscretePath

DiscretePath::DiscretePath(double t_begin, double t_end, Eigen::MatrixXd nodes,
                           GrowthFunction gf)
    : t_begin_(t_begin), t_end_(t_end), nodes_(std::move(nodes)), gf_(std::move(gf)) {
  if (nodes_.cols() < 2) throw ValidationError("path.grid", "need at least two nodes");
  if (nodes_.rows() != gf_.size())
    throw DimensionMismatch("discrete path nodes and growth function must share N");
  if (!(t_end_ > t_begin_)) throw ValidationError("path.grid", "need t_end > t_begin");
  dt_ = (t_end_ - t_begin_) / static_cast<double>(nodes_.cols() - 1);
}

namespace {

// trapezoid rule over the weighted squared node norms at level r
double weighted_mass(const Eigen::MatrixXd& nodes, const GrowthFunction& gf, double r,
                     double dt) {
  Eigen::VectorXd w(gf.size());
  for (int i = 0; i < gf.size(); ++i)
    w[i] = r == 0.0 ? 1.0 : (r == 1.0 ? gf.weight(i) : std::pow(gf.weight(i), r));
  const int n = static_cast<int>(nodes.cols()) - 1;
  double sum = 0.0;
  for (int k = 0; k <= n; ++k) {
    double acc = 0.0;
    for (int i = 0; i < nodes.rows(); ++i) acc += w[i] * nodes(i, k) * nodes(i, k);
    sum += (k == 0 || k == n) ? 0.5 * acc : acc;
  }
  return sum * dt;
}

}  // namespace

double DiscretePath::p0_norm_squared() const { return weighted_mass(nodes_, gf_, 0.0, dt_); }

double DiscretePath::p1_norm_squared() const {
  // forward differences for the derivative part, trapezoid for the level-1 mass
  double deriv = 0.0;
  for (int j = 0; j + 1 < nodes_.cols(); ++j)
    deriv += (nodes_.col(j + 1) - nodes_.col(j)).squaredNorm() / dt_;
  return deriv + weighted_mass(nodes_, gf_, 1.0, dt_);
}

double DiscretePath::p0_norm() const { return std::sqrt(p0_norm_squared()); }
double DiscretePath::p1_norm() const { return std::sqrt(p1_norm_squared()); }

// ---------------------------------------------------------------------------
// AugmentedSystem

AugmentedSystem::AugmentedSystem(int block_dim, double dt, std::vector<ChainStep> steps,
                                 Eigen::MatrixXd start_rows, Eigen::MatrixXd end_rows)
    : block_dim_(block_dim),
      dt_(dt),
      chain_(std::move(steps)),
      start_rows_(std::move(start_rows)),
      end_rows_(std::move(end_rows)) {
  for (const auto& s : chain_)
    if (s.C.rows() != block_dim_ || s.C.cols() != block_dim_ || s.D.rows() != block_dim_ ||
        s.D.cols() != block_dim_)
      throw DimensionMismatch("chain step blocks must be square of the block dimension");
  if (start_rows_.size() > 0 && start_rows_.cols() != block_dim_)
    throw DimensionMismatch("start boundary rows have wrong width");
  if (end_rows_.size() > 0 && end_rows_.cols() != block_dim_)
    throw DimensionMismatch("end boundary rows have wrong width");
  if (start_rows_.size() == 0) start_rows_.resize(0, block_dim_);
  if (end_rows_.size() == 0) end_rows_.resize(0, block_dim_);
}

long AugmentedSystem::rows() const {
  return static_cast<long>(block_dim_) * steps() + boundary_rows();
}

long AugmentedSystem::cols() const {
  return static_cast<long>(block_dim_) * (steps() + 1);
}

Eigen::MatrixXd AugmentedSystem::dense() const {
  const int nb = block_dim_;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(rows(), cols());
  long r = 0;
  m.block(r, 0, start_rows_.rows(), nb) = start_rows_;
  r += start_rows_.rows();
  for (int j = 0; j < steps(); ++j, r += nb) {
    m.block(r, static_cast<long>(j) * nb, nb, nb) = chain_[static_cast<std::size_t>(j)].C;
    m.block(r, static_cast<long>(j + 1) * nb, nb, nb) = chain_[static_cast<std::size_t>(j)].D;
  }
  m.block(r, cols() - nb, end_rows_.rows(), nb) = end_rows_;
  return m;
}

std::vector<double> AugmentedSystem::singular_values() const {
  const int nb = block_dim_;
  const int n = steps();

  // Sequential block QR: orthogonal row operations reduce the block chain to
  // an upper staircase factor with the same singular values. The carry holds
  // the not-yet-finished rows on the current node block.
  Eigen::MatrixXd carry = start_rows_;
  std::vector<Eigen::MatrixXd> finished;  // n blocks of nb x 2nb
  finished.reserve(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const int k = static_cast<int>(carry.rows());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k + nb, 2 * nb);
    s.topLeftCorner(k, nb) = carry;
    s.block(k, 0, nb, nb) = chain_[static_cast<std::size_t>(j)].C;
    s.block(k, nb, nb, nb) = chain_[static_cast<std::size_t>(j)].D;
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(s);
    Eigen::MatrixXd t = qr.matrixQR().triangularView<Eigen::Upper>();
    finished.push_back(t.topRows(nb));
    carry = t.block(nb, nb, k, nb);
  }
  Eigen::MatrixXd tail(carry.rows() + end_rows_.rows(), nb);
  tail << carry, end_rows_;
  const int q = std::min<int>(nb, static_cast<int>(tail.rows()));
  Eigen::MatrixXd tail_tri(q, nb);
  if (tail.rows() > 0) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(tail);
    Eigen::MatrixXd t = qr.matrixQR().triangularView<Eigen::Upper>();
    tail_tri = t.topRows(q);
  } else {
    tail_tri.resize(0, nb);
  }

  const long m_r = static_cast<long>(n) * nb + q;  // rows of the staircase factor
  const long n_c = cols();

  // band storage; transpose when wide so the bidiagonalization sees m >= n
  const bool transpose = m_r < n_c;
  const long bm = transpose ? n_c : m_r;
  const long bn = transpose ? m_r : n_c;
  const int kl = transpose ? 2 * nb - 1 : 0;
  const int ku = transpose ? 0 : 2 * nb - 1;
  const int ldab = kl + ku + 1;
  std::vector<double> ab(static_cast<std::size_t>(ldab) * static_cast<std::size_t>(bn), 0.0);
  auto put = [&](long i, long j, double v) {
    if (transpose) std::swap(i, j);
    ab[static_cast<std::size_t>(j) * ldab + static_cast<std::size_t>(ku + i - j)] = v;
  };
  for (int j = 0; j < n; ++j) {
    const Eigen::MatrixXd& blk = finished[static_cast<std::size_t>(j)];
    for (int t = 0; t < nb; ++t)
      for (int c = t; c < 2 * nb; ++c)
        put(static_cast<long>(j) * nb + t, static_cast<long>(j) * nb + c, blk(t, c));
  }
  for (int t = 0; t < q; ++t)
    for (int c = t; c < nb; ++c)
      put(static_cast<long>(n) * nb + t, static_cast<long>(n) * nb + c, tail_tri(t, c));

  const long nsv = std::min(bm, bn);
  std::vector<double> d(static_cast<std::size_t>(nsv)),
      e(static_cast<std::size_t>(std::max<long>(nsv - 1, 1)));
  int info = LAPACKE_dgbbrd(LAPACK_COL_MAJOR, 'N', static_cast<int>(bm), static_cast<int>(bn), 0,
                            kl, ku, ab.data(), ldab, d.data(), e.data(), nullptr, 1, nullptr, 1,
                            nullptr, 1);
  if (info != 0) throw Error("band bidiagonalization failed, info=" + std::to_string(info));
  info = LAPACKE_dbdsqr(LAPACK_COL_MAJOR, 'U', static_cast<int>(nsv), 0, 0, 0, d.data(), e.data(),
                        nullptr, 1, nullptr, 1, nullptr, 1);
  if (info != 0) throw Error("bidiagonal SVD failed, info=" + std::to_string(info));
  return d;  // descending
}

// ---------------------------------------------------------------------------
// Assembly

namespace {

// Boundary rows for one sign class: one row per selected eigenvector, scaled
// by |a|^(1/4) so the rows carry interpolation-level weight.
Eigen::MatrixXd projection_rows(const PairOperator& op, int sign) {
  op.require_invertible("boundary projection");
  const int n = op.dim();
  std::vector<int> sel;
  for (int i = 0; i < n; ++i)
    if ((sign > 0) == (op.eigenvalues()[i] > 0.0)) sel.push_back(i);
  Eigen::MatrixXd rows(static_cast<int>(sel.size()), n);
  for (std::size_t k = 0; k < sel.size(); ++k)
    rows.row(static_cast<int>(k)) =
        std::pow(std::abs(op.eigenvalues()[sel[k]]), 0.25) * op.eigenvectors().col(sel[k]).transpose();
  return rows;
}

std::vector<ChainStep> midpoint_chain(const OperatorPath& path, int grid_n, double sign_flip) {
  const int n = path.dim();
  const double a = path.window_start(), b = path.window_end();
  const double h = (b - a) / grid_n;
  const double s = std::sqrt(h);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  std::vector<ChainStep> chain(static_cast<std::size_t>(grid_n));
  for (int j = 0; j < grid_n; ++j) {
    const double tm = a + (j + 0.5) * h;
    Eigen::MatrixXd am = path.sample_matrix(tm);
    if (sign_flip < 0) am = Eigen::MatrixXd(-am.transpose());
    chain[static_cast<std::size_t>(j)].C = s * (-eye / h + 0.5 * am);
    chain[static_cast<std::size_t>(j)].D = s * (eye / h + 0.5 * am);
  }
  return chain;
}

void check_grid(int grid_n) {
  if (grid_n < 8) throw ValidationError("grid_n", "need at least 8 steps");
}

}  // namespace

AugmentedSystem assemble_augmented(const OperatorPath& path, int grid_n) {
  check_grid(grid_n);
  const double h = (path.window_end() - path.window_start()) / grid_n;
  return AugmentedSystem(path.dim(), h, midpoint_chain(path, grid_n, +1.0),
                         projection_rows(path.start_operator(), +1),
                         projection_rows(path.end_operator(), -1));
}

AugmentedSystem assemble_adjoint_augmented(const OperatorPath& path, int grid_n) {
  check_grid(grid_n);
  const double h = (path.window_end() - path.window_start()) / grid_n;
  const PairOperator adj_start(Eigen::MatrixXd(-path.start_operator().entries().transpose()),
                               path.growth());
  const PairOperator adj_end(Eigen::MatrixXd(-path.end_operator().entries().transpose()),
                             path.growth());
  return AugmentedSystem(path.dim(), h, midpoint_chain(path, grid_n, -1.0),
                         projection_rows(adj_start, +1), projection_rows(adj_end, -1));
}

AugmentedSystem assemble_shifted(const OperatorPath& path, int grid_n, double lam_start,
                                 double lam_end) {
  check_grid(grid_n);
  const PairOperator s = path.start_operator().shifted(lam_start);
  const PairOperator e = path.end_operator().shifted(lam_end);
  if (!s.invertible())
    throw ShiftOnSpectrum("start shift lies on the spectrum of the start operator");
  if (!e.invertible())
    throw ShiftOnSpectrum("end shift lies on the spectrum of the end operator");
  const double h = (path.window_end() - path.window_start()) / grid_n;
  return AugmentedSystem(path.dim(), h, midpoint_chain(path, grid_n, +1.0),
                         projection_rows(s, +1), projection_rows(e, -1));
}

AugmentedSystem assemble_with_boundary(const OperatorPath& path, int grid_n,
                                       Eigen::MatrixXd start_rows, Eigen::MatrixXd end_rows) {
  check_grid(grid_n);
  const double h = (path.window_end() - path.window_start()) / grid_n;
  return AugmentedSystem(path.dim(), h, midpoint_chain(path, grid_n, +1.0),
                         std::move(start_rows), std::move(end_rows));
}

AugmentedSystem assemble_interpolation_family(const OperatorPath& left,
                                              const OperatorPath& right, int grid_n, double r) {
  check_grid(grid_n);
  if (left.kind() != IntervalKind::Finite || right.kind() != IntervalKind::Finite)
    throw ValidationError("interpolation_family", "both pieces must be finite paths");
  if (!(left.growth() == right.growth()))
    throw ValidationError("interpolation_family", "growth functions must match");
  if (r < 0.0 || r > 1.0)
    throw ValidationError("interpolation_family", "coupling parameter must lie in [0, 1]");

  const int n = left.dim();
  const Eigen::MatrixXd jl = left.sample_matrix(left.horizon());
  const Eigen::MatrixXd jr = right.sample_matrix(-right.horizon());
  const double scale = std::max(1.0, jl.cwiseAbs().maxCoeff());
  if ((jl - jr).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw MismatchAtJunction("pieces disagree at the junction");
  const PairOperator junction(jl, left.growth());
  junction.require_invertible("interpolation_family junction");

  auto chain = midpoint_chain(left, grid_n, +1.0);
  // matching rows: negative components of the left trace match r times the
  // right ones, positive components the other way round
  ChainStep couple;
  couple.C = Eigen::MatrixXd::Zero(n, n);
  couple.D = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const double a = junction.eigenvalues()[i];
    const double w = std::pow(std::abs(a), 0.25);
    const Eigen::RowVectorXd v = junction.eigenvectors().col(i).transpose();
    if (a < 0.0) {
      couple.C.row(i) = w * v;
      couple.D.row(i) = -r * w * v;
    } else {
      couple.C.row(i) = r * w * v;
      couple.D.row(i) = -w * v;
    }
  }
  chain.push_back(couple);
  auto right_chain = midpoint_chain(right, grid_n, +1.0);
  chain.insert(chain.end(), right_chain.begin(), right_chain.end());

  const double h = (left.horizon() + right.horizon()) / grid_n;
  return AugmentedSystem(n, h, std::move(chain), projection_rows(left.start_operator(), +1),
                         projection_rows(right.end_operator(), -1));
}

// ---------------------------------------------------------------------------
// Index computation

nlohmann::json IndexReport::to_json() const {
  nlohmann::json j;
  j["dim_ker"] = dim_ker;
  j["dim_coker"] = dim_coker;
  j["index"] = index;
  j["sv_gap"] = std::isfinite(sv_gap) ? sv_gap : 1e300;
  j["grid_n"] = grid_n;
  j["tol"] = tol;
  j["status"] = status == Status::Resolved ? "resolved" : "UNRESOLVED";
  return j;
}

namespace {

IndexReport report_from_singular_values(const std::vector<double>& sv, long rows, long cols,
                                        int grid_n, double tol) {
  IndexReport rep;
  rep.grid_n = grid_n;
  rep.tol = tol;
  const double smax = sv.empty() ? 0.0 : sv.front();
  int rank = 0;
  for (double s : sv)
    if (s > tol * smax) ++rank;
  rep.dim_ker = static_cast<int>(cols - rank);
  rep.dim_coker = static_cast<int>(rows - rank);
  rep.index = rep.dim_ker - rep.dim_coker;
  if (rank == 0 || rank == static_cast<int>(sv.size()) ||
      sv[static_cast<std::size_t>(rank)] == 0.0)
    rep.sv_gap = std::numeric_limits<double>::infinity();
  else
    rep.sv_gap = sv[static_cast<std::size_t>(rank - 1)] / sv[static_cast<std::size_t>(rank)];
  rep.status = rep.sv_gap >= kMinSvGap ? IndexReport::Status::Resolved
                                       : IndexReport::Status::Unresolved;
  return rep;
}

}  // namespace

IndexReport numeric_index(const AugmentedSystem& sys, double tol) {
  return report_from_singular_values(sys.singular_values(), sys.rows(), sys.cols(), sys.steps(),
                                     tol);
}

IndexReport resolve_index(const OperatorPath& path, int grid_n, double tol) {
  int g = grid_n;
  IndexReport rep = numeric_index(assemble_augmented(path, g), tol);
  while (!rep.resolved() && 2 * g <= kMaxGrid) {
    g *= 2;
    rep = numeric_index(assemble_augmented(path, g), tol);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Cokernel against adjoint kernel

namespace {

int rank_of(const Eigen::VectorXd& sv, double tol, double* gap) {
  const double smax = sv.size() ? sv[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < sv.size(); ++i)
    if (sv[i] > tol * smax) ++rank;
  if (gap) {
    if (rank == 0 || rank == sv.size() || sv[rank] == 0.0)
      *gap = std::numeric_limits<double>::infinity();
    else
      *gap = sv[rank - 1] / sv[rank];
  }
  return rank;
}

// Orthonormalize columns; returns an n x k matrix with k = cols.
Eigen::MatrixXd orthonormalize(const Eigen::MatrixXd& m) {
  if (m.cols() == 0) return m;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(m);
  return qr.householderQ() * Eigen::MatrixXd::Identity(m.rows(), m.cols());
}

}  // namespace

SubspaceComparison cokernel_vs_adjoint_kernel(const OperatorPath& path, int grid_n, double tol) {
  const AugmentedSystem sys = assemble_augmented(path, grid_n);
  const AugmentedSystem adj = assemble_adjoint_augmented(path, grid_n);
  const int nb = sys.block_dim();
  const int n = sys.steps();

  Eigen::BDCSVD<Eigen::MatrixXd> svd_a(sys.dense(), Eigen::ComputeFullU);
  Eigen::BDCSVD<Eigen::MatrixXd> svd_b(adj.dense(), Eigen::ComputeFullV);
  double gap_a = 0.0, gap_b = 0.0;
  const int rank_a = rank_of(svd_a.singularValues(), tol, &gap_a);
  const int rank_b = rank_of(svd_b.singularValues(), tol, &gap_b);

  SubspaceComparison cmp;
  cmp.dim_coker = static_cast<int>(sys.rows()) - rank_a;
  cmp.dim_adjoint_kernel = static_cast<int>(adj.cols()) - rank_b;
  cmp.resolved = gap_a >= kMinSvGap && gap_b >= kMinSvGap;

  const int d = std::min(cmp.dim_coker, cmp.dim_adjoint_kernel);
  if (d == 0) {
    cmp.max_principal_angle = 0.0;
    return cmp;
  }

  // residual-row part of the left null space lives at step midpoints
  const Eigen::MatrixXd left_null =
      svd_a.matrixU().rightCols(cmp.dim_coker).middleRows(sys.start_rows().rows(),
                                                          static_cast<long>(nb) * n);
  // adjoint kernel is nodal; average adjacent nodes to the same midpoints
  const Eigen::MatrixXd kern = svd_b.matrixV().rightCols(cmp.dim_adjoint_kernel);
  Eigen::MatrixXd kern_mid(static_cast<long>(nb) * n, kern.cols());
  for (int j = 0; j < n; ++j)
    kern_mid.middleRows(static_cast<long>(j) * nb, nb) =
        0.5 * (kern.middleRows(static_cast<long>(j) * nb, nb) +
               kern.middleRows(static_cast<long>(j + 1) * nb, nb));

  const Eigen::MatrixXd q1 = orthonormalize(left_null);
  const Eigen::MatrixXd q2 = orthonormalize(kern_mid);
  Eigen::JacobiSVD<Eigen::MatrixXd> angles(q1.transpose() * q2);
  const double cmin =
      std::clamp(angles.singularValues().tail(1)(0), -1.0, 1.0);
  cmp.max_principal_angle = std::acos(cmin);
  return cmp;
}

// ---------------------------------------------------------------------------
// Constant-coefficient solver

namespace {

// stable kernels of the exact per-interval integration against piecewise
// linear data; z >= 0 throughout
double kernel_e(double z) {  // int_0^1 exp(-z u) du
  if (z < 1e-5) return 1.0 - z / 2.0 + z * z / 6.0;
  return -std::expm1(-z) / z;
}
double kernel_g1(double z) {  // int_0^1 u exp(z (u - 1)) du
  if (z < 1e-5) return 0.5 - z / 6.0 + z * z / 24.0;
  return (1.0 - kernel_e(z)) / z;
}
double kernel_f1(double z) {  // int_0^1 u exp(-z u) du
  if (z < 1e-5) return 0.5 - z / 3.0 + z * z / 8.0;
  return (kernel_e(z) - std::exp(-z)) / z;
}

}  // namespace

DiscretePath constant_path_solve(const PairOperator& a_const, double horizon,
                                 const DiscretePath& eta, const Eigen::VectorXd& x,
                                 const Eigen::VectorXd& y) {
  a_const.require_invertible("constant_path_solve");
  const int nd = a_const.dim();
  if (eta.nodes().rows() != nd) throw DimensionMismatch("eta dimension mismatch");
  if (std::abs(eta.t_begin() + horizon) > 1e-12 || std::abs(eta.t_end() - horizon) > 1e-12)
    throw ValidationError("eta", "grid must cover [-T, T]");
  const int neg = a_const.negative_count();
  const int pos = a_const.positive_count();
  if (x.size() != pos) throw DimensionMismatch("x must have one entry per positive mode");
  if (y.size() != neg) throw DimensionMismatch("y must have one entry per negative mode");

  const int n = eta.steps();
  const double h = eta.dt();
  // mode coefficients of the data
  const Eigen::MatrixXd ec = a_const.eigenvectors().transpose() * eta.nodes();
  Eigen::MatrixXd xc(nd, n + 1);

  for (int i = 0; i < nd; ++i) {
    const double a = a_const.eigenvalues()[i];
    if (a > 0.0) {
      const double z = a * h;
      const double g1 = kernel_g1(z), g0 = kernel_e(z) - g1, decay = std::exp(-z);
      double acc = 0.0;  // running variation-of-constants integral
      for (int k = 0; k <= n; ++k) {
        xc(i, k) = x[i - neg] * std::exp(-a * (horizon + eta.time(k))) + acc;
        if (k < n) acc = decay * acc + h * (ec(i, k) * g0 + ec(i, k + 1) * g1);
      }
    } else {
      const double z = -a * h;
      const double f1 = kernel_f1(z), f0 = kernel_e(z) - f1, decay = std::exp(-z);
      double acc = 0.0;
      for (int k = n; k >= 0; --k) {
        xc(i, k) = y[i] * std::exp(a * (horizon - eta.time(k))) - acc;
        if (k > 0) acc = decay * acc + h * (ec(i, k - 1) * f0 + ec(i, k) * f1);
      }
    }
  }
  return DiscretePath(-horizon, horizon, a_const.eigenvectors() * xc, a_const.growth());
}

Eigen::VectorXd constant_path_rhs(const AugmentedSystem& sys, const PairOperator& a_const,
                                  const DiscretePath& eta, const Eigen::VectorXd& x,
                                  const Eigen::VectorXd& y) {
  const int nb = sys.block_dim();
  const int n = sys.steps();
  if (eta.steps() != n) throw DimensionMismatch("eta grid must match the assembled system");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(sys.rows());

  const int neg = a_const.negative_count();
  long r = 0;
  // boundary data rows mirror the |a|^(1/4) scaling of the projection rows
  for (int i = 0, k = 0; i < a_const.dim(); ++i)
    if (a_const.eigenvalues()[i] > 0.0)
      rhs[r + k++] = std::pow(a_const.eigenvalues()[i], 0.25) * x[i - neg];
  r += sys.start_rows().rows();

  const double sq = std::sqrt(sys.dt());
  for (int j = 0; j < n; ++j, r += nb)
    rhs.segment(r, nb) = sq * 0.5 * (eta.nodes().col(j) + eta.nodes().col(j + 1));

  for (int i = 0, k = 0; i < a_const.dim(); ++i)
    if (a_const.eigenvalues()[i] < 0.0)
      rhs[r + k++] = std::pow(-a_const.eigenvalues()[i], 0.25) * y[i];
  return rhs;
}

double residual_norm(const AugmentedSystem& sys, const DiscretePath& xi,
                     const Eigen::VectorXd& rhs) {
  const int nb = sys.block_dim();
  const int n = sys.steps();
  if (xi.steps() != n) throw DimensionMismatch("path grid must match the assembled system");
  double sum = 0.0;
  long r = sys.start_rows().rows();
  for (int j = 0; j < n; ++j, r += nb) {
    const Eigen::VectorXd row = sys.chain()[static_cast<std::size_t>(j)].C * xi.nodes().col(j) +
                                sys.chain()[static_cast<std::size_t>(j)].D * xi.nodes().col(j + 1) -
                                rhs.segment(r, nb);
    sum += row.squaredNorm();
  }
  return std::sqrt(sum);
}

ConstantSolveEnergy constant_solve_energy(const PairOperator& a_const, const DiscretePath& xi,
                                          const DiscretePath& eta, const Eigen::VectorXd& x,
                                          const Eigen::VectorXd& y) {
  const int n = xi.steps();
  const double h = xi.dt();

  // adapted metric: level-1 mass through the operator, derivative part plain
  double deriv = 0.0;
  for (int j = 0; j + 1 <= n; ++j)
    deriv += (xi.nodes().col(j + 1) - xi.nodes().col(j)).squaredNorm() / h;
  double mass = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double m = (a_const.entries() * xi.nodes().col(k)).squaredNorm();
    mass += (k == 0 || k == n) ? 0.5 * m : m;
  }
  const double p1 = deriv + mass * h;

  double half_x = 0.0, half_y = 0.0;
  const int neg = a_const.negative_count();
  for (int i = 0; i < a_const.dim(); ++i) {
    const double a = a_const.eigenvalues()[i];
    if (a > 0.0)
      half_x += a * x[i - neg] * x[i - neg];
    else
      half_y += -a * y[i] * y[i];
  }
  return {p1, 10.0 * eta.p0_norm_squared() + 4.0 * half_y + 4.0 * half_x};
}

// ---------------------------------------------------------------------------
// Sampled lower-estimate constant

double estimate_sample(const OperatorPath& path, int trials, int grid_n, std::uint64_t seed) {
  check_grid(grid_n);
  const int nd = path.dim();
  const double a = path.window_start(), b = path.window_end();
  const double h = (b - a) / grid_n;

  std::vector<Eigen::MatrixXd> mids(static_cast<std::size_t>(grid_n));
  for (int j = 0; j < grid_n; ++j)
    mids[static_cast<std::size_t>(j)] = path.sample_matrix(a + (j + 0.5) * h);
  const AdaptedInner start_metric = adapted_inner(path.start_operator());
  const AdaptedInner end_metric = adapted_inner(path.end_operator());

  auto ratio_of = [&](const Eigen::MatrixXd& nodes) {
    DiscretePath xi(a, b, nodes, path.growth());
    double resid = 0.0;
    for (int j = 0; j < grid_n; ++j) {
      const Eigen::VectorXd r = (nodes.col(j + 1) - nodes.col(j)) / h +
                                mids[static_cast<std::size_t>(j)] * 0.5 *
                                    (nodes.col(j) + nodes.col(j + 1));
      resid += h * r.squaredNorm();
    }
    const double denom = xi.p0_norm() + std::sqrt(resid) +
                         start_metric.norm_half_signed(nodes.col(0), +1) +
                         end_metric.norm_half_signed(nodes.col(grid_n), -1);
    return denom > 0.0 ? xi.p1_norm() / denom : 0.0;
  };

  double best = 0.0;
  // constant-in-time eigenvector candidates give the plug-in lower bound
  for (int i = 0; i < nd; ++i) {
    Eigen::MatrixXd nodes =
        path.start_operator().eigenvectors().col(i).replicate(1, grid_n + 1);
    best = std::max(best, ratio_of(nodes));
  }
  Rng rng(seed);
  for (int t = 0; t < trials; ++t) {
    Eigen::MatrixXd nodes(nd, grid_n + 1);
    for (int k = 0; k <= grid_n; ++k)
      for (int i = 0; i < nd; ++i) nodes(i, k) = rng.gaussian();
    // one midpoint-averaging smoothing pass
    Eigen::MatrixXd smooth(nd, grid_n + 1);
    smooth.col(0) = 0.5 * (nodes.col(0) + nodes.col(1));
    smooth.col(grid_n) = 0.5 * (nodes.col(grid_n - 1) + nodes.col(grid_n));
    for (int k = 1; k < grid_n; ++k)
      smooth.col(k) = 0.25 * (nodes.col(k - 1) + 2.0 * nodes.col(k) + nodes.col(k + 1));
    best = std::max(best, ratio_of(smooth));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Quantitative invertibility

NeumannResult neumann_invert(const Eigen::MatrixXd& t, const Eigen::MatrixXd& p) {
  if (t.rows() != t.cols()) throw DimensionMismatch("base operator must be square");
  if (p.rows() != t.rows() || p.cols() != t.cols())
    throw DimensionMismatch("perturbation must match the base operator");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd_t(t);
  const double smin = svd_t.singularValues().tail(1)(0);
  if (smin <= 0.0) throw PerturbationTooLarge("base operator is singular");
  const double inv_norm_t = 1.0 / smin;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_p(p);
  const double norm_p = svd_p.singularValues().size() ? svd_p.singularValues()(0) : 0.0;
  if (inv_norm_t * norm_p >= 1.0)
    throw PerturbationTooLarge("||T^-1|| ||P|| = " + std::to_string(inv_norm_t * norm_p) +
                               " >= 1");

  NeumannResult out;
  out.inv_norm_t = inv_norm_t;
  out.norm_p = norm_p;
  out.bound = inv_norm_t / (1.0 - inv_norm_t * norm_p);
  out.inverse = (t + p).partialPivLu().solve(
      Eigen::MatrixXd::Identity(t.rows(), t.cols()));
  Eigen::JacobiSVD<Eigen::MatrixXd> svd_inv(out.inverse);
  out.measured = svd_inv.singularValues()(0);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation map

double evaluation_path_norm(const DiscretePath& xi) {
  const int n = xi.steps();
  const double h = xi.dt();
  double deriv = 0.0;
  for (int j = 0; j + 1 <= n; ++j)
    deriv += (xi.nodes().col(j + 1) - xi.nodes().col(j)).squaredNorm() / h;
  const double mass1 = weighted_mass(xi.nodes(), xi.growth(), 1.0, h);
  const double mass0 = weighted_mass(xi.nodes(), xi.growth(), 0.0, h);
  return std::sqrt(deriv + mass1 + mass0);
}

EvaluationResult evaluation_map(const DiscretePath& xi) {
  if (std::abs(xi.t_begin()) > 1e-12 || std::abs(xi.t_end() - 1.0) > 1e-12)
    throw ValidationError("xi", "evaluation map expects the unit interval");
  EvaluationResult out;
  out.endpoint = xi.nodes().col(0);
  out.half_norm = r_norm(out.endpoint, 0.5, xi.growth());
  out.path_norm = evaluation_path_norm(xi);
  out.ratio = out.path_norm > 0.0 ? out.half_norm / out.path_norm : 0.0;
  out.eps_disc = 10.0 * xi.dt() * std::max(1.0, std::sqrt(xi.growth().max_weight()));
  out.within_bound = out.ratio <= std::sqrt(2.0) + out.eps_disc;
  return out;
}

DiscretePath ev_section(const ScaleVector& x0, const GrowthFunction& gf, int grid_n) {
  if (x0.size() != gf.size()) throw DimensionMismatch("section data must share N");
  if (grid_n < 1) throw ValidationError("grid_n", "need at least one step");
  Eigen::MatrixXd nodes(gf.size(), grid_n + 1);
  for (int k = 0; k <= grid_n; ++k) {
    const double s = static_cast<double>(k) / grid_n;
    for (int i = 0; i < gf.size(); ++i)
      nodes(i, k) = std::exp(-std::sqrt(gf.weight(i)) * s) * x0[i];
  }
  return DiscretePath(0.0, 1.0, std::move(nodes), gf);
}

}  // namespace specflow
