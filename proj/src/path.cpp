#include "specflow/path.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

namespace specflow {

namespace {

double spectral_norm(const Eigen::MatrixXd& m) {
  // symmetric matrices throughout, so the spectral norm is the eigenvalue radius
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

OperatorPath::OperatorPath(IntervalKind kind, double horizon, MatrixSampler sampler,
                           GrowthFunction gf)
    : kind_(kind), horizon_(horizon), sampler_(std::move(sampler)), gf_(std::move(gf)) {
  if (!(horizon_ > 0.0)) throw ValidationError("path.T", "horizon must be positive");
}

double OperatorPath::window_start() const {
  switch (kind_) {
    case IntervalKind::Finite:
    case IntervalKind::Line:
      return -horizon_;
    case IntervalKind::Forward:
      return 0.0;
    case IntervalKind::Backward:
      return -horizon_;
  }
  return 0.0;
}

double OperatorPath::window_end() const {
  switch (kind_) {
    case IntervalKind::Finite:
    case IntervalKind::Line:
    case IntervalKind::Forward:
      return horizon_;
    case IntervalKind::Backward:
      return 0.0;
  }
  return 0.0;
}

const PairOperator& OperatorPath::asymptotic_plus() const {
  if (!asym_plus_) throw Error("path kind has no forward asymptotic operator");
  return *asym_plus_;
}

const PairOperator& OperatorPath::asymptotic_minus() const {
  if (!asym_minus_) throw Error("path kind has no backward asymptotic operator");
  return *asym_minus_;
}

namespace {

// Tail deviation sup ||A(s) - asym|| measured on dyadic sample points beyond
// the tail radius, on one or both sides.
double measure_tail(const MatrixSampler& sampler, const Eigen::MatrixXd& asym, double tail,
                    int side) {
  double worst = 0.0;
  for (double f : {1.0, 1.5, 2.0, 4.0, 8.0, 16.0}) {
    const double s = side * tail * f;
    worst = std::max(worst, spectral_norm(sampler(s) - asym));
  }
  return worst;
}

}  // namespace

OperatorPath OperatorPath::finite(double horizon, MatrixSampler sampler, GrowthFunction gf) {
  OperatorPath p(IntervalKind::Finite, horizon, std::move(sampler), std::move(gf));
  p.start_ = std::make_shared<PairOperator>(p.sampler_(-horizon), p.gf_);
  p.end_ = std::make_shared<PairOperator>(p.sampler_(horizon), p.gf_);
  p.validate_endpoints();
  return p;
}

OperatorPath OperatorPath::forward(double tail_radius, MatrixSampler sampler, GrowthFunction gf,
                                   Eigen::MatrixXd asymptotic_plus) {
  OperatorPath p(IntervalKind::Forward, tail_radius, std::move(sampler), std::move(gf));
  p.asym_plus_ = std::make_shared<PairOperator>(std::move(asymptotic_plus), p.gf_);
  p.start_ = std::make_shared<PairOperator>(p.sampler_(0.0), p.gf_);
  p.end_ = std::make_shared<PairOperator>(p.sampler_(tail_radius), p.gf_);
  p.tail_epsilon_ = measure_tail(p.sampler_, p.asym_plus_->entries(), tail_radius, +1);
  p.validate_endpoints();
  return p;
}

OperatorPath OperatorPath::backward(double tail_radius, MatrixSampler sampler, GrowthFunction gf,
                                    Eigen::MatrixXd asymptotic_minus) {
  OperatorPath p(IntervalKind::Backward, tail_radius, std::move(sampler), std::move(gf));
  p.asym_minus_ = std::make_shared<PairOperator>(std::move(asymptotic_minus), p.gf_);
  p.start_ = std::make_shared<PairOperator>(p.sampler_(-tail_radius), p.gf_);
  p.end_ = std::make_shared<PairOperator>(p.sampler_(0.0), p.gf_);
  p.tail_epsilon_ = measure_tail(p.sampler_, p.asym_minus_->entries(), tail_radius, -1);
  p.validate_endpoints();
  return p;
}

OperatorPath OperatorPath::line(double tail_radius, MatrixSampler sampler, GrowthFunction gf,
                                Eigen::MatrixXd asymptotic_minus,
                                Eigen::MatrixXd asymptotic_plus) {
  OperatorPath p(IntervalKind::Line, tail_radius, std::move(sampler), std::move(gf));
  p.asym_minus_ = std::make_shared<PairOperator>(std::move(asymptotic_minus), p.gf_);
  p.asym_plus_ = std::make_shared<PairOperator>(std::move(asymptotic_plus), p.gf_);
  p.start_ = std::make_shared<PairOperator>(p.sampler_(-tail_radius), p.gf_);
  p.end_ = std::make_shared<PairOperator>(p.sampler_(tail_radius), p.gf_);
  p.tail_epsilon_ = std::max(measure_tail(p.sampler_, p.asym_minus_->entries(), tail_radius, -1),
                             measure_tail(p.sampler_, p.asym_plus_->entries(), tail_radius, +1));
  p.validate_endpoints();
  return p;
}

void OperatorPath::validate_endpoints() const {
  switch (kind_) {
    case IntervalKind::Finite:
      if (!start_->invertible() || !end_->invertible())
        throw EndpointNotInvertible("finite path endpoints must be invertible");
      break;
    case IntervalKind::Forward: {
      if (!start_->invertible())
        throw EndpointNotInvertible("forward path needs invertible A(0)");
      if (!asym_plus_->invertible())
        throw EndpointNotInvertible("forward path needs an invertible asymptotic operator");
      if (tail_epsilon_ >= 0.5 * asym_plus_->inv_margin())
        throw TailNotSettled("tail deviation exceeds half the asymptotic margin");
      break;
    }
    case IntervalKind::Backward: {
      if (!end_->invertible())
        throw EndpointNotInvertible("backward path needs invertible A(0)");
      if (!asym_minus_->invertible())
        throw EndpointNotInvertible("backward path needs an invertible asymptotic operator");
      if (tail_epsilon_ >= 0.5 * asym_minus_->inv_margin())
        throw TailNotSettled("tail deviation exceeds half the asymptotic margin");
      break;
    }
    case IntervalKind::Line: {
      if (!asym_minus_->invertible() || !asym_plus_->invertible())
        throw EndpointNotInvertible("line path needs invertible asymptotic operators");
      const double margin = std::min(asym_minus_->inv_margin(), asym_plus_->inv_margin());
      if (tail_epsilon_ >= 0.5 * margin)
        throw TailNotSettled("tail deviation exceeds half the asymptotic margin");
      break;
    }
  }
  // the window endpoints of every kind must themselves be usable as boundary operators
  if (!start_->invertible() || !end_->invertible())
    throw EndpointNotInvertible("window endpoint operator not invertible");
}

int spectral_flow(const OperatorPath& path) {
  switch (path.kind()) {
    case IntervalKind::Finite:
      return path.start_operator().negative_count() - path.end_operator().negative_count();
    case IntervalKind::Forward:
      return path.start_operator().negative_count() - path.asymptotic_plus().negative_count();
    case IntervalKind::Backward: {
      // reflected sign-flipped forward path; the two sign changes cancel
      const PairOperator at0(-path.sample_matrix(0.0), path.growth());
      const PairOperator at_inf(Eigen::MatrixXd(-path.asymptotic_minus().entries()),
                                path.growth());
      return at0.negative_count() - at_inf.negative_count();
    }
    case IntervalKind::Line:
      return path.start_operator().negative_count() - path.end_operator().negative_count();
  }
  return 0;
}

int BranchTrace::net_crossings() const {
  int net = 0;
  for (const auto& c : crossings) net += c.direction;
  return net;
}

BranchTrace branch_trace(const OperatorPath& path, int grid_points) {
  if (grid_points < 2) throw ValidationError("grid_n", "branch trace needs at least 2 samples");
  const int n = path.dim();
  const double a = path.window_start(), b = path.window_end();

  BranchTrace tr;
  tr.grid.resize(grid_points);
  tr.branches.resize(n + 1, grid_points);

  std::vector<int> neg_counts(static_cast<std::size_t>(grid_points));
  for (int k = 0; k < grid_points; ++k) {
    const double t = a + (b - a) * k / (grid_points - 1);
    tr.grid[k] = t;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(path.sample_matrix(t),
                                                       Eigen::EigenvaluesOnly);
    Eigen::VectorXd vals(n + 1);
    vals.head(n) = eig.eigenvalues();
    vals[n] = 0.0;
    std::sort(vals.data(), vals.data() + n + 1);
    tr.branches.col(k) = vals;

    int neg = 0;
    bool ambiguous = false;
    for (int i = 0; i < n; ++i) {
      if (eig.eigenvalues()[i] < 0.0) ++neg;
      if (std::abs(eig.eigenvalues()[i]) < kCrossingThreshold) ambiguous = true;
    }
    neg_counts[static_cast<std::size_t>(k)] = neg;
    if (ambiguous) tr.ambiguous_times.push_back(t);
  }

  const int start_neg = neg_counts.front();
  tr.labels.resize(static_cast<std::size_t>(n + 1));
  for (int i = 0; i <= n; ++i) tr.labels[static_cast<std::size_t>(i)] = i - start_neg;

  // signed crossing events from the change in negative counts between samples
  for (int k = 0; k + 1 < grid_points; ++k) {
    const int delta = neg_counts[static_cast<std::size_t>(k)] -
                      neg_counts[static_cast<std::size_t>(k + 1)];
    const double tmid = 0.5 * (tr.grid[k] + tr.grid[k + 1]);
    for (int c = 0; c < std::abs(delta); ++c)
      tr.crossings.push_back({tmid, delta > 0 ? +1 : -1});
  }
  return tr;
}

namespace {

// sorted merge of two weight lists plus the permutation taking the
// concatenated coordinates to the merged ones
struct MergedScale {
  GrowthFunction gf;
  std::vector<int> perm;  // merged index -> concatenated index
};

MergedScale merge_growth(const GrowthFunction& g1, const GrowthFunction& g2) {
  const int n1 = g1.size(), n2 = g2.size();
  std::vector<int> idx(static_cast<std::size_t>(n1 + n2));
  std::iota(idx.begin(), idx.end(), 0);
  auto weight = [&](int i) { return i < n1 ? g1.weight(i) : g2.weight(i - n1); };
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return weight(a) < weight(b); });
  std::vector<double> w(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) w[i] = weight(idx[i]);
  return {GrowthFunction::explicit_weights(std::move(w)), std::move(idx)};
}

Eigen::MatrixXd permuted_block_diag(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                                    const std::vector<int>& perm) {
  const int n1 = static_cast<int>(a.rows());
  const int n = n1 + static_cast<int>(b.rows());
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n, n);
  auto entry = [&](int i, int j) -> double {
    if (i < n1 && j < n1) return a(i, j);
    if (i >= n1 && j >= n1) return b(i - n1, j - n1);
    return 0.0;
  };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out(i, j) = entry(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  return out;
}

}  // namespace

OperatorPath direct_sum(const OperatorPath& p1, const OperatorPath& p2) {
  if (p1.kind() != p2.kind())
    throw ValidationError("direct_sum", "interval kinds must match");
  if (p1.horizon() != p2.horizon())
    throw ValidationError("direct_sum", "horizons must match");

  MergedScale merged = merge_growth(p1.growth(), p2.growth());
  auto perm = merged.perm;
  auto s1 = p1;  // copies keep the summands alive inside the sampler
  auto s2 = p2;
  MatrixSampler sampler = [s1, s2, perm](double s) {
    return permuted_block_diag(s1.sample_matrix(s), s2.sample_matrix(s), perm);
  };

  switch (p1.kind()) {
    case IntervalKind::Finite:
      return OperatorPath::finite(p1.horizon(), std::move(sampler), merged.gf);
    case IntervalKind::Forward:
      return OperatorPath::forward(
          p1.horizon(), std::move(sampler), merged.gf,
          permuted_block_diag(p1.asymptotic_plus().entries(), p2.asymptotic_plus().entries(),
                              perm));
    case IntervalKind::Backward:
      return OperatorPath::backward(
          p1.horizon(), std::move(sampler), merged.gf,
          permuted_block_diag(p1.asymptotic_minus().entries(), p2.asymptotic_minus().entries(),
                              perm));
    case IntervalKind::Line:
      return OperatorPath::line(
          p1.horizon(), std::move(sampler), merged.gf,
          permuted_block_diag(p1.asymptotic_minus().entries(), p2.asymptotic_minus().entries(),
                              perm),
          permuted_block_diag(p1.asymptotic_plus().entries(), p2.asymptotic_plus().entries(),
                              perm));
  }
  throw Error("unreachable");
}

OperatorPath concatenate(const OperatorPath& left, const OperatorPath& right) {
  if (left.kind() != IntervalKind::Finite || right.kind() != IntervalKind::Finite)
    throw ValidationError("concatenate", "both pieces must be finite paths");
  if (!(left.growth() == right.growth()))
    throw ValidationError("concatenate", "growth functions must match");

  const double t1 = left.horizon(), t2 = right.horizon();
  const Eigen::MatrixXd jl = left.sample_matrix(t1);
  const Eigen::MatrixXd jr = right.sample_matrix(-t2);
  const double scale = std::max(1.0, jl.cwiseAbs().maxCoeff());
  if ((jl - jr).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw MismatchAtJunction("paths disagree at the junction");
  if (!PairOperator(jl, left.growth()).invertible())
    throw JunctionNotInvertible("junction operator not invertible");

  auto l = left;
  auto r = right;
  const double shift = t1 - t2;  // junction time inside the glued window
  MatrixSampler sampler = [l, r, shift, t1, t2](double s) {
    return s <= shift ? l.sample_matrix(s + t2) : r.sample_matrix(s - t1);
  };
  return OperatorPath::finite(t1 + t2, std::move(sampler), left.growth());
}

OperatorPath subpath(const OperatorPath& path, double a, double b) {
  if (!(a < b)) throw ValidationError("subpath", "window must satisfy a < b");
  if (a < path.window_start() - 1e-12 || b > path.window_end() + 1e-12)
    throw ValidationError("subpath", "window not contained in the path domain");
  auto p = path;
  const double mid = 0.5 * (a + b);
  MatrixSampler sampler = [p, mid](double s) { return p.sample_matrix(s + mid); };
  return OperatorPath::finite(0.5 * (b - a), std::move(sampler), path.growth());
}

MatrixSampler keyframe_sampler(std::vector<double> times, std::vector<Eigen::MatrixXd> frames) {
  if (times.size() != frames.size() || times.size() < 2)
    throw ValidationError("path.keyframes", "need matching times and matrices, at least two");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw ValidationError("path.keyframes", "times must be strictly increasing");
  return [times = std::move(times), frames = std::move(frames)](double s) -> Eigen::MatrixXd {
    if (s <= times.front()) return frames.front();
    if (s >= times.back()) return frames.back();
    std::size_t hi = 1;
    while (times[hi] < s) ++hi;
    const double u = (s - times[hi - 1]) / (times[hi] - times[hi - 1]);
    return (1.0 - u) * frames[hi - 1] + u * frames[hi];
  };
}

MatrixSampler arctan_sampler() {
  return [](double s) {
    Eigen::MatrixXd m(1, 1);
    m(0, 0) = std::atan(s);
    return m;
  };
}

MatrixSampler affine_sampler(Eigen::MatrixXd a0, Eigen::MatrixXd a1) {
  return [a0 = std::move(a0), a1 = std::move(a1)](double s) -> Eigen::MatrixXd {
    return a0 + s * a1;
  };
}

MatrixSampler poly_sampler(std::vector<Eigen::MatrixXd> coefficients) {
  if (coefficients.empty()) throw ValidationError("path.poly", "need at least one coefficient");
  return [coefficients = std::move(coefficients)](double s) -> Eigen::MatrixXd {
    Eigen::MatrixXd acc = coefficients.back();
    for (std::size_t i = coefficients.size() - 1; i-- > 0;) acc = coefficients[i] + s * acc;
    return acc;
  };
}

}  // namespace specflow
