#include "specflow/operators.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

namespace specflow {

PairOperator::PairOperator(Eigen::MatrixXd entries, GrowthFunction gf)
    : entries_(std::move(entries)), gf_(std::move(gf)) {
  if (entries_.rows() != entries_.cols())
    throw DimensionMismatch("pair operator must be square");
  if (entries_.rows() != gf_.size())
    throw DimensionMismatch("pair operator and growth function must share N");

  const double scale = entries_.cwiseAbs().maxCoeff();
  const double skew = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
  if (scale > 0.0 && skew > 1e-10 * scale)
    throw ValidationError("operator", "matrix is not symmetric in the level-0 inner product");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(entries_);
  if (eig.info() != Eigen::Success)
    throw Error("eigendecomposition failed");
  evals_ = eig.eigenvalues();
  evecs_ = eig.eigenvectors();

  inv_margin_ = evals_.cwiseAbs().minCoeff();
  spectral_radius_ = evals_.cwiseAbs().maxCoeff();
  const double thr = invertibility_threshold();
  for (int i = 0; i < evals_.size(); ++i) {
    if (std::abs(evals_[i]) <= thr)
      ++zeros_;
    else if (evals_[i] < 0.0)
      ++negatives_;
  }
}

double PairOperator::invertibility_threshold() const {
  return 1e-8 * std::max(1.0, spectral_radius_);
}

void PairOperator::require_invertible(const char* who) const {
  if (!invertible())
    throw NotInvertible(std::string(who) + ": invertibility margin " +
                        std::to_string(inv_margin_) + " below threshold");
}

std::vector<LabeledEigenvalue> PairOperator::spectrum() const {
  const double thr = invertibility_threshold();
  std::vector<LabeledEigenvalue> out(static_cast<std::size_t>(dim()));
  // ascending order: the most negative eigenvalue carries the most negative label
  int neg = 0;
  for (int i = 0; i < dim(); ++i)
    if (evals_[i] < -thr) ++neg;
  int next_label = -neg;
  int pos_label = 1;
  for (int i = 0; i < dim(); ++i) {
    int label = 0;
    if (evals_[i] < -thr)
      label = next_label++;
    else if (evals_[i] > thr)
      label = pos_label++;
    out[static_cast<std::size_t>(i)] = {label, evals_[i]};
  }
  return out;
}

SpectralType PairOperator::type_tag() const {
  const int neg = negative_count();
  const int pos = positive_count();
  if (neg < pos) return SpectralType::Morse;
  if (pos < neg) return SpectralType::CoMorse;
  return SpectralType::Floer;
}

PairOperator PairOperator::adjoint_view() const {
  return PairOperator(entries_.transpose(), gf_);
}

PairOperator PairOperator::shifted(double lambda) const {
  Eigen::MatrixXd m = entries_;
  m.diagonal().array() -= lambda;
  return PairOperator(std::move(m), gf_);
}

SpectralProjection spectral_projection(const PairOperator& a, int sign) {
  a.require_invertible("spectral_projection");
  const int n = a.dim();
  std::vector<int> pos_idx, neg_idx;
  for (int i = 0; i < n; ++i)
    (a.eigenvalues()[i] > 0.0 ? pos_idx : neg_idx).push_back(i);

  SpectralProjection p;
  p.sign = sign > 0 ? +1 : -1;
  const auto& idx = (sign > 0) ? pos_idx : neg_idx;
  p.basis_columns.resize(n, static_cast<int>(idx.size()));
  for (std::size_t c = 0; c < idx.size(); ++c)
    p.basis_columns.col(static_cast<int>(c)) = a.eigenvectors().col(idx[c]);

  // pi_+ is assembled from its eigenvectors; pi_- as the exact complement so
  // that pi_+ + pi_- is the identity without roundoff.
  Eigen::MatrixXd pos_basis(n, static_cast<int>(pos_idx.size()));
  for (std::size_t c = 0; c < pos_idx.size(); ++c)
    pos_basis.col(static_cast<int>(c)) = a.eigenvectors().col(pos_idx[c]);
  const Eigen::MatrixXd pos = pos_basis * pos_basis.transpose();
  p.matrix = (sign > 0) ? pos : Eigen::MatrixXd(Eigen::MatrixXd::Identity(n, n) - pos);
  return p;
}

AdaptedInner::AdaptedInner(const PairOperator& a)
    : entries_(a.entries()), evals_(a.eigenvalues()), evecs_(a.eigenvectors()) {}

AdaptedInner adapted_inner(const PairOperator& a) {
  a.require_invertible("adapted_inner");
  return AdaptedInner(a);
}

double AdaptedInner::inner1(const ScaleVector& u, const ScaleVector& v) const {
  if (u.size() != entries_.rows() || v.size() != entries_.rows())
    throw DimensionMismatch("adapted inner product dimension mismatch");
  const Eigen::VectorXd au = entries_ * u;
  const Eigen::VectorXd av = entries_ * v;
  return kahan_dot(au.data(), av.data(), static_cast<int>(au.size()));
}

double AdaptedInner::norm1(const ScaleVector& u) const { return std::sqrt(inner1(u, u)); }

double AdaptedInner::inner_half(const ScaleVector& u, const ScaleVector& v) const {
  if (u.size() != entries_.rows() || v.size() != entries_.rows())
    throw DimensionMismatch("adapted inner product dimension mismatch");
  const Eigen::VectorXd cu = evecs_.transpose() * u;
  const Eigen::VectorXd cv = evecs_.transpose() * v;
  double sum = 0.0, comp = 0.0;
  for (int i = 0; i < cu.size(); ++i) {
    const double term = std::abs(evals_[i]) * cu[i] * cv[i] - comp;
    const double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
  }
  return sum;
}

double AdaptedInner::norm_half(const ScaleVector& u) const {
  return std::sqrt(inner_half(u, u));
}

double AdaptedInner::norm_half_signed(const ScaleVector& u, int sign) const {
  const Eigen::VectorXd cu = evecs_.transpose() * u;
  double sum = 0.0;
  for (int i = 0; i < cu.size(); ++i)
    if ((sign > 0) == (evals_[i] > 0.0)) sum += std::abs(evals_[i]) * cu[i] * cu[i];
  return std::sqrt(sum);
}

int spectral_content(const PairOperator& a, double lam, double mu) {
  const double thr = a.invertibility_threshold();
  for (double x : {lam, mu}) {
    const double dist = (a.eigenvalues().array() - x).abs().minCoeff();
    if (dist <= thr)
      throw ShiftOnSpectrum("spectral_content: shift " + std::to_string(x) +
                            " within margin of the spectrum");
  }
  if (lam > mu) return -spectral_content(a, mu, lam);
  int count = 0;
  for (int i = 0; i < a.dim(); ++i)
    if (a.eigenvalues()[i] > lam && a.eigenvalues()[i] < mu) ++count;
  return count;
}

double resolvent_shift(const PairOperator& a, double lo, double hi) {
  if (!(lo <= hi)) throw WindowTooTight("resolvent_shift: empty window");
  const Eigen::VectorXd& ev = a.eigenvalues();
  auto dist = [&](double x) { return (ev.array() - x).abs().minCoeff(); };

  // the distance-to-spectrum function is piecewise linear; its maximum over
  // a closed window sits at a window endpoint or a spectral-gap midpoint.
  // Ties prefer gap midpoints over window endpoints, then the smallest point.
  struct Candidate {
    double point;
    bool midpoint;
  };
  std::vector<Candidate> candidates{{lo, false}, {hi, false}};
  for (int i = 0; i + 1 < ev.size(); ++i) {
    const double mid = 0.5 * (ev[i] + ev[i + 1]);
    if (mid > lo && mid < hi) candidates.push_back({mid, true});
  }
  double best = lo, best_dist = -1.0;
  bool best_mid = false;
  for (const Candidate& c : candidates) {
    const double d = dist(c.point);
    const bool better = d > best_dist ||
                        (d == best_dist && c.midpoint && !best_mid) ||
                        (d == best_dist && c.midpoint == best_mid && c.point < best);
    if (better) {
      best = c.point;
      best_dist = d;
      best_mid = c.midpoint;
    }
  }
  if (best_dist < a.invertibility_threshold())
    throw WindowTooTight("resolvent_shift: no point of the window has margin above threshold");
  return best;
}

}  // namespace specflow
