#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "specflow/errors.hpp"

#include <nlohmann/json_fwd.hpp>

namespace specflow {

/// Coefficient vector with respect to the scale basis. The inclusion between
/// scale levels is the identity on coefficients; only the inner products
/// change with the level r.
using ScaleVector = Eigen::VectorXd;

/// Weight sequence h(1) <= h(2) <= ... <= h(N), all positive, defining the
/// truncated weighted-l2 scale: the level-r inner product weights coefficient
/// nu by h(nu)^r. Shipped families: polynomial h(nu) = nu^p and geometric
/// h(nu) = base^nu, plus explicit weight lists.
class GrowthFunction {
 public:
  enum class Kind { Poly, Geom, Explicit };

  static GrowthFunction poly(int n, double exponent);
  static GrowthFunction geom(int n, double base = 2.0);
  static GrowthFunction explicit_weights(std::vector<double> values);

  int size() const { return static_cast<int>(values_.size()); }

  /// Weight of coefficient i (0-based; h(i+1) in 1-based convention).
  double weight(int i) const { return values_[static_cast<std::size_t>(i)]; }
  const std::vector<double>& values() const { return values_; }
  double max_weight() const { return values_.back(); }

  Kind kind() const { return kind_; }
  double param() const { return param_; }

  bool operator==(const GrowthFunction& o) const { return values_ == o.values_; }

  nlohmann::json to_json() const;
  static GrowthFunction from_json(const nlohmann::json& j);

 private:
  GrowthFunction(Kind kind, double param, std::vector<double> values);

  Kind kind_;
  double param_;
  std::vector<double> values_;
};

/// Level-r inner product sum_nu h(nu)^r u_nu v_nu, accumulated with
/// compensated summation.
double r_inner(const ScaleVector& u, const ScaleVector& v, double r,
               const GrowthFunction& gf);

double r_norm(const ScaleVector& u, double r, const GrowthFunction& gf);

/// Norm-preserving map from level r to level s: coefficient nu is scaled by
/// h(nu)^{(r-s)/2}.
ScaleVector shift_isometry(const ScaleVector& u, double r, double s,
                           const GrowthFunction& gf);

/// Plain coefficient pairing sum_nu u_nu v_nu, the insertion of u into the
/// level-0 inner product. As a pairing of level -r against level r it
/// realizes the duality isometry.
double flat_apply(const ScaleVector& u, const ScaleVector& v);

/// Compensated (Kahan) dot product of two raw coefficient arrays.
double kahan_dot(const double* a, const double* b, int n);

}  // namespace specflow
