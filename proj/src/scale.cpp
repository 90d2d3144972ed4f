#include "specflow/scale.hpp"

#include <cmath>
#include <utility>

#include <nlohmann/json.hpp>

namespace specflow {

GrowthFunction::GrowthFunction(Kind kind, double param, std::vector<double> values)
    : kind_(kind), param_(param), values_(std::move(values)) {
  if (values_.empty()) throw ValidationError("growth.N", "truncation dimension must be >= 1");
  double prev = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    const double h = values_[i];
    if (!(h > 0.0)) throw ValidationError("growth.values", "weights must be positive");
    if (h < prev) throw ValidationError("growth.values", "weights must be nondecreasing");
    prev = h;
  }
}

GrowthFunction GrowthFunction::poly(int n, double exponent) {
  if (n < 1) throw ValidationError("growth.N", "truncation dimension must be >= 1");
  if (exponent < 0.0) throw ValidationError("growth.param", "polynomial exponent must be >= 0");
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = std::pow(i + 1.0, exponent);
  return GrowthFunction(Kind::Poly, exponent, std::move(v));
}

GrowthFunction GrowthFunction::geom(int n, double base) {
  if (n < 1) throw ValidationError("growth.N", "truncation dimension must be >= 1");
  if (base < 1.0) throw ValidationError("growth.param", "geometric base must be >= 1");
  std::vector<double> v(static_cast<std::size_t>(n));
  double h = base;
  for (int i = 0; i < n; ++i, h *= base) v[static_cast<std::size_t>(i)] = h;
  return GrowthFunction(Kind::Geom, base, std::move(v));
}

GrowthFunction GrowthFunction::explicit_weights(std::vector<double> values) {
  return GrowthFunction(Kind::Explicit, 0.0, std::move(values));
}

nlohmann::json GrowthFunction::to_json() const {
  nlohmann::json j;
  switch (kind_) {
    case Kind::Poly:
      j["kind"] = "poly";
      j["param"] = param_;
      break;
    case Kind::Geom:
      j["kind"] = "geom";
      j["param"] = param_;
      break;
    case Kind::Explicit:
      j["kind"] = "explicit";
      j["values"] = values_;
      break;
  }
  j["N"] = size();
  return j;
}

GrowthFunction GrowthFunction::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("growth", "expected an object");
  const std::string kind = j.value("kind", std::string("poly"));
  const int n = j.value("N", 0);
  if (kind == "poly") {
    if (n < 1) throw ValidationError("growth.N", "missing or invalid truncation dimension");
    return poly(n, j.value("param", 1.0));
  }
  if (kind == "geom") {
    if (n < 1) throw ValidationError("growth.N", "missing or invalid truncation dimension");
    return geom(n, j.value("param", 2.0));
  }
  if (kind == "explicit") {
    if (!j.contains("values") || !j["values"].is_array())
      throw ValidationError("growth.values", "explicit growth needs a weight array");
    auto v = j["values"].get<std::vector<double>>();
    if (n > 0 && n != static_cast<int>(v.size()))
      throw ValidationError("growth.N", "N disagrees with length of values");
    return explicit_weights(std::move(v));
  }
  throw ValidationError("growth.kind", "unknown kind '" + kind + "'");
}

double kahan_dot(const double* a, const double* b, int n) {
  double sum = 0.0, comp = 0.0;
  for (int i = 0; i < n; ++i) {
    const double term = a[i] * b[i] - comp;
    const double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
  }
  return sum;
}

namespace {

void check_dims(const ScaleVector& u, const ScaleVector& v, const GrowthFunction& gf) {
  if (u.size() != v.size() || u.size() != gf.size())
    throw DimensionMismatch("scale vectors and growth function must share N");
}

double weight_pow(double h, double r) {
  if (r == 0.0) return 1.0;
  if (r == 1.0) return h;
  if (r == 0.5) return std::sqrt(h);
  if (r == -1.0) return 1.0 / h;
  return std::pow(h, r);
}

}  // namespace

double r_inner(const ScaleVector& u, const ScaleVector& v, double r,
               const GrowthFunction& gf) {
  check_dims(u, v, gf);
  double sum = 0.0, comp = 0.0;
  for (int i = 0; i < u.size(); ++i) {
    const double term = weight_pow(gf.weight(i), r) * u[i] * v[i] - comp;
    const double next = sum + term;
    comp = (next - sum) - term;
    sum = next;
  }
  return sum;
}

double r_norm(const ScaleVector& u, double r, const GrowthFunction& gf) {
  return std::sqrt(r_inner(u, u, r, gf));
}

ScaleVector shift_isometry(const ScaleVector& u, double r, double s,
                           const GrowthFunction& gf) {
  if (u.size() != gf.size())
    throw DimensionMismatch("scale vector and growth function must share N");
  if (r == s) return u;
  ScaleVector out(u.size());
  const double e = 0.5 * (r - s);
  for (int i = 0; i < u.size(); ++i) out[i] = u[i] * weight_pow(gf.weight(i), e);
  return out;
}

double flat_apply(const ScaleVector& u, const ScaleVector& v) {
  if (u.size() != v.size()) throw DimensionMismatch("flat pairing needs equal lengths");
  return kahan_dot(u.data(), v.data(), static_cast<int>(u.size()));
}

}  // namespace specflow
