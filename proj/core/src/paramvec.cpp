#include "fedpt/paramvec.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fedpt/errors.hpp"

namespace fedpt {

void require_same_size(const ParamVector& a, const ParamVector& b, const char* where) {
  if (a.size() != b.size()) {
    throw DimensionError(std::string(where) + ": length mismatch (" + std::to_string(a.size()) +
                         " vs " + std::to_string(b.size()) + ")");
  }
}

ParamVector& ParamVector::operator+=(const ParamVector& other) {
  require_same_size(*this, other, "operator+=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

ParamVector& ParamVector::operator-=(const ParamVector& other) {
  require_same_size(*this, other, "operator-=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

ParamVector& ParamVector::operator*=(double s) noexcept {
  for (double& x : data_) x *= s;
  return *this;
}

ParamVector& ParamVector::axpy(double s, const ParamVector& other) {
  require_same_size(*this, other, "axpy");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * other.data_[i];
  return *this;
}

bool ParamVector::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

ParamVector operator+(ParamVector a, const ParamVector& b) { return a += b; }
ParamVector operator-(ParamVector a, const ParamVector& b) { return a -= b; }
ParamVector operator*(double s, ParamVector a) { return a *= s; }

ParamVector hadamard(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b, "hadamard");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * b[i];
  return out;
}

ParamVector elementwise_max(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b, "elementwise_max");
  ParamVector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::max(a[i], b[i]);
  return out;
}

ParamVector adam_direction(const ParamVector& m, const ParamVector& v_hat, double eps) {
  require_same_size(m, v_hat, "adam_direction");
  if (!(eps > 0.0)) throw DomainError("adam_direction: eps must be positive");
  ParamVector out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (v_hat[i] < 0.0) {
      throw DomainError("adam_direction: negative second moment at coordinate " +
                        std::to_string(i));
    }
    out[i] = m[i] / (std::sqrt(v_hat[i]) + eps);
  }
  return out;
}

double dot(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(const ParamVector& a) { return dot(a, a); }

double norm(const ParamVector& a) { return std::sqrt(squared_norm(a)); }

double max_abs_diff(const ParamVector& a, const ParamVector& b) {
  require_same_size(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

ParamVector ordered_sum_divided(std::span<const ParamVector* const> vectors, std::size_t dim,
                                double divisor) {
  std::vector<long double> acc(dim, 0.0L);
  for (const ParamVector* v : vectors) {
    if (v->size() != dim) throw DimensionError("ordered_sum_divided: length mismatch");
    for (std::size_t i = 0; i < dim; ++i) acc[i] += static_cast<long double>((*v)[i]);
  }
  ParamVector out(dim);
  const long double div = divisor;
  for (std::size_t i = 0; i < dim; ++i) out[i] = static_cast<double>(acc[i] / div);
  return out;
}

ParamVector ordered_mean(std::span<const ParamVector> vectors) {
  if (vectors.empty()) throw DimensionError("ordered_mean: no vectors");
  std::vector<const ParamVector*> ptrs;
  ptrs.reserve(vectors.size());
  for (const auto& v : vectors) ptrs.push_back(&v);
  return ordered_sum_divided(ptrs, vectors.front().size(), static_cast<double>(vectors.size()));
}

}  // namespace fedpt
