#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace fedpt {

/// Dense real vector of model dimension d. Models, moments, gradients and
/// tracking terms are all ParamVectors. The length is fixed at construction.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t dim, double fill = 0.0) : data_(dim, fill) {}
  ParamVector(std::initializer_list<double> values) : data_(values) {}
  explicit ParamVector(std::vector<double> values) : data_(std::move(values)) {}

  static ParamVector zeros(std::size_t dim) { return ParamVector(dim, 0.0); }

  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }
  std::span<double> span() noexcept { return data_; }
  std::span<const double> span() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  ParamVector& operator+=(const ParamVector& other);
  ParamVector& operator-=(const ParamVector& other);
  ParamVector& operator*=(double s) noexcept;

  /// this += s * other
  ParamVector& axpy(double s, const ParamVector& other);

  bool all_finite() const noexcept;

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<double> data_;
};

ParamVector operator+(ParamVector a, const ParamVector& b);
ParamVector operator-(ParamVector a, const ParamVector& b);
ParamVector operator*(double s, ParamVector a);

/// Throws DimensionError unless a and b have the same length.
void require_same_size(const ParamVector& a, const ParamVector& b, const char* where);

/// Coordinatewise product a ⊙ b.
ParamVector hadamard(const ParamVector& a, const ParamVector& b);

/// Coordinatewise maximum (the AMSGrad running-max primitive).
ParamVector elementwise_max(const ParamVector& a, const ParamVector& b);

/// m / (sqrt(v_hat) + eps) coordinatewise. eps sits outside the square root.
/// Throws DomainError on a negative v_hat entry or nonpositive eps.
ParamVector adam_direction(const ParamVector& m, const ParamVector& v_hat, double eps);

double dot(const ParamVector& a, const ParamVector& b);
double squared_norm(const ParamVector& a);
double norm(const ParamVector& a);
double max_abs_diff(const ParamVector& a, const ParamVector& b);

/// Mean of `vectors` in the given order. The sum is accumulated in extended
/// precision and divided (not multiplied by a reciprocal), so averaging k
/// bitwise-identical vectors returns that vector exactly.
ParamVector ordered_mean(std::span<const ParamVector> vectors);

/// Sum of `vectors` in the given order with an extended-precision accumulator,
/// divided by `divisor` before rounding back to double.
ParamVector ordered_sum_divided(std::span<const ParamVector* const> vectors,
                                std::size_t dim, double divisor);

}  // namespace fedpt
