#pragma once

// Scalar-generic probability primitives. Everything here is header-only and
// templated on the scalar type so the same code serves double evaluation and
// long double cross-checks in tests.

#include <Eigen/Core>

#include <cmath>
#include <limits>
#include <numbers>
#include <span>

#include "lrvi/errors.hpp"

namespace lrvi {

template <typename Scalar>
constexpr Scalar kNegInf = -std::numeric_limits<Scalar>::infinity();

template <typename Scalar>
Scalar log_factorial(int n) {
  using std::lgamma;
  return lgamma(static_cast<Scalar>(n) + Scalar(1));
}

template <typename Scalar>
Scalar log_binomial_coefficient(int n, int h) {
  return log_factorial<Scalar>(n) - log_factorial<Scalar>(h) - log_factorial<Scalar>(n - h);
}

// log f_B(h; n, p) with the 0·log 0 = 0 convention at p ∈ {0, 1}.
template <typename Scalar>
Scalar log_binomial_pdf(int h, int n, Scalar p) {
  if (n < 0 || h < 0 || h > n) throw DomainError("binomial_pdf: h outside [0, n]");
  if (!(p >= Scalar(0) && p <= Scalar(1))) throw DomainError("binomial_pdf: p outside [0, 1]");
  using std::log;
  Scalar out = log_binomial_coefficient<Scalar>(n, h);
  if (h > 0) {
    if (p == Scalar(0)) return kNegInf<Scalar>;
    out += h * log(p);
  }
  if (n - h > 0) {
    if (p == Scalar(1)) return kNegInf<Scalar>;
    out += (n - h) * log(Scalar(1) - p);
  }
  return out;
}

template <typename Scalar>
Scalar binomial_pdf(int h, int n, Scalar p) {
  using std::exp;
  return exp(log_binomial_pdf<Scalar>(h, n, p));
}

// Log of the multinomial pmf f_M(counts; n, p), n = sum(counts).
template <typename DerivedH, typename DerivedP>
typename DerivedP::Scalar log_multinomial_pdf(const Eigen::MatrixBase<DerivedH>& counts,
                                              const Eigen::MatrixBase<DerivedP>& p) {
  using Scalar = typename DerivedP::Scalar;
  using std::abs;
  using std::log;
  if (counts.size() != p.size()) throw DomainError("multinomial_pdf: length mismatch");
  if ((p.array() < Scalar(0)).any() || abs(p.sum() - Scalar(1)) > Scalar(1e-9)) {
    throw DomainError("multinomial_pdf: p is not a probability vector");
  }
  int n = 0;
  for (Eigen::Index v = 0; v < counts.size(); ++v) {
    if (counts(v) < 0) throw DomainError("multinomial_pdf: negative count");
    n += static_cast<int>(counts(v));
  }
  Scalar out = log_factorial<Scalar>(n);
  for (Eigen::Index v = 0; v < counts.size(); ++v) {
    const int c = static_cast<int>(counts(v));
    out -= log_factorial<Scalar>(c);
    if (c > 0) {
      if (p(v) == Scalar(0)) return kNegInf<Scalar>;
      out += c * log(p(v));
    }
  }
  return out;
}

template <typename DerivedH, typename DerivedP>
typename DerivedP::Scalar multinomial_pdf(const Eigen::MatrixBase<DerivedH>& counts,
                                          const Eigen::MatrixBase<DerivedP>& p) {
  using std::exp;
  return exp(log_multinomial_pdf(counts, p));
}

template <typename Scalar>
Scalar log_normal_pdf(Scalar x, Scalar mean, Scalar var) {
  using std::log;
  const Scalar d = x - mean;
  return Scalar(-0.5) * (log(Scalar(2) * std::numbers::pi_v<Scalar> * var) + d * d / var);
}

template <typename Scalar>
Scalar normal_pdf(Scalar x, Scalar mean, Scalar var) {
  using std::exp;
  return exp(log_normal_pdf(x, mean, var));
}

template <typename Scalar>
Scalar normal_cdf(Scalar x, Scalar mean, Scalar var) {
  using std::erfc;
  using std::sqrt;
  return Scalar(0.5) * erfc(-(x - mean) / sqrt(Scalar(2) * var));
}

// Standard Gaussian kernel K(u).
template <typename Scalar>
Scalar gaussian_kernel(Scalar u) {
  using std::exp;
  using std::sqrt;
  return exp(Scalar(-0.5) * u * u) / sqrt(Scalar(2) * std::numbers::pi_v<Scalar>);
}

template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::DenseBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  using std::exp;
  using std::isinf;
  using std::log;
  if (x.size() == 0) return kNegInf<Scalar>;
  const Scalar m = x.maxCoeff();
  if (isinf(m)) return m;
  return m + log((x.derived().array() - m).exp().sum());
}

inline double log_add(double a, double b) {
  if (a == kNegInf<double>) return b;
  if (b == kNegInf<double>) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Total variation distance on a finite outcome space: half the L1 distance.
// Both inputs must already be normalized; normalizing is the caller's job.
template <typename DerivedP, typename DerivedQ>
typename DerivedP::Scalar total_variation(const Eigen::MatrixBase<DerivedP>& p,
                                          const Eigen::MatrixBase<DerivedQ>& q,
                                          typename DerivedP::Scalar tolerance = 1e-9) {
  using Scalar = typename DerivedP::Scalar;
  using std::abs;
  if (p.size() != q.size()) throw DomainError("total_variation: mismatched supports");
  if ((p.array() < Scalar(0)).any() || (q.array() < Scalar(0)).any()) {
    throw DomainError("total_variation: negative probability");
  }
  if (abs(p.sum() - Scalar(1)) > tolerance || abs(q.sum() - Scalar(1)) > tolerance) {
    throw DomainError("total_variation: inputs are not normalized");
  }
  const Scalar tv = Scalar(0.5) * (p - q).cwiseAbs().sum();
  return tv > Scalar(1) ? Scalar(1) : tv;
}

}  // namespace lrvi
