#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "w2eps/error.hpp"
#include "w2eps/grid.hpp"
#include "w2eps/parallel.hpp"

namespace w2eps {

inline constexpr std::size_t max_matrix_dim = 4;

/// Symmetric n x n matrix stored as its upper triangle (n <= 4).
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n) : n_(n) {
    if (n == 0 || n > max_matrix_dim) throw ParameterError("matrix dimension must be in 1..4");
  }

  static SymMatrix identity(std::size_t n, double s = 1.0) {
    SymMatrix m(n);
    for (std::size_t i = 0; i < n; ++i) m.set(i, i, s);
    return m;
  }

  static SymMatrix diagonal(const std::vector<double>& d) {
    SymMatrix m(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m.set(i, i, d[i]);
    return m;
  }

  /// Throws ContractViolation unless |a_ij - a_ji| <= tol * max|a|.
  static SymMatrix from_dense(const std::vector<std::vector<double>>& a, double tol = 1e-12) {
    const std::size_t n = a.size();
    SymMatrix m(n);
    double scale = 0.0;
    for (const auto& row : a) {
      if (row.size() != n) throw ContractViolation("matrix is not square");
      for (double x : row) scale = std::max(scale, std::abs(x));
    }
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i; j < n; ++j) {
        if (std::abs(a[i][j] - a[j][i]) > tol * scale)
          throw ContractViolation("matrix is not symmetric at (" + std::to_string(i) + "," + std::to_string(j) + ")");
        m.set(i, j, 0.5 * (a[i][j] + a[j][i]));
      }
    return m;
  }

  std::size_t dim() const { return n_; }

  double operator()(std::size_t i, std::size_t j) const { return a_[slot(i, j)]; }
  void set(std::size_t i, std::size_t j, double x) { a_[slot(i, j)] = x; }

  double trace() const {
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  double max_abs() const {
    double m = 0.0;
    for (std::size_t k = 0; k < n_ * (n_ + 1) / 2; ++k) m = std::max(m, std::abs(a_[k]));
    return m;
  }

  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4> dense() const {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4> m(n_, n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t j = 0; j < n_; ++j) m(i, j) = (*this)(i, j);
    return m;
  }

  double determinant() const { return dense().determinant(); }

  /// Ascending eigenvalues.
  std::vector<double> eigenvalues() const {
    if (n_ == 2) {
      // closed form avoids the solver in the hot 2-D path
      const double a = (*this)(0, 0), b = (*this)(0, 1), c = (*this)(1, 1);
      const double mean = 0.5 * (a + c);
      const double rad = std::hypot(0.5 * (a - c), b);
      return {mean - rad, mean + rad};
    }
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>> es(
        dense(), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw SolverError("eigenvalue iteration did not converge", 0.0);
    std::vector<double> ev(n_);
    for (std::size_t i = 0; i < n_; ++i) ev[i] = es.eigenvalues()(static_cast<Eigen::Index>(i));
    return ev;
  }

  SymMatrix& operator+=(const SymMatrix& o) {
    check(o);
    for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
    return *this;
  }
  SymMatrix& operator*=(double s) {
    for (double& x : a_) x *= s;
    return *this;
  }
  friend SymMatrix operator+(SymMatrix a, const SymMatrix& b) { return a += b; }
  friend SymMatrix operator*(double s, SymMatrix a) { return a *= s; }
  friend SymMatrix operator-(const SymMatrix& a) { return -1.0 * a; }

 private:
  std::size_t slot(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return i * n_ - i * (i + 1) / 2 + j;
  }
  void check(const SymMatrix& o) const {
    if (o.n_ != n_) throw ContractViolation("matrix dimensions differ");
  }

  std::size_t n_ = 0;
  std::array<double, 10> a_{};
};

/// trace(A B) for symmetric A, B.
inline double trace_product(const SymMatrix& a, const SymMatrix& b) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i)
    for (std::size_t j = 0; j < a.dim(); ++j) t += a(i, j) * b(j, i);
  return t;
}

struct EllipticityParams {
  std::size_t n = 2;
  double lambda = 1.0;
  double Lambda = 1.0;

  void validate() const {
    if (n < 2) throw ParameterError("dimension n must be at least 2");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ParameterError("lambda must be positive");
    if (!(Lambda >= lambda) || !std::isfinite(Lambda)) throw ParameterError("Lambda must satisfy Lambda >= lambda");
  }
  double ratio() const { return Lambda / lambda; }
};

inline double pucci_minus_spectrum(const std::vector<double>& ev, const EllipticityParams& p) {
  double pos = 0.0, neg = 0.0;
  for (double e : ev) (e > 0.0 ? pos : neg) += e;
  return p.lambda * pos + p.Lambda * neg;
}

inline double pucci_plus_spectrum(const std::vector<double>& ev, const EllipticityParams& p) {
  double pos = 0.0, neg = 0.0;
  for (double e : ev) (e > 0.0 ? pos : neg) += e;
  return p.Lambda * pos + p.lambda * neg;
}

inline double pucci_minus(const SymMatrix& m, const EllipticityParams& p) {
  return pucci_minus_spectrum(m.eigenvalues(), p);
}

inline double pucci_plus(const SymMatrix& m, const EllipticityParams& p) {
  return pucci_plus_spectrum(m.eigenvalues(), p);
}

/// Symmetric matrix per node; meaningful where `interior` is set.
struct SymmetricMatrixField {
  GridSpec spec;
  GridMask interior;
  std::vector<SymMatrix> values;
};

namespace detail {

/// Nodes whose full 3^n-neighbourhood stencil lies on the grid and in `dom`.
inline GridMask stencil_interior(const GridSpec& g, const GridMask* dom) {
  GridMask m(g);
  const std::size_t n = g.dim();
  std::vector<std::ptrdiff_t> offsets;
  // axis and in-plane diagonal neighbours only; those are what the stencil reads
  for (std::size_t a = 0; a < n; ++a) {
    const auto sa = static_cast<std::ptrdiff_t>(g.strides()[a]);
    offsets.push_back(sa);
    offsets.push_back(-sa);
    for (std::size_t b = a + 1; b < n; ++b) {
      const auto sb = static_cast<std::ptrdiff_t>(g.strides()[b]);
      for (std::ptrdiff_t s : {sa + sb, sa - sb, -sa + sb, -sa - sb}) offsets.push_back(s);
    }
  }
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (dom && !(*dom)[i]) continue;
    bool inside = true;
    std::size_t rem = i;
    for (std::size_t k = 0; k < n && inside; ++k) {
      const std::size_t idx = rem / g.strides()[k];
      rem %= g.strides()[k];
      inside = idx > 0 && idx + 1 < g.shape()[k];
    }
    if (!inside) continue;
    if (dom) {
      for (std::ptrdiff_t o : offsets)
        if (!(*dom)[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + o)]) {
          inside = false;
          break;
        }
    }
    if (inside) m.set(i);
  }
  return m;
}

inline SymMatrix hessian_at(const GridFunction& v, std::size_t i) {
  const GridSpec& g = v.spec;
  const std::size_t n = g.dim();
  const double h2 = g.spacing() * g.spacing();
  SymMatrix H(n);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t sa = g.strides()[a];
    H.set(a, a, (v[i + sa] - 2.0 * v[i] + v[i - sa]) / h2);
    for (std::size_t b = a + 1; b < n; ++b) {
      const std::size_t sb = g.strides()[b];
      H.set(a, b, (v[i + sa + sb] - v[i + sa - sb] - v[i - sa + sb] + v[i - sa - sb]) / (4.0 * h2));
    }
  }
  return H;
}

}  // namespace detail

/// Central second differences on the diagonal, four-point cross stencil off it.
///
/// With a domain mask, only nodes whose stencil stays in the domain are interior.
inline SymmetricMatrixField discrete_hessian(const GridFunction& v, const GridMask* dom = nullptr) {
  if (dom) require_same_spec(v.spec, dom->spec, "discrete_hessian");
  SymmetricMatrixField f{v.spec, detail::stencil_interior(v.spec, dom), std::vector<SymMatrix>(v.size())};
  if (!f.interior.any()) throw DomainError("no interior nodes for the Hessian stencil");
  parallel_for(v.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      if (f.interior[i]) f.values[i] = detail::hessian_at(v, i);
  });
  return f;
}

struct SupersolutionReport {
  double max_violation = -std::numeric_limits<double>::infinity();
  std::size_t worst_node = 0;
  double tolerance = 0.0;
  std::size_t checked = 0;
  bool pass = false;
};

/// Slack 10 * max|v| * n * h used when no tolerance is given.
inline double default_supersolution_tolerance(const GridFunction& v, const GridMask& dom) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (dom[i]) m = std::max(m, std::abs(v[i]));
  return 10.0 * m * static_cast<double>(v.spec.dim()) * v.spec.spacing();
}

/// max over interior nodes of d of M^-(D^2_h v); passes iff it is <= tol.
inline SupersolutionReport verify_supersolution(const GridFunction& v, const DomainSpec& d, const EllipticityParams& p,
                                                std::optional<double> tol = std::nullopt) {
  p.validate();
  if (p.n != v.spec.dim()) throw ParameterError("ellipticity dimension does not match the grid");
  const GridMask dom = mask_of_domain(d, v.spec);
  const SymmetricMatrixField H = discrete_hessian(v, &dom);
  SupersolutionReport r;
  r.tolerance = tol ? *tol : default_supersolution_tolerance(v, dom);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!H.interior[i]) continue;
    const double m = pucci_minus(H.values[i], p);
    ++r.checked;
    if (m > r.max_violation) {
      r.max_violation = m;
      r.worst_node = i;
    }
  }
  r.pass = r.max_violation <= r.tolerance;
  return r;
}

/// Symmetric coefficient matrix a(x) per node with spectrum in [lambda, Lambda].
struct CoefficientField {
  GridSpec spec;
  EllipticityParams params;
  std::vector<SymMatrix> values;

  /// Throws ContractViolation naming the first node outside [lambda, Lambda].
  void validate() const {
    if (values.size() != spec.size()) throw ContractViolation("coefficient count does not match grid size");
    const double eps = 1e-12 * params.Lambda;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto ev = values[i].eigenvalues();
      if (ev.front() < params.lambda - eps || ev.back() > params.Lambda + eps)
        throw ContractViolation("coefficient spectrum outside [lambda, Lambda] at node " + std::to_string(i));
    }
  }
};

/// trace(a(x) D^2_h v(x)) at interior nodes, 0 elsewhere.
inline GridFunction linear_apply(const CoefficientField& a, const GridFunction& v) {
  require_same_spec(a.spec, v.spec, "linear_apply");
  a.validate();
  const SymmetricMatrixField H = discrete_hessian(v);
  GridFunction out(v.spec);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (H.interior[i]) out.values[i] = trace_product(a.values[i], H.values[i]);
  return out;
}

struct PowerProfile {
  double beta = 1.0;
  double scale = 1.0;
};

/// C (u^-m - c) with u = r^2/2; the constant does not affect the spectrum.
struct BarrierProfile {
  double m = 0.5;
  double C = 1.0;
};

using RadialProfile = std::variant<PowerProfile, BarrierProfile>;

/// Hessian spectrum of a radial function: radial = f''(r), tangential = f'(r)/r (multiplicity n-1).
struct RadialSpectrum {
  double radial = 0.0;
  double tangential = 0.0;
};

inline RadialSpectrum radial_spectrum(const RadialProfile& profile, double r) {
  if (!(r > 0.0)) throw DomainError("radial spectrum is singular at r = 0");
  return std::visit(
      [r](const auto& pr) -> RadialSpectrum {
        using T = std::decay_t<decltype(pr)>;
        if constexpr (std::is_same_v<T, PowerProfile>) {
          const double base = pr.scale * pr.beta * std::pow(r, pr.beta - 2.0);
          return {base * (pr.beta - 1.0), base};
        } else {
          const double u = 0.5 * r * r;
          const double base = pr.C * pr.m * std::pow(u, -pr.m - 2.0) * r * r;
          return {base * (pr.m + 0.5), -0.5 * base};
        }
      },
      profile);
}

inline double pucci_minus_radial(const RadialSpectrum& s, const EllipticityParams& p) {
  std::vector<double> ev(p.n, s.tangential);
  ev[0] = s.radial;
  return pucci_minus_spectrum(ev, p);
}

/// Exponent at which s r^beta (s > 0, 0 < beta < 1) has M^- = 0 away from the origin.
inline double critical_power(const EllipticityParams& p) {
  return 1.0 - p.lambda * static_cast<double>(p.n - 1) / p.Lambda;
}

struct TraceDetReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// trace(AB) >= n det(A)^(1/n) det(B)^(1/n) for positive semidefinite A, B.
inline TraceDetReport trace_det_check(const SymMatrix& A, const SymMatrix& B) {
  if (A.dim() != B.dim()) throw ContractViolation("matrix dimensions differ");
  const double scale = std::max(1.0, A.max_abs() * B.max_abs());
  for (const SymMatrix* m : {&A, &B})
    if (m->eigenvalues().front() < -1e-12 * std::max(1.0, m->max_abs()))
      throw ContractViolation("matrix is not positive semidefinite");
  const auto n = static_cast<double>(A.dim());
  TraceDetReport r;
  r.lhs = trace_product(A, B);
  r.rhs = n * std::pow(std::max(0.0, A.determinant()), 1.0 / n) * std::pow(std::max(0.0, B.determinant()), 1.0 / n);
  r.pass = r.lhs >= r.rhs - 1e-10 * scale;
  return r;
}

}  // namespace w2eps
