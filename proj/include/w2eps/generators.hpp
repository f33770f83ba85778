#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "w2eps/constants.hpp"
#include "w2eps/error.hpp"
#include "w2eps/grid.hpp"
#include "w2eps/pucci.hpp"
#include "w2eps/rng.hpp"

namespace w2eps {

struct BarrierParams {
  EllipticityParams p;
  double m = 0.5;
  double C = 0.0;
  double alpha3 = 0.0;
  double M1 = 0.0;

  static BarrierParams from(const EllipticityParams& p) {
    const ConstantsReport c = compute_constants(p);
    BarrierParams b;
    b.p = p;
    b.m = static_cast<double>(c.m);
    b.alpha3 = c.alpha3;
    b.M1 = static_cast<double>(c.M1.value());
    const long double a = c.alpha3;
    b.C = static_cast<double>(c.M1.value() * std::pow(a * a / 2.0L, c.m));
    return b;
  }

  /// C (u^-m - (2n)^-m) with u = |x|^2/2, in extended precision.
  double operator()(std::span<const double> x) const {
    const long double u = 0.5L * static_cast<long double>(norm2(x));
    const long double m_ = m;
    return static_cast<double>(static_cast<long double>(C) *
                               (std::pow(u, -m_) - std::pow(2.0L * static_cast<long double>(p.n), -m_)));
  }

  /// Guard ball; nodes inside it are evaluated on its boundary.
  ExcludedBall guard() const { return ExcludedBall{Point(p.n, 0.0), alpha3 / 2.0}; }
};

inline GridFunction barrier(const BarrierParams& bp, const GridSpec& spec) {
  if (spec.dim() != bp.p.n) throw DomainError("barrier dimension does not match the grid");
  if (!(bp.alpha3 > 0.0)) throw DomainError("barrier guard radius must be positive");
  return sample(bp, spec, bp.guard());
}

/// sign * |x - center|^beta; nodes inside the excluded ball use its boundary value.
inline GridFunction radial_power(double beta, int sign, double excluded, const GridSpec& spec, Point center = {}) {
  if (beta == 0.0 || !std::isfinite(beta)) throw ParameterError("power must be nonzero and finite");
  if (sign != 1 && sign != -1) throw ParameterError("sign must be +1 or -1");
  if (beta < 2.0 && !(excluded > 0.0))
    throw DomainError("power below 2 is singular at the center; an excluded ball is required");
  if (center.empty()) center.assign(spec.dim(), 0.0);
  auto f = [&](std::span<const double> x) { return sign * std::pow(std::sqrt(distance2(x, center)), beta); };
  std::optional<ExcludedBall> guard;
  if (excluded > 0.0) guard = ExcludedBall{center, excluded};
  return sample(f, spec, guard);
}

/// (1/2) x^T A x.
inline GridFunction quadratic(const SymMatrix& A, const GridSpec& spec) {
  if (A.dim() != spec.dim()) throw DomainError("matrix dimension does not match the grid");
  auto f = [&](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
      for (std::size_t j = 0; j < x.size(); ++j) s += x[i] * A(i, j) * x[j];
    return 0.5 * s;
  };
  return sample(f, spec);
}

/// height - slope |x - center|
struct ConePiece {
  Point center;
  double height = 0.0;
  double slope = 1.0;
};

/// height + (1/2)(x - center)^T A (x - center)
struct QuadraticPiece {
  Point center;
  SymMatrix A;
  double height = 0.0;
};

using Piece = std::variant<ConePiece, QuadraticPiece>;

/// Pointwise minimum of cones and quadratics. Each piece with M^-(D^2) <= 0 is a
/// supersolution, and so is their minimum.
struct MinOfPieces {
  std::vector<Piece> pieces;

  double operator()(std::span<const double> x) const {
    double best = std::numeric_limits<double>::infinity();
    for (const Piece& pc : pieces) {
      double val = 0.0;
      if (const auto* c = std::get_if<ConePiece>(&pc)) {
        val = c->height - c->slope * std::sqrt(distance2(x, c->center));
      } else {
        const auto& q = std::get<QuadraticPiece>(pc);
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
          for (std::size_t j = 0; j < x.size(); ++j) s += (x[i] - q.center[i]) * q.A(i, j) * (x[j] - q.center[j]);
        val = q.height + 0.5 * s;
      }
      best = std::min(best, val);
    }
    return best;
  }

  /// Throws ContractViolation if a piece is not a supersolution for p.
  void validate(const EllipticityParams& p) const {
    if (pieces.empty()) throw ParameterError("no pieces");
    for (const Piece& pc : pieces) {
      if (const auto* c = std::get_if<ConePiece>(&pc)) {
        if (!(c->slope >= 0.0)) throw ContractViolation("cone slope must be nonnegative");
      } else if (pucci_minus(std::get<QuadraticPiece>(pc).A, p) > 1e-12) {
        throw ContractViolation("quadratic piece has positive M^-");
      }
    }
  }
};

namespace detail {

/// Haar-distributed rotation from a Gaussian matrix.
inline Eigen::MatrixXd random_rotation(std::size_t n, Rng& rng) {
  Eigen::MatrixXd g(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (std::size_t j = 0; j < n; ++j)
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  return q;
}

inline SymMatrix conjugate(const Eigen::MatrixXd& R, const std::vector<double>& diag) {
  const std::size_t n = diag.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < n; ++i) d(i, i) = diag[i];
  const Eigen::MatrixXd a = R * d * R.transpose();
  SymMatrix m(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j) m.set(i, j, 0.5 * (a(i, j) + a(j, i)));
  return m;
}

/// lambda first, Lambda last, uniform in between.
inline std::vector<double> spread_spectrum(const EllipticityParams& p, Rng& rng) {
  std::vector<double> d(p.n);
  d.front() = p.lambda;
  d.back() = p.Lambda;
  for (std::size_t i = 1; i + 1 < p.n; ++i) d[i] = rng.uniform(p.lambda, p.Lambda);
  return d;
}

}  // namespace detail

/// Supersolution built as the minimum of random cones and saddle quadratics centred in Q_1.
inline MinOfPieces random_viscosity_pieces(const EllipticityParams& p, std::uint64_t seed, std::size_t cones,
                                           std::size_t saddles) {
  p.validate();
  Rng rng(seed);
  MinOfPieces f;
  auto center = [&] {
    Point c(p.n);
    for (double& x : c) x = rng.uniform(-0.5, 0.5);
    return c;
  };
  for (std::size_t k = 0; k < cones; ++k) f.pieces.push_back(ConePiece{center(), rng.uniform(0.0, 0.5), rng.uniform(0.5, 2.0)});
  for (std::size_t k = 0; k < saddles; ++k) {
    // one positive direction mu, the rest -mu*(lambda/Lambda)*s with s >= 1 so that M^- <= 0
    const double mu = rng.uniform(0.5, 4.0);
    std::vector<double> d(p.n, 0.0);
    d[0] = mu;
    const double s = rng.uniform(1.0, 2.0);
    for (std::size_t i = 1; i < p.n; ++i) d[i] = -mu * s * p.lambda / (p.Lambda * static_cast<double>(p.n - 1));
    f.pieces.push_back(QuadraticPiece{center(), detail::conjugate(detail::random_rotation(p.n, rng), d),
                                      rng.uniform(0.0, 0.5)});
  }
  f.validate(p);
  return f;
}

enum class CoefficientKind { constant, checkerboard, random_rotation, radial_anisotropic };

inline const char* to_string(CoefficientKind k) {
  switch (k) {
    case CoefficientKind::constant: return "constant";
    case CoefficientKind::checkerboard: return "checkerboard";
    case CoefficientKind::random_rotation: return "random-rotation";
    case CoefficientKind::radial_anisotropic: return "radial-anisotropic";
  }
  return "?";
}

inline CoefficientKind coefficient_kind_from(const std::string& s) {
  for (auto k : {CoefficientKind::constant, CoefficientKind::checkerboard, CoefficientKind::random_rotation,
                 CoefficientKind::radial_anisotropic})
    if (s == to_string(k)) return k;
  throw ParameterError("unknown coefficient recipe '" + s + "'");
}

struct CoefficientRecipe {
  CoefficientKind kind = CoefficientKind::constant;
  std::uint64_t seed = 0;
  EllipticityParams p;
  /// Checkerboard tile side in physical units.
  double tile = 0.25;
};

/// Coefficient field sampled at the nodes of spec.
///
/// constant: one random rotation of diag(lambda, ..., Lambda) everywhere.
/// checkerboard: diag(lambda, Lambda, ...) and its axis reversal on alternating tiles.
/// random-rotation: an independent random rotation per node.
/// radial-anisotropic: Lambda along x/|x|, lambda across (lambda I at the origin).
inline CoefficientField make_coefficients(const CoefficientRecipe& r, const GridSpec& spec) {
  r.p.validate();
  if (r.p.n != spec.dim()) throw DomainError("recipe dimension does not match the grid");
  const std::size_t n = r.p.n;
  Rng rng(r.seed);
  CoefficientField a{spec, r.p, std::vector<SymMatrix>(spec.size())};
  Point x(n);
  switch (r.kind) {
    case CoefficientKind::constant: {
      const SymMatrix m = detail::conjugate(detail::random_rotation(n, rng), detail::spread_spectrum(r.p, rng));
      std::fill(a.values.begin(), a.values.end(), m);
      break;
    }
    case CoefficientKind::checkerboard: {
      std::vector<double> d0(n, r.p.lambda), d1(n, r.p.lambda);
      d0.back() = r.p.Lambda;
      d1.front() = r.p.Lambda;
      if (!(r.tile > 0.0)) throw ParameterError("checkerboard tile must be positive");
      for (std::size_t i = 0; i < spec.size(); ++i) {
        spec.node(i, x);
        long parity = 0;
        for (double c : x) parity += static_cast<long>(std::floor(c / r.tile));
        a.values[i] = SymMatrix::diagonal((parity & 1) ? d1 : d0);
      }
      break;
    }
    case CoefficientKind::random_rotation:
      for (std::size_t i = 0; i < spec.size(); ++i) {
        const Eigen::MatrixXd R = detail::random_rotation(n, rng);
        a.values[i] = detail::conjugate(R, detail::spread_spectrum(r.p, rng));
      }
      break;
    case CoefficientKind::radial_anisotropic:
      for (std::size_t i = 0; i < spec.size(); ++i) {
        spec.node(i, x);
        const double rr = std::sqrt(norm2(x));
        SymMatrix m = SymMatrix::identity(n, r.p.lambda);
        if (rr > 0.0)
          for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p; q < n; ++q) m.set(p, q, m(p, q) + (r.p.Lambda - r.p.lambda) * x[p] * x[q] / (rr * rr));
        a.values[i] = m;
      }
      break;
  }
  a.validate();
  return a;
}

enum class BoundaryKind { harmonic, norm2, random_trig };

/// Closed-form Dirichlet data. harmonic: x1^2 - x2^2; norm2: |x|^2; random-trig: seeded sum of cosines.
struct BoundaryData {
  BoundaryKind kind = BoundaryKind::harmonic;
  std::uint64_t seed = 0;
  std::size_t terms = 4;

  double operator()(std::span<const double> x) const {
    switch (kind) {
      case BoundaryKind::harmonic: return x[0] * x[0] - x[1] * x[1];
      case BoundaryKind::norm2: return norm2(x);
      case BoundaryKind::random_trig: {
        Rng rng(seed);
        double s = 0.0;
        for (std::size_t t = 0; t < terms; ++t) {
          double arg = rng.uniform(0.0, 6.283185307179586);
          for (double c : x) arg += rng.uniform(-3.0, 3.0) * c;
          s += rng.uniform(-1.0, 1.0) * std::cos(arg);
        }
        return s;
      }
    }
    return 0.0;
  }
};

inline const char* to_string(BoundaryKind k) {
  switch (k) {
    case BoundaryKind::harmonic: return "harmonic";
    case BoundaryKind::norm2: return "norm2";
    case BoundaryKind::random_trig: return "random-trig";
  }
  return "?";
}

inline BoundaryKind boundary_kind_from(const std::string& s) {
  for (auto k : {BoundaryKind::harmonic, BoundaryKind::norm2, BoundaryKind::random_trig})
    if (s == to_string(k)) return k;
  throw ParameterError("unknown boundary data '" + s + "'");
}

struct StrongSolution {
  GridFunction v;
  CoefficientField a;
  /// max over interior nodes of |a^{ij} (D^2_h v)_{ij} + g|.
  double residual = 0.0;
  /// residual / (max_i sum_j |A_ij| * max|v| + max|g|).
  double relative_residual = 0.0;
};

/// Solves a^{ij} (D^2_h v)_{ij} = -g at interior nodes with v = boundary on the grid boundary.
///
/// Sparse LU with up to three steps of iterative refinement; throws SolverError
/// when the relative residual stays above 1e-8.
inline StrongSolution strong_supersolution(const CoefficientRecipe& recipe, const BoundaryData& boundary,
                                           const GridSpec& spec,
                                           const std::function<double(std::span<const double>)>& g = {}) {
  CoefficientField a = make_coefficients(recipe, spec);
  const std::size_t n = spec.dim(), N = spec.size();
  const double h2 = spec.spacing() * spec.spacing();

  GridFunction v(spec);
  std::vector<double> rhs_g(N, 0.0);
  std::vector<std::ptrdiff_t> unknown(N, -1);
  std::ptrdiff_t count = 0;
  Point x(n);
  for (std::size_t i = 0; i < N; ++i) {
    spec.node(i, x);
    const auto idx = spec.multi_index(i);
    bool bnd = false;
    for (std::size_t k = 0; k < n; ++k) bnd = bnd || idx[k] == 0 || idx[k] + 1 == spec.shape()[k];
    if (bnd) {
      v.values[i] = boundary(x);
      if (!std::isfinite(v.values[i])) throw SamplingError("boundary data not finite at node " + std::to_string(i));
    } else {
      unknown[i] = count++;
      if (g) rhs_g[i] = g(std::span<const double>(x));
      if (!(rhs_g[i] >= 0.0)) throw ParameterError("source term g must be nonnegative");
    }
  }
  if (count == 0) throw DomainError("grid has no interior nodes");

  // stencil weights per node: (offset, weight)
  auto stencil = [&](std::size_t i, auto&& emit) {
    const SymMatrix& A = a.values[i];
    for (std::size_t p = 0; p < n; ++p) {
      const auto sp = static_cast<std::ptrdiff_t>(spec.strides()[p]);
      emit(sp, A(p, p) / h2);
      emit(-sp, A(p, p) / h2);
      emit(0, -2.0 * A(p, p) / h2);
      for (std::size_t q = p + 1; q < n; ++q) {
        const auto sq = static_cast<std::ptrdiff_t>(spec.strides()[q]);
        const double w = 2.0 * A(p, q) / (4.0 * h2);
        emit(sp + sq, w);
        emit(-sp - sq, w);
        emit(sp - sq, -w);
        emit(-sp + sq, -w);
      }
    }
  };

  std::vector<Eigen::Triplet<double>> trip;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(count);
  std::vector<double> row_norm(static_cast<std::size_t>(count), 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    const std::ptrdiff_t r = unknown[i];
    if (r < 0) continue;
    b(r) = -rhs_g[i];
    stencil(i, [&](std::ptrdiff_t off, double w) {
      const auto j = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + off);
      row_norm[static_cast<std::size_t>(r)] += std::abs(w);
      if (unknown[j] >= 0) trip.emplace_back(r, unknown[j], w);
      else b(r) -= w * v.values[j];
    });
  }
  Eigen::SparseMatrix<double> A(count, count);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw SolverError("sparse factorization failed: " + lu.lastErrorMessage(), INFINITY);
  Eigen::VectorXd sol = lu.solve(b);
  for (int step = 0; step < 3; ++step) {
    const Eigen::VectorXd res = b - A * sol;
    if (res.lpNorm<Eigen::Infinity>() == 0.0) break;
    sol += lu.solve(res);
  }
  for (std::size_t i = 0; i < N; ++i)
    if (unknown[i] >= 0) v.values[i] = sol(unknown[i]);

  double residual = 0.0;
  double vmax = 0.0, gmax = 0.0, rmax = 0.0;
  for (std::size_t i = 0; i < N; ++i) vmax = std::max(vmax, std::abs(v.values[i]));
  for (std::size_t i = 0; i < N; ++i) {
    const std::ptrdiff_t r = unknown[i];
    if (r < 0) continue;
    double s = rhs_g[i];
    stencil(i, [&](std::ptrdiff_t off, double w) {
      s += w * v.values[static_cast<std::size_t>(static_cast<std::ptrdiff_t>(i) + off)];
    });
    residual = std::max(residual, std::abs(s));
    rmax = std::max(rmax, row_norm[static_cast<std::size_t>(r)]);
    gmax = std::max(gmax, rhs_g[i]);
  }
  const double scale = rmax * vmax + gmax;
  StrongSolution out{std::move(v), std::move(a), residual, scale > 0.0 ? residual / scale : residual};
  if (!(out.relative_residual <= 1e-8))
    throw SolverError("relative residual " + std::to_string(out.relative_residual) + " above 1e-8", out.residual);
  return out;
}

}  // namespace w2eps
