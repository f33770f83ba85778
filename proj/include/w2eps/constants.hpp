#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "w2eps/error.hpp"
#include "w2eps/pucci.hpp"

namespace w2eps {

/// Positive quantity held by its natural log, with the exact integer when it fits in 64 bits.
struct Magnitude {
  long double log_value = 0.0L;
  std::optional<std::uint64_t> exact;

  /// May be +inf when the value exceeds long double range.
  long double value() const { return exact ? static_cast<long double>(*exact) : std::exp(log_value); }

  /// Decimal mantissa in [1, 10) and exponent.
  std::pair<double, long> scientific() const {
    const long double l10 = log_value / std::log(10.0L);
    long e = static_cast<long>(std::floor(l10));
    double mant = static_cast<double>(std::pow(10.0L, l10 - static_cast<long double>(e)));
    if (mant >= 10.0) {
      mant /= 10.0;
      ++e;
    }
    return {mant, e};
  }

  std::string decimal() const {
    if (exact) return std::to_string(*exact);
    const auto [mant, e] = scientific();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.16fe%+ld", mant, e);
    return buf;
  }
};

namespace detail {

/// base^k by repeated multiplication, or nullopt on 64-bit overflow.
inline std::optional<std::uint64_t> checked_pow(std::uint64_t base, std::uint64_t k) {
  unsigned __int128 r = 1;
  for (std::uint64_t i = 0; i < k; ++i) {
    r *= base;
    if (r > UINT64_MAX) return std::nullopt;
  }
  return static_cast<std::uint64_t>(r);
}

inline std::optional<std::uint64_t> checked_mul(std::optional<std::uint64_t> a, std::uint64_t b) {
  if (!a) return std::nullopt;
  const unsigned __int128 r = static_cast<unsigned __int128>(*a) * b;
  if (r > UINT64_MAX) return std::nullopt;
  return static_cast<std::uint64_t>(r);
}

}  // namespace detail

struct ConstantsReport {
  EllipticityParams params;
  double alpha1 = 0.0, alpha2 = 0.0, alpha3 = 0.0;
  long double m = 0.0L;
  /// max{1, (n-1) Lambda/lambda - 1}, the exponent of 36n in M1 and M.
  long double power = 0.0L;
  Magnitude M1, M2, M;
  /// 1 - sigma and 1 - sigma1 are kept separately: sigma is within 1e-3 of 1 already at n = 2.
  long double one_minus_sigma = 0.0L, one_minus_sigma1 = 0.0L;
  long double sigma = 0.0L, sigma1 = 0.0L;
  double K_contact = 32.0;
  double K_seed = 0.0;
  long double eps_visc = 0.0L, eps_strong = 0.0L;
  /// Right-hand side of the displayed exponent bound with bracket 1e5 n^3 (36n)^power.
  long double eps_bound_printed = 0.0L;
  /// Same with bracket exponent power + 1.
  long double eps_bound_corrected = 0.0L;
  long double eps_conjectured = 0.0L;
  Magnitude t0;

  /// log of 1e5 n^3 (36n)^q.
  long double log_bracket(long double q) const {
    const auto n = static_cast<long double>(params.n);
    return std::log(1e5L) + 3.0L * std::log(n) + q * std::log(36.0L * n);
  }

  /// Human-readable description of every violated invariant; empty when all hold.
  std::vector<std::string> invariant_failures() const {
    std::vector<std::string> f;
    const auto n = static_cast<long double>(params.n);
    // compared through 1 - sigma: sigma itself rounds to 1 once the chain gets long
    if (!(one_minus_sigma > 0.0L && one_minus_sigma < 1.0L)) f.push_back("sigma outside (0,1)");
    if (!(one_minus_sigma1 >= one_minus_sigma && one_minus_sigma1 < 1.0L)) f.push_back("sigma1 outside (0, sigma]");
    if (std::abs(M2.log_value - (std::log(432.0L * n) + M1.log_value)) > 1e-15L * M2.log_value)
      f.push_back("M2 != 432 n M1");
    if (std::abs(M.log_value - (std::log(884736.0L) + 3.0L * std::log(n) + power * std::log(36.0L * n))) >
        1e-15L * M.log_value)
      f.push_back("M != 884736 n^3 (36n)^p");
    // -log(1 - x) > x, but the two agree in long double once x^2 is below the last digit
    if (!(eps_visc >= one_minus_sigma / M.log_value)) f.push_back("eps_visc < (1 - sigma)/log M");
    if (!(eps_visc > 0.0L && eps_visc <= eps_strong)) f.push_back("eps_visc outside (0, eps_strong]");
    if (!(eps_strong < eps_conjectured)) f.push_back("eps_strong >= eps_conjectured");
    if (!(eps_visc > eps_bound_corrected)) f.push_back("eps_visc <= corrected bound");
    return f;
  }
};

/// Every constant of the measure, localization and decay estimates for p.
inline ConstantsReport compute_constants(const EllipticityParams& p) {
  p.validate();
  ConstantsReport r;
  r.params = p;
  const auto n = static_cast<long double>(p.n);
  const long double lam = p.lambda, Lam = p.Lambda;
  const long double sq = std::sqrt(n);
  r.alpha1 = static_cast<double>(1.0L / (4.0L * sq));
  r.alpha2 = static_cast<double>(1.0L / (12.0L * sq));
  r.alpha3 = static_cast<double>(1.0L / (24.0L * sq));
  r.m = std::max((n - 1.0L) * Lam / (2.0L * lam) - 0.5L, 0.5L);
  r.power = std::max(1.0L, (n - 1.0L) * Lam / lam - 1.0L);
  r.K_seed = static_cast<double>(1.0L / n);

  const long double l36n = std::log(36.0L * n);
  r.M1.log_value = std::log(8.0L) + r.power * l36n;
  r.M2.log_value = std::log(432.0L * n) + r.M1.log_value;
  r.M.log_value = std::log(256.0L * n * n) + r.M2.log_value;
  r.t0.log_value = std::log(4.0L) + r.M.log_value;
  if (r.power == std::floor(r.power) && r.power <= 64.0L) {
    const auto k = static_cast<std::uint64_t>(r.power);
    const std::uint64_t nn = p.n;
    const auto pw = detail::checked_pow(36 * nn, k);
    r.M1.exact = detail::checked_mul(pw, 8);
    r.M2.exact = detail::checked_mul(r.M1.exact, 432 * nn);
    r.M.exact = detail::checked_mul(r.M2.exact, 256 * nn * nn);
    r.t0.exact = detail::checked_mul(r.M.exact, 4);
  }

  // (lambda/(lambda+(n-1)Lambda))^n (1/(4 sqrt n))^n and (lambda/Lambda)^(n-1) (1/(4 sqrt n))^n
  const long double log_cube = -n * std::log(4.0L * sq);
  r.one_minus_sigma = std::exp(n * std::log(lam / (lam + (n - 1.0L) * Lam)) + log_cube);
  r.one_minus_sigma1 = std::exp((n - 1.0L) * std::log(lam / Lam) + log_cube);
  r.sigma = 1.0L - r.one_minus_sigma;
  r.sigma1 = 1.0L - r.one_minus_sigma1;
  r.eps_visc = -std::log1p(-r.one_minus_sigma) / r.M.log_value;
  r.eps_strong = -std::log1p(-r.one_minus_sigma1) / r.M.log_value;
  r.eps_bound_printed = r.one_minus_sigma / r.log_bracket(r.power);
  r.eps_bound_corrected = r.one_minus_sigma / r.log_bracket(r.power + 1.0L);
  r.eps_conjectured = 2.0L / (Lam / lam + 1.0L);
  return r;
}

struct DecayCheckRow {
  double ratio = 1.0;
  long double eps_visc = 0.0L, eps_strong = 0.0L;
  /// eps_visc * ratio^(n+1) and eps_strong * ratio^n.
  long double scaled_visc = 0.0L, scaled_strong = 0.0L;
};

struct DecayCheck {
  std::size_t n = 2;
  std::vector<DecayCheckRow> rows;
  long double inf_scaled_visc = 0.0L, inf_scaled_strong = 0.0L;
  bool pass = false;
};

/// Tabulates the polynomial dependence of both exponents on Lambda/lambda (lambda = 1).
inline DecayCheck polynomial_decay_check(std::size_t n, const std::vector<double>& ratios) {
  if (ratios.empty()) throw ParameterError("ratio list is empty");
  DecayCheck c;
  c.n = n;
  c.inf_scaled_visc = c.inf_scaled_strong = std::numeric_limits<long double>::infinity();
  for (double q : ratios) {
    if (!(q >= 1.0)) throw ParameterError("ratios must be >= 1");
    const ConstantsReport r = compute_constants({n, 1.0, q});
    DecayCheckRow row{q, r.eps_visc, r.eps_strong, 0.0L, 0.0L};
    const long double lq = std::log(static_cast<long double>(q));
    row.scaled_visc = r.eps_visc * std::exp((static_cast<long double>(n) + 1.0L) * lq);
    row.scaled_strong = r.eps_strong * std::exp(static_cast<long double>(n) * lq);
    c.inf_scaled_visc = std::min(c.inf_scaled_visc, row.scaled_visc);
    c.inf_scaled_strong = std::min(c.inf_scaled_strong, row.scaled_strong);
    c.rows.push_back(row);
  }
  c.pass = c.inf_scaled_visc > 0.0L && c.inf_scaled_strong > 0.0L && std::isfinite(c.inf_scaled_visc);
  return c;
}

/// Number of lattice cubes of side 1/(2 sqrt n) whose closure meets the ball of radius 1/2.
///
/// Multiplies the local bound on each cube into a bound on B_{1/2}.
inline std::size_t covering_count(std::size_t n) {
  if (n < 2) throw ParameterError("dimension n must be at least 2");
  const double s = 1.0 / (2.0 * std::sqrt(static_cast<double>(n)));
  const auto half = static_cast<long>(std::ceil(0.5 / s));
  std::size_t count = 0;
  std::vector<long> idx(n, -half);
  for (;;) {
    // squared distance from the origin to the cube [idx*s, (idx+1)*s]
    double d2 = 0.0;
    for (long k : idx) {
      const double lo = static_cast<double>(k) * s, hi = lo + s;
      const double c = lo > 0.0 ? lo : (hi < 0.0 ? hi : 0.0);
      d2 += c * c;
    }
    if (d2 < 0.25) ++count;
    std::size_t a = 0;
    while (a < n && ++idx[a] >= half) idx[a++] = -half;
    if (a == n) break;
  }
  return count;
}

}  // namespace w2eps
