#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "w2eps/error.hpp"

namespace w2eps {

/// |A_t^- ∩ query| over an increasing opening ladder.
struct DecayTable {
  std::vector<double> ts;
  std::vector<double> measures;
  double query_measure = 0.0;
  /// Measures at or below this value are excluded from fits (10 h^n).
  double noise_floor = 0.0;
  /// Half-open index window [fit_begin, fit_end) used by the last fit.
  std::size_t fit_begin = 0, fit_end = 0;
  double fitted_exponent = std::numeric_limits<double>::quiet_NaN();
  double residual = std::numeric_limits<double>::quiet_NaN();

  bool nonincreasing() const {
    for (std::size_t i = 1; i < measures.size(); ++i)
      if (measures[i] > measures[i - 1]) return false;
    return true;
  }
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  /// Sum of squared residuals.
  double rss = 0.0;
  double slope_stderr = 0.0;
  std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope x.
inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t k = x.size();
  if (k < 2 || y.size() != k) throw FitError("need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw FitError("abscissae are all equal");
  LineFit f;
  f.points = k;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = y[i] - f.intercept - f.slope * x[i];
    f.rss += r * r;
  }
  f.slope_stderr = k > 2 ? std::sqrt(f.rss / static_cast<double>(k - 2) / sxx) : 0.0;
  return f;
}

struct ExponentFit {
  double exponent = 0.0;
  double residual = 0.0;
  double stderr_ = 0.0;
  /// exponent -/+ 2 standard errors.
  double band_lo = 0.0, band_hi = 0.0;
  std::size_t begin = 0, end = 0;
};

/// Slope of -log measure against log t over the ladder points above the noise floor.
///
/// Needs at least four such points. Updates the table's fit fields.
inline ExponentFit fit_exponent(DecayTable& table) {
  if (table.ts.size() != table.measures.size()) throw FitError("ladder and measures differ in length");
  std::size_t begin = table.ts.size(), end = begin;
  for (std::size_t i = 0; i < table.ts.size(); ++i) {
    if (table.measures[i] > table.noise_floor && table.measures[i] > 0.0) {
      if (begin == table.ts.size()) begin = i;
      end = i + 1;
    } else if (begin != table.ts.size()) {
      break;
    }
  }
  if (end - begin < 4) throw FitError("fewer than 4 ladder points above the noise floor");
  std::vector<double> lx, ly;
  for (std::size_t i = begin; i < end; ++i) {
    lx.push_back(std::log(table.ts[i]));
    ly.push_back(-std::log(table.measures[i]));
  }
  const LineFit lf = fit_line(lx, ly);
  ExponentFit f{lf.slope, lf.rss, lf.slope_stderr, lf.slope - 2.0 * lf.slope_stderr, lf.slope + 2.0 * lf.slope_stderr,
                begin, end};
  table.fit_begin = begin;
  table.fit_end = end;
  table.fitted_exponent = f.exponent;
  table.residual = f.residual;
  return f;
}

}  // namespace w2eps
