#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "w2eps/error.hpp"
#include "w2eps/grid.hpp"
#include "w2eps/lower_envelope.hpp"

namespace w2eps {

/// z -> height - (opening/2) |z - vertex|^2
struct Paraboloid {
  Point vertex;
  double opening = 0.0;
  double height = 0.0;

  double operator()(std::span<const double> z) const { return height - 0.5 * opening * distance2(z, vertex); }

  /// Slope form v(x) + p.(z - x) - (K/2)|z - x|^2, rewritten around its vertex.
  static Paraboloid from_slope(std::span<const double> x, double value, std::span<const double> p, double K) {
    if (!(K > 0.0)) throw ParameterError("opening must be positive");
    Paraboloid q;
    q.opening = K;
    q.vertex.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) q.vertex[i] = x[i] + p[i] / K;
    q.height = value + norm2(p) / (2.0 * K);
    return q;
  }
};

struct EnvelopeOptions {
  /// Vertex lattice extension beyond the grid, in nodes per side. Chosen from
  /// a Lipschitz estimate of v when unset.
  std::optional<std::size_t> vertex_pad;
  /// Absolute touching tolerance. When unset, c K h^2 + 1e-12 max|v| with
  /// c = tolerance_coefficient (default 4).
  std::optional<double> tolerance;
  std::optional<double> tolerance_coefficient;
};

/// Result of g_minus_mask and contact_set.
struct TouchReport {
  GridMask mask;
  std::vector<std::size_t> contact_points;
  /// Vertex of the touching paraboloid for each entry of contact_points.
  std::vector<Point> vertex_map;
  /// v - hull (clamped at 0); only filled by g_minus_mask.
  std::optional<GridFunction> slack;
  double tolerance = 0.0;
  /// contact_set only: vertex nodes and, aligned with them, the chosen contact node.
  std::vector<std::size_t> vertices;
  std::vector<std::size_t> contact_of_vertex;
};

namespace detail {

inline void require_opening(double K) {
  if (!(K > 0.0) || !std::isfinite(K)) throw ParameterError("opening K must be positive and finite");
}

inline std::vector<double> restricted_values(const GridFunction& v, const GridMask& dom) {
  std::vector<double> in(v.values);
  bool any = false;
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (!dom[i]) in[i] = std::numeric_limits<double>::infinity();
    else any = true;
  }
  if (!any) throw DomainError("domain contains no grid nodes");
  return in;
}

inline double max_abs_on(const GridFunction& v, const GridMask& dom) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (dom[i]) m = std::max(m, std::abs(v[i]));
  return m;
}

}  // namespace detail

inline constexpr double default_tolerance_coefficient = 4.0;

/// Second-order sampling slack c K h^2 plus a relative floor on max |v|.
inline double default_touch_tolerance(const GridFunction& v, const GridMask& dom, double K,
                                      double c = default_tolerance_coefficient) {
  const double h = v.spec.spacing();
  return c * K * h * h + 1e-12 * detail::max_abs_on(v, dom);
}

/// Largest slack caused by rounding a vertex to the lattice when the touching is not degenerate: K n h^2 / 8.
inline double lattice_tolerance_coefficient(std::size_t n) { return static_cast<double>(n) / 8.0; }

/// Lattice padding large enough to hold the vertex x + Dv(x)/K of interior touching paraboloids.
inline std::size_t auto_vertex_pad(const GridFunction& v, const GridMask& dom, double K) {
  const GridSpec& g = v.spec;
  double lip = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!dom[i]) continue;
    std::size_t rem = i;
    for (std::size_t k = 0; k < g.dim(); ++k) {
      const std::size_t idx = rem / g.strides()[k];
      rem %= g.strides()[k];
      if (idx + 1 < g.shape()[k] && dom[i + g.strides()[k]])
        lip = std::max(lip, std::abs(v[i + g.strides()[k]] - v[i]));
    }
  }
  lip /= g.spacing();
  const std::size_t cap = 2 * *std::max_element(g.shape().begin(), g.shape().end());
  const double want = std::ceil(lip / (K * g.spacing())) + 1.0;
  return want >= static_cast<double>(cap) ? cap : static_cast<std::size_t>(want);
}

/// S_K v at every node, with the minimizing domain node.
struct MoreauResult {
  GridFunction value;
  std::vector<std::size_t> argmin;
};

/// S_K v(y) = min over domain nodes x of v(x) + (K/2)|x - y|^2, for every node y.
inline MoreauResult moreau_lower_with_argmin(const GridFunction& v, double K, const DomainSpec& d) {
  detail::require_opening(K);
  const GridMask dom = mask_of_domain(d, v.spec);
  const std::vector<double> in = detail::restricted_values(v, dom);
  const double h = v.spec.spacing();
  const std::vector<std::ptrdiff_t> zero(v.spec.dim(), 0);
  SeparableMin r = separable_min_convolution(in, v.spec.shape(), 0.5 * K * h * h, zero, v.spec.shape());
  return MoreauResult{GridFunction(v.spec, std::move(r.values)), std::move(r.source)};
}

inline GridFunction moreau_lower(const GridFunction& v, double K, const DomainSpec& d) {
  return moreau_lower_with_argmin(v, K, d).value;
}

/// Supremum of the lattice-vertex paraboloids of opening K lying below v on d.
struct HullResult {
  GridFunction hull;
  /// Vertex lattice: the grid extended by `pad` nodes on every side.
  GridSpec vertex_lattice;
  std::size_t pad = 0;
  /// Per node: flat index into vertex_lattice of the maximizing paraboloid.
  std::vector<std::size_t> vertex;
};

inline HullResult proximal_hull_full(const GridFunction& v, double K, const DomainSpec& d,
                                     const EnvelopeOptions& opts = {}) {
  detail::require_opening(K);
  const GridSpec& g = v.spec;
  const GridMask dom = mask_of_domain(d, g);
  const std::vector<double> in = detail::restricted_values(v, dom);
  const std::size_t pad = opts.vertex_pad ? *opts.vertex_pad : auto_vertex_pad(v, dom, K);
  const double a = 0.5 * K * g.spacing() * g.spacing();

  std::vector<std::size_t> ext_shape(g.dim());
  Point ext_origin(g.dim());
  for (std::size_t k = 0; k < g.dim(); ++k) {
    ext_shape[k] = g.shape()[k] + 2 * pad;
    ext_origin[k] = g.origin()[k] - static_cast<double>(pad) * g.spacing();
  }
  const auto p = static_cast<std::ptrdiff_t>(pad);

  // S_K v on the vertex lattice.
  SeparableMin lower = separable_min_convolution(in, g.shape(), a, std::vector<std::ptrdiff_t>(g.dim(), p),
                                                 ext_shape, false);
  // hull(x) = max_y S(y) - a|x - y|^2 = -min_y (-S(y) + a|x - y|^2)
  for (double& s : lower.values) s = -s;
  SeparableMin upper = separable_min_convolution(lower.values, ext_shape, a,
                                                 std::vector<std::ptrdiff_t>(g.dim(), -p), g.shape(), true);
  GridFunction hull(g);
  for (std::size_t i = 0; i < g.size(); ++i) hull.values[i] = -upper.values[i];
  return HullResult{std::move(hull), GridSpec(ext_shape, ext_origin, g.spacing()), pad, std::move(upper.source)};
}

inline GridFunction proximal_hull(const GridFunction& v, double K, const DomainSpec& d,
                                  const EnvelopeOptions& opts = {}) {
  return proximal_hull_full(v, K, d, opts).hull;
}

/// Nodes of `query` touched from below on d by an opening-K paraboloid, up to tolerance.
///
/// A_K^- within the query is query \ mask.
inline TouchReport g_minus_mask(const GridFunction& v, double K, const DomainSpec& d, const DomainSpec& query,
                                const EnvelopeOptions& opts = {}) {
  detail::require_opening(K);
  const GridMask dom = mask_of_domain(d, v.spec);
  const GridMask qm = mask_of_domain(query, v.spec);
  if (!is_subset(qm, dom)) throw DomainError("query region exceeds the envelope domain");
  const double tau = opts.tolerance ? *opts.tolerance
                                    : default_touch_tolerance(v, dom, K,
                                                              opts.tolerance_coefficient.value_or(
                                                                  default_tolerance_coefficient));
  if (!(tau >= 0.0)) throw ParameterError("touching tolerance must be nonnegative");

  HullResult hr = proximal_hull_full(v, K, d, opts);
  TouchReport rep{GridMask(v.spec), {}, {}, GridFunction(v.spec), tau, {}, {}};
  GridFunction& slack = *rep.slack;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!dom[i]) continue;
    slack.values[i] = std::max(0.0, v[i] - hr.hull[i]);
    if (qm[i] && slack.values[i] <= tau) {
      rep.mask.set(i);
      rep.contact_points.push_back(i);
      rep.vertex_map.push_back(hr.vertex_lattice.node(hr.vertex[i]));
    }
  }
  return rep;
}

/// Contact set E_K(V, Q, v): for each vertex node y in V, a node of Q minimizing v + (K/2)|. - y|^2.
///
/// Ties go to the lexicographically smallest node. Q is normally a closed cube.
inline TouchReport contact_set(const GridFunction& v, const GridMask& V, const DomainSpec& Q, double K) {
  detail::require_opening(K);
  require_same_spec(v.spec, V.spec, "contact_set");
  if (!V.any()) throw ParameterError("vertex set is empty");
  MoreauResult mr = moreau_lower_with_argmin(v, K, Q);
  TouchReport rep{GridMask(v.spec), {}, {}, std::nullopt, 0.0, {}, {}};
  std::vector<std::size_t> first_vertex(v.size(), no_source);
  for (std::size_t y = 0; y < v.size(); ++y) {
    if (!V[y]) continue;
    const std::size_t x = mr.argmin[y];
    rep.vertices.push_back(y);
    rep.contact_of_vertex.push_back(x);
    rep.mask.set(x);
    if (first_vertex[x] == no_source) first_vertex[x] = y;
  }
  for (std::size_t x = 0; x < v.size(); ++x) {
    if (!rep.mask[x]) continue;
    rep.contact_points.push_back(x);
    rep.vertex_map.push_back(v.spec.node(first_vertex[x]));
  }
  return rep;
}

/// Smallest ladder opening touching each node, or 2 * max(ladder) when none does.
///
/// Nodes outside d carry the sentinel as well.
inline GridFunction theta_lower(const GridFunction& v, const DomainSpec& d, std::span<const double> ladder,
                                const EnvelopeOptions& opts = {}) {
  if (ladder.empty()) throw ParameterError("opening ladder is empty");
  for (std::size_t i = 0; i < ladder.size(); ++i) {
    detail::require_opening(ladder[i]);
    if (i && !(ladder[i] > ladder[i - 1])) throw ParameterError("opening ladder must be strictly increasing");
  }
  const double sentinel = 2.0 * ladder.back();
  GridFunction theta(v.spec, sentinel);
  std::vector<std::uint8_t> done(v.size(), 0);
  for (double K : ladder) {
    EnvelopeOptions o = opts;
    o.tolerance.reset();
    const TouchReport t = g_minus_mask(v, K, d, d, o);
    for (std::size_t i : t.contact_points) {
      if (!done[i]) {
        theta.values[i] = K;
        done[i] = 1;
      }
    }
  }
  return theta;
}

/// Inf-convolution v_delta(x) = min_y v(y) + |y - x|^2 / delta, i.e. S_{2/delta} v.
inline GridFunction infconv_regularize(const GridFunction& v, double delta, const DomainSpec& d) {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw ParameterError("delta must be positive");
  return moreau_lower(v, 2.0 / delta, d);
}

}  // namespace w2eps
