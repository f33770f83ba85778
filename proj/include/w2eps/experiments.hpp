#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "w2eps/constants.hpp"
#include "w2eps/cz.hpp"
#include "w2eps/envelope.hpp"
#include "w2eps/error.hpp"
#include "w2eps/fit.hpp"
#include "w2eps/generators.hpp"
#include "w2eps/grid.hpp"
#include "w2eps/pucci.hpp"
#include "w2eps/rng.hpp"

namespace w2eps {

enum class Outcome { pass, fail, hypothesis_not_met };

inline const char* to_string(Outcome o) {
  switch (o) {
    case Outcome::pass: return "pass";
    case Outcome::fail: return "fail";
    case Outcome::hypothesis_not_met: return "hypothesis-not-met";
  }
  return "?";
}

/// Boundary-collar allowance 4 h |∂query| for measure comparisons.
inline double h_slack(const GridSpec& g, const DomainSpec& query) { return 4.0 * g.spacing() * query.perimeter(); }

namespace detail {

inline DomainSpec centered_cube(const GridSpec& g, double side, bool closed = false) {
  return DomainSpec::cube(Point(g.dim(), 0.0), side, DomainSpec::bounding_of(g), closed);
}

inline void require_region_in(const DomainSpec& region, const GridMask& dom, const char* what) {
  if (!is_subset(mask_of_domain(region, dom.spec), dom)) throw DomainError(std::string(what) + " is not inside the domain");
}

inline double max_abs(const GridFunction& v, const GridMask& dom) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (dom[i]) m = std::max(m, std::abs(v[i]));
  return m;
}

/// Touching data at the query node of least slack: v >= L - (K/2)|. - x*|^2 on d, with equality up to the slack.
struct Normalization {
  std::size_t node = 0;
  Point x_star;
  Point slope;
  double value = 0.0;
  double slack = 0.0;

  double affine(std::span<const double> x) const {
    double s = value;
    for (std::size_t k = 0; k < x.size(); ++k) s += slope[k] * (x[k] - x_star[k]);
    return s;
  }

  /// v - L + 1.
  GridFunction apply(const GridFunction& v) const {
    GridFunction w(v.spec);
    Point x(v.spec.dim());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v.spec.node(i, x);
      w.values[i] = v[i] - affine(x) + 1.0;
    }
    return w;
  }
};

inline std::optional<Normalization> normalize_at(const GridFunction& v, double K, const DomainSpec& d,
                                                 const DomainSpec& query, const EnvelopeOptions& opts = {}) {
  const TouchReport t = g_minus_mask(v, K, d, query, opts);
  if (t.contact_points.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t k = 1; k < t.contact_points.size(); ++k)
    if ((*t.slack)[t.contact_points[k]] < (*t.slack)[t.contact_points[best]]) best = k;
  Normalization nrm;
  nrm.node = t.contact_points[best];
  nrm.x_star = v.spec.node(nrm.node);
  nrm.slack = (*t.slack)[nrm.node];
  nrm.value = v[nrm.node] - nrm.slack;
  nrm.slope.resize(v.spec.dim());
  for (std::size_t k = 0; k < nrm.slope.size(); ++k) nrm.slope[k] = K * (t.vertex_map[best][k] - nrm.x_star[k]);
  return nrm;
}

}  // namespace detail

/// |A_t^- ∩ query| at each ladder opening.
inline DecayTable measure_bad_set(const GridFunction& v, const DomainSpec& d, const DomainSpec& query,
                                  const std::vector<double>& ts, const EnvelopeOptions& opts = {}) {
  if (ts.empty()) throw ParameterError("opening ladder is empty");
  const double h = v.spec.spacing();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (!(ts[i] > 0.0) || !std::isfinite(ts[i] * h * h) || ts[i] * h * h == 0.0)
      throw ParameterError("ladder value outside the representable range");
    if (i && !(ts[i] > ts[i - 1])) throw ParameterError("opening ladder must be strictly increasing");
  }
  const GridMask qm = mask_of_domain(query, v.spec);
  DecayTable tab;
  tab.ts = ts;
  tab.query_measure = measure(qm);
  tab.noise_floor = 10.0 * v.spec.cell_volume();
  for (double t : ts) {
    EnvelopeOptions o = opts;
    o.tolerance.reset();
    tab.measures.push_back(measure(qm - g_minus_mask(v, t, d, query, o).mask));
  }
  return tab;
}

/// Geometric ladder from t_min to t_max (inclusive up to rounding) with the given points per decade.
inline std::vector<double> geometric_ladder(double t_min, double t_max, double per_decade) {
  if (!(t_min > 0.0 && t_max >= t_min && per_decade > 0.0)) throw ParameterError("invalid ladder bounds");
  std::vector<double> ts;
  const double ratio = std::pow(10.0, 1.0 / per_decade);
  for (std::size_t k = 0;; ++k) {
    const double t = t_min * std::pow(ratio, static_cast<double>(k));
    if (t > t_max * (1.0 + 1e-12)) break;
    ts.push_back(t);
  }
  return ts;
}

struct ContactDiagnostics {
  std::size_t vertices = 0;
  std::size_t contacts = 0;
  std::size_t contacts_inside = 0;
  std::size_t contacts_in_G = 0;
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  double max_eigenvalue = -std::numeric_limits<double>::infinity();
  double hessian_lower = 0.0, hessian_upper = 0.0, hessian_tolerance = 0.0;
  double budget_factor = 0.0;
  bool claim1 = false, claim2 = false, budget = false;
};

struct MeasureLemmaReport {
  Outcome outcome = Outcome::fail;
  std::string note;
  double K = 32.0;
  double ratio = 0.0;
  double threshold = 0.0;
  double slack = 0.0;
  double margin = 0.0;
  double one_minus_sigma = 0.0;
  std::optional<detail::Normalization> normalization;
  SupersolutionReport certificate;
  ContactDiagnostics contacts;
  /// Strong variant only: largest det(I + D^2 v / K) over contact points and its bound.
  double max_det = -std::numeric_limits<double>::infinity();
  double det_bound = 0.0;
  bool det_ok = true;
  bool trace_det_ok = true;
};

struct MeasureLemmaOptions {
  double K = 32.0;
  EnvelopeOptions envelope;
  std::optional<double> certificate_tolerance;
};

namespace detail {

inline MeasureLemmaReport measure_lemma_core(const GridFunction& v, const DomainSpec& d, const EllipticityParams& p,
                                             long double one_minus, const MeasureLemmaOptions& o,
                                             const CoefficientField* a) {
  p.validate();
  const GridSpec& g = v.spec;
  if (p.n != g.dim()) throw ParameterError("ellipticity dimension does not match the grid");
  const std::size_t n = g.dim();
  const GridMask dom = mask_of_domain(d, g);
  require_region_in(centered_cube(g, 2.0, true), dom, "closed Q_2");
  const ConstantsReport c = compute_constants(p);

  MeasureLemmaReport r;
  r.K = o.K;
  r.one_minus_sigma = static_cast<double>(one_minus);
  r.certificate = verify_supersolution(v, d, p, o.certificate_tolerance);
  if (!r.certificate.pass) {
    r.outcome = Outcome::hypothesis_not_met;
    r.note = "input is not certified as a supersolution";
    return r;
  }
  const DomainSpec seed_cube = centered_cube(g, c.alpha1);
  r.normalization = normalize_at(v, c.K_seed, d, seed_cube, o.envelope);
  if (!r.normalization) {
    r.outcome = Outcome::hypothesis_not_met;
    r.note = "G_{1/n} does not meet Q_{alpha1}";
    return r;
  }
  const GridFunction w = r.normalization->apply(v);

  const DomainSpec q1 = centered_cube(g, 1.0);
  const GridMask q1m = mask_of_domain(q1, g);
  const TouchReport G = g_minus_mask(w, o.K, d, d, o.envelope);
  r.ratio = static_cast<double>((G.mask & q1m).count()) / static_cast<double>(q1m.count());
  r.slack = h_slack(g, q1);
  r.threshold = r.one_minus_sigma - r.slack;
  r.margin = r.ratio - r.threshold;

  ContactDiagnostics& cd = r.contacts;
  const GridMask V = mask_of_domain(seed_cube, g);
  const TouchReport E = contact_set(w, V, centered_cube(g, 1.0, true), o.K);
  const SymmetricMatrixField H = discrete_hessian(w, &dom);
  cd.vertices = V.count();
  cd.contacts = E.contact_points.size();
  const double ratio = p.ratio();
  cd.hessian_lower = -o.K;
  cd.hessian_upper = o.K * static_cast<double>(n - 1) * ratio;
  cd.hessian_tolerance = 1e-6 * o.K + std::max(0.0, r.certificate.tolerance) / p.lambda;
  cd.budget_factor = std::pow(1.0 + static_cast<double>(n - 1) * ratio, static_cast<double>(n));
  r.det_bound = std::pow(ratio, static_cast<double>(n - 1));
  bool hess_ok = true;
  for (std::size_t x : E.contact_points) {
    cd.contacts_inside += q1m[x];
    cd.contacts_in_G += G.mask[x];
    if (!H.interior[x]) {
      hess_ok = false;
      continue;
    }
    const auto ev = H.values[x].eigenvalues();
    cd.min_eigenvalue = std::min(cd.min_eigenvalue, ev.front());
    cd.max_eigenvalue = std::max(cd.max_eigenvalue, ev.back());
    if (a) {
      const SymMatrix B = SymMatrix::identity(n) + (1.0 / o.K) * H.values[x];
      r.max_det = std::max(r.max_det, B.determinant());
      const SymMatrix& ax = a->values[x];
      const double lhs = ax.trace();
      const double rhs = static_cast<double>(n) * std::pow(ax.determinant(), 1.0 / static_cast<double>(n));
      if (lhs < rhs - 1e-12 * lhs) r.trace_det_ok = false;
    }
  }
  cd.claim1 = cd.contacts_inside == cd.contacts && cd.contacts_in_G == cd.contacts;
  cd.claim2 = hess_ok && cd.min_eigenvalue >= cd.hessian_lower - cd.hessian_tolerance &&
              cd.max_eigenvalue <= cd.hessian_upper + cd.hessian_tolerance;
  cd.budget = static_cast<double>(cd.vertices) <= cd.budget_factor * static_cast<double>(cd.contacts);
  if (a) r.det_ok = r.max_det <= r.det_bound + 1e-6;

  const bool ok = r.margin >= 0.0 && cd.claim1 && cd.claim2 && cd.budget && r.det_ok && r.trace_det_ok;
  r.outcome = ok ? Outcome::pass : Outcome::fail;
  if (!ok) {
    r.note = r.margin < 0.0 ? "measure ratio below threshold"
             : !cd.claim1   ? "contact point outside Q_1 or outside G_K"
             : !cd.claim2   ? "Hessian bound violated at a contact point"
             : !cd.budget   ? "vertex budget exceeded"
             : !r.det_ok    ? "determinant bound violated at a contact point"
                            : "trace-determinant inequality violated";
  }
  return r;
}

}  // namespace detail

/// Measure estimate for viscosity supersolutions on a domain containing closed Q_2.
inline MeasureLemmaReport verify_measure_lemma(const GridFunction& v, const DomainSpec& d, const EllipticityParams& p,
                                               const MeasureLemmaOptions& o = {}) {
  return detail::measure_lemma_core(v, d, p, compute_constants(p).one_minus_sigma, o, nullptr);
}

/// Strong variant: threshold 1 - sigma1 and the determinant bound (Lambda/lambda)^(n-1) at contact points.
inline MeasureLemmaReport verify_strong_measure_lemma(const GridFunction& v, const CoefficientField& a,
                                                      const DomainSpec& d, const EllipticityParams& p,
                                                      const MeasureLemmaOptions& o = {}) {
  require_same_spec(v.spec, a.spec, "verify_strong_measure_lemma");
  a.validate();
  return detail::measure_lemma_core(v, d, p, compute_constants(p).one_minus_sigma1, o, &a);
}

/// Largest power-of-two downscaling 2^-j (j <= max_halvings) for which G_{1/n} meets Q_{alpha1}.
///
/// Scaling preserves the supersolution property, so this only selects the amplitude.
inline std::optional<double> seed_scale(const GridFunction& v, const DomainSpec& d, std::size_t n,
                                        std::size_t max_halvings = 40) {
  const ConstantsReport c = compute_constants({n, 1.0, 1.0});
  const DomainSpec seed_cube = detail::centered_cube(v.spec, c.alpha1);
  GridFunction w = v;
  double s = 1.0;
  for (std::size_t j = 0; j <= max_halvings; ++j) {
    if (g_minus_mask(w, c.K_seed, d, seed_cube).mask.any()) return s;
    for (double& x : w.values) x *= 0.5;
    s *= 0.5;
  }
  return std::nullopt;
}

struct TouchingReport {
  Outcome outcome = Outcome::fail;
  std::string note;
  double max_abs = 0.0;
  std::size_t touched = 0;
  std::optional<std::size_t> witness;
};

/// |v| <= 1/4 on a domain containing closed Q_3 implies G_1 meets Q_3.
inline TouchingReport verify_touching(const GridFunction& v, const DomainSpec& d, const EnvelopeOptions& opts = {}) {
  const GridMask dom = mask_of_domain(d, v.spec);
  detail::require_region_in(detail::centered_cube(v.spec, 3.0, true), dom, "closed Q_3");
  TouchingReport r;
  r.max_abs = detail::max_abs(v, dom);
  if (r.max_abs > 0.25) {
    r.outcome = Outcome::hypothesis_not_met;
    r.note = "max |v| exceeds 1/4";
    return r;
  }
  const TouchReport t = g_minus_mask(v, 1.0, d, detail::centered_cube(v.spec, 3.0), opts);
  r.touched = t.contact_points.size();
  if (r.touched) r.witness = t.contact_points.front();
  r.outcome = r.touched ? Outcome::pass : Outcome::fail;
  if (!r.touched) r.note = "G_1 does not meet Q_3";
  return r;
}

struct LocalizationReport {
  Outcome outcome = Outcome::fail;
  std::string note;
  std::optional<detail::Normalization> normalization;
  /// min over closed Q_{alpha2} of v - L + 1, against M1.
  double infimum = 0.0;
  double M1 = 0.0;
  bool part_i = false;
  /// Nodes of G_{M2} in Q_{alpha1}.
  std::size_t touched = 0;
  double M2 = 0.0;
  bool part_ii = false;
};

/// Localization: from touching at opening 1/(8n) in Q_3 to touching at opening M2 in Q_{alpha1}.
inline LocalizationReport verify_localization(const GridFunction& v, const DomainSpec& d, const EllipticityParams& p,
                                              const EnvelopeOptions& opts = {}) {
  p.validate();
  const GridSpec& g = v.spec;
  const GridMask dom = mask_of_domain(d, g);
  const double R = 2.0 * std::sqrt(static_cast<double>(g.dim()));
  detail::require_region_in(DomainSpec::ball(Point(g.dim(), 0.0), R, DomainSpec::bounding_of(g), true), dom,
                            "closed B_{2 sqrt n}");
  const ConstantsReport c = compute_constants(p);
  LocalizationReport r;
  r.M1 = static_cast<double>(c.M1.value());
  r.M2 = static_cast<double>(c.M2.value());
  r.normalization =
      detail::normalize_at(v, 1.0 / (8.0 * static_cast<double>(g.dim())), d, detail::centered_cube(g, 3.0), opts);
  if (!r.normalization) {
    r.outcome = Outcome::hypothesis_not_met;
    r.note = "G_{1/(8n)} does not meet Q_3";
    return r;
  }
  const GridFunction w = r.normalization->apply(v);
  const GridMask small = mask_of_domain(detail::centered_cube(g, c.alpha2, true), g);
  if (!small.any()) throw DomainError("grid too coarse: no node in closed Q_{alpha2}");
  r.infimum = std::numeric_limits<double>::infinity();
  for (std::size_t i : small.indices()) r.infimum = std::min(r.infimum, w[i]);
  r.part_i = r.infimum <= r.M1;
  r.touched = g_minus_mask(v, r.M2, d, detail::centered_cube(g, c.alpha1), opts).contact_points.size();
  r.part_ii = r.touched > 0;
  r.outcome = r.part_i && r.part_ii ? Outcome::pass : Outcome::fail;
  if (r.outcome == Outcome::fail) r.note = !r.part_i ? "normalized infimum exceeds M1" : "G_{M2} does not meet Q_{alpha1}";
  return r;
}

/// v~(y) = v(x0 + r y) / (t r^2) on the affinely mapped grid (spacing h/r).
///
/// r must be a positive integer multiple of h and x0 a grid node.
inline GridFunction rescale(const GridFunction& v, const Point& x0, double r, double t) {
  const GridSpec& g = v.spec;
  if (!(r > 0.0) || !(t > 0.0)) throw ParameterError("r and t must be positive");
  const double q = r / g.spacing();
  if (std::abs(q - std::round(q)) > 1e-9 * q) throw AlignmentError("r is not a multiple of the grid spacing");
  Point origin(g.dim());
  for (std::size_t k = 0; k < g.dim(); ++k) {
    const double s = (x0[k] - g.origin()[k]) / g.spacing();
    if (std::abs(s - std::round(s)) > 1e-9 * std::max(1.0, std::abs(s))) throw AlignmentError("x0 is not a grid node");
    origin[k] = -std::round(s) * g.spacing() / r;
  }
  GridFunction out(GridSpec(g.shape(), origin, g.spacing() / r));
  const double f = 1.0 / (t * r * r);
  for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = f * v[i];
  return out;
}

struct BarrierReport {
  double h = 0.0;
  /// max |w| over the annulus; the subsolution slack is 10 h scale.
  double scale = 0.0;
  double min_pucci = 0.0, tolerance = 0.0;
  /// Node extremes on the shells R <= |x| < R + h (outer) and alpha3 <= |x| < alpha3 + h (inner),
  /// and the minimum over alpha3 <= |x| <= 3 sqrt(n)/2.
  double max_outer = 0.0, max_inner = 0.0, min_middle = 0.0;
  double margin_a = 0.0, margin_b = 0.0, margin_c = 0.0, margin_d = 0.0;
  /// Closed-form margins of (b)-(d) on the spheres themselves.
  double limit_b = 0.0, limit_c = 0.0, limit_d = 0.0;
  bool a = false, b = false, c = false, d = false;
  bool pass() const { return a && b && c && d; }
};

/// Discrete properties of the barrier on the annulus alpha3 <= |x| <= 2 sqrt(n):
/// (a) M^-(D^2_h w) >= -10 h scale, (b) w <= 0 on the outer sphere, (c) w <= M1 on the inner sphere,
/// (d) w >= 2 between alpha3 and 3 sqrt(n)/2.
inline BarrierReport certify_barrier(const BarrierParams& bp, const GridSpec& g) {
  const std::size_t n = g.dim();
  const double h = g.spacing();
  const double R = 2.0 * std::sqrt(static_cast<double>(n)), mid = 1.5 * std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k)
    if (g.origin()[k] > -(R + h) || g.origin()[k] + g.extent(k) < R + h)
      throw DomainError("grid does not contain the ball of radius 2 sqrt(n) plus one spacing");
  const GridFunction w = barrier(bp, g);
  const GridMask ann = mask_of_domain(
      DomainSpec::annulus(Point(n, 0.0), bp.alpha3, R, DomainSpec::bounding_of(g)), g);
  BarrierReport r;
  r.h = h;
  r.scale = detail::max_abs(w, ann);
  r.tolerance = 10.0 * h * r.scale;
  const SymmetricMatrixField H = discrete_hessian(w, &ann);
  r.min_pucci = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i)
    if (H.interior[i]) r.min_pucci = std::min(r.min_pucci, pucci_minus(H.values[i], bp.p));
  r.max_outer = r.max_inner = -std::numeric_limits<double>::infinity();
  r.min_middle = std::numeric_limits<double>::infinity();
  Point x(n);
  for (std::size_t i = 0; i < g.size(); ++i) {
    g.node(i, x);
    const double rr = std::sqrt(norm2(x));
    if (rr >= R && rr < R + h) r.max_outer = std::max(r.max_outer, w[i]);
    if (rr >= bp.alpha3 && rr < bp.alpha3 + h) r.max_inner = std::max(r.max_inner, w[i]);
    if (rr >= bp.alpha3 && rr <= mid) r.min_middle = std::min(r.min_middle, w[i]);
  }
  if (!std::isfinite(r.max_outer) || !std::isfinite(r.max_inner)) throw DomainError("a barrier shell has no nodes");
  r.margin_a = r.min_pucci + r.tolerance;
  r.margin_b = -r.max_outer;
  r.margin_c = bp.M1 - r.max_inner;
  r.margin_d = r.min_middle - 2.0;
  Point on_axis(n, 0.0);
  on_axis[0] = bp.alpha3;
  r.limit_b = 0.0;
  r.limit_c = bp.M1 - bp(on_axis);
  on_axis[0] = mid;
  r.limit_d = bp(on_axis) - 2.0;
  r.a = r.margin_a >= 0.0;
  r.b = r.margin_b >= 0.0;
  r.c = r.margin_c > 0.0;
  r.d = r.margin_d > 0.0;
  return r;
}

/// Empirical one-step gain: the worst bad fraction |A_{M t} ∩ Q| / |Q| over dyadic cubes Q of the frame
/// whose dilation lies in the root and meets G_t (and the root itself, with its dilation only required to meet G_t).
struct OneStepEstimate {
  double M = 0.0;
  double sigma = 0.0;
  IndexBox worst;
  double worst_t = 0.0;
  std::size_t cubes = 0;
  std::size_t min_side = 1;
};

namespace detail {

struct LadderMasks {
  std::vector<double> ts;
  std::vector<GridMask> good;
};

inline GridMask good_mask(const GridFunction& v, double t, const DomainSpec& d, const EnvelopeOptions& opts) {
  return g_minus_mask(v, t, d, d, opts).mask;
}

inline void one_step_scan(const GridMask& good_t, const GridMask& bad_Mt, const DyadicFrame& frame, double t,
                          std::size_t min_side, OneStepEstimate& est) {
  const BoxCounter cg(good_t), cb(bad_Mt);
  std::vector<IndexBox> stack{frame.root};
  while (!stack.empty()) {
    IndexBox q = std::move(stack.back());
    stack.pop_back();
    const IndexBox big = q.dilated();
    const bool is_root = q.side == frame.root.side;
    if ((is_root || big.inside(frame.root)) && cg.count(big) > 0) {
      ++est.cubes;
      const double frac = static_cast<double>(cb.count(q)) / static_cast<double>(q.volume());
      if (frac > est.sigma) {
        est.sigma = frac;
        est.worst = q;
        est.worst_t = t;
      }
    }
    if (q.side / 2 >= min_side) {
      auto ch = q.children();
      for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(std::move(*it));
    }
  }
}

}  // namespace detail

/// Harness outcome: an empty D or a failed hypothesis exercises nothing and is not a pass.
inline Outcome cz_outcome(const CZResult& r) {
  if (!r.hypothesis_met || r.degenerate) return Outcome::hypothesis_not_met;
  return r.conclusion_holds ? Outcome::pass : Outcome::fail;
}

struct CZInstance {
  GridMask D, E;
};

/// Random D inside the central half of the root, and E = D plus the dilations of the cubes D selects.
///
/// D is a union of random boxes followed by a sprinkle of single nodes with probability fill.
/// With D confined to the central half, every selected cube's dilation stays in the root.
inline CZInstance cz_constructive_instance(const GridSpec& g, const DyadicFrame& frame, double delta, double fill,
                                           std::uint64_t seed) {
  if (frame.root.side < 8) throw DomainError("root cube needs at least 8 nodes per axis");
  Rng rng(seed);
  const std::size_t n = g.dim();
  const auto quarter = static_cast<std::ptrdiff_t>(frame.root.side / 4);
  const auto half = static_cast<std::ptrdiff_t>(frame.root.side / 2);
  GridMask D(g);
  const std::size_t boxes = 1 + rng.below(6);
  for (std::size_t b = 0; b < boxes; ++b) {
    const auto side = static_cast<std::size_t>(1 + rng.below(static_cast<std::uint64_t>(half / 2)));
    IndexBox box{frame.root.lo, side};
    for (std::size_t k = 0; k < n; ++k)
      box.lo[k] += quarter + static_cast<std::ptrdiff_t>(rng.below(static_cast<std::uint64_t>(half) - side + 1));
    add_box(D, box);
  }
  IndexBox central{frame.root.lo, frame.root.side / 2};
  for (auto& l : central.lo) l += quarter;
  for (std::size_t i : mask_of_box(g, central).indices())
    if (rng.uniform() < fill) D.set(i);
  // keep |D| <= delta |root| so that only the dilation hypothesis is in play
  const auto cap = static_cast<std::size_t>(std::floor(delta * static_cast<double>(frame.root.volume())));
  if (D.count() > cap) {
    std::size_t kept = 0;
    for (std::size_t i = 0; i < D.size(); ++i)
      if (D[i] && ++kept > cap) D.flags[i] = 0;
  }
  GridMask E = D;
  for (const IndexBox& q : cz_decompose(D, D | mask_of_box(g, frame.root), frame, delta).selected)
    add_box(E, q.dilated());
  return {std::move(D), std::move(E)};
}

/// sigma_surrogate for a given M over the base openings ts.
inline OneStepEstimate estimate_one_step(const GridFunction& v, const DomainSpec& d, const DyadicFrame& frame, double M,
                                         const std::vector<double>& ts, std::size_t min_side = 4,
                                         const EnvelopeOptions& opts = {}) {
  if (!(M > 1.0)) throw ParameterError("surrogate opening factor must exceed 1");
  if (min_side == 0) throw ParameterError("minimum cube side must be positive");
  const GridMask root = mask_of_box(v.spec, frame.root);
  OneStepEstimate est;
  est.M = M;
  est.min_side = min_side;
  for (double t : ts) {
    const GridMask good_t = detail::good_mask(v, t, d, opts);
    const GridMask bad = root - detail::good_mask(v, M * t, d, opts);
    detail::one_step_scan(good_t, bad, frame, t, min_side, est);
  }
  return est;
}

struct IterationRow {
  std::size_t k = 0;
  double t = 0.0;
  double measure = 0.0;
  /// sigma_surrogate^k
  double bound = 0.0;
  /// measure_k / measure_{k-1}; NaN for k = 0 or an empty predecessor.
  double step_ratio = std::numeric_limits<double>::quiet_NaN();
  bool step_ok = true;
  bool strict_ok = true;
  /// measure / |root| <= sigma^k + slack.
  bool absolute_ok = true;
};

struct IterationReport {
  Outcome outcome = Outcome::fail;
  std::string note;
  double M = 0.0, sigma = 0.0, slack = 0.0;
  std::vector<IterationRow> rows;
  /// Openings and measures for the continuous-ladder curve, with the bound sigma^-1 t^-eps.
  std::vector<double> curve_t, curve_measure, curve_bound;
  double eps_surrogate = 0.0;
};

/// Geometric decay |A_{M^k} ∩ Q_1| <= sigma |A_{M^(k-1)} ∩ Q_1| + slack for k = 1..k_max.
inline IterationReport iterate_decay(const GridFunction& v, const DomainSpec& d, const EllipticityParams& p,
                                     std::size_t k_max, const DyadicFrame& frame, double M, double sigma,
                                     const std::vector<double>& curve_ts = {}, const EnvelopeOptions& opts = {}) {
  p.validate();
  const GridSpec& g = v.spec;
  const GridMask dom = mask_of_domain(d, g);
  const double R = 2.0 * std::sqrt(static_cast<double>(g.dim()));
  detail::require_region_in(DomainSpec::ball(Point(g.dim(), 0.0), R, DomainSpec::bounding_of(g), true), dom,
                            "closed B_{2 sqrt n}");
  if (!(sigma > 0.0 && sigma <= 1.0)) throw ParameterError("surrogate sigma must lie in (0, 1]");
  if (!(M > 1.0)) throw ParameterError("surrogate opening factor must exceed 1");
  IterationReport r;
  r.M = M;
  r.sigma = sigma;
  if (detail::max_abs(v, dom) > 0.25) {
    r.outcome = Outcome::hypothesis_not_met;
    r.note = "max |v| exceeds 1/4";
    return r;
  }
  const double kmax_representable = std::floor(std::log(1e300 / (g.spacing() * g.spacing())) / std::log(M));
  if (static_cast<double>(k_max) > kmax_representable) {
    k_max = static_cast<std::size_t>(kmax_representable);
    r.note = "k_max truncated to " + std::to_string(k_max);
  }
  const GridMask root = mask_of_box(g, frame.root);
  const double root_measure = measure(root);
  r.slack = 4.0 * g.spacing() * 2.0 * static_cast<double>(g.dim()) *
            std::pow(static_cast<double>(frame.root.side) * g.spacing(), static_cast<double>(g.dim()) - 1.0);
  bool ok = true;
  for (std::size_t k = 0; k <= k_max; ++k) {
    IterationRow row;
    row.k = k;
    row.t = std::pow(M, static_cast<double>(k));
    row.measure = measure(root - detail::good_mask(v, row.t, d, opts));
    row.bound = std::pow(sigma, static_cast<double>(k));
    if (k > 0) {
      const double prev = r.rows.back().measure;
      if (prev > 0.0) row.step_ratio = row.measure / prev;
      row.step_ok = row.measure <= sigma * prev + r.slack;
      row.strict_ok = row.measure <= sigma * prev;
    } else {
      row.step_ok = row.strict_ok = row.measure <= root_measure;
    }
    row.absolute_ok = row.measure / root_measure <= row.bound + r.slack;
    ok = ok && row.step_ok && row.absolute_ok;
    r.rows.push_back(row);
  }
  r.eps_surrogate = sigma < 1.0 ? std::log(1.0 / sigma) / std::log(M) : 0.0;
  for (double t : curve_ts) {
    r.curve_t.push_back(t);
    r.curve_measure.push_back(measure(root - detail::good_mask(v, t, d, opts)));
    r.curve_bound.push_back(std::pow(t, -r.eps_surrogate) / sigma);
  }
  r.outcome = ok ? Outcome::pass : Outcome::fail;
  if (!ok && r.note.empty()) r.note = "geometric decay violated";
  return r;
}

}  // namespace w2eps
