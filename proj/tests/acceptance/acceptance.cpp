// Acceptance suite. Usage: acceptance [--out DIR] [criterion ...]
// Prints one "CRITERION k: PASS|FAIL" line per criterion; exit status is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "w2eps/w2eps.hpp"

using namespace w2eps;

namespace {

// Pinned tolerances.
constexpr double tol_sigma = 1e-15;
constexpr double tol_eps_rel = 1e-12;
constexpr double tol_oracle_rel = 1e-12;
constexpr double tol_det = 1e-6;
constexpr double exponent_target = 2.0, exponent_band = 0.3;
constexpr double barrier_subsolution_factor = 10.0;

std::string num(double x) { return format_number(x); }

std::string num(long double x) { return format_number(static_cast<double>(x)); }

/// Sub-checks of one criterion. Rows marked recorded go to the criterion's CSV.
class Report {
 public:
  explicit Report(int id) : id_(id), csv_({"criterion", "check", "detail", "pass"}) {}

  bool check(const std::string& name, bool pass, const std::string& detail, bool recorded = true) {
    std::cout << "  [" << (pass ? "PASS" : "FAIL") << "] " << name << ": " << detail << '\n';
    ok_ = ok_ && pass;
    if (recorded) csv_.add({std::int64_t{id_}, name, detail, pass});
    return pass;
  }

  void info(const std::string& name, const std::string& detail, bool recorded = true) {
    std::cout << "  [info] " << name << ": " << detail << '\n';
    if (recorded) csv_.add({std::int64_t{id_}, name, detail, true});
  }

  bool ok() const { return ok_; }
  const CsvTable& csv() const { return csv_; }

 private:
  int id_;
  bool ok_ = true;
  CsvTable csv_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void runtime_check(Report& r, std::chrono::steady_clock::time_point t0, double limit) {
  const double s = seconds_since(t0);
  r.check("runtime", s < limit, num(s) + " s < " + num(limit) + " s", false);
}

// 1. Constants at n = 2, lambda = Lambda = 1.
void criterion_1(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  const ConstantsReport c = compute_constants({2, 1.0, 1.0});
  r.check("M1 == 576", c.M1.exact && *c.M1.exact == 576u, c.M1.decimal());
  r.check("M2 == 497664", c.M2.exact && *c.M2.exact == 497664u, c.M2.decimal());
  r.check("M == 509607936", c.M.exact && *c.M.exact == 509607936u, c.M.decimal());
  bool identity = true;
  for (std::uint64_t n = 2; n <= 6; ++n) identity = identity && 256 * n * n * 432 * n * 8 == 884736 * n * n * n;
  r.check("256n^2 * 432n * 8 == 884736 n^3, n = 2..6", identity, "integer arithmetic");

  // the reference literal 1 - 1/288 does not follow from (lambda/(lambda+(n-1)Lambda))^n (4 sqrt n)^-n,
  // which is (1/2)^2 (1/(4 sqrt 2))^2 = 1/128 here
  const long double literal = 1.0L / 288.0L;
  r.check("sigma == 1 - 1/288 to 1e-15", std::abs(c.one_minus_sigma - literal) <= tol_sigma,
          "1 - sigma = " + num(c.one_minus_sigma) + ", literal " + num(literal));
  const long double eps_literal = std::log(288.0L / 287.0L) / c.M.log_value;
  r.check("eps_visc == log(288/287)/log M to 1e-12 relative",
          std::abs(c.eps_visc - eps_literal) <= tol_eps_rel * eps_literal,
          "eps_visc = " + num(c.eps_visc) + ", literal " + num(eps_literal));
  r.info("formula value", "1 - sigma = 1/" + num(1.0L / c.one_minus_sigma) + ", eps_visc = log(128/127)/log M = " +
                              num(std::log(128.0L / 127.0L) / c.M.log_value));
  runtime_check(r, t0, 1.0);
}

// 2. Exponent bound audit over n in {2, 3} and ratio 1..1024.
void criterion_2(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  std::size_t points = 0, above = 0, discrepancies = 0;
  for (std::size_t n : {2u, 3u})
    for (double q = 1.0; q <= 1024.0; q *= 2.0) {
      const ConstantsReport c = compute_constants({n, 1.0, q});
      ++points;
      above += c.eps_visc > c.eps_bound_corrected;
      if (!(c.eps_visc > c.eps_bound_printed)) {
        ++discrepancies;
        r.info("DISCREPANCY n=" + std::to_string(n) + " ratio=" + num(q),
               "printed bound " + num(c.eps_bound_printed) + " >= eps_visc " + num(c.eps_visc));
      }
    }
  r.check("eps_visc > corrected-bracket bound at every point", above == points,
          std::to_string(above) + "/" + std::to_string(points));
  r.check("printed-reading discrepancy report emitted", discrepancies > 0,
          std::to_string(discrepancies) + " grid points where the printed bound is not below eps_visc");
  runtime_check(r, t0, 1.0);
}

// 3. Moreau envelope and proximal hull against brute force.
void criterion_3(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_moreau = 0.0, worst_hull = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const std::size_t n = seed % 2 ? 3 : 2;
    const GridSpec g = GridSpec::cube(n, 1.0, n == 2 ? 17 : 9);
    GridFunction v(g);
    for (double& x : v.values) x = rng.uniform(-1.0, 1.0);
    const DomainSpec d = rng.uniform() < 0.5
                             ? DomainSpec::whole(g)
                             : DomainSpec::cube(Point(n, 0.0), 0.75, DomainSpec::bounding_of(g), true);
    const GridMask dom = mask_of_domain(d, g);
    const double K = rng.uniform(1.0, 64.0);
    auto rel = [&](const std::vector<double>& a, const std::vector<double>& b) {
      double diff = 0.0, scale = 1.0;
      for (std::size_t i = 0; i < a.size(); ++i) {
        if (!dom[i]) continue;
        diff = std::max(diff, std::abs(a[i] - b[i]));
        scale = std::max(scale, std::abs(b[i]));
      }
      return diff / scale;
    };
    worst_moreau = std::max(worst_moreau, rel(moreau_lower(v, K, d).values, oracle::moreau(v, K, dom)));
    const HullResult h = proximal_hull_full(v, K, d);
    worst_hull = std::max(worst_hull, rel(h.hull.values, oracle::hull(v, K, dom, h.vertex_lattice)));
  }
  r.check("moreau_lower vs brute force, 200 grids", worst_moreau <= tol_oracle_rel, "max relative error " + num(worst_moreau));
  r.check("proximal_hull vs brute force, 200 grids", worst_hull <= tol_oracle_rel, "max relative error " + num(worst_hull));
  runtime_check(r, t0, 60.0);
}

std::vector<std::pair<std::string, GridFunction>> monotonicity_family(const GridSpec& g) {
  std::vector<std::pair<std::string, GridFunction>> fs;
  for (std::uint64_t s = 0; s < 4; ++s)
    fs.emplace_back("pieces seed " + std::to_string(s), sample(random_viscosity_pieces({2, 1.0, 2.0}, s, 3, 2), g));
  fs.emplace_back("cone", radial_power(1.0, -1, 0.01, g));
  fs.emplace_back("cusp", radial_power(0.4, -1, 0.01, g));
  for (auto k : {CoefficientKind::constant, CoefficientKind::checkerboard, CoefficientKind::random_rotation}) {
    const auto s = static_cast<std::uint64_t>(k);
    fs.emplace_back(std::string("strong ") + to_string(k),
                    strong_supersolution({k, s, {2, 1.0, 4.0}}, {BoundaryKind::random_trig, s, 4}, g).v);
  }
  Rng rng(5);
  GridFunction noise(g);
  for (double& x : noise.values) x = rng.uniform(-1.0, 1.0);
  fs.emplace_back("uniform noise", std::move(noise));
  return fs;
}

// 4. G_K grows with K and the bad-set measure shrinks with t.
void criterion_4(Report& r) {
  const GridSpec g = GridSpec::cube(2, 2.0, 129);
  const DomainSpec d = DomainSpec::whole(g);
  const DomainSpec q = DomainSpec::ball({0.0, 0.0}, 0.5, DomainSpec::bounding_of(g));
  std::vector<double> Ks;
  for (double K = 0.25; K <= 512.0; K *= std::sqrt(2.0)) Ks.push_back(K);
  EnvelopeOptions lattice;
  lattice.tolerance_coefficient = lattice_tolerance_coefficient(2);
  std::size_t inclusion_violations = 0, measure_violations = 0;
  for (const auto& [name, v] : monotonicity_family(g)) {
    std::vector<GridMask> ms;
    for (double K : Ks) ms.push_back(g_minus_mask(v, K, d, d).mask);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < ms.size(); ++i)
      for (std::size_t j = i + 1; j < ms.size(); ++j) bad += (ms[i] - ms[j]).count();
    std::size_t mbad = 0;
    for (const EnvelopeOptions& o : {EnvelopeOptions{}, lattice}) {
      const DecayTable t = measure_bad_set(v, d, q, Ks, o);
      for (std::size_t i = 1; i < t.measures.size(); ++i) mbad += t.measures[i] > t.measures[i - 1];
    }
    r.info(name, std::to_string(bad) + " inclusion and " + std::to_string(mbad) + " measure violations");
    inclusion_violations += bad;
    measure_violations += mbad;
  }
  r.check("G_K subset of G_K' for all K <= K'", inclusion_violations == 0,
          std::to_string(inclusion_violations) + " violating nodes over " + std::to_string(Ks.size()) + " openings");
  r.check("measure(A_t) nonincreasing in t", measure_violations == 0, std::to_string(measure_violations) + " violations");
}

struct LemmaRun {
  std::string label;
  EllipticityParams p;
  GridFunction v;
  std::optional<CoefficientField> a;
};

/// 12 strong runs and 8 certified viscosity runs at 257^2 on [-1, 1]^2, scaled by seed_scale.
std::vector<LemmaRun> lemma_runs(Report& r, bool strong_only) {
  const GridSpec g = GridSpec::cube(2, 2.0, 257);
  const DomainSpec d = DomainSpec::whole(g);
  const std::vector<EllipticityParams> params{{2, 1.0, 1.0}, {2, 1.0, 2.0}, {2, 1.0, 4.0}};
  std::vector<LemmaRun> runs;
  auto scaled = [&](GridFunction v) -> std::optional<GridFunction> {
    const auto s = seed_scale(v, d, 2);
    if (!s) return std::nullopt;
    for (double& x : v.values) x *= *s;
    return v;
  };
  std::uint64_t seed = 1;
  for (const auto& p : params)
    for (auto k : {CoefficientKind::constant, CoefficientKind::checkerboard, CoefficientKind::random_rotation,
                   CoefficientKind::radial_anisotropic}) {
      StrongSolution s = strong_supersolution({k, seed, p}, {BoundaryKind::random_trig, seed, 4}, g);
      auto v = scaled(std::move(s.v));
      const std::string label = std::string("strong ") + to_string(k) + " (" + num(p.lambda) + "," + num(p.Lambda) +
                                ") seed " + std::to_string(seed);
      ++seed;
      if (!v) {
        r.check(label + " amplitude", false, "no scaling touches the seed cube");
        continue;
      }
      runs.push_back({label, p, std::move(*v), std::move(s.a)});
    }
  if (strong_only) return runs;
  // minima of pieces have kinks the five-point check can see; uncertified draws are skipped, not counted
  const std::size_t quota[] = {3, 3, 2};
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    std::size_t got = 0;
    std::vector<std::string> skipped;
    for (std::uint64_t s = 100 * (pi + 1); got < quota[pi] && s < 100 * (pi + 1) + 50; ++s) {
      auto v = scaled(sample(random_viscosity_pieces(params[pi], s, 3, 2), g));
      if (!v || !verify_supersolution(*v, d, params[pi]).pass) {
        skipped.push_back(std::to_string(s));
        continue;
      }
      runs.push_back({"viscosity (" + num(params[pi].lambda) + "," + num(params[pi].Lambda) + ") seed " +
                          std::to_string(s),
                      params[pi], std::move(*v), std::nullopt});
      ++got;
    }
    std::string list;
    for (const auto& s : skipped) list += (list.empty() ? "" : " ") + s;
    r.info("viscosity (" + num(params[pi].lambda) + "," + num(params[pi].Lambda) + ") skipped seeds",
           list.empty() ? "none" : list);
  }
  return runs;
}

// 5. Measure estimate on 20 supersolutions.
void criterion_5(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  const GridSpec g = GridSpec::cube(2, 2.0, 257);
  const std::vector<LemmaRun> runs = lemma_runs(r, false);
  r.check("20 runs assembled", runs.size() == 20, std::to_string(runs.size()) + " runs");
  for (const LemmaRun& run : runs) {
    const MeasureLemmaReport m = verify_measure_lemma(run.v, DomainSpec::whole(g), run.p);
    r.check(run.label, m.outcome == Outcome::pass && m.contacts.claim2 && m.contacts.budget,
            std::string(to_string(m.outcome)) + " ratio " + num(m.ratio) + " >= " + num(m.threshold) +
                ", claim2 " + (m.contacts.claim2 ? "ok" : "violated") + ", budget " +
                (m.contacts.budget ? "ok" : "violated") + ", contacts " + std::to_string(m.contacts.contacts) +
                (m.note.empty() ? "" : ", " + m.note));
  }
  runtime_check(r, t0, 600.0);
}

// 6. Strong verifier on the strong runs: determinant bound and the 1 - sigma1 threshold.
void criterion_6(Report& r) {
  const GridSpec g = GridSpec::cube(2, 2.0, 257);
  for (const LemmaRun& run : lemma_runs(r, true)) {
    const MeasureLemmaReport s = verify_strong_measure_lemma(run.v, *run.a, DomainSpec::whole(g), run.p);
    const MeasureLemmaReport m = verify_measure_lemma(run.v, DomainSpec::whole(g), run.p);
    const bool det = s.max_det <= s.det_bound + tol_det;
    const bool stronger = run.p.lambda == run.p.Lambda || s.threshold > m.threshold;
    r.check(run.label, s.outcome == Outcome::pass && det && stronger,
            std::string(to_string(s.outcome)) + " ratio " + num(s.ratio) + " >= " + num(s.threshold) + ", det " +
                num(s.max_det) + " <= " + num(s.det_bound) + ", threshold above viscosity " + num(m.threshold));
  }
}

// 7. Barrier certification at three resolutions.
void criterion_7(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  const BarrierParams bp = BarrierParams::from({2, 1.0, 1.0});
  std::vector<BarrierReport> reps;
  for (std::size_t N : {129u, 257u, 513u}) {
    // [-3.1, 3.1]^2 holds the ball of radius 2 sqrt 2 plus one spacing
    const BarrierReport b = certify_barrier(bp, GridSpec::cube(2, 6.2, N));
    const std::string res = std::to_string(N) + "^2";
    r.check("(a) " + res, b.a,
            "min M^-(D^2_h w) " + num(b.min_pucci) + " >= -" + num(barrier_subsolution_factor) + " h scale = " +
                num(-b.tolerance));
    r.check("(b) " + res, b.b && b.margin_b > 0.0, "margin " + num(b.margin_b));
    r.check("(c) " + res, b.c, "margin " + num(b.margin_c));
    r.check("(d) " + res, b.d, "margin " + num(b.margin_d));
    reps.push_back(b);
  }
  // (b) and (d) are equalities on the spheres (w = 0 at |x| = 2 sqrt n, w = 2 at |x| = 3 sqrt n / 2), so the
  // node margins can only decrease toward 0 as nodes approach the spheres
  auto nonshrinking = [&](double BarrierReport::*m) {
    return reps[1].*m >= reps[0].*m && reps[2].*m >= reps[1].*m;
  };
  auto seq = [&](double BarrierReport::*m) {
    return num(reps[0].*m) + ", " + num(reps[1].*m) + ", " + num(reps[2].*m);
  };
  r.check("(a) margin does not shrink", nonshrinking(&BarrierReport::margin_a), seq(&BarrierReport::margin_a));
  r.check("(b) margin does not shrink", nonshrinking(&BarrierReport::margin_b), seq(&BarrierReport::margin_b));
  r.check("(c) margin does not shrink", nonshrinking(&BarrierReport::margin_c), seq(&BarrierReport::margin_c));
  r.check("(d) margin does not shrink", nonshrinking(&BarrierReport::margin_d), seq(&BarrierReport::margin_d));
  bool above_limit = true;
  for (const auto& b : reps)
    above_limit = above_limit && b.margin_b >= b.limit_b && b.margin_c >= b.limit_c && b.margin_d >= b.limit_d - 1e-12;
  r.info("closed-form margins on the spheres", "(b) " + num(reps[0].limit_b) + ", (c) " + num(reps[0].limit_c) +
                                                   ", (d) " + num(reps[0].limit_d) +
                                                   (above_limit ? "; node margins never fall below them"
                                                                : "; node margins fall below them"));
  runtime_check(r, t0, 60.0);
}

RunConfig cone_config() {
  return parse_config(
      "[ellipticity]\nn = 2\n[grid]\nresolution = 513\nside = 2\n[generator]\nkind = cone\nslope = 1\n"
      "[ladder]\nt_min = 4\nt_max = 256\npoints_per_decade = 6\n[query]\nkind = ball\nsize = 0.5\n");
}

// 8. Cone exponent: brute-force prediction on 65^2 first, then the fit on 513^2.
void criterion_8(Report& r) {
  const auto t0 = std::chrono::steady_clock::now();
  // theta(r) ~ r^-s on the ray gives |{theta > t}| ~ t^(-2/s)
  const GridSpec small = GridSpec::cube(2, 2.0, 65);
  const GridFunction cone = sample([](std::span<const double> x) { return -std::sqrt(norm2(x)); }, small);
  const GridMask all(small, true);
  std::vector<double> lr, lt;
  for (std::size_t k = 1; k <= 16; ++k) {
    const std::size_t i = small.flat(std::vector<std::size_t>{32 + k, 32});
    lr.push_back(std::log(static_cast<double>(k) / 32.0));
    lt.push_back(std::log(oracle::theta_at(cone, all, i, 4.0)));
  }
  const double predicted = 2.0 / std::abs(fit_line(lr, lt).slope);
  r.check("65^2 brute-force prediction within 2 +- 0.3", std::abs(predicted - exponent_target) <= exponent_band,
          "predicted exponent " + num(predicted));

  const RunConfig c = cone_config();
  const GridSpec g = make_grid(c);
  EnvelopeOptions o;
  o.tolerance_coefficient = lattice_tolerance_coefficient(2);
  DecayTable tab = measure_bad_set(generate_function(c, g).v, DomainSpec::whole(g), make_query(c, g), c.ladder_values(), o);
  const ExponentFit f = fit_exponent(tab);
  r.check("513^2 fitted exponent within 2 +- 0.3", std::abs(f.exponent - exponent_target) <= exponent_band,
          num(f.exponent) + " (stderr " + num(f.stderr_) + ", " + std::to_string(f.end - f.begin) + " points)");
  r.check("fit matches the prediction within 0.3", std::abs(f.exponent - predicted) <= exponent_band,
          "|" + num(f.exponent) + " - " + num(predicted) + "|");
  runtime_check(r, t0, 300.0);
}

// 9. Calderón-Zygmund property suite.
void criterion_9(Report& r) {
  const double h = 2.0 / 128.0;
  const GridSpec g(std::vector<std::size_t>(2, 128), Point(2, -1.0 + h / 2.0), h);
  const DyadicFrame frame = dyadic_frame(g, {0.0, 0.0}, 1.0);
  const double slack = h_slack(g, DomainSpec::cube({0.0, 0.0}, 1.0, DomainSpec::bounding_of(g)));
  std::vector<std::optional<CZResult>> results(100);
  std::vector<double> deltas(100);
  parallel_for(results.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      Rng rng(i ^ 0x9e3779b97f4a7c15ull);
      deltas[i] = rng.uniform(0.3, 0.9);
      const CZInstance inst = cz_constructive_instance(g, frame, deltas[i], 0.3, i);
      results[i] = cz_decompose(inst.D, inst.E, frame, deltas[i], slack);
    }
  });
  std::size_t pass = 0, fail = 0, not_met = 0;
  for (const auto& res : results) {
    const Outcome o = cz_outcome(*res);
    pass += o == Outcome::pass;
    fail += o == Outcome::fail;
    not_met += o == Outcome::hypothesis_not_met;
  }
  r.check("100 constructive instances, zero failures", fail == 0,
          std::to_string(pass) + " pass, " + std::to_string(fail) + " fail, " + std::to_string(not_met) +
              " hypothesis-not-met");
  r.check("instances exercise the conclusion", pass >= 90, std::to_string(pass) + " >= 90 nondegenerate passes");

  const GridMask empty(g);
  const CZResult e = cz_decompose(empty, empty, frame, 0.5, slack);
  r.check("empty D exits via hypothesis-not-met", cz_outcome(e) == Outcome::hypothesis_not_met,
          std::string(to_string(cz_outcome(e))) + (e.degenerate ? ", degenerate" : ""));
  const GridMask root = mask_of_box(g, frame.root);
  const CZResult f = cz_decompose(root, root, frame, 0.5, slack);
  r.check("root-density firing exits via hypothesis-not-met", cz_outcome(f) == Outcome::hypothesis_not_met,
          std::string(to_string(cz_outcome(f))) + ", " + f.hypothesis_note);
  // a dense corner puts a selected cube against the root boundary
  GridMask corner(g);
  add_box(corner, IndexBox{frame.root.lo, frame.root.side / 8});
  const CZResult c = cz_decompose(corner, corner, frame, 0.5, slack);
  r.check("dilation leaving the root exits via hypothesis-not-met", cz_outcome(c) == Outcome::hypothesis_not_met,
          std::string(to_string(cz_outcome(c))) + ", " + c.hypothesis_note);
}

RunConfig iterate_config() {
  return parse_config(
      "[ellipticity]\nn = 2\nlambda = 1\nLambda = 2\n[grid]\nresolution = 384\nside = 6\nlayout = cell\n"
      "[generator]\nkind = cusp\nbeta = 0.4\ncenter = 0.1, 0.05\n");
}

// 10. Surrogate iteration on a certified supersolution.
void criterion_10(Report& r) {
  const RunConfig c = iterate_config();
  const GridSpec g = make_grid(c);
  const GridFunction v = generate_function(c, g).v;
  const DomainSpec d = DomainSpec::whole(g);
  const SupersolutionReport cert = verify_supersolution(v, d, c.params);
  r.check("input certified", cert.pass, "max M^- " + num(cert.max_violation) + " <= " + num(cert.tolerance));
  const DyadicFrame frame = dyadic_frame(g, {0.0, 0.0}, 1.0);
  const OneStepEstimate est = estimate_one_step(v, d, frame, 4.0, {1.0, 2.0, 4.0, 8.0}, 4);
  r.check("one-step gain below 1", est.sigma < 1.0,
          "M_surrogate 4, sigma_surrogate " + num(est.sigma) + " over " + std::to_string(est.cubes) + " cubes");
  const IterationReport it = iterate_decay(v, d, c.params, 2, frame, 4.0, est.sigma);
  for (const IterationRow& row : it.rows) {
    if (row.k == 0) {
      r.info("k = 0", "measure " + num(row.measure));
      continue;
    }
    const double prev = it.rows[row.k - 1].measure;
    r.check("k = " + std::to_string(row.k), row.step_ok,
            num(row.measure) + " <= " + num(est.sigma) + " * " + num(prev) + " + " + num(it.slack));
  }
  r.check("two steps performed", it.rows.size() == 3, std::to_string(it.rows.size() - 1) + " steps");
  r.check("iteration outcome", it.outcome == Outcome::pass, to_string(it.outcome));
}

using Runner = std::function<void(Report&)>;

const std::map<int, std::pair<std::string, Runner>>& criteria() {
  static const std::map<int, std::pair<std::string, Runner>> m{
      {1, {"constants reproduction", criterion_1}},
      {2, {"exponent bound audit", criterion_2}},
      {3, {"envelope oracle equivalence", criterion_3}},
      {4, {"monotonicity suite", criterion_4}},
      {5, {"measure estimate", criterion_5}},
      {6, {"strong measure estimate", criterion_6}},
      {7, {"barrier certification", criterion_7}},
      {8, {"cone decay exponent", criterion_8}},
      {9, {"Calderon-Zygmund property suite", criterion_9}},
      {10, {"iteration surrogate", criterion_10}},
  };
  return m;
}

std::string quiet_csv(int id, const char* workers) {
  setenv("W2EPS_WORKERS", workers, 1);
  std::streambuf* old = std::cout.rdbuf();
  std::ostringstream sink;
  std::cout.rdbuf(sink.rdbuf());
  Report rep(id);
  try {
    criteria().at(id).second(rep);
  } catch (...) {
    std::cout.rdbuf(old);
    throw;
  }
  std::cout.rdbuf(old);
  return rep.csv().str();
}

// 11. Same seeds give byte-identical CSVs, with one worker and with four.
void criterion_11(Report& r) {
  const char* saved = std::getenv("W2EPS_WORKERS");
  const std::string restore = saved ? saved : "";
  for (const auto& [id, entry] : criteria()) {
    const std::string a = quiet_csv(id, "1"), b = quiet_csv(id, "1"), c = quiet_csv(id, "4");
    r.check("criterion " + std::to_string(id) + " rerun", a == b && a == c,
            std::to_string(a.size()) + " bytes, 1 worker twice and 4 workers");
  }
  if (saved)
    setenv("W2EPS_WORKERS", restore.c_str(), 1);
  else
    unsetenv("W2EPS_WORKERS");
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> ids;
  std::optional<std::filesystem::path> out;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--out" && i + 1 < argc) {
      out = argv[++i];
      continue;
    }
    try {
      ids.push_back(std::stoi(a));
    } catch (...) {
      std::cerr << "usage: acceptance [--out DIR] [criterion ...]\n";
      return 3;
    }
  }
  if (ids.empty())
    for (int k = 1; k <= 11; ++k) ids.push_back(k);
  if (out) std::filesystem::create_directories(*out);

  bool all = true;
  for (int id : ids) {
    if (id != 11 && !criteria().count(id)) {
      std::cerr << "unknown criterion " << id << '\n';
      return 3;
    }
    const std::string title = id == 11 ? "determinism" : criteria().at(id).first;
    std::cout << "criterion " << id << ": " << title << '\n';
    const auto t0 = std::chrono::steady_clock::now();
    Report rep(id);
    try {
      if (id == 11)
        criterion_11(rep);
      else
        criteria().at(id).second(rep);
    } catch (const std::exception& e) {
      rep.check("no error", false, e.what());
    }
    if (out) rep.csv().save((*out / ("criterion_" + std::to_string(id) + ".csv")).string());
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.1f", seconds_since(t0));
    std::cout << "CRITERION " << id << ": " << (rep.ok() ? "PASS" : "FAIL") << " " << title << " (" << buf << " s)\n";
    all = all && rep.ok();
  }
  return all ? 0 : 1;
}
