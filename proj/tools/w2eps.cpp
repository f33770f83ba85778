#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "w2eps/w2eps.hpp"

namespace fs = std::filesystem;
using namespace w2eps;

namespace {

enum Exit { exit_pass = 0, exit_fail = 1, exit_hypothesis = 2, exit_usage = 3 };

int exit_of(Outcome o) {
  switch (o) {
    case Outcome::pass: return exit_pass;
    case Outcome::fail: return exit_fail;
    case Outcome::hypothesis_not_met: return exit_hypothesis;
  }
  return exit_fail;
}

struct Artifacts {
  Outcome outcome = Outcome::pass;
  double margin = 0.0;
  std::string note;
  /// (file stem suffix, table) pairs; the first is written as <stem>.csv.
  std::vector<std::pair<std::string, CsvTable>> tables;
};

std::string point_string(const GridSpec& g, std::size_t i) {
  const Point x = g.node(i);
  std::string s;
  for (std::size_t k = 0; k < x.size(); ++k) s += (k ? " " : "") + format_number(x[k]);
  return s;
}

double d(long double x) { return static_cast<double>(x); }

Artifacts run_constants(const RunConfig& c) {
  Artifacts a;
  CsvTable t({"n", "lambda", "Lambda", "alpha1", "alpha2", "alpha3", "m", "power", "M1", "M2", "M", "log_M", "t0",
              "one_minus_sigma", "one_minus_sigma1", "K_contact", "K_seed", "eps_visc", "eps_strong",
              "eps_bound_printed", "eps_bound_corrected", "eps_conjectured", "printed_exceeds_visc",
              "corrected_below_visc", "invariants_ok", "covering_count"});
  CsvTable decay({"n", "ratio", "eps_visc", "eps_strong", "scaled_visc", "scaled_strong"});
  a.margin = std::numeric_limits<double>::infinity();
  bool ok = true;
  for (std::size_t n : c.constants_n) {
    std::vector<double> ratios = c.constants_ratios;
    for (double q : ratios) {
      const EllipticityParams p{n, c.constants_lambda, q * c.constants_lambda};
      const ConstantsReport r = compute_constants(p);
      const auto fails = r.invariant_failures();
      const bool printed_ok = r.eps_visc > r.eps_bound_printed;
      const bool corrected_ok = r.eps_visc > r.eps_bound_corrected;
      if (!printed_ok)
        std::cout << "DISCREPANCY n=" << n << " ratio=" << format_number(q)
                  << " printed-bound=" << format_number(d(r.eps_bound_printed))
                  << " exceeds eps_visc=" << format_number(d(r.eps_visc)) << '\n';
      for (const auto& f : fails) std::cout << "INVARIANT n=" << n << " ratio=" << format_number(q) << ' ' << f << '\n';
      ok = ok && fails.empty() && corrected_ok;
      a.margin = std::min(a.margin, d((r.eps_visc - r.eps_bound_corrected) / r.eps_visc));
      t.add({std::uint64_t{n}, p.lambda, p.Lambda, r.alpha1, r.alpha2, r.alpha3, d(r.m), d(r.power), r.M1.decimal(),
             r.M2.decimal(), r.M.decimal(), d(r.M.log_value), r.t0.decimal(), d(r.one_minus_sigma),
             d(r.one_minus_sigma1), r.K_contact, r.K_seed, d(r.eps_visc), d(r.eps_strong), d(r.eps_bound_printed),
             d(r.eps_bound_corrected), d(r.eps_conjectured), !printed_ok, corrected_ok, fails.empty(),
             std::uint64_t{covering_count(n)}});
    }
    const DecayCheck dc = polynomial_decay_check(n, ratios);
    ok = ok && dc.pass;
    for (const auto& row : dc.rows)
      decay.add({std::uint64_t{n}, row.ratio, d(row.eps_visc), d(row.eps_strong), d(row.scaled_visc),
                 d(row.scaled_strong)});
  }
  a.outcome = ok ? Outcome::pass : Outcome::fail;
  a.tables.emplace_back("", std::move(t));
  a.tables.emplace_back("_decay", std::move(decay));
  return a;
}

Artifacts run_generate(const RunConfig& c, const fs::path& stem) {
  const GridSpec g = make_grid(c);
  const GeneratedFunction gen = generate_function(c, g);
  const SupersolutionReport cert =
      verify_supersolution(gen.v, DomainSpec::whole(g), c.params, c.tolerance.supersolution);
  {
    std::ofstream f(stem.string() + ".pgrid", std::ios::binary);
    if (!f) throw Error("cannot write " + stem.string() + ".pgrid");
    write_pgrid(f, gen.v);
  }
  const auto [lo, hi] = std::minmax_element(gen.v.values.begin(), gen.v.values.end());
  Artifacts a;
  CsvTable t({"kind", "seed", "resolution", "spacing", "amplitude", "min", "max", "relative_residual", "certified",
              "max_violation", "certificate_tolerance"});
  t.add({c.generator.kind, c.generator.seed.value_or(c.seed), std::uint64_t{c.grid.resolution}, g.spacing(),
         gen.amplitude, *lo, *hi, gen.relative_residual, cert.pass, cert.max_violation, cert.tolerance});
  a.tables.emplace_back("", std::move(t));
  return a;
}

Artifacts run_verify(const RunConfig& c) {
  const GridSpec g = make_grid(c);
  const GeneratedFunction gen = generate_function(c, g);
  const SupersolutionReport r = verify_supersolution(gen.v, DomainSpec::whole(g), c.params, c.tolerance.supersolution);
  Artifacts a;
  a.outcome = r.pass ? Outcome::pass : Outcome::fail;
  a.margin = r.tolerance - r.max_violation;
  CsvTable t({"checked", "max_violation", "tolerance", "worst_node", "pass"});
  t.add({std::uint64_t{r.checked}, r.max_violation, r.tolerance, point_string(g, r.worst_node), r.pass});
  a.tables.emplace_back("", std::move(t));
  return a;
}

Artifacts run_envelope(const RunConfig& c, const fs::path& stem) {
  const GridSpec g = make_grid(c);
  const GeneratedFunction gen = generate_function(c, g);
  const DomainSpec dom = DomainSpec::whole(g);
  Artifacts a;
  std::ofstream f(stem.string() + ".pgrid", std::ios::binary);
  if (!f) throw Error("cannot write " + stem.string() + ".pgrid");
  if (c.envelope_output == "gminus") {
    const TouchReport r = g_minus_mask(gen.v, c.envelope_K, dom, dom, c.tolerance.envelope());
    write_pgrid(f, r.mask);
    CsvTable t({"K", "tolerance", "touched", "measure", "nodes"});
    t.add({c.envelope_K, r.tolerance, std::uint64_t{r.contact_points.size()}, measure(r.mask), std::uint64_t{g.size()}});
    a.tables.emplace_back("", std::move(t));
  } else if (c.envelope_output == "theta") {
    const std::vector<double> ladder = c.ladder_values();
    const GridFunction th = theta_lower(gen.v, dom, ladder, c.tolerance.envelope());
    write_pgrid(f, th);
    CsvTable t({"t", "touched_at_or_below", "sentinel"});
    std::size_t prev = 0;
    bool monotone = true;
    for (double K : ladder) {
      std::size_t cnt = 0;
      for (double x : th.values) cnt += x <= K;
      monotone = monotone && cnt >= prev;
      prev = cnt;
      t.add({K, std::uint64_t{cnt}, 2.0 * ladder.back()});
    }
    a.outcome = monotone ? Outcome::pass : Outcome::fail;
    a.tables.emplace_back("", std::move(t));
  } else {
    throw ParameterError("envelope output must be gminus or theta");
  }
  return a;
}

EnvelopeOptions decay_options(const RunConfig& c) {
  EnvelopeOptions o = c.tolerance.envelope();
  if (!o.tolerance && !o.tolerance_coefficient) o.tolerance_coefficient = lattice_tolerance_coefficient(c.params.n);
  return o;
}

CsvTable decay_csv(const DecayTable& tab) {
  CsvTable t({"t", "measure", "query_measure", "noise_floor", "in_fit"});
  for (std::size_t i = 0; i < tab.ts.size(); ++i)
    t.add({tab.ts[i], tab.measures[i], tab.query_measure, tab.noise_floor, i >= tab.fit_begin && i < tab.fit_end});
  return t;
}

double monotone_margin(const DecayTable& tab) {
  double m = 0.0;
  for (std::size_t i = 1; i < tab.measures.size(); ++i) m = std::min(m, tab.measures[i - 1] - tab.measures[i]);
  return m;
}

Artifacts run_measure(const RunConfig& c) {
  const GridSpec g = make_grid(c);
  const GeneratedFunction gen = generate_function(c, g);
  const DecayTable tab = measure_bad_set(gen.v, DomainSpec::whole(g), make_query(c, g), c.ladder_values(), decay_options(c));
  Artifacts a;
  a.outcome = tab.nonincreasing() ? Outcome::pass : Outcome::fail;
  a.margin = monotone_margin(tab);
  a.tables.emplace_back("", decay_csv(tab));
  return a;
}

Artifacts run_exponent(const RunConfig& c) {
  const GridSpec g = make_grid(c);
  const GeneratedFunction gen = generate_function(c, g);
  DecayTable tab = measure_bad_set(gen.v, DomainSpec::whole(g), make_query(c, g), c.ladder_values(), decay_options(c));
  const ExponentFit fit = fit_exponent(tab);
  const ConstantsReport k = compute_constants(c.params);
  Artifacts a;
  a.outcome = tab.nonincreasing() && fit.exponent >= d(k.eps_visc) ? Outcome::pass : Outcome::fail;
  a.margin = fit.exponent - d(k.eps_visc);
  CsvTable t({"fitted_exponent", "stderr", "band_lo", "band_hi", "residual", "fit_begin", "fit_end", "eps_visc",
              "eps_strong", "eps_bound_printed", "eps_bound_corrected", "eps_conjectured", "covering_count"});
  t.add({fit.exponent, fit.stderr_, fit.band_lo, fit.band_hi, fit.residual, std::uint64_t{fit.begin},
         std::uint64_t{fit.end}, d(k.eps_visc), d(k.eps_strong), d(k.eps_bound_printed), d(k.eps_bound_corrected),
         d(k.eps_conjectured), std::uint64_t{covering_count(c.params.n)}});
  a.tables.emplace_back("", std::move(t));
  a.tables.emplace_back("_table", decay_csv(tab));
  return a;
}

Artifacts run_lemma(const RunConfig& c, const std::string& which) {
  const GridSpec g = make_grid(c);
  const GeneratedFunction gen = generate_function(c, g);
  const DomainSpec dom = DomainSpec::whole(g);
  Artifacts a;
  if (which == "measure" || which == "strong") {
    MeasureLemmaOptions o;
    o.K = c.lemma_K;
    o.envelope = c.tolerance.envelope();
    o.certificate_tolerance = c.tolerance.supersolution;
    MeasureLemmaReport r;
    if (which == "strong") {
      if (!gen.a) throw ParameterError("the strong lemma needs generator kind = strong");
      r = verify_strong_measure_lemma(gen.v, *gen.a, dom, c.params, o);
    } else {
      r = verify_measure_lemma(gen.v, dom, c.params, o);
    }
    a.outcome = r.outcome;
    a.margin = r.margin;
    a.note = r.note;
    const ContactDiagnostics& cd = r.contacts;
    CsvTable t({"lemma", "outcome", "K", "ratio", "one_minus_sigma", "slack", "threshold", "margin", "vertices",
                "contacts", "budget_factor", "min_eigenvalue", "max_eigenvalue", "hessian_lower", "hessian_upper",
                "claim1", "claim2", "budget", "max_det", "det_bound", "det_ok", "trace_det_ok", "certificate_violation",
                "certificate_tolerance", "amplitude"});
    t.add({which, std::string(to_string(r.outcome)), r.K, r.ratio, r.one_minus_sigma, r.slack, r.threshold, r.margin,
           std::uint64_t{cd.vertices}, std::uint64_t{cd.contacts}, cd.budget_factor, cd.min_eigenvalue,
           cd.max_eigenvalue, cd.hessian_lower, cd.hessian_upper, cd.claim1, cd.claim2, cd.budget, r.max_det,
           r.det_bound, r.det_ok, r.trace_det_ok, r.certificate.max_violation, r.certificate.tolerance, gen.amplitude});
    a.tables.emplace_back("", std::move(t));
  } else if (which == "touching") {
    const TouchingReport r = verify_touching(gen.v, dom, c.tolerance.envelope());
    a.outcome = r.outcome;
    a.margin = static_cast<double>(r.touched) * g.cell_volume();
    a.note = r.note;
    CsvTable t({"lemma", "outcome", "max_abs", "touched", "witness"});
    t.add({which, std::string(to_string(r.outcome)), r.max_abs, std::uint64_t{r.touched},
           r.witness ? point_string(g, *r.witness) : std::string()});
    a.tables.emplace_back("", std::move(t));
  } else if (which == "localization") {
    const LocalizationReport r = verify_localization(gen.v, dom, c.params, c.tolerance.envelope());
    a.outcome = r.outcome;
    a.margin = r.M1 - r.infimum;
    a.note = r.note;
    CsvTable t({"lemma", "outcome", "infimum", "M1", "part_i", "touched", "M2", "part_ii"});
    t.add({which, std::string(to_string(r.outcome)), r.infimum, r.M1, r.part_i, std::uint64_t{r.touched}, r.M2,
           r.part_ii});
    a.tables.emplace_back("", std::move(t));
  } else {
    throw ParameterError("unknown lemma '" + which + "' (measure, strong, touching, localization)");
  }
  return a;
}

Artifacts run_cz(const RunConfig& c) {
  const GridSpec g = make_grid(c);
  const DyadicFrame frame = dyadic_frame(g, Point(g.dim(), 0.0), 1.0);
  const double slack = h_slack(g, DomainSpec::cube(Point(g.dim(), 0.0), 1.0, DomainSpec::bounding_of(g)));
  struct Trial {
    double delta = 0.0;
    std::optional<CZResult> r;
  };
  std::vector<Trial> trials(c.cz_trials);
  parallel_for(trials.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const std::uint64_t seed = c.seed + i;
      Rng rng(seed ^ 0x9e3779b97f4a7c15ull);
      const double delta = c.cz_delta ? *c.cz_delta : rng.uniform(0.3, 0.9);
      const CZInstance inst = cz_constructive_instance(g, frame, delta, c.cz_fill, seed);
      trials[i] = Trial{delta, cz_decompose(inst.D, inst.E, frame, delta, slack)};
    }
  });
  Artifacts a;
  a.margin = std::numeric_limits<double>::infinity();
  std::size_t failures = 0;
  CsvTable t({"trial", "seed", "delta", "measure_D", "measure_E", "selected", "hypothesis_met", "degenerate",
              "conclusion_holds", "strict_holds", "outcome"});
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const CZResult& r = *trials[i].r;
    const Outcome o = cz_outcome(r);
    failures += o == Outcome::fail;
    if (o == Outcome::pass) a.margin = std::min(a.margin, trials[i].delta * r.measure_E + slack - r.measure_D);
    t.add({std::uint64_t{i}, c.seed + i, trials[i].delta, r.measure_D, r.measure_E, std::uint64_t{r.selected.size()},
           r.hypothesis_met, r.degenerate, r.conclusion_holds, r.strict_holds, std::string(to_string(o))});
  }
  if (!std::isfinite(a.margin)) a.margin = 0.0;
  a.outcome = failures ? Outcome::fail : Outcome::pass;
  a.tables.emplace_back("", std::move(t));
  return a;
}

Artifacts run_iterate(const RunConfig& c) {
  const GridSpec g = make_grid(c);
  const GeneratedFunction gen = generate_function(c, g);
  const DomainSpec dom = DomainSpec::whole(g);
  Artifacts a;
  const SupersolutionReport cert = verify_supersolution(gen.v, dom, c.params, c.tolerance.supersolution);
  if (!cert.pass) {
    a.outcome = Outcome::hypothesis_not_met;
    a.note = "input is not certified as a supersolution";
    return a;
  }
  const DyadicFrame frame = dyadic_frame(g, Point(g.dim(), 0.0), 1.0);
  const EnvelopeOptions opts = c.tolerance.envelope();
  OneStepEstimate est;
  est.M = c.iterate_M;
  est.min_side = c.min_side;
  if (c.iterate_sigma)
    est.sigma = *c.iterate_sigma;
  else
    est = estimate_one_step(gen.v, dom, frame, c.iterate_M, c.base_t, c.min_side, opts);
  if (!(est.sigma > 0.0)) est.sigma = 1.0 / c.iterate_M;
  const IterationReport r =
      iterate_decay(gen.v, dom, c.params, c.k_max, frame, est.M, est.sigma, c.ladder_values(), opts);
  a.outcome = r.outcome;
  a.note = r.note;
  a.margin = std::numeric_limits<double>::infinity();
  CsvTable rows({"k", "t", "measure", "sigma_power", "step_ratio", "step_ok", "strict_ok", "absolute_ok"});
  for (std::size_t i = 0; i < r.rows.size(); ++i) {
    const IterationRow& row = r.rows[i];
    if (i) a.margin = std::min(a.margin, r.sigma * r.rows[i - 1].measure + r.slack - row.measure);
    rows.add({std::uint64_t{row.k}, row.t, row.measure, row.bound, row.step_ratio, row.step_ok, row.strict_ok,
              row.absolute_ok});
  }
  if (!std::isfinite(a.margin)) a.margin = 0.0;
  CsvTable sur({"M", "sigma", "eps_surrogate", "slack", "cubes", "min_side", "estimated"});
  sur.add({r.M, r.sigma, r.eps_surrogate, r.slack, std::uint64_t{est.cubes}, std::uint64_t{est.min_side},
           !c.iterate_sigma});
  CsvTable curve({"t", "measure", "bound"});
  for (std::size_t i = 0; i < r.curve_t.size(); ++i) curve.add({r.curve_t[i], r.curve_measure[i], r.curve_bound[i]});
  a.tables.emplace_back("", std::move(rows));
  a.tables.emplace_back("_surrogate", std::move(sur));
  a.tables.emplace_back("_curve", std::move(curve));
  return a;
}

void write_manifest(const fs::path& path, const std::string& sub, const RunConfig& c, const std::string& config_path,
                    double wall, const Artifacts& a) {
  std::ofstream f(path);
  f << "[manifest]\n"
    << "tool = w2eps\n"
    << "version = " << version << '\n'
    << "subcommand = " << sub << '\n'
    << "config = " << config_path << '\n'
    << "seed = " << c.seed << '\n'
    << "workers = " << worker_count() << '\n'
    << "wall_seconds = " << format_number(wall) << '\n'
    << "outcome = " << to_string(a.outcome) << '\n';
  for (const auto& [suffix, t] : a.tables) f << "artifact = " << path.stem().string() << suffix << ".csv\n";
  f << "\n# parsed configuration\n" << c.source;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"W^{2,eps} estimate toolkit: contact sets, Pucci certification, constants and decay experiments"};
  app.require_subcommand(1);
  std::string config_path, output;
  std::optional<std::uint64_t> seed;
  std::string lemma_name;
  const std::vector<std::string> subs{"constants", "generate", "verify", "envelope", "measure",
                                      "exponent",  "lemma",    "cz",     "iterate"};
  const std::vector<std::string> help{
      "constants table over [constants] n x ratios",
      "sample the configured generator to a PGRID file",
      "certify a supersolution with the discrete Pucci operator",
      "G_K mask or minimal-opening map",
      "bad-set measures over the opening ladder",
      "fit the decay exponent and compare with the proven bounds",
      "run a lemma verifier: measure, strong, touching, localization",
      "cube-decomposition property harness",
      "surrogate geometric decay iteration"};
  for (std::size_t i = 0; i < subs.size(); ++i) {
    CLI::App* s = app.add_subcommand(subs[i], help[i]);
    s->add_option("-c,--config", config_path, "INI run configuration")->check(CLI::ExistingFile);
    s->add_option("-o,--output", output, "output directory (overrides [run] output)");
    s->add_option("--seed", seed, "run seed (overrides [run] seed)");
    if (subs[i] == "lemma") s->add_option("name", lemma_name, "measure | strong | touching | localization");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ERROR usage " << e.what() << '\n';
    return exit_usage;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  try {
    cfg = config_path.empty() ? parse_config(std::string()) : load_config(config_path);
    if (!output.empty()) cfg.output = output;
    if (seed) cfg.seed = *seed;
    if (sub == "lemma" && lemma_name.empty()) lemma_name = cfg.experiment;
    if (sub == "lemma" && lemma_name.empty()) throw ParameterError("lemma name missing");
    fs::create_directories(cfg.output);
  } catch (const std::exception& e) {
    std::cerr << "ERROR config " << e.what() << '\n';
    return exit_usage;
  }

  std::string stem_name = cfg.name.empty() ? sub : cfg.name;
  if (cfg.name.empty() && sub == "lemma") stem_name += "_" + lemma_name;
  const fs::path stem = fs::path(cfg.output) / stem_name;
  const auto t0 = std::chrono::steady_clock::now();
  Artifacts a;
  try {
    if (sub == "constants") a = run_constants(cfg);
    else if (sub == "generate") a = run_generate(cfg, stem);
    else if (sub == "verify") a = run_verify(cfg);
    else if (sub == "envelope") a = run_envelope(cfg, stem);
    else if (sub == "measure") a = run_measure(cfg);
    else if (sub == "exponent") a = run_exponent(cfg);
    else if (sub == "lemma") a = run_lemma(cfg, lemma_name);
    else if (sub == "cz") a = run_cz(cfg);
    else a = run_iterate(cfg);
  } catch (const ParameterError& e) {
    std::cerr << "ERROR parameter " << e.what() << '\n';
    return exit_usage;
  } catch (const FormatError& e) {
    std::cerr << "ERROR format " << e.what() << '\n';
    return exit_usage;
  } catch (const DomainError& e) {
    std::cerr << "ERROR domain " << e.what() << '\n';
    return exit_usage;
  } catch (const AlignmentError& e) {
    std::cerr << "ERROR alignment " << e.what() << '\n';
    return exit_usage;
  } catch (const ContractViolation& e) {
    std::cerr << "ERROR contract " << e.what() << '\n';
    return exit_usage;
  } catch (const std::exception& e) {
    std::cerr << "ERROR runtime " << e.what() << '\n';
    return exit_fail;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  try {
    for (const auto& [suffix, t] : a.tables) t.save(stem.string() + suffix + ".csv");
    write_manifest(stem.string() + ".manifest", sub, cfg, config_path, wall, a);
  } catch (const std::exception& e) {
    std::cerr << "ERROR io " << e.what() << '\n';
    return exit_fail;
  }
  const std::string label = sub == "lemma" ? sub + "-" + lemma_name : sub;
  std::cout << "RESULT " << label << " pass=" << (a.outcome == Outcome::pass ? "true" : "false")
            << " margin=" << format_number(a.margin) << '\n';
  if (!a.note.empty()) std::cout << "NOTE " << to_string(a.outcome) << ' ' << a.note << '\n';
  return exit_of(a.outcome);
}
