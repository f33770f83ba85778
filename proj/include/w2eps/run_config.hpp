#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "w2eps/error.hpp"
#include "w2eps/experiments.hpp"
#include "w2eps/generators.hpp"
#include "w2eps/grid.hpp"
#include "w2eps/grid_io.hpp"
#include "w2eps/pucci.hpp"

namespace w2eps {

// Run configuration: INI text with section headers. Every section and key must
// appear in config_schema(); anything else is rejected with its location.

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> s{
      {"run", {"experiment", "seed", "output", "name"}},
      {"ellipticity", {"n", "lambda", "Lambda"}},
      {"grid", {"resolution", "side", "layout"}},
      {"generator",
       {"kind", "seed", "recipe", "boundary", "tile", "terms", "cones", "saddles", "beta", "sign", "scale", "height",
        "slope", "curvature", "center", "excluded", "amplitude", "frequency", "path"}},
      {"ladder", {"t_min", "t_max", "points_per_decade"}},
      {"query", {"kind", "size"}},
      {"tolerance", {"touch", "touch_coefficient", "supersolution"}},
      {"envelope", {"K", "output"}},
      {"lemma", {"K"}},
      {"cz", {"delta", "trials", "fill"}},
      {"iterate", {"k_max", "M", "sigma", "min_side", "base_t"}},
      {"constants", {"n", "lambda", "ratios"}},
  };
  return s;
}

struct GridConfig {
  std::size_t resolution = 129;
  double side = 2.0;
  /// "vertex": nodes on the faces; "cell": cell-centred nodes (needed by dyadic frames).
  std::string layout = "vertex";
};

struct GeneratorConfig {
  std::string kind = "zero";
  std::optional<std::uint64_t> seed;
  std::string recipe = "constant";
  std::string boundary = "random-trig";
  double tile = 0.25;
  std::size_t terms = 4;
  std::size_t cones = 3, saddles = 2;
  double beta = 0.5;
  int sign = -1;
  std::optional<double> scale;
  double height = 0.0;
  double slope = 1.0;
  double curvature = 1.0;
  Point center;
  double excluded = 0.0;
  /// Multiplier for the sampled function; "auto" picks the largest 2^-j that seeds the measure estimate.
  std::optional<double> amplitude = 1.0;
  double frequency = 3.0;
  std::string path;
};

struct LadderConfig {
  double t_min = 1.0, t_max = 256.0, points_per_decade = 6.0;
};

struct ToleranceConfig {
  std::optional<double> touch;
  std::optional<double> touch_coefficient;
  std::optional<double> supersolution;

  EnvelopeOptions envelope() const {
    EnvelopeOptions o;
    o.tolerance = touch;
    o.tolerance_coefficient = touch_coefficient;
    return o;
  }
};

struct RunConfig {
  std::string experiment;
  std::uint64_t seed = 1;
  std::string output = "out";
  std::string name;
  EllipticityParams params{2, 1.0, 1.0};
  GridConfig grid;
  GeneratorConfig generator;
  LadderConfig ladder;
  /// "cube" or "ball", centred at the origin; size is the side or the radius.
  std::string query_kind = "ball";
  double query_size = 0.5;
  ToleranceConfig tolerance;
  double envelope_K = 1.0;
  std::string envelope_output = "gminus";
  double lemma_K = 32.0;
  /// Drawn per trial from U(0.3, 0.9) when unset.
  std::optional<double> cz_delta;
  std::size_t cz_trials = 100;
  double cz_fill = 0.3;
  std::size_t k_max = 2;
  double iterate_M = 4.0;
  std::optional<double> iterate_sigma;
  std::size_t min_side = 4;
  std::vector<double> base_t{1.0, 2.0, 4.0, 8.0};
  std::vector<std::size_t> constants_n{2};
  double constants_lambda = 1.0;
  std::vector<double> constants_ratios{1.0};
  /// Normalized text of the parsed input, for the manifest.
  std::string source;

  void validate() const {
    params.validate();
    if (grid.resolution < 33) throw ParameterError("grid resolution must be at least 33 per axis");
    if (!(grid.side > 0.0)) throw ParameterError("grid side must be positive");
    if (grid.layout != "vertex" && grid.layout != "cell") throw ParameterError("grid layout must be vertex or cell");
    if (!(ladder.t_min > 0.0 && ladder.t_max >= ladder.t_min && ladder.points_per_decade > 0.0))
      throw ParameterError("ladder must satisfy 0 < t_min <= t_max and points_per_decade > 0");
    if (query_kind != "cube" && query_kind != "ball") throw ParameterError("query kind must be cube or ball");
    if (!(query_size > 0.0)) throw ParameterError("query size must be positive");
    if (cz_delta && !(*cz_delta > 0.0 && *cz_delta < 1.0)) throw ParameterError("cz delta must lie in (0, 1)");
    if (!(cz_fill >= 0.0 && cz_fill <= 1.0)) throw ParameterError("cz fill must lie in [0, 1]");
    if (!(iterate_M > 1.0)) throw ParameterError("iterate M must exceed 1");
    if (iterate_sigma && !(*iterate_sigma > 0.0 && *iterate_sigma <= 1.0))
      throw ParameterError("iterate sigma must lie in (0, 1]");
    if (output.empty()) throw ParameterError("output directory must be set");
  }

  std::vector<double> ladder_values() const {
    return geometric_ladder(ladder.t_min, ladder.t_max, ladder.points_per_decade);
  }
};

namespace detail {

template <class T>
T config_get(const boost::property_tree::ptree& sec, const std::string& section, const std::string& key) {
  const std::string raw = sec.get<std::string>(key);
  std::istringstream is(raw);
  T v{};
  if (!(is >> v) || !(is >> std::ws).eof()) throw FormatError("[" + section + "] " + key + ": cannot parse '" + raw + "'");
  return v;
}

template <class T>
std::vector<T> config_list(const boost::property_tree::ptree& sec, const std::string& section, const std::string& key) {
  std::vector<T> out;
  std::istringstream is(sec.get<std::string>(key));
  std::string tok;
  while (std::getline(is, tok, ',')) {
    std::istringstream ts(tok);
    T v{};
    if (!(ts >> v) || !(ts >> std::ws).eof())
      throw FormatError("[" + section + "] " + key + ": cannot parse list item '" + tok + "'");
    out.push_back(v);
  }
  if (out.empty()) throw FormatError("[" + section + "] " + key + ": empty list");
  return out;
}

}  // namespace detail

/// Parses INI text; throws FormatError on syntax errors, unknown sections or keys, and bad values.
inline RunConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw FormatError("config line " + std::to_string(e.line()) + ": " + e.message());
  }
  const auto& schema = config_schema();
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) throw FormatError("key '" + section + "' outside any section");
    const auto it = schema.find(section);
    if (it == schema.end()) throw FormatError("unknown section [" + section + "]");
    for (const auto& [key, val] : body) {
      (void)val;
      if (!it->second.count(key)) throw FormatError("unknown key '" + key + "' in [" + section + "]");
    }
  }

  RunConfig c;
  auto sec = [&](const char* name) -> const pt::ptree* {
    const auto s = tree.get_child_optional(name);
    return s ? &*s : nullptr;
  };
  using detail::config_get;
  using detail::config_list;
  if (const auto* s = sec("run")) {
    if (s->count("experiment")) c.experiment = s->get<std::string>("experiment");
    if (s->count("seed")) c.seed = config_get<std::uint64_t>(*s, "run", "seed");
    if (s->count("output")) c.output = s->get<std::string>("output");
    if (s->count("name")) c.name = s->get<std::string>("name");
  }
  if (const auto* s = sec("ellipticity")) {
    if (s->count("n")) c.params.n = config_get<std::size_t>(*s, "ellipticity", "n");
    if (s->count("lambda")) c.params.lambda = config_get<double>(*s, "ellipticity", "lambda");
    if (s->count("Lambda")) c.params.Lambda = config_get<double>(*s, "ellipticity", "Lambda");
  }
  if (const auto* s = sec("grid")) {
    if (s->count("resolution")) c.grid.resolution = config_get<std::size_t>(*s, "grid", "resolution");
    if (s->count("side")) c.grid.side = config_get<double>(*s, "grid", "side");
    if (s->count("layout")) c.grid.layout = s->get<std::string>("layout");
  }
  if (const auto* s = sec("generator")) {
    GeneratorConfig& g = c.generator;
    const char* G = "generator";
    if (s->count("kind")) g.kind = s->get<std::string>("kind");
    if (s->count("seed")) g.seed = config_get<std::uint64_t>(*s, G, "seed");
    if (s->count("recipe")) g.recipe = s->get<std::string>("recipe");
    if (s->count("boundary")) g.boundary = s->get<std::string>("boundary");
    if (s->count("tile")) g.tile = config_get<double>(*s, G, "tile");
    if (s->count("terms")) g.terms = config_get<std::size_t>(*s, G, "terms");
    if (s->count("cones")) g.cones = config_get<std::size_t>(*s, G, "cones");
    if (s->count("saddles")) g.saddles = config_get<std::size_t>(*s, G, "saddles");
    if (s->count("beta")) g.beta = config_get<double>(*s, G, "beta");
    if (s->count("sign")) g.sign = config_get<int>(*s, G, "sign");
    if (s->count("scale")) g.scale = config_get<double>(*s, G, "scale");
    if (s->count("height")) g.height = config_get<double>(*s, G, "height");
    if (s->count("slope")) g.slope = config_get<double>(*s, G, "slope");
    if (s->count("curvature")) g.curvature = config_get<double>(*s, G, "curvature");
    if (s->count("center")) g.center = config_list<double>(*s, G, "center");
    if (s->count("excluded")) g.excluded = config_get<double>(*s, G, "excluded");
    if (s->count("amplitude")) {
      if (s->get<std::string>("amplitude") == "auto")
        g.amplitude.reset();
      else
        g.amplitude = config_get<double>(*s, G, "amplitude");
    }
    if (s->count("frequency")) g.frequency = config_get<double>(*s, G, "frequency");
    if (s->count("path")) g.path = s->get<std::string>("path");
  }
  if (const auto* s = sec("ladder")) {
    if (s->count("t_min")) c.ladder.t_min = config_get<double>(*s, "ladder", "t_min");
    if (s->count("t_max")) c.ladder.t_max = config_get<double>(*s, "ladder", "t_max");
    if (s->count("points_per_decade"))
      c.ladder.points_per_decade = config_get<double>(*s, "ladder", "points_per_decade");
  }
  if (const auto* s = sec("query")) {
    if (s->count("kind")) c.query_kind = s->get<std::string>("kind");
    if (s->count("size")) c.query_size = config_get<double>(*s, "query", "size");
  }
  if (const auto* s = sec("tolerance")) {
    if (s->count("touch")) c.tolerance.touch = config_get<double>(*s, "tolerance", "touch");
    if (s->count("touch_coefficient"))
      c.tolerance.touch_coefficient = config_get<double>(*s, "tolerance", "touch_coefficient");
    if (s->count("supersolution")) c.tolerance.supersolution = config_get<double>(*s, "tolerance", "supersolution");
  }
  if (const auto* s = sec("envelope")) {
    if (s->count("K")) c.envelope_K = config_get<double>(*s, "envelope", "K");
    if (s->count("output")) c.envelope_output = s->get<std::string>("output");
  }
  if (const auto* s = sec("lemma"))
    if (s->count("K")) c.lemma_K = config_get<double>(*s, "lemma", "K");
  if (const auto* s = sec("cz")) {
    if (s->count("delta")) c.cz_delta = config_get<double>(*s, "cz", "delta");
    if (s->count("trials")) c.cz_trials = config_get<std::size_t>(*s, "cz", "trials");
    if (s->count("fill")) c.cz_fill = config_get<double>(*s, "cz", "fill");
  }
  if (const auto* s = sec("iterate")) {
    if (s->count("k_max")) c.k_max = config_get<std::size_t>(*s, "iterate", "k_max");
    if (s->count("M")) c.iterate_M = config_get<double>(*s, "iterate", "M");
    if (s->count("sigma")) c.iterate_sigma = config_get<double>(*s, "iterate", "sigma");
    if (s->count("min_side")) c.min_side = config_get<std::size_t>(*s, "iterate", "min_side");
    if (s->count("base_t")) c.base_t = config_list<double>(*s, "iterate", "base_t");
  }
  if (const auto* s = sec("constants")) {
    if (s->count("n")) c.constants_n = config_list<std::size_t>(*s, "constants", "n");
    if (s->count("lambda")) c.constants_lambda = config_get<double>(*s, "constants", "lambda");
    if (s->count("ratios")) c.constants_ratios = config_list<double>(*s, "constants", "ratios");
  }
  std::ostringstream norm;
  pt::ini_parser::write_ini(norm, tree);
  c.source = norm.str();
  c.validate();
  return c;
}

inline RunConfig parse_config(const std::string& text) {
  std::istringstream is(text);
  return parse_config(is);
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError("cannot open config " + path);
  return parse_config(f);
}

/// The configured grid: a cube of the given side centred at the origin.
inline GridSpec make_grid(const RunConfig& c) {
  const std::size_t n = c.params.n;
  if (c.grid.layout == "vertex") return GridSpec::cube(n, c.grid.side, c.grid.resolution);
  const double h = c.grid.side / static_cast<double>(c.grid.resolution);
  return GridSpec(std::vector<std::size_t>(n, c.grid.resolution), Point(n, -c.grid.side / 2.0 + h / 2.0), h);
}

inline DomainSpec make_query(const RunConfig& c, const GridSpec& g) {
  const Point o(g.dim(), 0.0);
  return c.query_kind == "cube" ? DomainSpec::cube(o, c.query_size, DomainSpec::bounding_of(g))
                                : DomainSpec::ball(o, c.query_size, DomainSpec::bounding_of(g));
}

struct GeneratedFunction {
  GridFunction v;
  std::optional<CoefficientField> a;
  double amplitude = 1.0;
  /// Strong solves only.
  double relative_residual = 0.0;
};

/// Samples the configured generator on g. The generator seed defaults to the run seed.
inline GeneratedFunction generate_function(const RunConfig& c, const GridSpec& g) {
  const GeneratorConfig& gc = c.generator;
  const std::uint64_t seed = gc.seed.value_or(c.seed);
  const std::size_t n = g.dim();
  Point center = gc.center.empty() ? Point(n, 0.0) : gc.center;
  if (center.size() != n) throw ParameterError("generator center has the wrong dimension");
  GeneratedFunction out{GridFunction(g), std::nullopt, 1.0, 0.0};
  const std::string& k = gc.kind;
  if (k == "zero") {
  } else if (k == "constant") {
    for (double& x : out.v.values) x = gc.height;
  } else if (k == "cone") {
    out.v = sample([&](std::span<const double> x) { return gc.height - gc.slope * std::sqrt(distance2(x, center)); }, g);
  } else if (k == "quadratic") {
    out.v = sample([&](std::span<const double> x) { return gc.height + 0.5 * gc.curvature * distance2(x, center); }, g);
  } else if (k == "cusp") {
    // height - s |x - c|^beta with s chosen so that |v| <= 1/4 on the grid when unset
    double s = 0.0;
    if (gc.scale) {
      s = *gc.scale;
    } else {
      double rmax = 0.0;
      for (std::size_t corner = 0; corner < (std::size_t{1} << n); ++corner) {
        double r2 = 0.0;
        for (std::size_t a = 0; a < n; ++a) {
          const double e = g.origin()[a] + ((corner >> a) & 1u ? g.extent(a) : 0.0);
          r2 += (e - center[a]) * (e - center[a]);
        }
        rmax = std::max(rmax, std::sqrt(r2));
      }
      s = 0.5 / std::pow(rmax, gc.beta);
    }
    const double base = gc.height == 0.0 && !gc.scale ? 0.25 : gc.height;
    out.v = sample([&](std::span<const double> x) { return base - s * std::pow(std::sqrt(distance2(x, center)), gc.beta); },
                   g);
  } else if (k == "trig") {
    out.v = sample(
        [&](std::span<const double> x) {
          double p = 1.0;
          for (double xi : x) p *= std::sin(gc.frequency * xi);
          return gc.height + 0.25 * p;
        },
        g);
  } else if (k == "barrier") {
    out.v = barrier(BarrierParams::from(c.params), g);
  } else if (k == "radial-power") {
    out.v = radial_power(gc.beta, gc.sign, gc.excluded, g, center);
  } else if (k == "pieces") {
    const MinOfPieces f = random_viscosity_pieces(c.params, seed, gc.cones, gc.saddles);
    out.v = sample(f, g);
  } else if (k == "strong") {
    CoefficientRecipe r{coefficient_kind_from(gc.recipe), seed, c.params, gc.tile};
    BoundaryData b{boundary_kind_from(gc.boundary), seed, gc.terms};
    StrongSolution s = strong_supersolution(r, b, g);
    out.relative_residual = s.relative_residual;
    out.v = std::move(s.v);
    out.a = std::move(s.a);
  } else if (k == "file") {
    std::ifstream f(gc.path, std::ios::binary);
    if (!f) throw FormatError("cannot open grid file " + gc.path);
    auto any = read_pgrid(f);
    auto* fn = std::get_if<GridFunction>(&any);
    if (!fn) throw FormatError(gc.path + " holds a mask, not a function");
    if (!(fn->spec == g)) throw DomainError(gc.path + " grid does not match the configured grid");
    out.v = std::move(*fn);
  } else {
    throw ParameterError("unknown generator kind '" + k + "'");
  }
  if (gc.amplitude) {
    out.amplitude = *gc.amplitude;
  } else {
    const auto s = seed_scale(out.v, DomainSpec::whole(g), n);
    if (!s) throw ParameterError("no amplitude 2^-j seeds the measure estimate");
    out.amplitude = *s;
  }
  if (out.amplitude != 1.0)
    for (double& x : out.v.values) x *= out.amplitude;
  return out;
}

}  // namespace w2eps
