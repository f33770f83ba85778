#include <gtest/gtest.h>

#include "w2eps/experiments.hpp"
#include "w2eps/generators.hpp"

using namespace w2eps;

TEST(MeasureBadSet, QuadraticJumpsAtItsCurvature) {
  const GridSpec g = GridSpec::cube(2, 2.0, 65);
  const GridFunction v = quadratic(SymMatrix::identity(2, -4.0), g);
  const DomainSpec d = DomainSpec::whole(g);
  const DomainSpec q = DomainSpec::ball({0.0, 0.0}, 0.5, DomainSpec::bounding_of(g));
  const DecayTable t = measure_bad_set(v, d, q, {2.0, 3.5, 4.5, 8.0});
  EXPECT_NEAR(t.measures[0], t.query_measure, 1e-12);
  EXPECT_NEAR(t.measures[1], t.query_measure, 1e-12);
  EXPECT_NEAR(t.measures[2], 0.0, 0.0);
  EXPECT_NEAR(t.measures[3], 0.0, 0.0);
  EXPECT_TRUE(t.nonincreasing());
}

TEST(MeasureBadSet, ZeroFunctionHasNoBadSetAndLadderIsValidated) {
  const GridSpec g = GridSpec::cube(2, 2.0, 33);
  const DomainSpec d = DomainSpec::whole(g);
  const DomainSpec q = DomainSpec::cube({0.0, 0.0}, 1.0, DomainSpec::bounding_of(g));
  for (double m : measure_bad_set(GridFunction(g), d, q, {1.0, 10.0}).measures) EXPECT_EQ(m, 0.0);
  EXPECT_THROW(measure_bad_set(GridFunction(g), d, q, {}), ParameterError);
  EXPECT_THROW(measure_bad_set(GridFunction(g), d, q, {2.0, 1.0}), ParameterError);
  EXPECT_THROW(measure_bad_set(GridFunction(g), d, q, {1e-323, 1.0}), ParameterError);
}

TEST(GeometricLadder, EndpointsAndDensity) {
  const auto ts = geometric_ladder(1.0, 100.0, 4.0);
  ASSERT_EQ(ts.size(), 9u);
  EXPECT_DOUBLE_EQ(ts.front(), 1.0);
  EXPECT_NEAR(ts.back(), 100.0, 1e-12);
  EXPECT_THROW(geometric_ladder(0.0, 1.0, 1.0), ParameterError);
}

TEST(MeasureLemma, NormalizedParaboloidHasFullRatio) {
  const GridSpec g = GridSpec::cube(2, 4.0, 129);
  const DomainSpec d = DomainSpec::whole(g);
  const EllipticityParams p{2, 1.0, 1.0};
  const GridFunction v = quadratic(SymMatrix::identity(2, -0.25), g);
  const MeasureLemmaReport r = verify_measure_lemma(v, d, p);
  ASSERT_EQ(r.outcome, Outcome::pass) << r.note;
  EXPECT_NEAR(r.ratio, 1.0, 1e-12);
  EXPECT_GE(r.margin, 0.0);
}

TEST(MeasureLemma, UncertifiedInputIsHypothesisNotMet) {
  const GridSpec g = GridSpec::cube(2, 4.0, 65);
  const GridFunction v = quadratic(SymMatrix::identity(2, 1.0), g);
  MeasureLemmaOptions o;
  o.certificate_tolerance = 1e-6;
  const MeasureLemmaReport r = verify_measure_lemma(v, DomainSpec::whole(g), {2, 1.0, 1.0}, o);
  EXPECT_EQ(r.outcome, Outcome::hypothesis_not_met);
}

TEST(MeasureLemma, InvariantUnderAddingAffineFunctions) {
  const GridSpec g = GridSpec::cube(2, 4.0, 129);
  const DomainSpec d = DomainSpec::whole(g);
  const EllipticityParams p{2, 1.0, 2.0};
  const GridFunction v = quadratic(SymMatrix::diagonal({-0.3, 0.1}), g);
  GridFunction w = v;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point x = g.node(i);
    w.values[i] += 0.05 * x[0] - 0.02 * x[1];
  }
  const MeasureLemmaReport a = verify_measure_lemma(v, d, p), b = verify_measure_lemma(w, d, p);
  EXPECT_EQ(a.outcome, b.outcome);
  EXPECT_NEAR(a.ratio, b.ratio, 1e-12);
}

TEST(SeedScale, HalvesUntilTheSeedCubeIsTouched) {
  const GridSpec g = GridSpec::cube(2, 4.0, 65);
  const DomainSpec d = DomainSpec::whole(g);
  const GridFunction flat = quadratic(SymMatrix::identity(2, -0.1), g);
  EXPECT_EQ(seed_scale(flat, d, 2), 1.0);
  const GridFunction steep = quadratic(SymMatrix::identity(2, -2.0), g);
  const auto s = seed_scale(steep, d, 2);
  ASSERT_TRUE(s);
  EXPECT_LE(*s * 2.0, 0.5 + 1e-12);
}

TEST(Touching, SmallFunctionsTouchLargeOnesAreRejected) {
  const GridSpec g = GridSpec::cube(2, 4.0, 65);
  const DomainSpec d = DomainSpec::whole(g);
  EXPECT_EQ(verify_touching(GridFunction(g, 0.2), d).outcome, Outcome::pass);
  const TouchingReport big = verify_touching(GridFunction(g, 0.5), d);
  EXPECT_EQ(big.outcome, Outcome::hypothesis_not_met);
  const GridSpec small = GridSpec::cube(2, 2.0, 33);
  EXPECT_THROW(verify_touching(GridFunction(small), DomainSpec::whole(small)), DomainError);
}

TEST(Localization, ZeroFunctionPassesBothParts) {
  const GridSpec g = GridSpec::cube(2, 6.0, 97);
  const LocalizationReport r = verify_localization(GridFunction(g), DomainSpec::whole(g), {2, 1.0, 1.0});
  EXPECT_EQ(r.outcome, Outcome::pass) << r.note;
  EXPECT_TRUE(r.part_i);
  EXPECT_TRUE(r.part_ii);
}

TEST(Rescale, IdentityCurvatureAndAlignment) {
  const GridSpec g = GridSpec::cube(2, 2.0, 33);
  const GridFunction v = quadratic(SymMatrix::identity(2, -3.0), g);
  const GridFunction same = rescale(v, {0.0, 0.0}, 1.0, 1.0);
  EXPECT_EQ(same.values, v.values);
  EXPECT_TRUE(same.spec == g);
  // D^2 v~ = D^2 v / t, independent of r
  const GridFunction w = rescale(v, {0.25, 0.0}, 0.5, 2.0);
  const SymmetricMatrixField H = discrete_hessian(w);
  EXPECT_NEAR(H.values[w.spec.nearest(Point{0.0, 0.0})](0, 0), -1.5, 1e-9);
  EXPECT_NEAR(w[w.spec.nearest(Point{0.0, 0.0})], v[g.nearest(Point{0.25, 0.0})] / 0.5, 1e-12);
  EXPECT_THROW(rescale(v, {0.01, 0.0}, 0.5, 1.0), AlignmentError);
  EXPECT_THROW(rescale(v, {0.0, 0.0}, 0.3, 1.0), AlignmentError);
}

TEST(Rescale, BadSetMapsToBadSet) {
  const GridSpec g = GridSpec::cube(2, 2.0, 65);
  const GridFunction v = sample(random_viscosity_pieces({2, 1.0, 2.0}, 3, 2, 1), g);
  const double r = 0.5, t = 3.0;
  const GridFunction w = rescale(v, {0.0, 0.0}, r, t);
  // G_{t s}(v) in original coordinates equals G_s(v~) node for node
  EnvelopeOptions ov, ow;
  ov.tolerance = 1e-3;
  ow.tolerance = 1e-3 / (t * r * r);
  const GridMask a = g_minus_mask(v, t * 5.0, DomainSpec::whole(g), DomainSpec::whole(g), ov).mask;
  const GridMask b = g_minus_mask(w, 5.0, DomainSpec::whole(w.spec), DomainSpec::whole(w.spec), ow).mask;
  EXPECT_EQ(a.flags, b.flags);
}

TEST(Iterate, ZeroFunctionHasNoBadSet) {
  const double h = 6.0 / 96.0;
  const GridSpec g(std::vector<std::size_t>(2, 96), Point(2, -3.0 + h / 2.0), h);
  const DyadicFrame f = dyadic_frame(g, {0.0, 0.0}, 1.0);
  const IterationReport r = iterate_decay(GridFunction(g), DomainSpec::whole(g), {2, 1.0, 1.0}, 2, f, 4.0, 0.5);
  EXPECT_EQ(r.outcome, Outcome::pass);
  for (const auto& row : r.rows) EXPECT_EQ(row.measure, 0.0);
  EXPECT_EQ(iterate_decay(GridFunction(g, 0.3), DomainSpec::whole(g), {2, 1.0, 1.0}, 2, f, 4.0, 0.5).outcome,
            Outcome::hypothesis_not_met);
  EXPECT_THROW(iterate_decay(GridFunction(g), DomainSpec::whole(g), {2, 1.0, 1.0}, 2, f, 1.0, 0.5), ParameterError);
}
