#include <gtest/gtest.h>

#include "oracles.hpp"
#include "w2eps/cz.hpp"
#include "w2eps/experiments.hpp"
#include "w2eps/rng.hpp"

using namespace w2eps;

namespace {

// cell-centred grid of 32 nodes per axis on [-1, 1]^n
GridSpec cell_grid(std::size_t n, std::size_t count = 32) {
  const double h = 2.0 / static_cast<double>(count);
  return GridSpec(std::vector<std::size_t>(n, count), Point(n, -1.0 + h / 2.0), h);
}

}  // namespace

TEST(BoxCounter, MatchesEnumeration) {
  Rng rng(4);
  for (std::size_t n = 2; n <= 3; ++n) {
    const GridSpec g = cell_grid(n, 16);
    GridMask m(g);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (rng.uniform() < 0.4) m.set(i);
    const BoxCounter bc(m);
    for (int k = 0; k < 200; ++k) {
      IndexBox b{std::vector<std::ptrdiff_t>(n), 1 + rng.below(20)};
      for (auto& l : b.lo) l = static_cast<std::ptrdiff_t>(rng.below(24)) - 4;
      EXPECT_EQ(bc.count(b), oracle::count_in_box(m, b));
    }
  }
}

TEST(DyadicFrame, AlignmentChecks) {
  const GridSpec g = cell_grid(2);
  const DyadicFrame f = dyadic_frame(g, {0.0, 0.0}, 2.0);
  EXPECT_EQ(f.root.side, 32u);
  EXPECT_EQ(f.levels, 5u);
  EXPECT_EQ(dyadic_frame(g, {0.0, 0.0}, 1.0).root.lo, (std::vector<std::ptrdiff_t>{8, 8}));
  EXPECT_THROW(dyadic_frame(g, {0.0, 0.0}, 0.75), AlignmentError);  // 12 nodes
  EXPECT_THROW(dyadic_frame(g, {0.01, 0.0}, 1.0), AlignmentError);
  EXPECT_THROW(dyadic_frame(g, {0.0, 0.0}, 4.0), AlignmentError);
  EXPECT_THROW(dyadic_frame(GridSpec::cube(2, 2.0, 33), {0.0, 0.0}, 1.0), AlignmentError);
}

TEST(CZ, EmptySetIsDegenerate) {
  const GridSpec g = cell_grid(2);
  const DyadicFrame f = dyadic_frame(g, {0.0, 0.0}, 2.0);
  const GridMask D(g);
  const CZResult r = cz_decompose(D, D, f, 0.5);
  EXPECT_TRUE(r.degenerate);
  EXPECT_TRUE(r.selected.empty());
  EXPECT_EQ(cz_outcome(r), Outcome::hypothesis_not_met);
}

TEST(CZ, DenseSetFiresTheRoot) {
  const GridSpec g = cell_grid(2);
  const DyadicFrame f = dyadic_frame(g, {0.0, 0.0}, 2.0);
  const GridMask all = mask_of_box(g, f.root);
  const CZResult r = cz_decompose(all, all, f, 0.5);
  EXPECT_FALSE(r.hypothesis_met);
  EXPECT_EQ(cz_outcome(r), Outcome::hypothesis_not_met);
}

TEST(CZ, ContractChecks) {
  const GridSpec g = cell_grid(2);
  const DyadicFrame f = dyadic_frame(g, {0.0, 0.0}, 1.0);
  GridMask D(g), E(g);
  D.set(g.flat(std::vector<std::size_t>{16, 16}));
  EXPECT_THROW(cz_decompose(D, E, f, 0.5), ContractViolation);
  E.set(0);
  E = E | D;
  EXPECT_THROW(cz_decompose(D, E, f, 0.5), ContractViolation);
  EXPECT_THROW(cz_decompose(D, D, f, 1.0), ParameterError);
}

TEST(CZ, SelectedCubesAreDenseDisjointAndCoverD) {
  const GridSpec g = cell_grid(2);
  const DyadicFrame f = dyadic_frame(g, {0.0, 0.0}, 1.0);
  const double slack = h_slack(g, DomainSpec::cube({0.0, 0.0}, 1.0, DomainSpec::bounding_of(g)));
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const double delta = rng.uniform(0.3, 0.9);
    const CZInstance inst = cz_constructive_instance(g, f, delta, 0.3, seed);
    const CZResult r = cz_decompose(inst.D, inst.E, f, delta, slack);
    if (r.degenerate) continue;
    EXPECT_TRUE(r.hypothesis_met) << r.hypothesis_note;
    EXPECT_TRUE(r.conclusion_holds);
    GridMask covered(g);
    for (const IndexBox& q : r.selected) {
      EXPECT_GE(static_cast<double>(oracle::count_in_box(inst.D, q)), delta * static_cast<double>(q.volume()));
      const GridMask qm = mask_of_box(g, q);
      EXPECT_FALSE((covered & qm).any());
      covered = covered | qm;
    }
    // single nodes are cubes of side 1, so every node of D is caught
    EXPECT_TRUE(is_subset(inst.D, covered));
    EXPECT_TRUE(is_subset(r.dilated_union, inst.E));
  }
}
