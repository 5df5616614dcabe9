#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include <gtest/gtest.h>

#include "rso/bands.hpp"
#include "rso/hamiltonian.hpp"
#include "rso/linalg.hpp"
#include "rso/model.hpp"

using namespace rso;

namespace {

std::vector<double> sorted(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

// ---------------------------------------------------------------- grid / bc

TEST(Grid, CenteredBoxSizes) {
  const auto g = GridSpec::centered(2, 3, 2);
  EXPECT_EQ(g.cells, 5);
  EXPECT_EQ(g.size(), 15u * 15u);
  EXPECT_DOUBLE_EQ(g.volume(), 25.0);
  EXPECT_DOUBLE_EQ(g.h(), 1.0 / 3.0);
}

TEST(Grid, RejectsBadDimensionAndBudget) {
  EXPECT_THROW((GridSpec{3, 1, 4}.validate()), ValidationError);
  EXPECT_THROW((GridSpec{1, 0, 4}.validate()), ValidationError);
  EXPECT_THROW((GridSpec{2, 8, 200}.validate()), ValidationError);
}

TEST(Grid, ThetaOutsideRangeRejected) {
  const GridSpec g{1, 1, 4};
  EXPECT_THROW(assemble_h0(g, PeriodicPotential::zero(1, 1), Theta{{4.0, 0.0}}), ValidationError);
}

// ------------------------------------------------------------ assembly

TEST(Assembly, FreeDirichletSpectrumIsAnalytic) {
  const long n = 37;
  const auto h = assemble_h0(GridSpec{1, 1, n}, PeriodicPotential::zero(1, 1), Dirichlet{});
  const auto ev = eigenvalues(h);
  std::vector<double> exact;
  for (long j = 1; j <= n; ++j) exact.push_back(2 - 2 * std::cos(j * kPi / (n + 1)));
  EXPECT_LT(max_abs_diff(ev, sorted(exact)), 1e-12);
}

TEST(Assembly, SingleCellThetaEigenvalue) {
  for (double th : {-2.5, -0.3, 0.0, 1.0, kPi}) {
    const auto h = assemble_h0(GridSpec{1, 1, 1}, PeriodicPotential::zero(1, 1), Theta{{th, 0.0}});
    ASSERT_EQ(h.dim(), 1);
    EXPECT_NEAR(eigenvalues(h)[0], 2 - 2 * std::cos(th), 1e-14);
  }
}

TEST(Assembly, MeshScalingIsInverseSquareStep) {
  const auto h = assemble_h0(GridSpec{1, 4, 3}, PeriodicPotential::zero(1, 4), Dirichlet{});
  const auto A = h.dense_real();
  EXPECT_DOUBLE_EQ(A(0, 0), 2.0 * 16.0);
  EXPECT_DOUBLE_EQ(A(0, 1), -16.0);
}

TEST(Assembly, DecomposableTwoDimensionalSpectrumIsPairwiseSums) {
  const int p = 3;
  const auto prof = PeriodicPotential::cosine_profile(p, 0.7);
  const auto v1 = PeriodicPotential(1, p, prof);
  const auto v2 = PeriodicPotential::decomposable({prof, prof});
  for (BoundaryCondition bc : {BoundaryCondition{Dirichlet{}}, BoundaryCondition{Periodic{}}}) {
    const auto e1 = eigenvalues(assemble_h0(GridSpec{1, p, 3}, v1, bc));
    const auto e2 = eigenvalues(assemble_h0(GridSpec{2, p, 3}, v2, bc));
    std::vector<double> sums;
    for (double a : e1)
      for (double b : e1) sums.push_back(a + b);
    EXPECT_LT(max_abs_diff(e2, sorted(sums)), 1e-10);
  }
}

TEST(Assembly, DecomposableSamplesAreExactSums) {
  const std::vector<double> a{0.1, -0.4}, b{2.0, 3.5};
  const auto v = PeriodicPotential::decomposable({a, b});
  for (long my = 0; my < 2; ++my)
    for (long mx = 0; mx < 2; ++mx) EXPECT_DOUBLE_EQ(v.at_cell_point(mx, my), a[mx] + b[my]);
}

TEST(Assembly, HermitianForEveryBoundaryCondition) {
  const auto v0 = PeriodicPotential::decomposable(
      {PeriodicPotential::cosine_profile(2, 1.0), PeriodicPotential::cosine_profile(2, 0.5)});
  for (BoundaryCondition bc :
       {BoundaryCondition{Dirichlet{}}, BoundaryCondition{Periodic{}}, BoundaryCondition{Theta{{0.7, -1.9}}}}) {
    const auto h = assemble_h0(GridSpec{2, 2, 4}, v0, bc);
    EXPECT_LE(h.hermiticity_defect(), 1e-12);
  }
}

TEST(Assembly, ThetaZeroEqualsPeriodicEntrywise) {
  const auto v0 = PeriodicPotential(1, 3, PeriodicPotential::cosine_profile(3, 1.3));
  const GridSpec g{1, 3, 5};
  const auto a = assemble_h0(g, v0, Theta{{0.0, 0.0}}).dense();
  const auto b = assemble_h0(g, v0, Periodic{}).dense();
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Assembly, ThetaSpectrumIsEvenInTheta) {
  const auto v0 = PeriodicPotential(1, 2, PeriodicPotential::cosine_profile(2, 0.8));
  const GridSpec g{1, 2, 4};
  for (double th : {0.3, 1.1, 2.9}) {
    const auto a = eigenvalues(assemble_h0(g, v0, Theta{{th, 0.0}}));
    const auto b = eigenvalues(assemble_h0(g, v0, Theta{{-th, 0.0}}));
    EXPECT_LT(max_abs_diff(a, b), 1e-12);
  }
}

TEST(Assembly, WrapHopCarriesThePhase) {
  const GridSpec g{1, 1, 3};
  const auto A = assemble_h0(g, PeriodicPotential::zero(1, 1), Theta{{0.9, 0.0}}).dense();
  EXPECT_NEAR(std::abs(std::arg(-A(2, 0))), 0.9, 1e-14);
  EXPECT_NEAR(std::abs(A(2, 0) - std::conj(A(0, 2))), 0.0, 1e-15);
}

TEST(Assembly, MatrixTriplesExport) {
  const auto h = assemble_h0(GridSpec{1, 1, 2}, PeriodicPotential::zero(1, 1), Dirichlet{});
  std::ostringstream os;
  h.write_triples(os);
  EXPECT_NE(os.str().find("kind=H0"), std::string::npos);
  EXPECT_NE(os.str().find("0 1 -1 0"), std::string::npos);
}

// ------------------------------------------------------------ disorder

TEST(Disorder, SameKeyGivesBitwiseSameSample) {
  DisorderModel law;
  law.seed = 42;
  const auto sites = SiteBox::symmetric(2, 3);
  const auto a = sample_disorder(law, sites, 0);
  const auto b = sample_disorder(law, sites, 0);
  EXPECT_EQ(a.values(), b.values());
  const auto c = sample_disorder(law, sites, 1);
  EXPECT_NE(a.values(), c.values());
}

TEST(Disorder, ZeroOmegaMaxGivesZeroCouplings) {
  DisorderModel law;
  law.omega_max = 0.0;
  const auto s = sample_disorder(law, SiteBox::symmetric(1, 20), 3);
  EXPECT_EQ(s.max(), 0.0);
}

TEST(Disorder, UniformMeanByLawOfLargeNumbers) {
  DisorderModel law;
  law.seed = 7;
  const auto s = sample_disorder(law, SiteBox::symmetric(1, 4999), 0);
  ASSERT_EQ(s.values().size(), 9999u);
  const double mean = std::accumulate(s.values().begin(), s.values().end(), 0.0) / 9999.0;
  EXPECT_NEAR(mean, 0.5, 0.02);
  for (double v : s.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Disorder, BetaAndPiecewiseLawsStayInSupport) {
  DisorderModel beta;
  beta.law = DisorderLaw::Beta;
  beta.beta_a = 2;
  beta.beta_b = 3;
  beta.omega_max = 2.0;
  DisorderModel pw;
  pw.law = DisorderLaw::Piecewise;
  pw.bins = {1.0, 0.0, 3.0};
  for (const auto& law : {beta, pw}) {
    const auto s = sample_disorder(law, SiteBox::symmetric(1, 500), 0);
    for (double v : s.values()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, law.omega_max);
    }
  }
  // Nothing falls in the empty middle bin.
  const auto s = sample_disorder(pw, SiteBox::symmetric(1, 500), 0);
  for (double v : s.values()) EXPECT_FALSE(v > 1.0 / 3.0 + 1e-12 && v < 2.0 / 3.0 - 1e-12);
}

TEST(Disorder, BetaMeanMatchesLaw) {
  DisorderModel beta;
  beta.law = DisorderLaw::Beta;
  beta.beta_a = 2;
  beta.beta_b = 3;
  const auto s = sample_disorder(beta, SiteBox::symmetric(1, 9999), 0);
  const double mean = std::accumulate(s.values().begin(), s.values().end(), 0.0) / s.values().size();
  EXPECT_NEAR(mean, 0.4, 0.01);
}

TEST(Disorder, InvalidLawsRejected) {
  DisorderModel a;
  a.omega_max = -1;
  EXPECT_THROW(a.validate(), ValidationError);
  DisorderModel b;
  b.law = DisorderLaw::Beta;
  b.beta_a = 0.5;
  EXPECT_THROW(b.validate(), ValidationError);
}

// ------------------------------------------------------------ anderson

TEST(Anderson, ZeroSampleLeavesH0Unchanged) {
  const GridSpec g{1, 2, 6};
  const auto v0 = PeriodicPotential(1, 2, PeriodicPotential::cosine_profile(2, 0.4));
  const auto u = SingleSitePotential::exponential(1, 2, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0, 3.0);
  const auto h0 = assemble_h0(g, v0, Dirichlet{});
  const auto sites = SiteBox::symmetric(1, 8);
  const auto h = assemble_anderson(h0, u, DisorderSample::constant(sites, 0.0));
  EXPECT_EQ((h.dense() - h0.dense()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(h.kind(), Provenance::Anderson);
}

TEST(Anderson, SingleIndicatorBumpSitsOnItsCell) {
  const int p = 3;
  const GridSpec g{1, p, 5};  // sites -2..2
  const auto u = SingleSitePotential::indicator(1, p, 0.75);
  const auto sites = SiteBox::symmetric(1, 3);
  std::vector<double> w(sites.size(), 0.0);
  w[sites.index({0, 0})] = 1.0;
  const auto dv = anderson_potential(g, u, DisorderSample(sites, w));
  for (long i = 0; i < g.points_per_axis(); ++i) {
    const double expect = g.site_of(i) == 0 ? 0.75 : 0.0;
    EXPECT_DOUBLE_EQ(dv[static_cast<std::size_t>(i)], expect) << "point " << i;
  }
}

TEST(Anderson, MissingCouplingIsAnError) {
  const GridSpec g{1, 1, 9};
  const auto u = SingleSitePotential::indicator(1, 1, 1.0);
  const auto h0 = assemble_h0(g, PeriodicPotential::zero(1, 1), Dirichlet{});
  EXPECT_THROW(assemble_anderson(h0, u, DisorderSample::constant(SiteBox::symmetric(1, 2), 1.0)),
               ValidationError);
}

TEST(Anderson, NonnegativeDisorderNeverLowersEigenvalues) {
  const auto model = AndersonModel::canonical(1, 2, 1.0, 5);
  const GridSpec g = model.box(15);
  const auto h0 = assemble_h0(g, model.v0, Dirichlet{});
  const auto e0 = eigenvalues(h0);
  for (std::uint64_t r = 0; r < 5; ++r) {
    const auto e = eigenvalues(model.dirichlet_box(g, model.draw(model.coupling_sites(g), r)));
    for (std::size_t i = 0; i < e.size(); ++i) EXPECT_GE(e[i], e0[i] - 1e-12);
  }
}

TEST(Anderson, MatricesAreBitwiseReproducible) {
  const auto model = AndersonModel::canonical(2, 1, 1.0, 11);
  const GridSpec g = model.box(6);
  const auto a = model.dirichlet_box(g, model.draw(model.coupling_sites(g), 4)).dense();
  const auto b = model.dirichlet_box(g, model.draw(model.coupling_sites(g), 4)).dense();
  EXPECT_EQ((a - b).cwiseAbs().maxCoeff(), 0.0);
}

// ------------------------------------------------------------ periodic approximation

TEST(PeriodicApprox, FoldingRepresentative) {
  EXPECT_EQ(fold_site(4, 3), 1);
  EXPECT_EQ(fold_site(-2, 3), 1);
  EXPECT_EQ(fold_site(1, 3), 1);
  EXPECT_EQ(fold_site(-5, 5), 0);
  EXPECT_EQ(fold_site(7, 5), 2);
}

TEST(PeriodicApprox, ConstantDisorderIsPeriodicAlready) {
  const int p = 2;
  const auto v0 = PeriodicPotential(1, p, PeriodicPotential::cosine_profile(p, 0.5));
  const auto u = SingleSitePotential::exponential(1, p, 1.0, 1.5, 0.2, 1.0, 1.0, 1.5, 2.0);
  for (long l : {1, 2, 3}) {
    const auto grid = GridSpec::centered(1, p, l);
    const auto sites = SiteBox::symmetric(1, l);
    const auto h = assemble_periodic_approx(grid, v0, u, DisorderSample::constant(sites, 0.3), Periodic{});
    // Periodized sum of u is the same on every cell.
    for (long i = 0; i < grid.points_per_axis(); ++i)
      EXPECT_NEAR(h.potential()[static_cast<std::size_t>(i)], h.potential()[static_cast<std::size_t>(i % p)], 1e-14);
  }
}

TEST(PeriodicApprox, TorusTranslationKeepsSpectrum) {
  const auto model = AndersonModel::canonical(1, 2, 1.0, 3);
  const long l = 3;
  const auto sites = SiteBox::symmetric(1, l);
  const auto s = model.draw(sites, 0);
  std::vector<double> shifted(sites.size());
  const long n = 2 * l + 1;
  for (long k = -l; k <= l; ++k) shifted[sites.index({fold_site(k + 2, n), 0})] = s.at({k, 0});
  const auto a = eigenvalues(model.periodic_approx(l, s, {0.0, 0.0}));
  const auto b = eigenvalues(model.periodic_approx(l, DisorderSample(sites, shifted), {0.0, 0.0}));
  EXPECT_LT(max_abs_diff(a, b), 1e-11);
}

TEST(PeriodicApprox, DirichletRejected) {
  const auto model = AndersonModel::canonical(1, 1, 1.0, 3);
  const auto grid = GridSpec::centered(1, 1, 2);
  EXPECT_THROW(assemble_periodic_approx(grid, model.v0, model.u,
                                        DisorderSample::constant(SiteBox::symmetric(1, 2), 0.0), Dirichlet{}),
               ValidationError);
}

// ------------------------------------------------------------ single-site validation

TEST(SingleSite, IndicatorPasses) {
  EXPECT_TRUE(validate_single_site(SingleSitePotential::indicator(1, 4, 0.6)).pass());
  EXPECT_TRUE(validate_single_site(SingleSitePotential::indicator(2, 3, 1.0)).pass());
}

TEST(SingleSite, ExponentialTailPasses) {
  const auto u = SingleSitePotential::exponential(1, 4, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0, 10.0);
  const auto rep = validate_single_site(u);
  EXPECT_TRUE(rep.pass()) << (rep.failures.empty() ? "" : rep.failures.front());
}

TEST(SingleSite, NegativeSampleFailsWithLocation) {
  const SingleSitePotential::Params par{0.5, 1.0, 1.0, 1.0, 2.0};
  const SingleSitePotential u(1, 2, par, [](Point x) { return x[0] > 1.0 ? -0.1 : 1.0; });
  const auto rep = validate_single_site(u);
  EXPECT_FALSE(rep.pass());
  EXPECT_FALSE(rep.nonnegative);
  ASSERT_FALSE(rep.failures.empty());
  EXPECT_NE(rep.failures.front().find("x="), std::string::npos);
}

TEST(SingleSite, DefaultRadiusMakesTailNegligible) {
  const double r = SingleSitePotential::default_radius(2.0, 0.5);
  EXPECT_LT(2.0 * std::exp(-0.5 * r), 1e-10);
}

// ------------------------------------------------------------ counting

TEST(Counting, InertiaMatchesDenseCount) {
  const auto model = AndersonModel::canonical(1, 3, 2.0, 9);
  const GridSpec g = model.box(40);
  const auto h = model.dirichlet_box(g, model.draw(model.coupling_sites(g), 0));
  const EigenCounter c(h);
  EXPECT_TRUE(c.uses_inertia());
  const auto ev = eigenvalues(h);
  for (double E = -1; E < 40; E += 0.37) EXPECT_EQ(c.below(E), count_sorted_below(ev, E)) << E;
  // Strictly below: an eigenvalue at E is not counted.
  EXPECT_EQ(count_sorted_below(ev, ev[5]), 5);
}

// ------------------------------------------------------------ bands

TEST(Bands, BrillouinZoneBoxes) {
  const auto z = brillouin_zone(1, 1);
  EXPECT_DOUBLE_EQ(z.half_width(), kPi / 3);
  EXPECT_DOUBLE_EQ(brillouin_zone(0, 2).half_width(), kPi);
  EXPECT_NEAR(brillouin_zone(1, 2).volume(), std::pow(2 * kPi / 3, 2), 1e-14);
  EXPECT_TRUE(brillouin_zone(0, 1).full());
  EXPECT_FALSE(brillouin_zone(2, 1).full());
}

TEST(Bands, FreeBandIsCosine) {
  const auto b = compute_bands(h0_factory(PeriodicPotential::zero(1, 1)), brillouin_zone(0, 1), 65, 1);
  for (std::size_t k = 0; k < b.thetas.size(); ++k)
    EXPECT_NEAR(b.at(k, 0), 2 - 2 * std::cos(b.thetas[k][0]), 1e-12);
  const auto edges = find_band_edges(b);
  ASSERT_EQ(edges.size(), 2u);
  EXPECT_NEAR(edges[0].energy, 0.0, 1e-14);
  EXPECT_NEAR(edges[1].energy, 4.0, 1e-14);
  EXPECT_EQ(edges[0].kind, EdgeKind::Lower);
}

TEST(Bands, ThetaZeroEqualsPeriodicSpectrum) {
  const auto v0 = PeriodicPotential(1, 6, PeriodicPotential::cosine_profile(6, 1.0));
  const auto ev = lowest_eigenvalues(h0_factory(v0), {0.0, 0.0}, 6);
  const auto per = eigenvalues(assemble_h0(GridSpec{1, 6, 1}, v0, Periodic{}));
  EXPECT_LT(max_abs_diff(ev, per), 1e-12);
}

TEST(Bands, DecomposableBandsAreSortedPairSums) {
  const int p = 3;
  const auto prof = PeriodicPotential::cosine_profile(p, 0.9);
  const auto f1 = h0_factory(PeriodicPotential(1, p, prof));
  const auto f2 = h0_factory(PeriodicPotential::decomposable({prof, prof}));
  const auto b2 = compute_bands(f2, brillouin_zone(0, 2), 7, p * p);
  for (std::size_t k = 0; k < b2.thetas.size(); ++k) {
    const auto a = lowest_eigenvalues(f1, {b2.thetas[k][0], 0.0}, p);
    const auto c = lowest_eigenvalues(f1, {b2.thetas[k][1], 0.0}, p);
    std::vector<double> sums;
    for (double x : a)
      for (double y : c) sums.push_back(x + y);
    EXPECT_LT(max_abs_diff(b2.values[k], sorted(sums)), 1e-10);
  }
}

TEST(Bands, MathieuPotentialOpensGap) {
  const auto v0 = PeriodicPotential(1, 16, PeriodicPotential::cosine_profile(16, 2.0));
  const auto b = compute_bands(h0_factory(v0), brillouin_zone(0, 1), 65, 3);
  const auto edges = find_band_edges(b, 1e-9);
  EXPECT_GE(edges.size(), 4u);
}

TEST(Bands, OverlappingBandsMerge) {
  const auto zone = brillouin_zone(0, 1);
  const auto b = BandStructure::from_function(zone, 9, [](Point th) {
    return std::vector<double>{std::cos(th[0]), 0.5 + std::cos(th[0])};
  });
  EXPECT_EQ(find_band_edges(b).size(), 2u);
}

TEST(Bands, EvenInThetaAndMonotoneUnderPerturbation) {
  const auto v0 = PeriodicPotential(1, 4, PeriodicPotential::cosine_profile(4, 1.0));
  const auto b = compute_bands(h0_factory(v0), brillouin_zone(0, 1), 33, 4);
  const auto bp = compute_bands(h0_factory(v0.shifted(0.2)), brillouin_zone(0, 1), 33, 4);
  for (long i = 0; i < 33; ++i)
    for (int n = 0; n < 4; ++n) {
      EXPECT_NEAR(b.at(b.index(i), n), b.at(b.index(32 - i), n), 1e-11);
      EXPECT_GE(bp.at(bp.index(i), n), b.at(b.index(i), n));
    }
}

TEST(Bands, NeighbourJumpsBoundedByLipschitz) {
  const auto b = compute_bands(h0_factory(PeriodicPotential::zero(1, 1)), brillouin_zone(0, 1), 65, 1);
  const double xi = estimate_lipschitz(b, 0, 4);
  EXPECT_LE(b.max_neighbor_jump(), xi * b.step() + 1e-12);
}

// ------------------------------------------------------------ regularity

TEST(Regularity, FreeOneDimensionalHessianIsTwo) {
  const auto b = compute_bands(h0_factory(PeriodicPotential::zero(1, 1)), brillouin_zone(0, 1), 65, 1);
  const auto rep = check_regularity(b, 0.0);
  ASSERT_EQ(rep.minimizers.size(), 1u);
  EXPECT_NEAR(rep.minimizers[0].hessian(0, 0), 2.0, 1e-6);
  EXPECT_TRUE(rep.regular);
  EXPECT_EQ(rep.bands, std::vector<int>{0});
}

TEST(Regularity, GridDifferencingWithoutEvaluator) {
  auto b = compute_bands(h0_factory(PeriodicPotential::zero(1, 1)), brillouin_zone(0, 1), 257, 1);
  b.evaluator = nullptr;
  const auto rep = check_regularity(b, 0.0);
  ASSERT_EQ(rep.minimizers.size(), 1u);
  EXPECT_NEAR(rep.minimizers[0].hessian(0, 0), 2.0, 1e-3);
  EXPECT_TRUE(rep.regular);
}

TEST(Regularity, QuarticMinimumIsNotRegular) {
  const auto b = BandStructure::from_function(brillouin_zone(0, 1), 65,
                                              [](Point th) { return std::vector<double>{std::pow(th[0], 4)}; }, true);
  const auto rep = check_regularity(b, 0.0);
  ASSERT_FALSE(rep.minimizers.empty());
  EXPECT_LT(std::abs(rep.minimizers[0].min_eigenvalue), 1e-5);
  EXPECT_FALSE(rep.regular);
}

TEST(Lipschitz, FreeBandIsTwo) {
  const auto b = compute_bands(h0_factory(PeriodicPotential::zero(1, 1)), brillouin_zone(0, 1), 257, 1);
  EXPECT_NEAR(estimate_lipschitz(b, 0, 4), 2.0, 1e-3);
  EXPECT_THROW(estimate_lipschitz(b, 1, 1), ValidationError);
}

TEST(Lipschitz, ConstantBandIsZero) {
  const auto b = BandStructure::from_function(brillouin_zone(0, 1), 17, [](Point) { return std::vector<double>{0.3}; });
  EXPECT_EQ(estimate_lipschitz(b, 0, 1), 0.0);
}

TEST(Lipschitz, DecomposableBoundedBySumOfFactors) {
  const int p = 2;
  const auto prof = PeriodicPotential::cosine_profile(p, 0.6);
  const auto b1 = compute_bands(h0_factory(PeriodicPotential(1, p, prof)), brillouin_zone(0, 1), 33, p);
  const auto b2 = compute_bands(h0_factory(PeriodicPotential::decomposable({prof, prof})), brillouin_zone(0, 2), 33, p * p);
  const double big = 1e9;
  EXPECT_LE(estimate_lipschitz(b2, -big, big), 2 * estimate_lipschitz(b1, -big, big) + 1e-9);
}

TEST(Bands, CsvHasThetaBandEnergyColumns) {
  const auto b = compute_bands(h0_factory(PeriodicPotential::zero(2, 1)), brillouin_zone(0, 2), 3, 1);
  std::ostringstream os;
  write_bands_csv(os, b);
  EXPECT_EQ(os.str().substr(0, 17), "theta1,theta2,n,E");
}
