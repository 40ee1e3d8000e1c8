#include <gtest/gtest.h>

#include "xxz/ness.hpp"
#include "xxz/oracle.hpp"

using namespace xxz;

TEST(DenseMpo, SingleSite)
{
    QContext c = QContext::make(0.5, cplx(0.2, 1.4), 0.0, 4);
    CMat s = build_S_dense(1, build_lax(c));
    cplx v = std::sin(c.gamma * c.s);
    EXPECT_NEAR(std::abs(s(0, 0) - v), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s(1, 1) + v), 0.0, 1e-15);
    EXPECT_EQ(s(0, 1), 0.0);
    EXPECT_EQ(s(1, 0), 0.0);
}

TEST(DenseMpo, MatchesOracleTwoSites)
{
    CMat rho = ness_density_dense(2, ness_context(0.5, 1.0, 3));
    EXPECT_LE(max_abs(rho - steady_state(max_driven(2, 0.5, 1.0))), 1e-8);
}

TEST(DenseMpo, PositiveSemidefinite)
{
    for (int n = 1; n <= 6; ++n) {
        CMat rho = ness_density_dense(n, ness_context(1.5, 0.2, n + 1));
        EXPECT_LE(max_abs(rho - rho.adjoint()), 1e-14);
        Eigen::SelfAdjointEigenSolver<CMat> es(rho);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(DenseMpo, OracleGrid)
{
    for (double delta : {0.5, 1.0, 1.5})
        for (double eps : {1.0, 0.2})
            for (int n = 2; n <= 5; ++n) {
                CMat a = ness_density_dense(n, ness_context(delta, eps, n + 1));
                EXPECT_LE(max_abs(a - steady_state(max_driven(n, delta, eps))), 1e-8) << delta << eps << n;
            }
}

TEST(Transfer, ContinuityAtRootOfUnity)
{
    NessModel m(ness_context(0.5, 1.0, 4), 1.0, 8);
    EXPECT_LE(continuity_residual(m), 1e-9);
}

TEST(Transfer, ContinuityNearIsotropic)
{
    const double d = std::cos(1e-7);
    NessModel m(ness_context(d, 1.0, 8), 1.0, 7);
    EXPECT_LE(continuity_residual(m), 1e-5);
}

TEST(Transfer, ContinuityIsNotElementwise)
{
    NessModel m = make_ness(1.0, 1.0, 6);
    EXPECT_GT(continuity_elementwise(m.family(), m.prefactor()), 1e-3);
}

TEST(Transfer, ContinuityViolationRaised)
{
    QContext c = ness_context(1.0, 1.0, 7);
    c.s += 0.4;
    NessModel bad(c, 1.0, 6);
    EXPECT_THROW(require_continuity(bad), Error);
    EXPECT_NO_THROW(require_continuity(make_ness(1.0, 1.0, 6)));
}

TEST(Partition, EmptyChain)
{
    NessModel m = make_ness(0.5, 1.0, 4);
    EXPECT_NEAR(std::abs(m.partition_value(0) - 1.0), 0.0, 1e-15);
}

TEST(Partition, SingleSiteTrace)
{
    QContext c = ness_context(0.5, 1.0, 5);
    NessModel m(c, 1.0, 3);
    CMat s = build_S_dense(1, physical_lax(c));
    EXPECT_NEAR(std::abs(m.partition_value(1) - (s * s.adjoint()).trace()), 0.0, 1e-13);
}

TEST(Partition, TwoSiteTrace)
{
    QContext c = ness_context(0.5, 1.0, 5);
    NessModel m(c, 1.0, 3);
    CMat s = build_S_dense(2, physical_lax(c));
    cplx tr = (s * s.adjoint()).trace();
    EXPECT_NEAR(std::abs(m.partition_value(2) / tr - 1.0), 0.0, 1e-13);
}

TEST(Partition, GlobalScaleInvariance)
{
    QContext c = ness_context(0.5, 1.0, 7);
    const cplx scale(0.6, 0.8 * 1.7);
    NessModel a(c, 1.0, 6), b(c, 1.0, 6, scale);
    double ratio_expected = std::pow(std::abs(scale), 12);
    EXPECT_NEAR(std::abs(b.partition_value(6) / a.partition_value(6)) / ratio_expected, 1.0, 1e-12);
    EXPECT_NEAR(a.current(), b.current(), 1e-13);
    for (int j = 1; j <= 6; ++j) EXPECT_NEAR(a.spin_profile(j), b.spin_profile(j), 1e-13);
}

TEST(Partition, IsotropicGrowth)
{
    GrowthFit g = partition_growth(1.0, 180, 220);
    EXPECT_NEAR(g.quadratic / g.reference, 1.0, 0.05);
}

TEST(Profile, MatchesOracle)
{
    CMat rho = steady_state(max_driven(4, 0.5, 1.0));
    auto po = profile_oracle(rho, 4);
    NessModel m = make_ness(0.5, 1.0, 4);
    for (int j = 1; j <= 4; ++j) EXPECT_NEAR(m.spin_profile(j), po[j - 1], 1e-8);
    EXPECT_LE(m.profile_imag_max(), 1e-9);
}

TEST(Profile, IsotropicCosine)
{
    NessModel m = make_ness(1.0, 1.0, 100);
    auto p = m.profile();
    for (int j = 1; j <= 100; ++j) EXPECT_NEAR(p[j - 1], std::cos(pi * (j - 1) / 99.0), 0.05);
}

TEST(Profile, FlatInEasyPlane)
{
    NessModel m = make_ness(0.5, 1.0, 100);
    auto p = m.profile();
    double mean = 0;
    for (int j = 11; j <= 90; ++j) mean += p[j - 1];
    mean /= 80;
    for (int j = 11; j <= 90; ++j) EXPECT_NEAR(p[j - 1], mean, 0.02);
}

TEST(Profile, Bounded)
{
    for (double delta : {0.5, 1.0, 1.5}) {
        NessModel m = make_ness(delta, 0.2, 30);
        for (double z : m.profile()) EXPECT_LE(std::abs(z), 1.0);
        EXPECT_LE(std::abs(m.current()), 1.0);
    }
}

TEST(Current, MatchesOracleAndSiteIndependent)
{
    for (double delta : {0.5, 1.0, 1.5})
        for (double eps : {1.0, 0.2})
            for (int n = 2; n <= 5; ++n) {
                CMat rho = steady_state(max_driven(n, delta, eps));
                NessModel m = make_ness(delta, eps, n);
                for (int k = 1; k < n; ++k) {
                    EXPECT_NEAR(current_oracle(rho, k, n), m.current(), 1e-8);
                    EXPECT_NEAR(m.bond_current(k).real(), m.current(), 1e-8);
                }
            }
}

TEST(Current, BallisticLimit)
{
    const double e = 1.0;
    double ref = (std::sqrt(81 + 74 * e * e + 9 * e * e * e * e) - 7 - 3 * e * e) * e / (4 * (1 + e * e));
    EXPECT_NEAR(ref, 0.350776, 1e-5);
    EXPECT_NEAR(make_ness(0.5, e, 100).current(), ref, 1e-3);
}

TEST(Current, IsotropicScaling)
{
    double j = make_ness(1.0, 1.0, 100).current();
    EXPECT_NEAR(j * 100 * 100 / (pi * pi), 1.0, 0.1);
}

TEST(Decay, EasyAxisSlopes)
{
    for (double d : {1.5, 2.0}) {
        DecayFit f = decay_rate_easy_axis(d, 1.0, 10, 60);
        EXPECT_NEAR(f.reference, -std::acosh(d), 1e-15);
        EXPECT_NEAR(f.slope / f.reference, 1.0, 0.02) << d;
    }
}

TEST(Decay, Crossover)
{
    // Algebraic decay J ~ n^-2 leaves only the slope of -2 log n.
    DecayFit f = decay_rate_easy_axis(1.0 + 1e-9, 1.0, 40, 80);
    std::vector<double> x, logn;
    for (int n : f.sizes) {
        x.push_back(n);
        logn.push_back(-2.0 * std::log(double(n)));
    }
    EXPECT_NEAR(f.slope, 0.0, 0.05);
    EXPECT_NEAR(f.slope / fit_slope(x, logn), 1.0, 0.1);
}

TEST(Decay, RejectsEasyPlane) { EXPECT_THROW(decay_rate_easy_axis(0.5, 1.0, 10, 60), Error); }

TEST(Isotropic, VtAlgebra)
{
    for (double eps : {1.0, 0.2}) {
        cplx s = ness_context(1.0, eps, 10).s;
        EXPECT_LE(vt_algebra_residual(s, s, 10).value, 1e-8);
    }
}

TEST(Isotropic, VtAlgebraWrongSpin)
{
    cplx s = ness_context(1.0, 1.0, 10).s;
    EXPECT_GT(vt_algebra_residual(5.0 * I1, s, 10).value, 1e-3);
}

TEST(Isotropic, BoundaryRelations)
{
    for (double eps : {1.0, 0.2}) {
        auto [l, r] = boundary_residual(ness_context(1.0, eps, 8).s, 8);
        EXPECT_LE(l, 1e-9);
        EXPECT_LE(r, 1e-9);
    }
    EXPECT_GT(boundary_residual(ness_context(1.0, 1.0, 8).s, 8, 2.0).first, 0.1);
}

TEST(Truncation, RationalAngles)
{
    for (int m : {3, 4, 5}) {
        TruncationReport r = truncation_change(std::cos(pi / m), 1.0, 30, m + 1);
        EXPECT_LE(r.partition_change, 1e-10) << m;
        EXPECT_LE(r.profile_change, 1e-10) << m;
        EXPECT_LE(r.current_change, 1e-10) << m;
    }
}

TEST(Truncation, RationalOrder)
{
    EXPECT_EQ(rational_order(pi / 3), 3);
    EXPECT_EQ(rational_order(2 * pi / 5), 5);
    EXPECT_EQ(rational_order(1.0), 0);
    EXPECT_EQ(rational_order(cplx(0.0, 0.9)), 0);
}

TEST(Partition, RangeChecked)
{
    NessModel m = make_ness(0.5, 1.0, 4);
    EXPECT_THROW(m.partition(5), Error);
}
