#include <random>

#include <gtest/gtest.h>

#include "xxz/qlax.hpp"

using namespace xxz;

TEST(QNumber, UnitArgument)
{
    for (double g : {0.3, 1.1, 2.5}) EXPECT_NEAR(std::abs(q_number(1.0, g) - 1.0), 0.0, 1e-15);
}

TEST(QNumber, RootOfUnityZero) { EXPECT_NEAR(std::abs(q_number(3.0, pi / 3)), 0.0, 1e-15); }

TEST(QNumber, TwoAtPiThird)
{
    EXPECT_NEAR(std::abs(q_number(2.0, pi / 3) - std::sin(2 * pi / 3) / std::sin(pi / 3)), 0.0, 1e-15);
    EXPECT_NEAR(q_number(2.0, pi / 3).real(), 1.0, 1e-15);
}

TEST(QNumber, SmoothAtZeroAngle)
{
    for (double g : {1e-4, 3e-5, 1e-6}) {
        cplx x(0.7, 2.0);
        EXPECT_LE(std::abs(q_number(x, g) - x), 10.0 * g * g);
    }
}

TEST(Context, GammaMatchesDelta)
{
    for (double d : {-2.0, -0.4, 0.0, 0.5, 1.0, 1.5, 3.0}) {
        cplx g = gamma_from_delta(d);
        EXPECT_NEAR(std::abs(std::cos(g) - d), 0.0, 1e-12) << d;
        QContext c = QContext::make(d, 0.0, 0.0, 4);
        EXPECT_NEAR(std::abs(c.q() * (1.0 / c.q()) - 1.0), 0.0, 1e-15);
    }
}

TEST(Verma, TwoDimensional)
{
    QContext c = QContext::make(0.3, cplx(0.4, 1.3), 0.0, 2);
    VermaOps v = build_verma(c);
    EXPECT_EQ(v.sz(0, 0), c.s);
    EXPECT_EQ(v.sz(1, 1), c.s - 1.0);
    EXPECT_EQ(v.sz(0, 1), 0.0);
}

TEST(Verma, RejectsTinyCutoff)
{
    QContext c = QContext::make(0.3, 1.0, 0.0, 1);
    EXPECT_THROW(build_verma(c), Error);
}

TEST(Verma, TruncatesAtRootOfUnity)
{
    QContext c{0.5, pi / 3, cplx(0.2, 0.9), 0.0, 4};
    VermaOps v = build_verma(c);
    EXPECT_NEAR(std::abs(v.sp(2, 3)), 0.0, 1e-15);
    EXPECT_GT(std::abs(v.sp(1, 2)), 0.1);
}

TEST(Verma, RationalLimitEntries)
{
    QContext c{1.0, 0.0, 4.0 * I1, 0.0, 3};
    VermaOps v = build_verma(c);
    EXPECT_NEAR(std::abs(v.sm(1, 0) - 8.0 * I1), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(v.sm(2, 1) - (8.0 * I1 - 1.0)), 0.0, 1e-15);
}

TEST(Verma, Shape)
{
    QContext c = QContext::make(0.2, cplx(0.5, 0.5), 0.0, 6);
    VermaOps v = build_verma(c);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j) {
            if (i != j) EXPECT_EQ(v.sz(i, j), 0.0);
            if (j != i + 1) EXPECT_EQ(v.sp(i, j), 0.0);
            if (i != j + 1) EXPECT_EQ(v.sm(i, j), 0.0);
        }
}

TEST(Verma, AlgebraClosureRandom)
{
    std::mt19937 gen(11);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        QContext c = QContext::make(0.95 * u(gen), cplx(u(gen), 2 * u(gen)), 0.0, 4 + i % 8);
        EXPECT_LE(algebra_residual(build_verma(c), c.gamma), 1e-10);
    }
}

TEST(Lax, DiagonalAtZeroPhi)
{
    QContext c = QContext::make(0.4, cplx(0.3, 0.8), 0.0, 5);
    LaxOperator l = build_lax(c);
    for (int k = 0; k < 5; ++k) EXPECT_NEAR(std::abs(l.block(0, 0)(k, k) - std::sin(c.gamma * (c.s - double(k)))), 0.0, 1e-14);
}

TEST(Lax, SmallAngleSeries)
{
    const double g = 1e-6;
    QContext c{std::cos(g), g, 4.0 * I1, 0.0, 4};
    LaxOperator l = build_lax(c);
    for (int k = 0; k < 4; ++k) {
        cplx x = g * (c.s - double(k));
        EXPECT_NEAR(std::abs(l.block(0, 0)(k, k) - x), 0.0, 1e-16);
    }
}

TEST(Lax, LoweringBlockTwoDimensional)
{
    QContext c{std::cos(pi / 4), pi / 4, 0.5, pi / 2, 2};
    LaxOperator l = build_lax(c);
    CMat b = l.block(1, 0);
    EXPECT_NEAR(std::abs(b(0, 1) - std::sin(pi / 4)), 0.0, 1e-15);
    EXPECT_EQ(b(0, 0), 0.0);
    EXPECT_EQ(b(1, 0), 0.0);
    EXPECT_EQ(b(1, 1), 0.0);
}

TEST(Lax, PhiDerivativeAtZero)
{
    QContext c = QContext::make(0.6, cplx(0.2, 1.1), 0.0, 5);
    LaxOperator d = lax_phi_derivative(c);
    for (int k = 0; k < 5; ++k) {
        cplx ref = std::cos(c.gamma * (c.s - double(k)));
        EXPECT_NEAR(std::abs(d.block(0, 0)(k, k) - ref), 0.0, 1e-14);
        EXPECT_NEAR(std::abs(d.block(1, 1)(k, k) - ref), 0.0, 1e-14);
    }
    EXPECT_EQ(max_abs(d.block(0, 1)), 0.0);
    EXPECT_EQ(max_abs(d.block(1, 0)), 0.0);
}

TEST(Lax, PhiDerivativeMatchesDifference)
{
    const double h = 1e-5;
    QContext c = QContext::make(0.3, cplx(0.5, 0.7), cplx(0.4, -0.2), 6);
    QContext up = c, dn = c;
    up.phi += h;
    dn.phi -= h;
    LaxOperator lu = build_lax(up), ld = build_lax(dn), d = lax_phi_derivative(c);
    for (int i = 0; i < 4; ++i) EXPECT_LE(max_abs((lu.blocks[i] - ld.blocks[i]) / (2 * h) - d.blocks[i]), 1e-8);
}

TEST(Lax, PhiDerivativeRationalLimit)
{
    QContext c{1.0, 0.0, 3.0 * I1, 0.7, 4};
    LaxOperator d = lax_phi_derivative(c);
    EXPECT_LE(max_abs(d.block(0, 0) - std::cos(0.7) * CMat::Identity(4, 4)), 1e-15);
}

TEST(Lax, SDerivativeMatchesDifference)
{
    const double h = 1e-5;
    QContext c = QContext::make(0.3, cplx(0.5, 0.7), cplx(0.4, -0.2), 6);
    QContext up = c, dn = c;
    up.s += h;
    dn.s -= h;
    LaxOperator lu = build_lax(up), ld = build_lax(dn), d = lax_s_derivative(c);
    for (int i = 0; i < 4; ++i) EXPECT_LE(max_abs((lu.blocks[i] - ld.blocks[i]) / (2 * h) - d.blocks[i]), 1e-8);
}

TEST(Sutherland, SolvedPoint)
{
    QContext c = QContext::make(0.5, s_from_epsilon(1.0, gamma_from_delta(0.5)), 0.0, 8);
    EXPECT_LE(sutherland_residual(c).value, 1e-10);
}

TEST(Sutherland, NearIsotropic)
{
    QContext c{std::cos(1e-7), 1e-7, 4.0 * I1, 0.0, 8};
    EXPECT_LE(sutherland_residual(c).value, 1e-6);
}

TEST(Sutherland, RandomParameters)
{
    std::mt19937 gen(5);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 20; ++i) {
        QContext c = QContext::make(0.7, cplx(u(gen), u(gen)), cplx(u(gen), u(gen)), 10);
        EXPECT_LE(sutherland_residual(c).value, 1e-10);
    }
}

TEST(Sutherland, WrongBondDetected)
{
    QContext c = QContext::make(0.7, cplx(0.3, 0.4), 0.2, 8);
    c.delta = 0.6;
    ResidualReport r = sutherland_residual(c);
    EXPECT_GT(r.value, 1e-3);
    EXPECT_FALSE(r.where.empty());
}

TEST(Coupling, IsotropicValues)
{
    EXPECT_NEAR(std::abs(epsilon_from_s(4.0 * I1, 0.0) - 1.0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(epsilon_from_s(20.0 * I1, 0.0) - 0.2), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(s_from_epsilon(1.0, 0.0) - 4.0 * I1), 0.0, 1e-15);
}

TEST(Coupling, RoundTrip)
{
    for (double d : {0.5, 0.8, -0.3, 1.5, 2.0})
        for (double e : {0.2, 0.5, 1.0, 2.0}) {
            cplx g = gamma_from_delta(d);
            cplx s = s_from_epsilon(e, g);
            EXPECT_NEAR(std::abs(epsilon_from_s(s, g) - e), 0.0, 1e-10) << d << " " << e;
        }
}

TEST(Coupling, KnownSpin)
{
    cplx g = pi / 3;
    cplx s0(0.0, 0.3);
    cplx e = epsilon_from_s(s0, g);
    ASSERT_NEAR(e.imag(), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(s_from_epsilon(e.real(), g) - s0), 0.0, 1e-9);
}

TEST(Coupling, RejectsNonPositive) { EXPECT_THROW(s_from_epsilon(0.0, 0.5), Error); }

TEST(Config, RoundTrip)
{
    QContext c = QContext::make(0.5, cplx(0.1, 2.3), cplx(0.0, 0.4), 7);
    QContext r = from_key_values(parse_key_values(serialize(c)));
    EXPECT_EQ(r.cutoff, 7);
    EXPECT_NEAR(std::abs(r.s - c.s), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(r.gamma - c.gamma), 0.0, 1e-15);
}

TEST(Config, RejectsInconsistentGamma)
{
    KeyValues kv = to_key_values(QContext::make(0.5, 1.0, 0.0, 4));
    kv["delta"] = "0.9";
    EXPECT_THROW(from_key_values(kv), Error);
}

TEST(Config, CommentsAndSections)
{
    KeyValues kv = parse_key_values("# run\n[physics]\ndelta = 1\ncutoff = 5 \n");
    EXPECT_EQ(kv.at("delta"), "1");
    EXPECT_EQ(kv.at("cutoff"), "5");
}
