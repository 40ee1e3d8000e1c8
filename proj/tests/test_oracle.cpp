#include <random>

#include <gtest/gtest.h>

#include "xxz/fcs.hpp"
#include "xxz/oracle.hpp"

using namespace xxz;

namespace {

CMat random_hermitian(int dim, std::mt19937& gen)
{
    std::normal_distribution<double> g;
    CMat a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = cplx(g(gen), g(gen));
    return 0.5 * (a + a.adjoint());
}

} // namespace

TEST(Hamiltonian, TwoSites)
{
    CMat h = build_xxz(2, 0.5);
    CMat ref = CMat::Zero(4, 4);
    ref(0, 0) = ref(3, 3) = 0.5;
    ref(1, 1) = ref(2, 2) = -0.5;
    ref(1, 2) = ref(2, 1) = 2.0;
    EXPECT_EQ(max_abs(h - ref), 0.0);
}

TEST(Hamiltonian, HermitianAndConserving)
{
    for (int n = 2; n <= 6; ++n) {
        CMat h = build_xxz(n, 0.7);
        EXPECT_LE(max_abs(h - h.adjoint()), 1e-12);
        EXPECT_LE(max_abs(commutator(h, magnetization(n))), 1e-12);
        CMat hs = build_staggered(n, 0.7, 0.5);
        EXPECT_LE(max_abs(commutator(hs, magnetization(n))), 1e-12);
    }
}

TEST(Hamiltonian, ReflectionFlipSymmetry)
{
    CMat h = build_xxz(3, 1.0);
    CMat p = flip_op(3) * reversal_op(3);
    EXPECT_LE(max_abs(commutator(h, p)), 1e-14);
}

TEST(Hamiltonian, StaggeredZeroField) { EXPECT_EQ(max_abs(build_staggered(4, 0.5, 0.0) - build_xxz(4, 0.5)), 0.0); }

TEST(Hamiltonian, StaggeredBreaksParity)
{
    CMat h = build_staggered(4, 0.5, 0.5);
    CMat f = flip_op(4), r = reversal_op(4);
    EXPECT_GT(max_abs(commutator(h, f)), 0.1);
    EXPECT_GT(max_abs(commutator(h, r)), 0.1);
    // On an even chain reversal maps (-1)^j to -(-1)^j, which the flip undoes.
    EXPECT_LE(max_abs(commutator(h, CMat(f * r))), 1e-14);
}

TEST(Hamiltonian, RejectsBadSize) { EXPECT_THROW(build_xxz(1, 1.0), Error); }

TEST(Jumps, MagnetizationDirection)
{
    const int n = 3;
    EXPECT_EQ(magnetization_direction(site_op(Pauli::Plus, 1, n), n), 1);
    EXPECT_EQ(magnetization_direction(site_op(Pauli::Minus, 3, n), n), -1);
    EXPECT_EQ(magnetization_direction(site_op(Pauli::Z, 2, n), n), 0);
}

TEST(Liouvillean, UniqueZeroMode)
{
    CVec ev = liouvillean_spectrum(max_driven(2, 0.5, 1.0));
    int zeros = 0;
    for (int i = 0; i < ev.size(); ++i) {
        EXPECT_LE(ev(i).real(), 1e-10);
        if (std::abs(ev(i)) < 1e-10) ++zeros;
    }
    EXPECT_EQ(zeros, 1);
}

TEST(Liouvillean, TracePreserving)
{
    for (int n = 2; n <= 4; ++n) {
        LindbladModel m = boundary_driven(n, 0.8, DrivingRates{0.9, 0.1, 0.2, 0.8}, 0.7);
        SpMat l = build_liouvillean(m);
        const int dim = 1 << n;
        CVec id = mat_to_vec(CMat::Identity(dim, dim));
        CVec left = l.transpose() * id;
        EXPECT_LE(left.cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Liouvillean, PreservesTraceAndHermiticity)
{
    std::mt19937 gen(3);
    LindbladModel m = boundary_driven(3, 0.5, DrivingRates{0.6, 0.3, 0.2, 0.9}, 0.4);
    for (int k = 0; k < 5; ++k) {
        CMat x = random_hermitian(8, gen);
        CMat y = apply_generator(m, x);
        EXPECT_LE(std::abs(y.trace()), 1e-12);
        EXPECT_LE(max_abs(y - y.adjoint()), 1e-12);
        CVec v = build_liouvillean(m) * mat_to_vec(x);
        EXPECT_LE(max_abs(vec_to_mat(v, 8) - y), 1e-12);
    }
}

TEST(Tilted, ZeroCountingFieldIsLiouvillean)
{
    LindbladModel m = boundary_driven(3, 0.5, DrivingRates::symmetric(0.3), 0.1);
    EXPECT_EQ(CMat(build_tilted(m, 0.0) - build_liouvillean(m)).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Tilted, Periodic)
{
    LindbladModel m = boundary_driven(3, 0.5, DrivingRates::symmetric(0.3), 0.1);
    EXPECT_LE(CMat(build_tilted(m, 0.4) - build_tilted(m, 0.4 + 2 * pi)).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Tilted, UnlabeledJumpRejected)
{
    LindbladModel m = boundary_driven(2, 0.5, DrivingRates::symmetric(0.3), 0.1);
    m.jumps[0].count = 0;
    EXPECT_NO_THROW(build_tilted(m, 0.0));
    try {
        build_tilted(m, 0.3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::UnlabeledJump);
    }
}

TEST(SteadyState, SymmetricEquilibriumIsMaximallyMixed)
{
    CMat rho = steady_state(boundary_driven(4, 0.5, DrivingRates::symmetric(0.0), 0.3));
    EXPECT_LE(max_abs(rho - CMat::Identity(16, 16) / 16.0), 1e-12);
    EXPECT_NEAR(current_oracle(rho, 1, 4), 0.0, 1e-14);
}

TEST(SteadyState, ProductLimitForGenericDriving)
{
    DrivingRates r{0.9, 0.1, 0.2, 0.8};
    CMat rho0 = zeroth_order_state(nu_closed(0.0, r), 3);
    double prev = 1;
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        double d = max_abs(steady_state(boundary_driven(3, 0.5, r, eps)) - rho0);
        EXPECT_LE(d, 5 * eps);
        EXPECT_LT(d, prev);
        prev = d;
    }
}

TEST(SteadyState, PhysicalAndStationary)
{
    for (int n = 2; n <= 5; ++n) {
        SteadyState ss = steady_state_full(max_driven(n, 1.5, 0.2));
        EXPECT_NEAR(ss.rho.trace().real(), 1.0, 1e-12);
        EXPECT_LE(max_abs(ss.rho - ss.rho.adjoint()), 1e-14);
        EXPECT_LE(ss.residual, 1e-12);
        Eigen::SelfAdjointEigenSolver<CMat> es(ss.rho);
        EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12);
    }
}

TEST(SteadyState, UniqueForPositiveRates)
{
    std::mt19937 gen(9);
    std::uniform_real_distribution<double> u(0.05, 1.0);
    for (int k = 0; k < 5; ++k) {
        DrivingRates r{u(gen), u(gen), u(gen), u(gen)};
        EXPECT_NO_THROW(steady_state_full(boundary_driven(3, 0.5, r, 0.5)));
    }
}

TEST(SteadyState, DecoupledChainIsDegenerate)
{
    LindbladModel m = boundary_driven(3, 0.5, DrivingRates{0, 0, 0, 0}, 1.0);
    try {
        steady_state_full(m);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::DegenerateSteadyState);
    }
}

TEST(Observables, SmallCouplingCurrent)
{
    const double eps = 0.01, mu = 0.6;
    CMat rho = steady_state(boundary_driven(3, 0.5, DrivingRates::symmetric(mu), eps));
    for (int k = 1; k <= 2; ++k) EXPECT_NEAR(current_oracle(rho, k, 3) / (0.25 * eps * mu), 1.0, 0.01);
}

TEST(Observables, ProfileBounds)
{
    CMat rho = steady_state(max_driven(5, 1.0, 1.0));
    for (double z : profile_oracle(rho, 5)) {
        EXPECT_LE(z, 1.0);
        EXPECT_GE(z, -1.0);
    }
}
