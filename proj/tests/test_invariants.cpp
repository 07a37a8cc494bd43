#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ipf/invariants.hpp"
#include "oracles.hpp"

using namespace ipf;

TEST(SolveAo, LimitRootMatchesBisection) {
    const double ref = oracle::bisect([](double a) { return std::exp(a) - 2 * a - 1; }, 0.5, 2.0);
    const auto r = solve_a_o(0.0);
    EXPECT_NEAR(r.a_o, ref, 1e-12);
    EXPECT_NEAR(r.a_o, 1.2564, 1e-4);
    EXPECT_LT(std::abs(r.residual), 1e-12);
}

TEST(SolveAo, ResidualAtGammaOneAndBeyond) {
    for (double g : {1e-7, 1e-3, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0}) {
        const auto r = solve_a_o(g);
        EXPECT_GT(r.a_o, 0.0);
        EXPECT_LT(std::abs(invariant_equation(g, r.a_o)), 1e-10) << "gamma " << g;
    }
    EXPECT_THROW(solve_a_o(-1.0), DomainError);
}

TEST(SolveAo, ContinuousInGamma) {
    double prev = solve_a_o(0.0).a_o;
    for (int k = 1; k <= 2000; ++k) {
        const double cur = solve_a_o(1e-3 * k).a_o;
        EXPECT_LE(std::abs(cur - prev), 0.01) << "gamma " << 1e-3 * k;
        prev = cur;
    }
}

TEST(SolveAoJoint, ReportsAllRootsAndPaperNearest) {
    const auto j = solve_a_o_joint(0.0);
    ASSERT_GE(j.roots.size(), 1u);
    EXPECT_NEAR(j.a_star, 1.2564, 1e-4);
    for (const auto& c : j.roots) {
        EXPECT_NEAR(std::abs(c.a_o - j.a_star), 2 * c.a, 1e-9);
        EXPECT_NEAR(c.a, std::abs(invariant_connections(-c.a_o).i2), 1e-12);
    }
    // nearest root to (0.75, 0.25); balance holds by construction
    EXPECT_NEAR(j.chosen.a_o, 0.7927, 1e-3);
    EXPECT_NEAR(j.chosen.a, 0.2319, 1e-3);
    EXPECT_LT(balance_check(j.chosen.a_o, j.a_star, j.chosen.a), 0.05);
}

TEST(BitConversion, InvariantPair) {
    EXPECT_NEAR(nats_to_bits(0.75), 1.082, 1e-3);
    EXPECT_NEAR(nats_to_bits(0.25), 0.361, 1e-3);
    EXPECT_NEAR(bits_to_nats(nats_to_bits(0.37)), 0.37, 1e-15);
}

TEST(Connections, TrivialAndPole) {
    const auto z = invariant_connections(0.0);
    EXPECT_EQ(z.i1, 0.0);
    EXPECT_EQ(z.i2, 0.0);
    EXPECT_THROW(invariant_connections(std::log(2.0)), PoleError);
    const auto c = invariant_connections(-0.3);
    EXPECT_EQ(c.i1, 0.5 * c.i2);
}

TEST(Connections, MatchEigenvalueMapComposition) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> lam(-5.0, 5.0), tau(0.01, 2.0);
    int checked = 0;
    while (checked < 100) {
        const double l = lam(rng), t = tau(rng);
        if (std::exp(l * t) >= 2.0 - 1e-3) continue;
        const double i3 = l * t;
        const double i2 = invariant_connections(i3).i2;
        EXPECT_NEAR(i2, eigenvalue_map(Complex(l, 0.0), t).real() * t, 1e-9 * std::max(1.0, std::abs(i2)));
        ++checked;
    }
}

TEST(Connections, NegativeExampleRealization) {
    const double t = 0.193;
    const auto c = invariant_connections(-t);
    EXPECT_NEAR(c.i2, eigenvalue_map(Complex(-1.0, 0.0), t).real() * t, 1e-9);
}

TEST(ImaginaryInvariant, PiOverThreeAndCoefficient) {
    const auto inv = imaginary_invariant();
    EXPECT_NEAR(2 * std::cos(inv.beta_tau) - 1, 0.0, 1e-15);
    EXPECT_NEAR(inv.re_coeff, -0.577, 1e-3);
    EXPECT_NEAR(inv.re_coeff, -std::sqrt(3.0) / 3.0, 1e-12);
    EXPECT_TRUE(inv.printed_value_disagrees);
}

TEST(ImaginaryInvariant, BruteForceScan) {
    const double beta = 1.3;
    const int N = 2'000'000;
    const double tmax = 2 * std::numbers::pi / beta;
    double prev = eigenvalue_map(Complex(0, beta), tmax / N).imag();
    double found = -1;
    for (int k = 2; k <= N; ++k) {
        const double t = tmax * k / N;
        const double cur = eigenvalue_map(Complex(0, beta), t).imag();
        if ((cur < 0) != (prev < 0)) {
            found = t - 0.5 * tmax / N;
            break;
        }
        prev = cur;
    }
    EXPECT_NEAR(beta * found, std::numbers::pi / 3, 1e-6);
}

TEST(ZeroRealInvariant, RootAndResidual) {
    const auto r = zero_real_invariant(1.0);
    EXPECT_GT(r.a_o, 0.0);
    EXPECT_LT(std::abs(r.residual), 1e-10);
    const double ref = oracle::bisect([](double b) { return 2 * std::cos(b) - std::sin(b) - std::exp(b); }, 0.1, 1.0);
    EXPECT_NEAR(r.a_o, ref, 1e-10);
    EXPECT_THROW(zero_real_invariant(0.0), DomainError);
}

TEST(Balance, PureEvaluator) {
    EXPECT_NEAR(balance_check(0.75, -0.25, 0.25), 0.5, 1e-15);
    EXPECT_EQ(balance_check(0.4, 0.4, 0.0), 0.0);
}

TEST(SegmentInterval, InverseProportional) {
    EXPECT_EQ(segment_interval(0.7, 0.7), 1.0);
    EXPECT_NEAR(segment_interval(2.0, 1.0), 0.5 * segment_interval(1.0, 1.0), 1e-15);
    EXPECT_NEAR(segment_interval(-1.0, -0.193), 0.193, 1e-15);
    EXPECT_THROW(segment_interval(0.0, 1.0), DomainError);
}

TEST(RealizedInvariants, HalfRelationAndSign) {
    const auto s = realized_invariants(Complex(-1.0, 0.0), 0.193);
    EXPECT_EQ(s.i1, 0.5 * s.i2);
    EXPECT_TRUE(s.unstable);
    EXPECT_NEAR(s.a_o, -0.193, 1e-15);
}

TEST(GammaTable, MonotoneAndConverged) {
    const auto t = build_gamma_table(5.0, 51);
    ASSERT_EQ(t.rows.size(), 51u);
    EXPECT_TRUE(t.all_converged());
    for (std::size_t k = 1; k < t.rows.size(); ++k) {
        EXPECT_GT(t.rows[k].gamma, t.rows[k - 1].gamma);
        EXPECT_LT(t.rows[k].a_o, t.rows[k - 1].a_o);
    }
    for (const auto& r : t.rows) EXPECT_LT(std::abs(invariant_equation(r.gamma, r.a_o)), 1e-10);
    const auto one = build_gamma_table(3.0, 1);
    ASSERT_EQ(one.rows.size(), 1u);
    EXPECT_EQ(one.rows[0].gamma, 0.0);
    EXPECT_LT(std::abs(one.rows[0].residual), 1e-10);
}
