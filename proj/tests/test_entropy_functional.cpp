#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ipf/entropy_functional.hpp"
#include "oracles.hpp"

using namespace ipf;

namespace {

DiffusionFn constant_b(const Matrix& b) {
    return [b](double, const Vector&) { return b; };
}

}  // namespace

TEST(EfIntegrand, QuadraticFormWithHalfInverse) {
    Matrix b(2, 2);
    b << 2, 0.5, 0.5, 1;
    Vector a(2);
    a << 1, -2;
    const double ref = 0.5 * a.dot((2 * b).inverse() * a);
    EXPECT_NEAR(ef_integrand(a, b), ref, 1e-14);
}

TEST(EfIntegrand, DegenerateDiffusionIsReported) {
    Matrix b = Matrix::Zero(2, 2);
    b(0, 0) = 1.0;
    try {
        ef_integrand(Vector::Ones(2), b, "t = 0.3");
        FAIL();
    } catch (const DegenerateDiffusionError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("t = 0.3"), std::string::npos);
        EXPECT_NE(msg.find("degenerated"), std::string::npos);
    }
    Matrix near(2, 2);
    near << 1, 0, 0, 1e-14;
    EXPECT_THROW(ef_integrand(Vector::Ones(2), near), DegenerateDiffusionError);
}

TEST(EfMonteCarlo, ConstantCoefficientsMatchClosedForm) {
    const double a = 0.7, b = 0.3, T = 2.0;
    auto sys = SdeSystem::linear(Matrix::Zero(1, 1), Matrix::Constant(1, 1, std::sqrt(2 * b)), Vector::Zero(1),
                                 Matrix::Zero(1, 1), 0.0, T);
    sys.drift = [a](double, const Vector&, const Vector&) { return Vector::Constant(1, a); };
    const auto ens = simulate_ensemble(sys, TimeGrid::make(0.0, T, 0.01), ControlSchedule::off(1), 200, 3);
    const auto est = ef_monte_carlo(ens, sys.drift, constant_b(Matrix::Constant(1, 1, b)), 0.0, T);
    EXPECT_NEAR(est.value, a * a * T / (4 * b), 1e-12);
    EXPECT_EQ(est.m, 200u);
    EXPECT_EQ(est.rule, "trapezoid");
}

TEST(EfMonteCarlo, OrnsteinUhlenbeckAgainstVarianceQuadrature) {
    // a^u = a x: E int (a x)^2 / (4b) dt = a^2/(4b) int E[x^2] dt
    const double a = -1.0, sigma = 0.5, b = 0.5 * sigma * sigma, T = 1.0, var0 = 1.0;
    auto sys = SdeSystem::linear(Matrix::Constant(1, 1, a), Matrix::Constant(1, 1, sigma), Vector::Zero(1),
                                 Matrix::Constant(1, 1, var0), 0.0, T);
    const auto ens = simulate_ensemble(sys, TimeGrid::make(0.0, T, 1e-3), ControlSchedule::off(1), 4000, 17);
    const auto est = ef_monte_carlo(ens, sys.drift, constant_b(Matrix::Constant(1, 1, b)), 0.0, T);
    auto second = [&](double t) {
        return var0 * std::exp(2 * a * t) + sigma * sigma * (std::exp(2 * a * t) - 1) / (2 * a);
    };
    const double ref = a * a / (4 * b) * oracle::simpson(second, 0.0, T);
    EXPECT_NEAR(est.value, ref, 3 * est.std_error + 0.01 * ref);
    EXPECT_GT(est.value, 0.0);
}

TEST(EfMonteCarlo, WindowMustBeOnGrid) {
    auto sys = SdeSystem::linear(Matrix::Constant(1, 1, -1.0), Matrix::Constant(1, 1, 1.0), Vector::Zero(1),
                                 Matrix::Constant(1, 1, 1.0), 0.0, 1.0);
    const auto ens = simulate_ensemble(sys, TimeGrid::make(0.0, 1.0, 0.1), ControlSchedule::off(1), 5, 1);
    EXPECT_THROW(ef_monte_carlo(ens, sys.drift, constant_b(Matrix::Constant(1, 1, 0.5)), 0.5, 0.2), RangeError);
    EXPECT_THROW(ef_monte_carlo(ens, sys.drift, constant_b(Matrix::Constant(1, 1, 0.5)), 0.05, 0.5), RangeError);
}

TEST(EfMonteCarlo, AdditiveOverAnUncutSplit) {
    auto sys = SdeSystem::linear(Matrix::Constant(1, 1, -0.8), Matrix::Constant(1, 1, 0.6), Vector::Zero(1),
                                 Matrix::Constant(1, 1, 1.0), 0.0, 1.0);
    const auto ens = simulate_ensemble(sys, TimeGrid::make(0.0, 1.0, 0.01), ControlSchedule::off(1), 500, 8);
    const auto b = constant_b(Matrix::Constant(1, 1, 0.18));
    const auto whole = ef_monte_carlo(ens, sys.drift, b, 0.0, 1.0);
    const auto p1 = ef_monte_carlo(ens, sys.drift, b, 0.0, 0.4);
    const auto p2 = ef_monte_carlo(ens, sys.drift, b, 0.4, 1.0);
    EXPECT_NEAR(additivity_gap(whole.value, {p1.value, p2.value}), 0.0, 1e-10);
    // accounting with k cuts: whole = parts + k * 0.5 Nat
    EXPECT_NEAR(additivity_gap(whole.value + impulse_cutoff_info(1).nats, {p1.value, p2.value}), 0.5, 1e-10);
}

TEST(EfOnExtremal, ConstantDrift) {
    SampledPath path;
    for (int k = 0; k <= 10; ++k) {
        path.t.push_back(0.1 * k);
        path.x.push_back(Vector::Constant(1, 0.1 * k));
    }
    const auto v = ef_on_extremal(
        path, [](double, const Vector&) { return Vector::Constant(1, 2.0); },
        [](double, const Vector&) { return Matrix::Constant(1, 1, 1.0); });
    EXPECT_NEAR(v, 1.0, 1e-12);
}

TEST(ImpulseCutoff, Constants) {
    EXPECT_EQ(ImpulseInfoConstants::s_impulse, 2 * ImpulseInfoConstants::s_step);
    const auto c = impulse_cutoff_info(3);
    EXPECT_DOUBLE_EQ(c.nats, 1.5);
    EXPECT_NEAR(c.bits, 1.5 / std::log(2.0), 1e-12);
    EXPECT_NEAR(impulse_cutoff_info(1).bits, 0.7213, 1e-4);
    EXPECT_NEAR(c.reported_bits, 3 * 0.772, 1e-12);
    EXPECT_EQ(impulse_cutoff_info(0).nats, 0.0);
}

TEST(GaussianInfo, IdentityIsZeroAndScalingIsLog) {
    EXPECT_EQ(gaussian_state_info(Matrix::Identity(3, 3)), 0.0);
    EXPECT_NEAR(gaussian_state_info(2.0 * Matrix::Identity(2, 2)), std::log(2.0), 1e-14);
    EXPECT_THROW(gaussian_state_info(-Matrix::Identity(2, 2)), DomainError);
}

TEST(Ipf, ClosedFormMatchesQuadrature) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix c = oracle::random_spd(rng, 3);
        // r(t) = I + t C commute for all t: IPF = 1/8 int Tr(r^{-1} r') dt
        auto integrand = [&](double t) {
            const Matrix r = Matrix::Identity(3, 3) + t * c;
            return 0.125 * r.inverse().cwiseProduct(c.transpose()).sum();
        };
        const double quad = oracle::simpson(integrand, 0.0, 1.0, 4000);
        const double closed = ipf_total(Matrix::Identity(3, 3), Matrix::Identity(3, 3) + c);
        EXPECT_NEAR(closed, quad, 1e-8 * std::abs(closed));
    }
    EXPECT_NEAR(ipf_component_closed_form(1.0, std::exp(8.0)), 1.0, 1e-14);
    EXPECT_THROW(ipf_component_closed_form(0.0, 1.0), DomainError);
}

TEST(GaussianKl, NonNegativeAndZeroOnDiagonal) {
    std::mt19937_64 rng(99);
    for (int k = 0; k < 200; ++k) {
        const Matrix a = oracle::random_spd(rng, 3, 0.05);
        const Matrix b = oracle::random_spd(rng, 3, 0.05);
        EXPECT_GE(gaussian_kl(a, b), -1e-12);
        EXPECT_NEAR(gaussian_kl(a, a), 0.0, 1e-10);
    }
}
