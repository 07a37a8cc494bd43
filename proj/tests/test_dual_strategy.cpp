#include <cmath>

#include <gtest/gtest.h>

#include "ipf/dual_strategy.hpp"

using namespace ipf;

namespace {

Matrix a3() {
    Matrix a(2, 2);
    a << 2, 3, 3, 10;
    return a;
}

SdeSystem deterministic(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    return SdeSystem::linear(a, Matrix::Zero(n, n), Vector::Zero(n), Matrix::Identity(n, n), 0.0, 1.0);
}

DualStrategyConfig example_config(const Matrix& a, std::size_t budget) {
    DualStrategyConfig c;
    c.A0 = a;
    c.x0 = Vector::Ones(2);
    c.segment_budget = budget;
    c.search_window = 2.0;
    return c;
}

}  // namespace

TEST(DualStrategy, ExampleSegments) {
    const auto r = run_dual_strategy(deterministic(a3()), example_config(a3(), 5));
    ASSERT_EQ(r.segments.size(), 2u);
    const auto& s0 = r.segments[0];
    EXPECT_NEAR(s0.duration, 0.7884, 5e-4);
    EXPECT_NEAR(s0.eig_end[0].real(), -11.0, 0.01);
    ASSERT_TRUE(s0.A_next.has_value());
    EXPECT_TRUE(s0.A_next->isApprox(s0.Av_end));
    EXPECT_NEAR((*s0.A_next)(0, 0), 11.0, 0.01);
    const auto& s1 = r.segments[1];
    EXPECT_TRUE(s1.terminal);
    EXPECT_NEAR(s1.duration, std::log(2.0) / (*s0.A_next)(0, 0), 1e-9);
    // second interval: x_i(t) = (2 - e^{11 t}) x_i(tau1) reaches zero at the end
    EXPECT_LT(s1.x_switch.norm(), 1e-9 * s1.x_start.norm());
    EXPECT_NEAR(r.total_time, 0.851, 0.005);
    EXPECT_EQ(r.impulses, 1u);
    EXPECT_EQ(r.stop_reason, "target reached");
}

TEST(DualStrategy, EventsAndSignDiscipline) {
    const auto r = run_dual_strategy(deterministic(a3()), example_config(a3(), 2));
    const auto& s0 = r.segments[0];
    ASSERT_EQ(s0.events.size(), 3u);
    EXPECT_EQ(s0.events[0].kind, ControlEvent::Kind::StepOn);
    EXPECT_EQ(s0.events[1].kind, ControlEvent::Kind::StepOff);
    EXPECT_EQ(s0.events[2].kind, ControlEvent::Kind::Impulse);
    EXPECT_TRUE(s0.v.isApprox(-2 * s0.x_start));
    EXPECT_TRUE(s0.Av_end.isApprox(-s0.A_end));
    EXPECT_EQ(s0.invariants.size(), 2u);
    for (const auto& inv : s0.invariants) EXPECT_EQ(inv.i1, 0.5 * inv.i2);
    EXPECT_TRUE(s0.delta_A->isApprox(*s0.A_next - s0.A_start));
    ASSERT_EQ(s0.residual_trace.size(), 11u);
}

TEST(DualStrategy, OneSegmentBudgetHasNoImpulse) {
    const auto r = run_dual_strategy(deterministic(a3()), example_config(a3(), 1));
    ASSERT_EQ(r.segments.size(), 1u);
    EXPECT_EQ(r.impulses, 0u);
    EXPECT_FALSE(r.segments[0].A_next.has_value());
    EXPECT_EQ(r.segments[0].events.size(), 2u);
    EXPECT_EQ(r.cutoff.nats, 0.0);
}

TEST(DualStrategy, NegativeCase) {
    const auto r = run_dual_strategy(deterministic(-a3()), example_config(-a3(), 3));
    ASSERT_EQ(r.segments.size(), 2u);
    EXPECT_NEAR(r.segments[0].duration, 0.193, 1e-3);
    EXPECT_NEAR(r.segments[0].eig_end[0].real(), -0.7, 0.01);
    EXPECT_NEAR(r.total_time, 1.187, 0.01);
}

TEST(DualStrategy, ZeroDriftIsAnIdentificationError) {
    EXPECT_THROW(run_dual_strategy(deterministic(Matrix::Zero(2, 2)), example_config(Matrix::Zero(2, 2), 2)),
                 IdentificationError);
    auto sys = SdeSystem::linear(Matrix::Zero(2, 2), 0.1 * Matrix::Identity(2, 2), Vector::Zero(2),
                                 Matrix::Identity(2, 2), 0.0, 1.0);
    DualStrategyConfig c;
    c.paths = 4000;
    c.seed = 3;
    c.h = 1e-3;
    try {
        run_dual_strategy(sys, c);
        FAIL();
    } catch (const IdentificationError& e) {
        EXPECT_NE(std::string(e.what()).find("segment 0"), std::string::npos);
    }
}

TEST(DualStrategy, Preconditions) {
    auto c = example_config(a3(), 0);
    EXPECT_THROW(run_dual_strategy(deterministic(a3()), c), ConfigError);
    DualStrategyConfig no_a;
    EXPECT_THROW(run_dual_strategy(deterministic(a3()), no_a), ConfigError);
}

TEST(DualStrategy, StochasticRunIsDeterministicAndIdentifies) {
    auto sys = SdeSystem::linear(-a3(), 0.1 * Matrix::Identity(2, 2), Vector::Zero(2), Matrix::Identity(2, 2), 0.0, 1.0);
    DualStrategyConfig c;
    c.paths = 1000;
    c.seed = 77;
    c.h = 1e-3;
    c.segment_budget = 2;
    c.search_window = 2.0;
    const auto r1 = run_dual_strategy(sys, c);
    c.workers = 3;
    const auto r3 = run_dual_strategy(sys, c);
    ASSERT_EQ(r1.segments.size(), r3.segments.size());
    ASSERT_GE(r1.segments.size(), 1u);
    EXPECT_EQ(r1.segments[0].A_start, r3.segments[0].A_start);
    EXPECT_EQ(r1.segments[0].duration, r3.segments[0].duration);
    // probe identification recovers the generating operator
    EXPECT_LT((r1.segments[0].A_start + a3()).norm() / a3().norm(), 0.05);
    ASSERT_TRUE(r1.segments[0].ef.has_value());
    EXPECT_GT(r1.segments[0].ef->value, 0.0);
    EXPECT_TRUE(r1.segments[0].ipf.has_value());
}
