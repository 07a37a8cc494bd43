#pragma once

// Information invariants of an extremal segment: the transcendental equation
// tying a_o to gamma = beta/alpha, the connected invariants i1, i2, i3, the
// imaginary-eigenvalue invariant and the gamma table.

#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ipf/errors.hpp"
#include "ipf/linalg.hpp"
#include "ipf/macro_model.hpp"
#include "ipf/roots.hpp"

namespace ipf {

struct InvariantSet {
    double gamma = 0.0;
    Nats a_o = 0.0;       ///< segment invariant alpha_o t
    Nats a = 0.0;         ///< control contribution alpha^1 t
    Nats a_degree = 0.0;  ///< a°, opposite of the real part right after the control jump
    Nats b_o = 0.0;
    Nats b_inv = 0.0;
    Nats i1 = 0.0;
    Nats i2 = 0.0;
    Nats i3 = 0.0;
    bool unstable = false;  ///< a_o < 0

    double a_o_bits() const { return nats_to_bits(a_o); }
    double a_bits() const { return nats_to_bits(a); }
};

inline constexpr double kGammaLimit = 1e-6;

/// 2 sin(g a) + g cos(g a) - g e^a, or its g -> 0 limit 2a + 1 - e^a.
inline double invariant_equation(double gamma, double a) {
    if (gamma < kGammaLimit) return 2.0 * a + 1.0 - std::exp(a);
    return 2.0 * std::sin(gamma * a) + gamma * std::cos(gamma * a) - gamma * std::exp(a);
}

struct InvariantRoot {
    Nats a_o = 0.0;
    double residual = 0.0;
    std::size_t roots_found = 0;
};

/// Smallest positive root a_o of the invariant equation for gamma >= 0.
inline InvariantRoot solve_a_o(double gamma, double a_max = 20.0, std::size_t steps = 20000) {
    if (!(gamma >= 0.0)) throw DomainError("solve_a_o: gamma must be >= 0");
    // a = 0 solves the equation for every gamma; scan f(a)/(g a) (or the limit form) away from it
    auto h = [gamma](double a) {
        if (gamma < kGammaLimit) return (2.0 * a + 1.0 - std::exp(a)) / a;
        return invariant_equation(gamma, a) / (gamma * a);
    };
    const double a_min = a_max / static_cast<double>(steps) * 1e-2;
    const auto all = roots::all_roots(h, a_min, a_max, steps);
    if (all.empty()) {
        std::ostringstream os;
        os << "solve_a_o: no root of the invariant equation for gamma = " << gamma << " in (" << a_min << ", "
           << a_max << "]";
        throw NoRootError(os.str());
    }
    return {all.front().x, invariant_equation(gamma, all.front().x), all.size()};
}

struct ConnectedInvariants {
    Nats i1 = 0.0;
    Nats i2 = 0.0;
};

/// i2 = i3 e^{i3} (2 - e^{i3})^{-1}, i1 = i2 / 2.
inline ConnectedInvariants invariant_connections(Nats i3) {
    const double den = 2.0 - std::exp(i3);
    if (std::abs(den) < 1e-12) {
        std::ostringstream os;
        os << "invariant_connections: pole at i3 = " << i3 << " (ln 2)";
        throw PoleError(os.str());
    }
    const double i2 = i3 * std::exp(i3) / den;
    return {0.5 * i2, i2};
}

/// | |a_o - a°| - 2 a |
inline double balance_check(Nats a_o, Nats a_degree, Nats a_ctrl) {
    return std::abs(std::abs(a_o - a_degree) - 2.0 * a_ctrl);
}

struct JointCandidate {
    Nats a_o = 0.0;
    Nats a = 0.0;
    double residual = 0.0;
    double distance_to_reference = 0.0;
};

struct JointSolution {
    Nats a_star = 0.0;  ///< standalone root of the invariant equation
    std::vector<JointCandidate> roots;
    JointCandidate chosen;
};

/// Control invariant of a stable segment with |i3| = a_o: a = |i2(-a_o)|.
inline Nats joint_control_invariant(Nats a_o) { return std::abs(invariant_connections(-a_o).i2); }

/// Couples the standalone root a* with the connection map and the balance
/// |a_o - a*| = 2a; reports every root and the one nearest (ref_a_o, ref_a).
inline JointSolution solve_a_o_joint(double gamma, double ref_a_o = 0.75, double ref_a = 0.25) {
    JointSolution out;
    out.a_star = solve_a_o(gamma).a_o;
    const double a_star = out.a_star;
    auto g = [a_star](double a_o) { return std::abs(a_o - a_star) - 2.0 * joint_control_invariant(a_o); };
    // the balance is not smooth at a_o = a*; scan each side separately
    const double hi = 4.0 * a_star + 4.0;
    for (auto [lo_end, hi_end] : {std::pair{1e-9, a_star}, std::pair{a_star, hi}}) {
        for (const auto& r : roots::all_roots(g, lo_end, hi_end, 20000)) {
            if (std::abs(r.x - a_star) < 1e-9) continue;
            JointCandidate c;
            c.a_o = r.x;
            c.a = joint_control_invariant(r.x);
            c.residual = r.residual;
            c.distance_to_reference = std::hypot(c.a_o - ref_a_o, c.a - ref_a);
            out.roots.push_back(c);
        }
    }
    if (out.roots.empty()) {
        std::ostringstream os;
        os << "solve_a_o_joint: no joint root for gamma = " << gamma;
        throw NoRootError(os.str());
    }
    out.chosen = out.roots.front();
    for (const auto& c : out.roots)
        if (c.distance_to_reference < out.chosen.distance_to_reference) out.chosen = c;
    return out;
}

struct ImaginaryInvariant {
    double beta_tau = std::numbers::pi / 3.0;  ///< root of 2 cos(theta) - 1 = 0
    double re_coeff = 0.0;                     ///< Re lambda(tau^1) / beta
    double printed_beta_tau = std::numbers::pi / 6.0;
    bool printed_value_disagrees = true;
};

/// For lambda = j beta: Im lambda(tau) vanishes at beta tau = pi/3, where Re lambda = -2 sin(theta)/(5 - 4 cos(theta)) beta.
inline ImaginaryInvariant imaginary_invariant() {
    ImaginaryInvariant out;
    const double th = out.beta_tau;
    out.re_coeff = -2.0 * std::sin(th) / (5.0 - 4.0 * std::cos(th));
    out.printed_value_disagrees = std::abs(out.printed_beta_tau - out.beta_tau) > 1e-6;
    return out;
}

/// Smallest positive root of 2 cos(g b) - g sin(g b) - e^b = 0.
inline InvariantRoot zero_real_invariant(double gamma, double b_max = 5.0, std::size_t steps = 20000) {
    if (!(gamma > 0.0)) throw DomainError("zero_real_invariant: gamma must be > 0");
    auto f = [gamma](double b) { return 2.0 * std::cos(gamma * b) - gamma * std::sin(gamma * b) - std::exp(b); };
    const auto r = roots::first_root(f, 0.0, b_max, steps, "zero_real_invariant");
    return {r.x, f(r.x), 1};
}

/// t = a_o / alpha
inline double segment_interval(double alpha_start, Nats a_o) {
    if (alpha_start == 0.0) throw DomainError("segment_interval: alpha must be nonzero");
    return a_o / alpha_start;
}

/// Invariants realized on a segment of length t started at eigenvalue lambda_start.
inline InvariantSet realized_invariants(Complex lambda_start, double t) {
    const Complex lambda_end = eigenvalue_map(lambda_start, t);
    InvariantSet s;
    s.gamma = lambda_start.real() != 0.0 ? lambda_start.imag() / lambda_start.real()
                                         : std::numeric_limits<double>::infinity();
    s.a_o = lambda_start.real() * t;
    s.a = lambda_end.real() * t;
    s.a_degree = s.a_o;
    s.b_o = lambda_start.imag() * t;
    s.b_inv = lambda_end.imag() * t;
    s.i3 = s.a_o;
    s.i2 = s.a;
    s.i1 = 0.5 * s.i2;
    s.unstable = s.a_o < 0.0;
    return s;
}

struct GammaRow {
    double gamma = 0.0;
    Nats a_o = std::numeric_limits<double>::quiet_NaN();
    Nats a = std::numeric_limits<double>::quiet_NaN();
    double residual = std::numeric_limits<double>::quiet_NaN();
    bool converged = false;
    Nats a_o_joint = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

struct GammaTable {
    std::vector<GammaRow> rows;
    bool all_converged() const {
        for (const auto& r : rows)
            if (!r.converged) return false;
        return true;
    }
};

/// rows equally spaced gamma values on [0, gamma_max]; a single row is gamma = 0.
inline GammaTable build_gamma_table(double gamma_max, std::size_t rows) {
    if (rows < 1) throw ConfigError("build_gamma_table: rows must be >= 1");
    if (!(gamma_max >= 0.0)) throw ConfigError("build_gamma_table: gamma_max must be >= 0");
    GammaTable table;
    for (std::size_t k = 0; k < rows; ++k) {
        GammaRow row;
        row.gamma = rows == 1 ? 0.0 : gamma_max * static_cast<double>(k) / static_cast<double>(rows - 1);
        try {
            const auto r = solve_a_o(row.gamma);
            row.a_o = r.a_o;
            row.residual = r.residual;
            row.converged = std::abs(r.residual) < 1e-10;
            const auto joint = solve_a_o_joint(row.gamma);
            row.a = joint.chosen.a;
            row.a_o_joint = joint.chosen.a_o;
        } catch (const NumericalError& e) {
            row.error = e.what();
        }
        table.rows.push_back(row);
    }
    return table;
}

}  // namespace ipf
