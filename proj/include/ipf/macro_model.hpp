#pragma once

// Information dynamic model x' = A (x + v) on extremal segments: control
// synthesis, identification, segment propagation, switching-moment
// detection, sign flips, dynamic-constraint residuals and planar phase
// portraits.

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ipf/entropy_functional.hpp"
#include "ipf/errors.hpp"
#include "ipf/linalg.hpp"
#include "ipf/roots.hpp"

namespace ipf {

/// lambda = alpha +/- j beta
struct EigenPair {
    double alpha = 0.0;
    double beta = 0.0;

    Complex value() const { return {alpha, beta}; }
    bool has_gamma() const { return alpha != 0.0; }
    double gamma() const { return beta / alpha; }
};

inline std::vector<EigenPair> eigen_pairs(const Matrix& a) {
    std::vector<EigenPair> out;
    for (const auto& l : linalg::eigenvalues(a)) out.push_back({l.real(), l.imag()});
    return out;
}

enum class SignMode { OpenLoop, ClosedLoop };

struct MacroModel {
    enum class Mode { ConstraintOn, ConstraintOff };
    Matrix A;
    Vector x;
    Vector v;
    double segment_start = 0.0;
    Mode mode = Mode::ConstraintOn;
};

/// v(tau) = -2 x(tau)
inline Vector synthesize_control(const Vector& x_at_tau) { return -2.0 * x_at_tau; }

struct StartingControl {
    Vector x;
    Vector v;
    Vector u;
    Matrix A;
};

/// Starting state, controls and operator from the initial moments r(s), b(s).
/// The state is taken as the magnitudes of the diagonal of the symmetric square root of r(s).
inline StartingControl starting_control(const Matrix& r_s, const Matrix& b_s) {
    if (r_s.rows() != r_s.cols() || b_s.rows() != r_s.rows() || b_s.cols() != r_s.cols())
        throw ConfigError("starting_control: r and b must be square and of equal size");
    Eigen::LLT<Matrix> llt(linalg::symmetrize(r_s));
    if (!linalg::is_symmetric(r_s, 1e-9) || llt.info() != Eigen::Success)
        throw IdentificationError("starting_control: r(s) must be symmetric positive definite");
    StartingControl sc;
    sc.x = linalg::sqrt_psd(r_s).diagonal().cwiseAbs();
    sc.v = synthesize_control(sc.x);
    sc.A = b_s * llt.solve(Matrix::Identity(r_s.rows(), r_s.cols()));
    sc.u = sc.A * sc.v;
    return sc;
}

/// A = +b r^{-1} (open loop) or -b r^{-1} (closed loop).
inline Matrix identify_A(const Matrix& b_tau, const Matrix& r_tau, SignMode mode) {
    if (r_tau.rows() != r_tau.cols() || b_tau.rows() != r_tau.rows() || b_tau.cols() != r_tau.cols())
        throw ConfigError("identify_A: b and r must be square and of equal size");
    const double cond = linalg::condition_number(r_tau);
    if (!(cond <= 1e10)) {
        std::ostringstream os;
        os << "identify_A: ill-conditioned covariance (condition number " << cond << ")";
        throw IdentificationError(os.str());
    }
    const Matrix a = b_tau * r_tau.partialPivLu().inverse();
    return mode == SignMode::OpenLoop ? a : Matrix(-a);
}

/// x(t) = (2 I - exp(A t)) x_start
inline Vector propagate_segment(const Matrix& a_start, const Vector& x_start, double t) {
    if (t < 0.0) throw ConfigError("propagate_segment: duration must be >= 0");
    const auto n = a_start.rows();
    return (2.0 * Matrix::Identity(n, n) - linalg::expm(a_start * t)) * x_start;
}

/// lambda e^{lambda tau} (2 - e^{lambda tau})^{-1}
inline Complex eigenvalue_map(Complex lambda, double tau) {
    const Complex e = std::exp(lambda * tau);
    const Complex den = 2.0 - e;
    if (std::abs(den) < 1e-12) {
        std::ostringstream os;
        os << "eigenvalue_map: pole at lambda = " << lambda << ", tau = " << tau;
        throw PoleError(os.str());
    }
    return lambda * e / den;
}

struct SegmentEnd {
    Matrix A_end;   ///< A e^{A t} (2 - e^{A t})^{-1}
    Matrix Av_end;  ///< -A_end
};

inline SegmentEnd matrix_end_of_segment(const Matrix& a_start, double tau1) {
    const auto n = a_start.rows();
    const Matrix e = linalg::expm(a_start * tau1);
    const Matrix factor = 2.0 * Matrix::Identity(n, n) - e;
    Eigen::FullPivLU<Matrix> lu(factor);
    const double scale = std::max(1.0, factor.cwiseAbs().maxCoeff());
    lu.setThreshold(1e-12 / scale);
    if (!lu.isInvertible() || linalg::condition_number(factor) > 1e14) {
        std::ostringstream os;
        os << "matrix_end_of_segment: 2I - exp(A t) is singular at t = " << tau1;
        throw PoleError(os.str());
    }
    SegmentEnd out;
    out.A_end = a_start * e * lu.inverse();
    out.Av_end = -out.A_end;
    return out;
}

struct SwitchSearch {
    double t_max = 5.0;
    std::size_t steps = 10000;
    int i = 0;
    int j = 1;
};

/// Normalized cross-ratio residual sin(angle(x', x)) on the component pair (i, j):
/// zero exactly when x_i'/x_i = x_j'/x_j.
inline double switch_ratio_residual(const MacroModel& model, double t, int i, int j) {
    const auto n = model.A.rows();
    const Matrix e = linalg::expm(model.A * t);
    const Vector y = e * (model.x + model.v);
    const Vector x = y - model.v;
    const Vector xd = model.A * y;
    const double num = xd(i) * x(j) - xd(j) * x(i);
    const double den = std::hypot(xd(i), xd(j)) * std::hypot(x(i), x(j));
    (void)n;
    if (den == 0.0) return 0.0;
    return num / den;
}

/// Smallest t in (0, t_max] where x_i'/x_i = x_j'/x_j along the controlled segment.
inline double detect_switch_ratio(const MacroModel& model, const SwitchSearch& search = {}) {
    const auto n = model.A.rows();
    if (n < 2) throw UnsupportedDimensionError("detect_switch_ratio: the ratio condition needs n >= 2");
    if (model.mode != MacroModel::Mode::ConstraintOn)
        throw ConfigError("detect_switch_ratio: model must be in constraint_on mode");
    if (search.i == search.j || search.i < 0 || search.j < 0 || search.i >= n || search.j >= n)
        throw ConfigError("detect_switch_ratio: invalid component pair");
    if (!(search.t_max > 0.0)) throw ConfigError("detect_switch_ratio: search window must be positive");
    auto f = [&](double t) { return switch_ratio_residual(model, t, search.i, search.j); };
    const double t_min = search.t_max / static_cast<double>(search.steps) * 1e-3;
    if (std::abs(f(t_min)) < 1e-10) throw NoRootError("detect_switch_ratio: cross ratio vanishes identically");
    return roots::first_root(f, t_min, search.t_max, search.steps, "detect_switch_ratio").x;
}

/// Sign-exact residual for Im(eigenvalue_map(lambda, tau)), normalized to sin of an angle.
inline double imag_switch_residual(Complex lambda, double tau) {
    const Complex e = std::exp(lambda * tau);
    const Complex w = lambda * e * std::conj(2.0 - e);
    const double den = std::abs(w);
    return den == 0.0 ? 0.0 : w.imag() / den;
}

/// Smallest tau in (0, t_max] with Im lambda(tau) = 0.
inline double detect_switch_imag(Complex lambda_start, const SwitchSearch& search = {}) {
    if (lambda_start.imag() == 0.0) throw ConfigError("detect_switch_imag: starting eigenvalue must have beta != 0");
    if (!(search.t_max > 0.0)) throw ConfigError("detect_switch_imag: search window must be positive");
    auto f = [&](double t) { return imag_switch_residual(lambda_start, t); };
    const double t_min = search.t_max / static_cast<double>(search.steps) * 1e-3;
    return roots::first_root(f, t_min, search.t_max, search.steps, "detect_switch_imag").x;
}

/// Entries (row, col) whose sign the control jump changes.
struct FlipSpec {
    std::vector<std::pair<int, int>> entries;

    static FlipSpec full(int n) {
        FlipSpec s;
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) s.entries.emplace_back(r, c);
        return s;
    }
    static FlipSpec column(int n, int col) {
        FlipSpec s;
        for (int r = 0; r < n; ++r) s.entries.emplace_back(r, col);
        return s;
    }
};

struct FlipResult {
    Matrix A;
    std::vector<Complex> eigenvalues;
};

inline FlipResult apply_sign_flip(const Matrix& a, const FlipSpec& flip) {
    FlipResult out{a, {}};
    for (const auto& [r, c] : flip.entries) {
        if (r < 0 || c < 0 || r >= a.rows() || c >= a.cols()) throw ConfigError("apply_sign_flip: entry out of range");
        out.A(r, c) = -a(r, c);
    }
    out.eigenvalues = linalg::eigenvalues(out.A);
    return out;
}

/// Point residual of the dynamic constraint, (2b)^{-1} A + 2 X X^T with X = (2b)^{-1} A (x + v).
inline Matrix constraint_residual(const Matrix& a, const Vector& x, const Vector& v, const Matrix& b) {
    const Matrix two_b = 2.0 * b;
    const double cond = linalg::condition_number(two_b);
    if (!(cond <= 1e12)) throw DegenerateDiffusionError("constraint_residual");
    const auto lu = two_b.partialPivLu();
    const Vector X = lu.solve(a * (x + v));
    return lu.solve(a) + 2.0 * X * X.transpose();
}

/// H = 1/2 (a^u)^T (2b)^{-1} a^u
inline double hamiltonian_on_extremal(const Vector& a_u, const Matrix& b) {
    return ef_integrand(a_u, b, "hamiltonian_on_extremal");
}

struct AttractionResult {
    bool attracts = false;
    double integral = 0.0;               ///< finest estimate of int R(x) dx
    std::vector<double> refinements;     ///< estimates on successively halved panels
    bool drift_vanishes = false;         ///< a^u = 0 on every sample: no dynamics is created
};

/// Scalar boundary-point attraction test: R(x) = exp(-int_{x0}^{x} a/b dy),
/// the point attracts when int_{x0}^{x_tau} R dx stays bounded under refinement.
inline AttractionResult boundary_attracts(const std::function<double(double)>& a_u,
                                          const std::function<double(double)>& b, double x0, double x_tau,
                                          int levels = 14) {
    if (x0 == x_tau) throw ConfigError("boundary_attracts: empty interval");
    for (double end : {x0, x_tau}) {
        const double be = b(end);
        if (!(be > 0.0)) {
            std::ostringstream os;
            os << "boundary_attracts endpoint x = " << end;
            throw DegenerateDiffusionError(os.str());
        }
    }
    AttractionResult out;
    out.drift_vanishes = true;
    for (int level = 0; level < levels; ++level) {
        const std::size_t panels = std::size_t{16} << level;
        const double d = (x_tau - x0) / static_cast<double>(panels);
        double inner = 0.0;
        double outer = 0.0;
        for (std::size_t i = 0; i < panels; ++i) {
            const double y = x0 + (static_cast<double>(i) + 0.5) * d;
            const double by = b(y);
            if (!(by > 0.0)) {
                std::ostringstream os;
                os << "boundary_attracts interior x = " << y;
                throw DegenerateDiffusionError(os.str());
            }
            const double ay = a_u(y);
            if (ay != 0.0) out.drift_vanishes = false;
            const double g = ay / by;
            outer += std::exp(-(inner + 0.5 * g * d)) * d;
            inner += g * d;
        }
        out.refinements.push_back(std::abs(outer));
    }
    out.integral = out.refinements.back();
    const auto& r = out.refinements;
    bool diverges = !std::isfinite(out.integral);
    if (!diverges && r.size() >= 4) {
        const std::size_t k = r.size() - 1;
        diverges = r[k] > 10.0 * r[k - 1] && r[k - 1] > 10.0 * r[k - 2] && r[k - 2] > 10.0 * r[k - 3];
    }
    out.attracts = !diverges;
    return out;
}

struct PhasePortrait {
    enum class Conic { HyperbolaPair, AsymptoteLines, NonHyperbolic };
    enum class SingularPoint { Knot, Saddle, Focus, Center, Degenerate };

    // second-order curve a11 x1^2 + 2 a12 x1 x2 + a22 x2^2 + 2 a13 x1 + 2 a23 x2 + a33 = 0
    double a11 = 0, a12 = 0, a22 = 0, a13 = 0, a23 = 0, a33 = 0;
    double I2 = 0.0;
    double I3 = 0.0;
    double ctg_2theta = 0.0;  ///< infinite when a12 = 0
    double theta = 0.0;       ///< rotation to the canonical axes, chosen so a11'' > 0
    double a11_canonical = 0.0;
    double a22_canonical = 0.0;
    Eigen::Vector2d center = Eigen::Vector2d::Zero();
    std::optional<Eigen::Vector2d> semi_axes;
    Conic conic = Conic::NonHyperbolic;
    int real_axis = 0;  ///< 1 or 2 for a hyperbola, 0 otherwise
    SingularPoint singular_point = SingularPoint::Degenerate;
};

inline PhasePortrait::SingularPoint classify_singular_point(const Matrix& a) {
    const auto ev = linalg::eigenvalues(a);
    const double tol = 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff());
    if (std::abs(ev[0].imag()) > tol)
        return std::abs(ev[0].real()) <= tol ? PhasePortrait::SingularPoint::Center : PhasePortrait::SingularPoint::Focus;
    if (std::abs(ev[0].real()) <= tol || std::abs(ev[1].real()) <= tol) return PhasePortrait::SingularPoint::Degenerate;
    return (ev[0].real() > 0) == (ev[1].real() > 0) ? PhasePortrait::SingularPoint::Knot
                                                      : PhasePortrait::SingularPoint::Saddle;
}

/// Conic of the cross-ratio relation a11(x1+v1)x2 + a12(x2+v2)x2 = a21(x1+v1)x1 + a22(x2+v2)x1
/// and its orthogonal invariants.
inline PhasePortrait phase_portrait(const Matrix& a, const Vector& v) {
    if (a.rows() != 2 || a.cols() != 2 || v.size() != 2)
        throw UnsupportedDimensionError("phase_portrait: only planar (n = 2) systems are supported");
    PhasePortrait p;
    p.a11 = a(1, 0);
    p.a12 = 0.5 * (a(1, 1) - a(0, 0));
    p.a22 = -a(0, 1);
    p.a13 = 0.5 * (a(1, 0) * v(0) + a(1, 1) * v(1));
    p.a23 = -0.5 * (a(0, 0) * v(0) + a(0, 1) * v(1));
    p.a33 = 0.0;
    p.I2 = p.a11 * p.a22 - p.a12 * p.a12;
    Eigen::Matrix3d m;
    m << p.a11, p.a12, p.a13, p.a12, p.a22, p.a23, p.a13, p.a23, p.a33;
    // cofactor expansion keeps integer-valued inputs exact
    p.I3 = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    p.ctg_2theta = p.a12 == 0.0 ? std::numeric_limits<double>::infinity() : (p.a11 - p.a22) / (2.0 * p.a12);

    double two_theta = std::atan2(2.0 * p.a12, p.a11 - p.a22);
    const double mean = 0.5 * (p.a11 + p.a22);
    auto canon = [&](double tt) {
        const double c = p.a12 * std::sin(tt) + 0.5 * (p.a11 - p.a22) * std::cos(tt);
        return std::pair{mean + c, mean - c};
    };
    auto [c11, c22] = canon(two_theta);
    if (c11 < 0.0) {
        two_theta += std::numbers::pi;
        std::tie(c11, c22) = canon(two_theta);
    }
    p.theta = 0.5 * two_theta;
    p.a11_canonical = c11;
    p.a22_canonical = c22;

    Eigen::Matrix2d q;
    q << p.a11, p.a12, p.a12, p.a22;
    if (p.I2 != 0.0) p.center = q.inverse() * Eigen::Vector2d(-p.a13, -p.a23);

    const double scale = std::max({1.0, std::abs(p.a13), std::abs(p.a23)});
    if (p.I2 < 0.0) {
        if (std::abs(p.I3) <= 1e-12 * scale * scale) {
            p.conic = PhasePortrait::Conic::AsymptoteLines;
        } else {
            p.conic = PhasePortrait::Conic::HyperbolaPair;
            p.real_axis = p.I3 < 0.0 ? 1 : 2;
            const double k = p.I3 / p.I2;
            p.semi_axes = Eigen::Vector2d(std::sqrt(std::abs(k / c11)), std::sqrt(std::abs(k / c22)));
        }
    }
    p.singular_point = classify_singular_point(a);
    return p;
}

/// x'(tau+0) - x'(tau-0) = -(A_after + A_before) x(tau) + 2 A_before x0 for v = -2 x0 before the jump.
inline Vector phase_speed_jump(const Matrix& a_after, const Matrix& a_before, const Vector& x_tau, const Vector& x0) {
    if (a_after.rows() != a_before.rows() || x_tau.size() != a_before.rows() || x0.size() != a_before.rows())
        throw ConfigError("phase_speed_jump: dimension mismatch");
    return -(a_after + a_before) * x_tau + 2.0 * a_before * x0;
}

/// K with jump = K x0, for x(tau) = (2 - e^{A_before tau}) x0.
inline Matrix phase_speed_jump_gain(const Matrix& a_after, const Matrix& a_before, double tau) {
    const auto n = a_before.rows();
    const Matrix s = a_after + a_before;
    return -s * (2.0 * Matrix::Identity(n, n) - linalg::expm(a_before * tau)) + 2.0 * a_before;
}

}  // namespace ipf
