#pragma once

// The dual control/identification loop: each extremal segment is predicted by
// the macro model, closed at its switching moment, re-identified at the
// discrete point and restarted by an impulse control.

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ipf/entropy_functional.hpp"
#include "ipf/errors.hpp"
#include "ipf/info_network.hpp"
#include "ipf/invariants.hpp"
#include "ipf/linalg.hpp"
#include "ipf/macro_model.hpp"
#include "ipf/sde_engine.hpp"

namespace ipf {

struct ControlEvent {
    enum class Kind { StepOn, StepOff, Impulse };
    Kind kind = Kind::StepOn;
    double t = 0.0;
    Vector v;  ///< control applied after the event (zero after a step-off)
};

inline const char* to_string(ControlEvent::Kind k) {
    switch (k) {
        case ControlEvent::Kind::StepOn: return "step_on";
        case ControlEvent::Kind::StepOff: return "step_off";
        case ControlEvent::Kind::Impulse: return "impulse";
    }
    return "?";
}

struct ResidualSample {
    double t = 0.0;     ///< time since segment start
    double norm = 0.0;  ///< Frobenius norm, NaN where b is singular
};

struct SegmentRecord {
    std::size_t index = 0;
    double tau_start = 0.0;   ///< absolute segment start
    double tau_switch = 0.0;  ///< absolute switching moment
    double tau_dp = 0.0;      ///< absolute discrete point
    double duration = 0.0;    ///< tau_switch - tau_start
    bool terminal = false;    ///< last segment that reaches the target, no switch
    std::string detector;

    Matrix A_start;
    Matrix A_end;
    Matrix Av_end;
    std::optional<Matrix> A_next;  ///< identified at the discrete point
    std::optional<Matrix> delta_A;
    std::vector<Complex> eig_start;
    std::vector<Complex> eig_end;

    Vector x_start;
    Vector v;
    Vector x_switch;
    std::optional<Vector> phase_jump;
    std::vector<ControlEvent> events;

    std::vector<InvariantSet> invariants;  ///< one per starting eigenvalue
    std::size_t primary = 0;
    Nats info_contribution = 0.0;
    std::optional<EfEstimate> ef;
    std::optional<Nats> ipf;
    std::vector<ResidualSample> residual_trace;
};

struct DualStrategyConfig {
    enum class Detector { Auto, Ratio, Imag };

    std::optional<Matrix> A0;
    std::optional<Vector> x0;
    Detector detector = Detector::Auto;
    std::size_t segment_budget = 2;
    double search_window = 5.0;
    std::size_t scan_steps = 10000;
    int pair_i = 0;
    int pair_j = 1;
    double equalized_tol = 1e-2;
    std::size_t residual_samples = 11;

    // ensemble identification; paths < 2 selects model-moment identification
    std::size_t paths = 0;
    double h = 1e-3;
    std::uint64_t seed = 0;
    unsigned workers = 1;
    SignMode sign_mode = SignMode::OpenLoop;
    bool keep_ensembles = false;
};

struct DualStrategyResult {
    std::vector<SegmentRecord> segments;
    std::size_t impulses = 0;
    CutoffInfo cutoff;
    double total_time = 0.0;
    std::vector<TrajectoryEnsemble> ensembles;  ///< per segment, when kept
    std::string stop_reason;

    std::vector<SpectrumEntry> spectrum() const {
        std::vector<SpectrumEntry> out;
        for (const auto& s : segments) {
            const auto& inv = s.invariants[s.primary];
            out.push_back({s.index, s.eig_start[s.primary].real(), s.duration, inv.a_o, s.info_contribution, inv.a});
        }
        return out;
    }
};

namespace detail {

inline bool eigenvalues_equalized(const std::vector<Complex>& ev, double tol) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& l : ev) {
        if (l.imag() != 0.0) return false;
        lo = std::min(lo, l.real());
        hi = std::max(hi, l.real());
    }
    const double scale = std::max(std::abs(lo), std::abs(hi));
    return scale > 0.0 && (hi - lo) <= tol * scale;
}

/// Eigenvalue with the smallest nonzero |alpha|.
inline std::size_t primary_index(const std::vector<Complex>& ev) {
    std::size_t best = 0;
    double best_abs = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ev.size(); ++i) {
        const double a = std::abs(ev[i].real());
        if (a > 0.0 && a < best_abs) {
            best_abs = a;
            best = i;
        }
    }
    return best;
}

inline std::vector<ResidualSample> residual_trace(const Matrix& a, const Vector& x0, const Vector& v, double t_end,
                                                  std::size_t samples) {
    std::vector<ResidualSample> out;
    if (samples < 2) return out;
    for (std::size_t s = 0; s < samples; ++s) {
        const double t = t_end * static_cast<double>(s) / static_cast<double>(samples - 1);
        const Matrix e = linalg::expm(a * t);
        // model moments of y = x + v with r(0) = I: b = 1/2 d/dt (E E^T)
        const Matrix b = linalg::symmetrize(a * e * e.transpose());
        const Vector x = propagate_segment(a, x0, t);
        double norm = std::numeric_limits<double>::quiet_NaN();
        try {
            norm = constraint_residual(a, x, v, b).norm();
        } catch (const DegenerateDiffusionError&) {
        }
        out.push_back({t, norm});
    }
    return out;
}

/// Largest |mean| / standard error over the entries of the per-path drift
/// moment 1/2 (d/dt (x x^T) - sigma sigma^T), central difference over nodes 0 and 2.
/// Below a few units the drift cannot be told apart from sampling noise.
inline double drift_signal_to_noise(const TrajectoryEnsemble& probe, const Matrix& ss) {
    const int n = probe.dimension();
    const std::size_t m = probe.paths();
    const double dt = probe.time(2) - probe.time(0);
    const auto [mu0, c0] = mean_cov_at(probe, 0);
    const auto [mu2, c2] = mean_cov_at(probe, 2);
    Matrix sum = Matrix::Zero(n, n), sq = Matrix::Zero(n, n);
    for (std::size_t p = 0; p < m; ++p) {
        const Vector d0 = probe.state(p, 0) - mu0;
        const Vector d2 = probe.state(p, 2) - mu2;
        const Matrix q = 0.5 * ((d2 * d2.transpose() - d0 * d0.transpose()) / dt - ss);
        sum += q;
        sq += q.cwiseProduct(q);
    }
    const double md = static_cast<double>(m);
    const Matrix mean = sum / md;
    const Matrix var = (sq / md - mean.cwiseProduct(mean)) * (md / (md - 1.0));
    double z = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double se = std::sqrt(std::max(var(i, j), 0.0) / md);
            if (se > 0.0)
                z = std::max(z, std::abs(mean(i, j)) / se);
            else if (mean(i, j) != 0.0)
                return std::numeric_limits<double>::infinity();
        }
    return z;
}

inline std::string seg_ctx(std::size_t k, const char* phase) {
    std::ostringstream os;
    os << "segment " << k << " (" << phase << ")";
    return os.str();
}

}  // namespace detail

/// Runs the loop on `system`. With config.paths >= 2 the system is simulated
/// and every operator is identified from ensemble moments; otherwise the
/// operator is propagated through the model moments (A_next = Av_end).
inline DualStrategyResult run_dual_strategy(const SdeSystem& system_in, const DualStrategyConfig& cfg) {
    if (cfg.segment_budget < 1) throw ConfigError("run_dual_strategy: segment budget must be >= 1");
    system_in.validate();
    const int n = system_in.n;
    const bool stochastic = cfg.paths >= 2;
    if (stochastic && !(cfg.h > 0.0)) throw ConfigError("run_dual_strategy: step h must be > 0");

    SdeSystem system = system_in;
    system.t_end = std::numeric_limits<double>::max();
    SimulationOptions opt;
    opt.workers = cfg.workers;

    DualStrategyResult res;
    double tau = system.t_start;
    Matrix A;
    Vector x;
    std::optional<Matrix> ens_states;
    std::uint64_t stream = 0;
    auto next_seed = [&] { return cfg.seed + 0x9e3779b97f4a7c15ULL * ++stream; };

    // starting operator and state
    if (cfg.A0) {
        A = *cfg.A0;
        if (A.rows() != n || A.cols() != n) throw ConfigError("run_dual_strategy: A0 has wrong shape");
    } else if (stochastic) {
        with_context(detail::seg_ctx(0, "starting identification"), [&] {
            const auto grid = TimeGrid::with_steps(tau, tau + 2.0 * cfg.h, 2);
            const auto probe = simulate_ensemble(system, grid, ControlSchedule::off(n), cfg.paths, next_seed(), opt);
            const auto mom = estimate_moments(probe, grid.at(1));
            const Matrix ss = system.sigma(grid.at(1)) * system.sigma(grid.at(1)).transpose();
            A = identify_A(0.5 * (mom.r_dot - ss), mom.r, cfg.sign_mode);
            if (detail::drift_signal_to_noise(probe, ss) < 4.0) A.setZero();
            ens_states = probe.final_states();
            tau = grid.t1;
        });
    } else {
        throw ConfigError("run_dual_strategy: A0 is required without an ensemble");
    }
    if (A.norm() < 1e-10)
        throw IdentificationError(detail::seg_ctx(0, "identification") +
                                  ": identified operator is zero or below the sampling noise; a^u(y) != 0 is necessary for the creation of the dynamics");
    if (cfg.x0) {
        x = *cfg.x0;
        if (x.size() != n) throw ConfigError("run_dual_strategy: x0 has wrong dimension");
    } else {
        x = starting_control(system.init_cov, linalg::symmetrize(A * system.init_cov)).x;
    }

    for (std::size_t k = 0; k < cfg.segment_budget; ++k) {
        SegmentRecord seg;
        seg.index = k;
        seg.tau_start = tau;
        seg.A_start = A;
        seg.x_start = x;
        seg.v = synthesize_control(x);
        seg.eig_start = linalg::eigenvalues(A);

        const bool equalized = n == 1 || detail::eigenvalues_equalized(seg.eig_start, cfg.equalized_tol);
        if (equalized) {
            const double lambda = seg.eig_start.front().real();
            if (!(lambda > 0.0)) {
                res.stop_reason = "equalized non-positive spectrum: no switch and no finite target time";
                break;
            }
            seg.terminal = true;
            seg.detector = "terminal";
            seg.duration = kLn2 / lambda;
        } else {
            bool use_imag = cfg.detector == DualStrategyConfig::Detector::Imag;
            if (cfg.detector == DualStrategyConfig::Detector::Auto)
                use_imag = std::any_of(seg.eig_start.begin(), seg.eig_start.end(),
                                       [](const Complex& l) { return l.imag() != 0.0; });
            SwitchSearch search{cfg.search_window, cfg.scan_steps, cfg.pair_i, cfg.pair_j};
            try {
                seg.duration = with_context(detail::seg_ctx(k, "switch detection"), [&] {
                    if (use_imag) {
                        auto it = std::max_element(seg.eig_start.begin(), seg.eig_start.end(),
                                                   [](const Complex& a, const Complex& b) {
                                                       return std::abs(a.imag()) < std::abs(b.imag());
                                                   });
                        return detect_switch_imag(*it, search);
                    }
                    return detect_switch_ratio(MacroModel{A, x, seg.v, tau}, search);
                });
                seg.detector = use_imag ? "imag" : "ratio";
            } catch (const NoRootError& e) {
                if (k == 0) throw;
                res.stop_reason = e.what();
                break;
            }
        }

        seg.tau_switch = tau + seg.duration;
        with_context(detail::seg_ctx(k, "segment end"), [&] {
            seg.x_switch = propagate_segment(A, x, seg.duration);
            if (seg.terminal) {
                // e^{lambda t} = 2: the state reaches the target and the end operator is at its pole
                const double nan = std::numeric_limits<double>::quiet_NaN();
                seg.A_end = Matrix::Constant(n, n, nan);
                seg.Av_end = seg.A_end;
                for (const auto& l : seg.eig_start) {
                    InvariantSet inv;
                    inv.gamma = l.imag() / l.real();
                    inv.a_o = inv.i3 = inv.a_degree = l.real() * seg.duration;
                    inv.b_o = l.imag() * seg.duration;
                    inv.a = inv.i2 = inv.i1 = inv.b_inv = nan;
                    inv.unstable = inv.a_o < 0.0;
                    seg.invariants.push_back(inv);
                }
                return;
            }
            const auto end = matrix_end_of_segment(A, seg.duration);
            seg.A_end = end.A_end;
            seg.Av_end = end.Av_end;
            seg.eig_end = linalg::eigenvalues(seg.A_end);
            for (const auto& l : seg.eig_start) seg.invariants.push_back(realized_invariants(l, seg.duration));
        });
        seg.primary = detail::primary_index(seg.eig_start);
        seg.info_contribution = std::abs(seg.invariants[seg.primary].a_o);
        seg.residual_trace = detail::residual_trace(A, x, seg.v, seg.duration, cfg.residual_samples);
        seg.events.push_back({ControlEvent::Kind::StepOn, tau, seg.v});

        const bool more = !seg.terminal && k + 1 < cfg.segment_budget;
        double tau_dp = seg.tau_switch;
        if (stochastic) {
            with_context(detail::seg_ctx(k, "ensemble"), [&] {
                const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(seg.duration / cfg.h)));
                const double hk = seg.duration / static_cast<double>(steps);
                const auto grid = TimeGrid::with_steps(tau, tau + hk * static_cast<double>(steps + 1), steps + 1);
                const double t_sw_abs = grid.at(steps);
                ControlSchedule sched(n);
                sched.add_feedback(tau, t_sw_abs, -2.0);
                opt.initial_states = ens_states;
                auto ens = simulate_ensemble(system, grid, sched, cfg.paths, next_seed(), opt);
                const double t_sw = grid.at(steps);
                const auto m0 = estimate_moments(ens, grid.t0);
                const auto m1 = estimate_moments(ens, t_sw);
                try {
                    seg.ipf = ipf_total(m0.r, m1.r);
                } catch (const DomainError&) {
                }
                try {
                    seg.ef = ef_monte_carlo(
                        ens, system.drift, [&](double t, const Vector&) { return diffusion_from_sigma(system.sigma(t)); },
                        grid.t0, t_sw);
                } catch (const DegenerateDiffusionError&) {
                }
                if (more) {
                    const Matrix ss = system.sigma(t_sw) * system.sigma(t_sw).transpose();
                    seg.A_next = with_context(detail::seg_ctx(k, "identification"), [&] {
                        return identify_A(0.5 * (m1.r_dot - ss), m1.r, cfg.sign_mode);
                    });
                }
                ens_states = ens.final_states();
                tau_dp = grid.t1;
                if (cfg.keep_ensembles) res.ensembles.push_back(std::move(ens));
            });
        } else {
            try {
                seg.ipf = ipf_total(Matrix::Identity(n, n), linalg::symmetrize(linalg::expm(A * seg.duration) *
                                                                                linalg::expm(A * seg.duration).transpose()));
            } catch (const DomainError&) {
            }
            if (more) seg.A_next = seg.Av_end;
        }
        seg.tau_dp = tau_dp;
        seg.events.push_back({ControlEvent::Kind::StepOff, seg.tau_switch, Vector::Zero(n)});

        if (seg.A_next) {
            if (seg.A_next->norm() < 1e-10)
                throw IdentificationError(detail::seg_ctx(k, "identification") +
                                          ": identified operator is zero; a^u(y) != 0 is necessary for the creation of the dynamics");
            seg.delta_A = *seg.A_next - A;
            seg.phase_jump = phase_speed_jump(*seg.A_next, A, seg.x_switch, x);
            seg.events.push_back({ControlEvent::Kind::Impulse, tau_dp, synthesize_control(seg.x_switch)});
            ++res.impulses;
        }
        res.total_time = seg.tau_switch - system_in.t_start;
        res.segments.push_back(seg);
        if (seg.terminal) {
            res.stop_reason = "target reached";
            break;
        }
        if (!seg.A_next) {
            res.stop_reason = "segment budget exhausted";
            break;
        }
        A = *seg.A_next;
        x = seg.x_switch;
        tau = tau_dp;
    }
    if (res.stop_reason.empty()) res.stop_reason = "segment budget exhausted";
    res.cutoff = impulse_cutoff_info(res.impulses);
    return res;
}

}  // namespace ipf
