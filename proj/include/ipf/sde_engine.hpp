#pragma once

// Euler–Maruyama simulation of controllable Ito diffusions
//
//     dx = a^u(t, x, v) dt + sigma(t) dW
//
// as trajectory ensembles, plus the moment estimates (covariance, its time
// derivative, diffusion rate) consumed by identification and the entropy
// functional.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ipf/errors.hpp"
#include "ipf/linalg.hpp"

namespace ipf {

using DriftFn = std::function<Vector(double t, const Vector& x, const Vector& v)>;
using SigmaFn = std::function<Matrix(double t)>;

/// b = 1/2 sigma sigma^T
inline Matrix diffusion_from_sigma(const Matrix& sigma) {
    if (sigma.rows() != sigma.cols()) throw ConfigError("diffusion_from_sigma: sigma must be square");
    return linalg::symmetrize(0.5 * sigma * sigma.transpose());
}

struct SdeSystem {
    int n = 0;
    DriftFn drift;
    SigmaFn sigma;
    Vector init_mean;
    Matrix init_cov;
    double t_start = 0.0;
    double t_end = 1.0;

    /// Linear drift a^u = A (x + v) with constant sigma.
    static SdeSystem linear(const Matrix& a, const Matrix& sigma, const Vector& init_mean, const Matrix& init_cov,
                            double t_start, double t_end) {
        SdeSystem s;
        s.n = static_cast<int>(a.rows());
        s.drift = [a](double, const Vector& x, const Vector& v) -> Vector { return a * (x + v); };
        s.sigma = [sigma](double) -> Matrix { return sigma; };
        s.init_mean = init_mean;
        s.init_cov = init_cov;
        s.t_start = t_start;
        s.t_end = t_end;
        return s;
    }

    void validate() const {
        if (n < 1) throw ConfigError("SdeSystem: dimension must be >= 1");
        if (!drift || !sigma) throw ConfigError("SdeSystem: drift and sigma evaluators are required");
        if (init_mean.size() != n) throw ConfigError("SdeSystem: init_mean has wrong dimension");
        if (init_cov.rows() != n || init_cov.cols() != n) throw ConfigError("SdeSystem: init_cov has wrong shape");
        if (!linalg::is_symmetric(init_cov, 1e-12)) throw ConfigError("SdeSystem: init_cov is not symmetric");
        const Vector ev = linalg::sym_eigenvalues(init_cov);
        const double scale = std::max(1.0, init_cov.cwiseAbs().maxCoeff());
        if (ev.size() > 0 && ev(0) < -1e-12 * scale) throw ConfigError("SdeSystem: init_cov is not positive semidefinite");
        if (!(t_end > t_start)) throw ConfigError("SdeSystem: t_span must satisfy s < T");
    }
};

/// Uniform time grid. The step is adjusted so that t1 is hit exactly.
struct TimeGrid {
    double t0 = 0.0;
    double t1 = 0.0;
    double h = 0.0;
    std::size_t nodes = 0;

    static TimeGrid make(double t0, double t1, double h_target) {
        if (!(h_target > 0.0) || !std::isfinite(h_target)) throw ConfigError("TimeGrid: step h must be > 0");
        if (!(t1 > t0)) throw ConfigError("TimeGrid: t1 must exceed t0");
        const auto steps = std::max<long long>(1, std::llround((t1 - t0) / h_target));
        return TimeGrid{t0, t1, (t1 - t0) / static_cast<double>(steps), static_cast<std::size_t>(steps) + 1};
    }

    static TimeGrid with_steps(double t0, double t1, std::size_t steps) {
        if (steps < 1) throw ConfigError("TimeGrid: at least one step required");
        if (!(t1 > t0)) throw ConfigError("TimeGrid: t1 must exceed t0");
        return TimeGrid{t0, t1, (t1 - t0) / static_cast<double>(steps), steps + 1};
    }

    double at(std::size_t k) const { return k + 1 == nodes ? t1 : t0 + h * static_cast<double>(k); }
};

/// Piecewise control v(t). A segment either holds a fixed vector or holds
/// gain * x(t_begin), captured per path when the segment starts.
struct ControlSegment {
    enum class Kind { Fixed, HoldFeedback };
    double t_begin = 0.0;
    double t_end = 0.0;
    Kind kind = Kind::Fixed;
    Vector value;
    double gain = 0.0;
};

class ControlSchedule {
public:
    ControlSchedule() = default;
    explicit ControlSchedule(int n) : n_(n) {}

    static ControlSchedule off(int n) { return ControlSchedule(n); }

    static ControlSchedule constant(const Vector& v, double t0, double t1) {
        ControlSchedule s(static_cast<int>(v.size()));
        s.add_fixed(t0, t1, v);
        return s;
    }

    ControlSchedule& add_fixed(double t_begin, double t_end, const Vector& v) {
        check_interval(t_begin, t_end);
        if (v.size() != n_) throw ConfigError("ControlSchedule: control has wrong dimension");
        segments_.push_back({t_begin, t_end, ControlSegment::Kind::Fixed, v, 0.0});
        return *this;
    }

    /// v = gain * x(t_begin) per path, held over [t_begin, t_end).
    ControlSchedule& add_feedback(double t_begin, double t_end, double gain) {
        check_interval(t_begin, t_end);
        segments_.push_back({t_begin, t_end, ControlSegment::Kind::HoldFeedback, Vector::Zero(n_), gain});
        return *this;
    }

    int dimension() const { return n_; }
    const std::vector<ControlSegment>& segments() const { return segments_; }

    /// Index of the segment active at t (right-continuous); nullopt when the control is off.
    std::optional<std::size_t> active(double t, double eps = 1e-12) const {
        for (std::size_t i = 0; i < segments_.size(); ++i) {
            const auto& s = segments_[i];
            if (t >= s.t_begin - eps && t < s.t_end - eps) return i;
        }
        return std::nullopt;
    }

    /// Fixed-control value at t; feedback segments are resolved per path by the ensemble.
    Vector fixed_value(double t) const {
        const auto idx = active(t);
        if (!idx || segments_[*idx].kind != ControlSegment::Kind::Fixed) return Vector::Zero(n_);
        return segments_[*idx].value;
    }

private:
    void check_interval(double a, double b) const {
        if (!(b > a)) throw ConfigError("ControlSchedule: segment end must exceed its start");
        for (const auto& s : segments_)
            if (a < s.t_end && s.t_begin < b) throw ConfigError("ControlSchedule: overlapping segments");
    }

    int n_ = 0;
    std::vector<ControlSegment> segments_;
};

/// Monte-Carlo sample paths. States are kept at every `stride`-th integration node.
class TrajectoryEnsemble {
public:
    TrajectoryEnsemble() = default;

    TrajectoryEnsemble(TimeGrid grid, std::size_t stride, int n, std::size_t m, std::uint64_t seed,
                       ControlSchedule schedule)
        : grid_(grid), stride_(stride), n_(n), m_(m), seed_(seed), schedule_(std::move(schedule)) {
        recorded_ = (grid_.nodes - 1) / stride_ + 1;
        states_.assign(m_ * recorded_ * static_cast<std::size_t>(n_), 0.0);
        held_.assign(schedule_.segments().size(), std::vector<double>(m_ * static_cast<std::size_t>(n_), 0.0));
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t stride() const { return stride_; }
    int dimension() const { return n_; }
    std::size_t paths() const { return m_; }
    std::size_t recorded_nodes() const { return recorded_; }
    std::uint64_t master_seed() const { return seed_; }
    const ControlSchedule& schedule() const { return schedule_; }

    double time(std::size_t node) const {
        const std::size_t k = node * stride_;
        return grid_.at(k);
    }
    double record_step() const { return grid_.h * static_cast<double>(stride_); }

    Eigen::Map<const Vector> state(std::size_t path, std::size_t node) const {
        return Eigen::Map<const Vector>(states_.data() + offset(path, node), n_);
    }
    Eigen::Map<Vector> state(std::size_t path, std::size_t node) {
        return Eigen::Map<Vector>(states_.data() + offset(path, node), n_);
    }

    /// Recorded node index for time t, if t is on the recorded grid.
    std::optional<std::size_t> node_of(double t) const {
        const double pos = (t - grid_.t0) / record_step();
        const double k = std::round(pos);
        if (k < 0 || k > static_cast<double>(recorded_ - 1)) return std::nullopt;
        if (std::abs(time(static_cast<std::size_t>(k)) - t) > 1e-9 * std::max(1.0, std::abs(t))) return std::nullopt;
        return static_cast<std::size_t>(k);
    }

    /// Control applied to `path` at time t.
    Vector control(std::size_t path, double t) const {
        const auto idx = schedule_.active(t);
        if (!idx) return Vector::Zero(n_);
        const auto& seg = schedule_.segments()[*idx];
        if (seg.kind == ControlSegment::Kind::Fixed) return seg.value;
        return Eigen::Map<const Vector>(held_[*idx].data() + path * static_cast<std::size_t>(n_), n_);
    }

    /// Held feedback control for a schedule segment (zero for fixed segments until simulated).
    Eigen::Map<Vector> held(std::size_t segment, std::size_t path) {
        return Eigen::Map<Vector>(held_[segment].data() + path * static_cast<std::size_t>(n_), n_);
    }

    /// States at the last recorded node, one row per path.
    Matrix final_states() const {
        Matrix out(static_cast<Eigen::Index>(m_), n_);
        for (std::size_t p = 0; p < m_; ++p) out.row(static_cast<Eigen::Index>(p)) = state(p, recorded_ - 1).transpose();
        return out;
    }

    const std::vector<double>& raw_states() const { return states_; }
    std::vector<double>& raw_states() { return states_; }
    const std::vector<std::vector<double>>& raw_held() const { return held_; }
    std::vector<std::vector<double>>& raw_held() { return held_; }

private:
    std::size_t offset(std::size_t path, std::size_t node) const {
        return (path * recorded_ + node) * static_cast<std::size_t>(n_);
    }

    TimeGrid grid_{};
    std::size_t stride_ = 1;
    int n_ = 0;
    std::size_t m_ = 0;
    std::size_t recorded_ = 0;
    std::uint64_t seed_ = 0;
    ControlSchedule schedule_;
    std::vector<double> states_;
    std::vector<std::vector<double>> held_;
};

struct SimulationOptions {
    unsigned workers = 1;
    std::size_t record_stride = 1;
    /// Optional starting states (m x n); otherwise drawn from N(init_mean, init_cov).
    std::optional<Matrix> initial_states;
};

namespace detail {

/// Per-path generator: the stream depends only on (master_seed, path), never on scheduling.
inline std::mt19937_64 path_engine(std::uint64_t master_seed, std::uint64_t path) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(path), static_cast<std::uint32_t>(path >> 32), 0x1f0a7u};
    return std::mt19937_64(seq);
}

inline std::string where(double t, std::size_t path) {
    std::ostringstream os;
    os << "t = " << t << ", path " << path;
    return os.str();
}

}  // namespace detail

/// Euler–Maruyama ensemble: x_{k+1} = x_k + a^u(t_k, x_k, v(t_k)) h + sigma(t_k) sqrt(h) z_k.
inline TrajectoryEnsemble simulate_ensemble(const SdeSystem& system, const TimeGrid& grid,
                                            const ControlSchedule& schedule, std::size_t m,
                                            std::uint64_t master_seed, const SimulationOptions& opt = {}) {
    system.validate();
    if (m < 1) throw ConfigError("simulate_ensemble: path count m must be >= 1");
    if (!(grid.h > 0.0)) throw ConfigError("simulate_ensemble: step h must be > 0");
    if (opt.record_stride < 1) throw ConfigError("simulate_ensemble: record stride must be >= 1");
    if ((grid.nodes - 1) % opt.record_stride != 0)
        throw ConfigError("simulate_ensemble: record stride must divide the number of steps");
    const double span_tol = 1e-9 * std::max(1.0, std::abs(system.t_end));
    if (grid.t0 < system.t_start - span_tol || grid.t1 > system.t_end + span_tol)
        throw ConfigError("simulate_ensemble: grid lies outside the system time span");
    if (schedule.dimension() != 0 && schedule.dimension() != system.n)
        throw ConfigError("simulate_ensemble: control schedule has wrong dimension");
    const int n = system.n;
    if (opt.initial_states && (opt.initial_states->rows() != static_cast<Eigen::Index>(m) || opt.initial_states->cols() != n))
        throw ConfigError("simulate_ensemble: initial_states must be m x n");

    ControlSchedule sched = schedule.dimension() == 0 ? ControlSchedule::off(n) : schedule;
    TrajectoryEnsemble ens(grid, opt.record_stride, n, m, master_seed, sched);

    // sigma depends on time only; evaluate once per node
    std::vector<Matrix> sig_sqrt_h(grid.nodes - 1);
    const double sqrt_h = std::sqrt(grid.h);
    for (std::size_t k = 0; k + 1 < grid.nodes; ++k) {
        Matrix s = system.sigma(grid.at(k));
        if (s.rows() != n || s.cols() != n) throw ConfigError("simulate_ensemble: sigma has wrong shape");
        if (!s.allFinite()) throw SimulationError("non-finite diffusion value at " + detail::where(grid.at(k), 0));
        sig_sqrt_h[k] = s * sqrt_h;
    }
    const Matrix init_root = linalg::sqrt_psd(system.init_cov);

    // which fixed-or-feedback segment starts at each node
    const auto& segs = sched.segments();
    std::vector<std::optional<std::size_t>> active(grid.nodes);
    for (std::size_t k = 0; k < grid.nodes; ++k) active[k] = sched.active(grid.at(k));

    auto run_path = [&](std::size_t p) {
        auto eng = detail::path_engine(master_seed, p);
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector z(n);
        Vector x(n);
        if (opt.initial_states) {
            x = opt.initial_states->row(static_cast<Eigen::Index>(p)).transpose();
        } else {
            for (int i = 0; i < n; ++i) z(i) = normal(eng);
            x = system.init_mean + init_root * z;
        }
        Vector v = Vector::Zero(n);
        std::optional<std::size_t> current;
        for (std::size_t k = 0; k < grid.nodes; ++k) {
            if (k % opt.record_stride == 0) ens.state(p, k / opt.record_stride) = x;
            if (k + 1 == grid.nodes) break;
            if (active[k] != current) {
                current = active[k];
                if (!current) {
                    v.setZero();
                } else if (segs[*current].kind == ControlSegment::Kind::Fixed) {
                    v = segs[*current].value;
                } else {
                    v = segs[*current].gain * x;
                    ens.held(*current, p) = v;
                }
            }
            const double t = grid.at(k);
            const Vector a = system.drift(t, x, v);
            if (a.size() != n) throw ConfigError("simulate_ensemble: drift returned wrong dimension");
            if (!a.allFinite()) throw SimulationError("non-finite drift value at " + detail::where(t, p));
            for (int i = 0; i < n; ++i) z(i) = normal(eng);
            x += a * grid.h;
            x.noalias() += sig_sqrt_h[k] * z;
            if (!x.allFinite()) throw SimulationError("non-finite state at " + detail::where(grid.at(k + 1), p));
        }
        // fixed segments are recorded too so exported controls are complete
        for (std::size_t s = 0; s < segs.size(); ++s)
            if (segs[s].kind == ControlSegment::Kind::Fixed) ens.held(s, p) = segs[s].value;
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(m)));
    if (workers == 1) {
        for (std::size_t p = 0; p < m; ++p) run_path(p);
        return ens;
    }
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::size_t> first_bad(workers, m);
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (m + workers - 1) / workers;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                const std::size_t lo = w * chunk;
                const std::size_t hi = std::min(m, lo + chunk);
                for (std::size_t p = lo; p < hi; ++p) {
                    try {
                        run_path(p);
                    } catch (...) {
                        errors[w] = std::current_exception();
                        first_bad[w] = p;
                        return;
                    }
                }
            });
        }
    }
    // report the failure with the lowest path index so errors are scheduling independent
    std::size_t worst = m;
    std::exception_ptr err;
    for (unsigned w = 0; w < workers; ++w)
        if (errors[w] && first_bad[w] < worst) {
            worst = first_bad[w];
            err = errors[w];
        }
    if (err) std::rethrow_exception(err);
    return ens;
}

struct MomentEstimates {
    double t = 0.0;
    Vector mean;
    Matrix r;      ///< centered sample covariance, divisor m - 1
    Matrix r_dot;  ///< finite-difference derivative of r
    Matrix b_est;  ///< 1/2 r_dot
    Matrix r_v;    ///< E[(x + v)(x + v)^T] (non-central)
};

namespace detail {

inline std::pair<Vector, Matrix> mean_cov_at(const TrajectoryEnsemble& ens, std::size_t node) {
    const int n = ens.dimension();
    const std::size_t m = ens.paths();
    Vector mean = Vector::Zero(n);
    for (std::size_t p = 0; p < m; ++p) mean += ens.state(p, node);
    mean /= static_cast<double>(m);
    Matrix cov = Matrix::Zero(n, n);
    for (std::size_t p = 0; p < m; ++p) {
        const Vector d = ens.state(p, node) - mean;
        cov.noalias() += d * d.transpose();
    }
    cov /= static_cast<double>(m - 1);
    return {mean, linalg::symmetrize(cov)};
}

}  // namespace detail

/// Moments at a recorded node time t. r_dot is a central difference in the
/// interior and one-sided at the first/last recorded node.
inline MomentEstimates estimate_moments(const TrajectoryEnsemble& ens, double t) {
    if (ens.paths() < 2) throw InsufficientSampleError("estimate_moments: at least two paths are required");
    if (ens.recorded_nodes() < 2) throw RangeError("estimate_moments: ensemble needs at least two recorded nodes");
    const auto node = ens.node_of(t);
    if (!node) {
        std::ostringstream os;
        os << "estimate_moments: t = " << t << " is not a recorded grid node in [" << ens.grid().t0 << ", "
           << ens.grid().t1 << "]";
        throw RangeError(os.str());
    }
    const std::size_t k = *node;
    const std::size_t last = ens.recorded_nodes() - 1;
    MomentEstimates out;
    out.t = ens.time(k);
    std::tie(out.mean, out.r) = detail::mean_cov_at(ens, k);

    const std::size_t lo = k == 0 ? 0 : k - 1;
    const std::size_t hi = k == last ? last : k + 1;
    const Matrix r_lo = lo == k ? out.r : detail::mean_cov_at(ens, lo).second;
    const Matrix r_hi = hi == k ? out.r : detail::mean_cov_at(ens, hi).second;
    out.r_dot = linalg::symmetrize((r_hi - r_lo) / (ens.time(hi) - ens.time(lo)));
    out.b_est = 0.5 * out.r_dot;

    const int n = ens.dimension();
    Matrix rv = Matrix::Zero(n, n);
    for (std::size_t p = 0; p < ens.paths(); ++p) {
        const Vector y = ens.state(p, k) + ens.control(p, out.t);
        rv.noalias() += y * y.transpose();
    }
    out.r_v = linalg::symmetrize(rv / static_cast<double>(ens.paths()));
    return out;
}

}  // namespace ipf
