#pragma once

// Scenario configuration and the command implementations behind the ipf tool.
// Each command returns a Report: a JSON document, human-readable text, golden
// checks and the exit code.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipf/dual_strategy.hpp"
#include "ipf/ensemble_io.hpp"
#include "ipf/info_network.hpp"
#include "ipf/invariants.hpp"
#include "ipf/json_io.hpp"
#include "ipf/macro_model.hpp"

namespace ipf {

using json = nlohmann::json;

enum ExitCode : int { kExitOk = 0, kExitGolden = 1, kExitConfig = 2, kExitNumerical = 3 };

struct GoldenCheck {
    std::string name;
    double reference = 0.0;
    double computed = 0.0;
    double tolerance = 0.0;
    bool relative = false;
    bool passed = false;
    std::string note;
};

inline GoldenCheck golden(std::string name, double reference, double computed, double tol, bool relative = false,
                          std::string note = {}) {
    const double dev = std::abs(computed - reference);
    const double lim = relative ? tol * std::abs(reference) : tol;
    return {std::move(name), reference, computed, tol, relative, dev <= lim, std::move(note)};
}

struct Report {
    json data = json::object();
    std::vector<GoldenCheck> checks;
    std::vector<std::string> notes;
    std::string text;
    int exit_code = kExitOk;

    bool all_passed() const {
        for (const auto& c : checks)
            if (!c.passed) return false;
        return true;
    }

    /// Fills the check table into data/text and sets the exit code.
    void finish() {
        json arr = json::array();
        std::ostringstream os;
        os << text;
        if (!checks.empty()) {
            os << std::left << std::setw(34) << "check" << std::setw(16) << "reference" << std::setw(20) << "computed"
               << std::setw(14) << "tolerance" << "status\n";
            for (const auto& c : checks) {
                arr.push_back({{"name", c.name},
                               {"reference", io::number(c.reference)},
                               {"computed", io::number(c.computed)},
                               {"tolerance", io::number(c.tolerance)},
                               {"relative", c.relative},
                               {"passed", c.passed},
                               {"note", c.note}});
                std::ostringstream tol;
                tol << c.tolerance << (c.relative ? " rel" : "");
                os << std::setw(34) << c.name << std::setw(16) << std::setprecision(8) << c.reference << std::setw(20)
                   << std::setprecision(12) << c.computed << std::setw(14) << tol.str() << (c.passed ? "ok" : "FAIL")
                   << (c.note.empty() ? "" : "  (" + c.note + ")") << '\n';
            }
            data["checks"] = arr;
        }
        if (!notes.empty()) {
            data["notes"] = notes;
            for (const auto& n : notes) os << "note: " << n << '\n';
        }
        text = os.str();
        if (exit_code == kExitOk && !all_passed()) exit_code = kExitGolden;
    }
};

// ---------------------------------------------------------------- config

struct OutputSpec {
    std::string segments = "segments.jsonl";
    std::string ef_report = "ef_report.json";
    std::string invariants = "invariants.csv";
    std::string network = "network.json";
    std::string network_csv = "network.csv";
    bool ensemble_csv = false;
};

struct ScenarioConfig {
    std::string name = "scenario";
    Matrix A;
    Matrix sigma;
    Vector init_mean;
    Matrix init_cov;
    double t_start = 0.0;
    bool identify_start = false;  ///< estimate A0 from a probe ensemble instead of using A
    std::optional<std::uint64_t> seed;
    DualStrategyConfig run;
    OutputSpec output;

    bool stochastic() const { return run.paths >= 2; }

    SdeSystem system() const { return SdeSystem::linear(A, sigma, init_mean, init_cov, t_start, t_start + 1.0); }

    DualStrategyConfig strategy() const {
        DualStrategyConfig c = run;
        if (!identify_start) c.A0 = A;
        if (seed) c.seed = *seed;
        c.keep_ensembles = output.ensemble_csv && stochastic();
        return c;
    }
};

namespace detail {

inline std::string field_error(const std::string& field, const std::string& what) {
    return "config field '" + field + "': " + what;
}

inline Matrix parse_matrix(const json& j, const std::string& field, int n) {
    if (j.is_number()) return j.get<double>() * Matrix::Identity(n, n);
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw ConfigError(field_error(field, "expected an " + std::to_string(n) + "x" + std::to_string(n) + " array"));
    Matrix m(n, n);
    for (int r = 0; r < n; ++r) {
        if (!j[r].is_array() || static_cast<int>(j[r].size()) != n)
            throw ConfigError(field_error(field, "row " + std::to_string(r) + " has wrong length"));
        for (int c = 0; c < n; ++c) {
            if (!j[r][c].is_number()) throw ConfigError(field_error(field, "entries must be numbers"));
            m(r, c) = j[r][c].get<double>();
        }
    }
    return m;
}

inline Vector parse_vector(const json& j, const std::string& field, int n) {
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw ConfigError(field_error(field, "expected an array of length " + std::to_string(n)));
    Vector v(n);
    for (int i = 0; i < n; ++i) {
        if (!j[i].is_number()) throw ConfigError(field_error(field, "entries must be numbers"));
        v(i) = j[i].get<double>();
    }
    return v;
}

template <class T>
T get_or(const json& obj, const std::string& key, const std::string& prefix, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(field_error(prefix + key, e.what()));
    }
}

}  // namespace detail

inline ScenarioConfig parse_scenario(const json& j) {
    using namespace detail;
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    ScenarioConfig c;
    c.name = get_or<std::string>(j, "scenario", "", c.name);
    if (!j.contains("system")) throw ConfigError(field_error("system", "missing"));
    const auto& s = j.at("system");
    if (!s.contains("n")) throw ConfigError(field_error("system.n", "missing"));
    const int n = get_or<int>(s, "n", "system.", 0);
    if (n < 1) throw ConfigError(field_error("system.n", "must be >= 1"));
    if (!s.contains("A")) throw ConfigError(field_error("system.A", "missing"));
    c.A = parse_matrix(s.at("A"), "system.A", n);
    c.sigma = s.contains("sigma") ? parse_matrix(s.at("sigma"), "system.sigma", n) : Matrix::Zero(n, n);
    c.init_mean = s.contains("init_mean") ? parse_vector(s.at("init_mean"), "system.init_mean", n) : Vector::Zero(n);
    c.init_cov = s.contains("init_cov") ? parse_matrix(s.at("init_cov"), "system.init_cov", n) : Matrix::Identity(n, n);
    c.t_start = get_or<double>(s, "t_start", "system.", 0.0);

    const json r = j.value("run", json::object());
    auto& d = c.run;
    c.identify_start = get_or<bool>(r, "identify_start", "run.", false);
    if (r.contains("x0")) d.x0 = parse_vector(r.at("x0"), "run.x0", n);
    const auto det = get_or<std::string>(r, "detector", "run.", "auto");
    if (det == "auto") d.detector = DualStrategyConfig::Detector::Auto;
    else if (det == "ratio") d.detector = DualStrategyConfig::Detector::Ratio;
    else if (det == "imag") d.detector = DualStrategyConfig::Detector::Imag;
    else throw ConfigError(field_error("run.detector", "expected auto | ratio | imag"));
    const auto sm = get_or<std::string>(r, "sign_mode", "run.", "open_loop");
    if (sm == "open_loop") d.sign_mode = SignMode::OpenLoop;
    else if (sm == "closed_loop") d.sign_mode = SignMode::ClosedLoop;
    else throw ConfigError(field_error("run.sign_mode", "expected open_loop | closed_loop"));
    const int budget = get_or<int>(r, "segments", "run.", 2);
    if (budget < 1) throw ConfigError(field_error("run.segments", "must be >= 1"));
    d.segment_budget = static_cast<std::size_t>(budget);
    d.search_window = get_or<double>(r, "search_window", "run.", d.search_window);
    if (!(d.search_window > 0.0)) throw ConfigError(field_error("run.search_window", "must be > 0"));
    const int steps = get_or<int>(r, "scan_steps", "run.", static_cast<int>(d.scan_steps));
    if (steps < 10) throw ConfigError(field_error("run.scan_steps", "must be >= 10"));
    d.scan_steps = static_cast<std::size_t>(steps);
    d.pair_i = get_or<int>(r, "pair_i", "run.", 0);
    d.pair_j = get_or<int>(r, "pair_j", "run.", 1);
    d.equalized_tol = get_or<double>(r, "equalized_tol", "run.", d.equalized_tol);
    const int samples = get_or<int>(r, "residual_samples", "run.", static_cast<int>(d.residual_samples));
    if (samples < 0) throw ConfigError(field_error("run.residual_samples", "must be >= 0"));
    d.residual_samples = static_cast<std::size_t>(samples);
    const long long paths = get_or<long long>(r, "paths", "run.", 0);
    if (paths < 0) throw ConfigError(field_error("run.paths", "must be >= 0"));
    d.paths = static_cast<std::size_t>(paths);
    d.h = get_or<double>(r, "h", "run.", d.h);
    if (!(d.h > 0.0)) throw ConfigError(field_error("run.h", "must be > 0"));
    if (r.contains("seed")) {
        if (!r.at("seed").is_number_unsigned()) throw ConfigError(field_error("run.seed", "must be a non-negative integer"));
        c.seed = r.at("seed").get<std::uint64_t>();
    }
    const int workers = get_or<int>(r, "workers", "run.", 1);
    if (workers < 1) throw ConfigError(field_error("run.workers", "must be >= 1"));
    d.workers = static_cast<unsigned>(workers);

    const json o = j.value("output", json::object());
    c.output.segments = get_or<std::string>(o, "segments", "output.", c.output.segments);
    c.output.ef_report = get_or<std::string>(o, "ef_report", "output.", c.output.ef_report);
    c.output.invariants = get_or<std::string>(o, "invariants", "output.", c.output.invariants);
    c.output.network = get_or<std::string>(o, "network", "output.", c.output.network);
    c.output.network_csv = get_or<std::string>(o, "network_csv", "output.", c.output.network_csv);
    c.output.ensemble_csv = get_or<bool>(o, "ensemble_csv", "output.", false);

    if (c.identify_start && !c.stochastic())
        throw ConfigError(field_error("run.identify_start", "needs an ensemble (run.paths >= 2)"));
    return c;
}

inline ScenarioConfig load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError("config " + path + ": " + e.what());
    }
    return parse_scenario(j);
}

/// Seed check that has to run after command-line overrides are applied.
inline void validate_scenario(const ScenarioConfig& c) {
    if (c.stochastic() && !c.seed)
        throw ConfigError(detail::field_error("run.seed", "a seed is mandatory for a stochastic scenario"));
}

// ---------------------------------------------------------------- examples

inline Matrix example3_matrix() {
    Matrix a(2, 2);
    a << 2, 3, 3, 10;
    return a;
}

/// The two Example-3 scenarios: A0 = [[2,3],[3,10]] or its negative, x0 = (1,1), sigma = 0.
inline ScenarioConfig example3_scenario(bool positive) {
    ScenarioConfig c;
    c.name = positive ? "example3_positive" : "example3_negative";
    c.A = positive ? example3_matrix() : Matrix(-example3_matrix());
    c.sigma = Matrix::Zero(2, 2);
    c.init_mean = Vector::Zero(2);
    c.init_cov = Matrix::Identity(2, 2);
    c.run.x0 = Vector::Ones(2);
    c.run.detector = DualStrategyConfig::Detector::Ratio;
    c.run.segment_budget = 2;
    c.run.search_window = 2.0;
    return c;
}

inline json complex_list(const std::vector<Complex>& ev) { return io::to_json(ev); }

inline Report cmd_example1() {
    Report rep;
    Matrix a(2, 2);
    a << 3, -2, -4, 1;
    const auto ev = linalg::eigenvalues(a);
    // characteristic polynomial oracle: l^2 - tr l + det
    auto char_roots = [](const Matrix& m) {
        const Complex tr = m.trace();
        const Complex det = m.determinant();
        const Complex disc = std::sqrt(tr * tr - 4.0 * det);
        return std::pair{(tr + disc) / 2.0, (tr - disc) / 2.0};
    };
    const auto flip = apply_sign_flip(a, FlipSpec{{{0, 0}}});
    const auto flip_rule = apply_sign_flip(a, FlipSpec{{{0, 0}, {1, 0}}});
    const auto [p1, p2] = char_roots(a);
    const auto [q1, q2] = char_roots(flip.A);

    rep.checks.push_back(golden("eigenvalue 1 of A", 5.0, ev[0].real(), 1e-12, false, "printed as 2 + 3"));
    rep.checks.push_back(golden("eigenvalue 2 of A", -1.0, ev[1].real(), 1e-12, false, "printed as 2 - 3"));
    rep.checks.push_back(golden("flipped eigenvalue 1 (oracle)", q1.real(), flip.eigenvalues[0].real(), 1e-12));
    rep.checks.push_back(golden("flipped eigenvalue 2 (oracle)", q2.real(), flip.eigenvalues[1].real(), 1e-12));
    rep.checks.push_back(golden("flipped eigenvalue 1 = -1+2sqrt3", -1.0 + 2.0 * std::sqrt(3.0),
                                flip.eigenvalues[0].real(), 1e-12));
    const bool flipped_complex = flip.eigenvalues[0].imag() != 0.0;
    rep.notes.push_back("discrepancy: the flipped matrix [[-3,-2],[-4,1]] has real eigenvalues -1 +/- 2 sqrt(3); "
                        "the printed complex pair 2 +/- j is not reproduced");
    rep.notes.push_back("flipping a11 and a21 gives [[-3,-2],[4,1]] with eigenvalues -1 +/- 2j (complex, not 2 +/- j)");
    rep.data = {{"A", io::to_json(a)},
                {"eigenvalues", complex_list(ev)},
                {"oracle", complex_list({p1, p2})},
                {"flipped", {{"A", io::to_json(flip.A)}, {"eigenvalues", complex_list(flip.eigenvalues)},
                             {"complex", flipped_complex}, {"discrepancy", !flipped_complex}}},
                {"flipped_a11_a21", {{"A", io::to_json(flip_rule.A)}, {"eigenvalues", complex_list(flip_rule.eigenvalues)}}}};
    std::ostringstream os;
    os << "A = [[3,-2],[-4,1]]  eigenvalues " << ev[0] << ", " << ev[1] << '\n'
       << "flip a11 -> [[-3,-2],[-4,1]]  eigenvalues " << flip.eigenvalues[0] << ", " << flip.eigenvalues[1] << '\n'
       << "flip a11,a21 -> [[-3,-2],[4,1]]  eigenvalues " << flip_rule.eigenvalues[0] << ", "
       << flip_rule.eigenvalues[1] << '\n';
    rep.text = os.str();
    rep.finish();
    return rep;
}

inline Report cmd_example2(double beta) {
    if (!(beta > 0.0)) throw ConfigError("example2: beta must be > 0");
    Report rep;
    const double tau1 = detect_switch_imag(Complex(0.0, beta), SwitchSearch{2.0 * std::numbers::pi / beta, 10000});
    const Complex l1 = eigenvalue_map(Complex(0.0, beta), tau1);
    const auto inv = imaginary_invariant();
    rep.checks.push_back(golden("beta tau1 = pi/3", std::numbers::pi / 3.0, beta * tau1, 1e-6));
    rep.checks.push_back(golden("Re lambda(tau1) / beta", -0.577, l1.real() / beta, 0.001));
    rep.notes.push_back("discrepancy: beta tau1 is printed as pi/6 = 0.5236; cos(beta tau1) = 1/2 forces pi/3 = 1.0472");
    rep.data = {{"beta", beta},
                {"tau1", tau1},
                {"beta_tau1", beta * tau1},
                {"lambda_end", {l1.real(), l1.imag()}},
                {"re_over_beta", l1.real() / beta},
                {"closed_form_re_coeff", inv.re_coeff},
                {"printed_beta_tau1", inv.printed_beta_tau},
                {"printed_value_flagged", inv.printed_value_disagrees}};
    std::ostringstream os;
    os << std::setprecision(10) << "beta = " << beta << "  tau1 = " << tau1 << "  beta*tau1 = " << beta * tau1
       << "  Re lambda(tau1) = " << l1.real() << '\n';
    rep.text = os.str();
    rep.finish();
    return rep;
}

inline Report cmd_example3(bool positive) {
    Report rep;
    const auto sc = example3_scenario(positive);
    const auto res = run_dual_strategy(sc.system(), sc.strategy());
    if (res.segments.empty()) throw NoRootError("example3: no segment was produced");
    const auto& s0 = res.segments.front();
    const double tau1 = s0.duration;
    rep.data["segments"] = json::array();
    for (const auto& s : res.segments) rep.data["segments"].push_back(io::to_json(s));
    rep.data["total_time"] = res.total_time;

    if (positive) {
        rep.checks.push_back(golden("switch root tau1", 0.7884, tau1, 5e-4));
        const Matrix& a1 = s0.Av_end;
        rep.checks.push_back(golden("A(tau1)_11", 11.006, a1(0, 0), 0.1, false, "window [10.9, 11.1]"));
        rep.checks.push_back(golden("A(tau1)_22", 11.004, a1(1, 1), 0.1, false, "window [10.9, 11.1]"));
        rep.checks.push_back(golden("A(tau1)_12", 0.0, a1(0, 1), 0.01, false, "printed -0.00077"));
        rep.checks.push_back(golden("A(tau1)_21", 0.0, a1(1, 0), 0.01, false, "printed -0.00077"));
        rep.checks.push_back(golden("total time T", 0.851, res.total_time, 0.005));
        if (s0.phase_jump) {
            rep.checks.push_back(golden("phase-speed jump dx1", 51381.4, (*s0.phase_jump)(0), 0.01, true));
            rep.checks.push_back(golden("phase-speed jump dx2", 154135.41, (*s0.phase_jump)(1), 0.01, true));
        }
        const Matrix K = phase_speed_jump_gain(*s0.A_next, s0.A_start, tau1);
        rep.checks.push_back(golden("K12", 38532.75, K(0, 1), 0.01, true));
        rep.checks.push_back(golden("K21", 38532.75, K(1, 0), 0.01, true));
        const auto pp = phase_portrait(s0.A_start, s0.v);
        rep.checks.push_back(golden("I2", -25.0, pp.I2, 0.0));
        rep.checks.push_back(golden("ctg 2theta", 0.75, pp.ctg_2theta, 0.0));
        const double phi_printed_state = consolidation_angle(23351.17, 70049.54);
        const double phi = consolidation_angle(s0.x_switch(0), s0.x_switch(1));
        rep.checks.push_back(golden("consolidation angle / pi", 0.1472, phi_printed_state / std::numbers::pi, 0.001, false,
                                    "from the printed state x(tau1)"));
        rep.data["tau1"] = tau1;
        rep.data["A_tau1"] = io::to_json(a1);
        rep.data["K"] = io::to_json(K);
        rep.data["phase_portrait"] = {{"I2", pp.I2},
                                      {"I3", pp.I3},
                                      {"ctg_2theta", pp.ctg_2theta},
                                      {"theta", pp.theta},
                                      {"a_coeffs", {pp.a11, pp.a12, pp.a22, pp.a13, pp.a23, pp.a33}}};
        rep.data["consolidation_angle_over_pi"] = {{"printed_state", phi_printed_state / std::numbers::pi},
                                                   {"computed_state", phi / std::numbers::pi}};
        rep.notes.push_back("the jump uses -(A_after + A_before) x(tau1) + 2 A_before x0; the expanded form printed "
                            "with a plus sign does not reproduce the printed numbers");
        rep.notes.push_back("I3 from the conic coefficients is -1/4(33 v1^2 + 88 v1 v2 - 33 v2^2); the printed "
                            "-1/4(33 v1^2 + 327 v2^2 + 196 v1 v2) is negative definite and cannot arise with I2 < 0");
    } else {
        rep.checks.push_back(golden("switch root tau1", 0.193, tau1, 1e-3));
        const double l_end = s0.eig_end.front().real();
        rep.checks.push_back(golden("end eigenvalue", -0.7, l_end, 0.01));
        rep.checks.push_back(golden("total time T", 1.187, res.total_time, 0.01));
        rep.data["tau1"] = tau1;
        rep.data["end_eigenvalue"] = l_end;
        rep.notes.push_back("the next segment starts from the sign-changed operator Av = -A_end = " +
                            std::to_string(-l_end) + " I");
    }
    std::ostringstream os;
    os << std::setprecision(12) << sc.name << ": tau1 = " << tau1 << ", T = " << res.total_time << ", segments "
       << res.segments.size() << '\n';
    rep.text = os.str();
    rep.finish();
    return rep;
}

inline std::string gamma_table_csv(const GammaTable& t) {
    std::ostringstream os;
    io::write_gamma_table_csv(os, t);
    return os.str();
}

inline Report cmd_invariants(double gamma_max, std::size_t rows) {
    Report rep;
    const auto table = build_gamma_table(gamma_max, rows);
    rep.text = gamma_table_csv(table);
    json arr = json::array();
    for (const auto& r : table.rows)
        arr.push_back({{"gamma", r.gamma},
                       {"a_o", io::number(r.a_o)},
                       {"a", io::number(r.a)},
                       {"residual", io::number(r.residual)},
                       {"converged", r.converged},
                       {"a_o_joint", io::number(r.a_o_joint)},
                       {"error", r.error}});
    rep.data["rows"] = arr;
    rep.data["all_converged"] = table.all_converged();
    if (!table.all_converged()) rep.exit_code = kExitNumerical;
    rep.finish();
    return rep;
}

struct NetworkOutputs {
    RankedSpectrum ranked;
    InfoNetwork network;
    ProcessInfo info;
    CodeSpec code;
};

inline NetworkOutputs network_from_spectrum(const std::vector<SpectrumEntry>& spec, double D = 2.0, double D0 = 2.0) {
    NetworkOutputs out;
    out.ranked = rank_spectrum(spec);
    out.network = build_network(out.ranked);
    std::vector<std::pair<Nats, Nats>> pairs;
    // a terminal segment has no control jump after it
    for (const auto& e : spec) pairs.emplace_back(std::abs(e.a_o), std::isfinite(e.a) ? std::abs(e.a) : 0.0);
    out.info = total_process_info(pairs);
    double max_ao = 0.0;
    for (const auto& e : spec) max_ao = std::max(max_ao, std::abs(e.a_o));
    out.code = codeword_lengths(out.info.predict, nats_to_bits(max_ao), D, D0);
    return out;
}

inline json network_json(const NetworkOutputs& n) {
    return {{"ranked", io::to_json(n.ranked)},
            {"network", io::to_json(n.network)},
            {"node_count", n.network.nodes.size()},
            {"process_info", {{"full_nats", n.info.full}, {"predict_nats", n.info.predict}}},
            {"code", io::to_json(n.code)}};
}

inline Report cmd_network(const std::vector<SpectrumEntry>& spec, double D, double D0) {
    Report rep;
    const auto n = network_from_spectrum(spec, D, D0);
    rep.data = network_json(n);
    std::ostringstream os;
    os << std::setprecision(12) << "segments " << spec.size() << ", nodes " << n.network.nodes.size()
       << ", final node info " << n.network.final_node().accumulated_info << " Nats\n";
    io::write_network_csv(os, n.network);
    rep.text = os.str();
    rep.finish();
    return rep;
}

inline void write_text_file(const std::filesystem::path& p, const std::string& content) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << content;
    if (!out) throw ConfigError("write failed for " + p.string());
}

/// Runs the dual strategy and writes every artifact under out_dir.
inline Report cmd_run(const ScenarioConfig& sc, const std::filesystem::path& out_dir) {
    validate_scenario(sc);
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw ConfigError("output directory " + out_dir.string() + " is not writable: " + ec.message());

    const auto res = run_dual_strategy(sc.system(), sc.strategy());
    Report rep;
    std::vector<std::string> written;
    auto emit = [&](const std::string& name, const std::string& content) {
        write_text_file(out_dir / name, content);
        written.push_back(name);
    };
    {
        std::ostringstream os;
        io::write_segments_jsonl(os, res.segments);
        emit(sc.output.segments, os.str());
    }
    emit(sc.output.ef_report, io::ef_report(res).dump(2) + "\n");
    {
        std::ostringstream os;
        io::write_invariant_csv(os, res.segments);
        emit(sc.output.invariants, os.str());
    }
    if (!res.segments.empty()) {
        const auto net = network_from_spectrum(res.spectrum());
        emit(sc.output.network, network_json(net).dump(2) + "\n");
        std::ostringstream os;
        io::write_network_csv(os, net.network);
        emit(sc.output.network_csv, os.str());
    }
    for (std::size_t k = 0; k < res.ensembles.size(); ++k) {
        std::ostringstream os;
        io::write_ensemble_csv(os, res.ensembles[k]);
        emit("ensemble_seg" + std::to_string(k) + ".csv", os.str());
    }
    rep.data = {{"scenario", sc.name},
                {"segments", res.segments.size()},
                {"impulses", res.impulses},
                {"total_time", res.total_time},
                {"stop_reason", res.stop_reason},
                {"artifacts", written}};
    std::ostringstream os;
    os << std::setprecision(12) << sc.name << ": " << res.segments.size() << " segment(s), " << res.impulses
       << " impulse(s), T = " << res.total_time << " (" << res.stop_reason << ")\n";
    for (const auto& s : res.segments)
        os << "  segment " << s.index << ": tau = [" << s.tau_start << ", " << s.tau_switch << "], detector "
           << s.detector << ", info " << s.info_contribution << " Nats\n";
    rep.text = os.str();
    rep.finish();
    return rep;
}

}  // namespace ipf
