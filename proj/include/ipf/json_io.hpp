#pragma once

// JSON / CSV emitters for segment logs, EF reports, gamma tables and
// information networks. Layouts are documented in docs/FORMATS.md.

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ipf/dual_strategy.hpp"
#include "ipf/info_network.hpp"
#include "ipf/invariants.hpp"

namespace ipf::io {

using json = nlohmann::json;

/// NaN and infinities become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(number(v(i)));
    return a;
}

inline json to_json(const Matrix& m) {
    json a = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(number(m(r, c)));
        a.push_back(row);
    }
    return a;
}

inline json to_json(const std::vector<Complex>& ev) {
    json a = json::array();
    for (const auto& l : ev) a.push_back({number(l.real()), number(l.imag())});
    return a;
}

inline json to_json(const InvariantSet& s) {
    return {{"gamma", number(s.gamma)}, {"a_o", number(s.a_o)},   {"a", number(s.a)},
            {"a_degree", number(s.a_degree)}, {"b_o", number(s.b_o)}, {"b", number(s.b_inv)},
            {"i1", number(s.i1)},   {"i2", number(s.i2)},     {"i3", number(s.i3)},
            {"a_o_bits", number(s.a_o_bits())}, {"a_bits", number(s.a_bits())}, {"unstable", s.unstable}};
}

inline json to_json(const EfEstimate& e) {
    return {{"value_nats", number(e.value)}, {"std_error", number(e.std_error)}, {"m", e.m},
            {"rule", e.rule},                {"t_a", number(e.t_a)},             {"t_b", number(e.t_b)}};
}

inline json to_json(const SegmentRecord& s) {
    json j;
    j["index"] = s.index;
    j["tau_start"] = number(s.tau_start);
    j["tau_switch"] = number(s.tau_switch);
    j["tau_dp"] = number(s.tau_dp);
    j["duration"] = number(s.duration);
    j["terminal"] = s.terminal;
    j["detector"] = s.detector;
    j["A_start"] = to_json(s.A_start);
    j["A_end"] = to_json(s.A_end);
    j["Av_end"] = to_json(s.Av_end);
    j["A_next"] = s.A_next ? to_json(*s.A_next) : json(nullptr);
    j["delta_A"] = s.delta_A ? to_json(*s.delta_A) : json(nullptr);
    j["eig_start"] = to_json(s.eig_start);
    j["eig_end"] = to_json(s.eig_end);
    j["x_start"] = to_json(s.x_start);
    j["v"] = to_json(s.v);
    j["x_switch"] = to_json(s.x_switch);
    j["phase_jump"] = s.phase_jump ? to_json(*s.phase_jump) : json(nullptr);
    json ev = json::array();
    for (const auto& e : s.events) ev.push_back({{"kind", to_string(e.kind)}, {"t", number(e.t)}, {"v", to_json(e.v)}});
    j["events"] = ev;
    json inv = json::array();
    for (const auto& i : s.invariants) inv.push_back(to_json(i));
    j["invariants"] = inv;
    j["primary"] = s.primary;
    j["info_contribution_nats"] = number(s.info_contribution);
    j["ef"] = s.ef ? to_json(*s.ef) : json(nullptr);
    j["ipf_nats"] = s.ipf ? number(*s.ipf) : json(nullptr);
    json tr = json::array();
    for (const auto& r : s.residual_trace) tr.push_back({number(r.t), number(r.norm)});
    j["residual_trace"] = tr;
    return j;
}

inline void write_segments_jsonl(std::ostream& os, const std::vector<SegmentRecord>& segs) {
    for (const auto& s : segs) os << to_json(s).dump() << '\n';
}

/// null reads back as NaN.
inline double read_number(const json& j) {
    return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

/// Reads the fields needed to rebuild a spectrum from a segment log.
inline std::vector<SpectrumEntry> read_spectrum_jsonl(std::istream& is) {
    std::vector<SpectrumEntry> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            const auto primary = j.at("primary").get<std::size_t>();
            SpectrumEntry e;
            e.segment = j.at("index").get<std::size_t>();
            e.alpha = j.at("eig_start").at(primary).at(0).get<double>();
            e.duration = j.at("duration").get<double>();
            e.a_o = j.at("invariants").at(primary).at("a_o").get<double>();
            e.contribution = j.at("info_contribution_nats").get<double>();
            e.a = read_number(j.at("invariants").at(primary).at("a"));
            out.push_back(e);
        } catch (const json::exception& ex) {
            throw ConfigError("segment log line " + std::to_string(lineno) + ": " + ex.what());
        }
    }
    return out;
}

inline json ef_report(const DualStrategyResult& r) {
    json segs = json::array();
    double ef_total = 0.0;
    double ipf_total_v = 0.0;
    bool have_ef = false;
    for (const auto& s : r.segments) {
        segs.push_back({{"index", s.index},
                        {"ef", s.ef ? to_json(*s.ef) : json(nullptr)},
                        {"ipf_nats", s.ipf ? number(*s.ipf) : json(nullptr)},
                        {"info_contribution_nats", number(s.info_contribution)}});
        if (s.ef) {
            ef_total += s.ef->value;
            have_ef = true;
        }
        if (s.ipf) ipf_total_v += *s.ipf;
    }
    return {{"segments", segs},
            {"ef_sum_nats", have_ef ? number(ef_total) : json(nullptr)},
            {"ipf_sum_nats", number(ipf_total_v)},
            {"impulses", r.impulses},
            {"cutoff_nats", number(r.cutoff.nats)},
            {"cutoff_bits", number(r.cutoff.bits)},
            {"cutoff_bits_reported", number(r.cutoff.reported_bits)},
            {"total_time", number(r.total_time)},
            {"stop_reason", r.stop_reason}};
}

inline void write_invariant_csv(std::ostream& os, const std::vector<SegmentRecord>& segs) {
    os << "segment,eigen,alpha,beta,gamma,a_o,a,b_o,b,i1,i2,i3,a_o_bits,a_bits,primary\n";
    os << std::setprecision(17);
    for (const auto& s : segs)
        for (std::size_t i = 0; i < s.invariants.size(); ++i) {
            const auto& v = s.invariants[i];
            os << s.index << ',' << i << ',' << s.eig_start[i].real() << ',' << s.eig_start[i].imag() << ','
               << v.gamma << ',' << v.a_o << ',' << v.a << ',' << v.b_o << ',' << v.b_inv << ',' << v.i1 << ','
               << v.i2 << ',' << v.i3 << ',' << v.a_o_bits() << ',' << v.a_bits() << ','
               << (i == s.primary ? 1 : 0) << '\n';
        }
}

inline void write_gamma_table_csv(std::ostream& os, const GammaTable& t) {
    os << "gamma,a_o,a,residual,converged,a_o_joint\n";
    os << std::setprecision(17);
    for (const auto& r : t.rows)
        os << r.gamma << ',' << r.a_o << ',' << r.a << ',' << r.residual << ',' << (r.converged ? 1 : 0) << ','
           << r.a_o_joint << '\n';
}

inline json node_json(const InfoNetwork& net, std::size_t id) {
    const auto& n = net.nodes[id];
    json children = json::array();
    for (auto c : n.children) children.push_back(node_json(net, c));
    return {{"id", n.id},
            {"level", n.level},
            {"members", n.members},
            {"accumulated_info_nats", number(n.accumulated_info)},
            {"children", children}};
}

inline json to_json(const InfoNetwork& net) { return node_json(net, net.final_node().id); }

inline void write_network_csv(std::ostream& os, const InfoNetwork& net) {
    os << "level,node_id,info_nats\n";
    os << std::setprecision(17);
    for (const auto& n : net.nodes) os << n.level << ',' << n.id << ',' << n.accumulated_info << '\n';
}

inline json to_json(const RankedSpectrum& r) {
    json a = json::array();
    for (const auto& it : r.items)
        a.push_back({{"segment", it.entry.segment},
                     {"alpha", number(it.entry.alpha)},
                     {"duration", number(it.entry.duration)},
                     {"a_o", number(it.entry.a_o)},
                     {"contribution_nats", number(it.entry.contribution)},
                     {"a", number(it.entry.a)},
                     {"invariant_mismatch", it.invariant_mismatch}});
    return a;
}

inline json to_json(const CodeSpec& c) {
    return {{"D", number(c.D)},           {"D0", number(c.D0)},
            {"l_c", number(c.l_c)},       {"l_cs", number(c.l_cs)},
            {"l_c_ceil", number(c.l_c_ceil)}, {"l_cs_ceil", number(c.l_cs_ceil)},
            {"l_cs_floor", number(c.l_cs_floor)}};
}

}  // namespace ipf::io
