#pragma once

// Ordering of segment spectra, accumulated process information, code-length
// bounds and the triplet-aggregated information network.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "ipf/errors.hpp"
#include "ipf/linalg.hpp"

namespace ipf {

struct SpectrumEntry {
    std::size_t segment = 0;
    double alpha = 0.0;       ///< starting real eigenvalue of the segment
    double duration = 0.0;    ///< segment interval t
    Nats a_o = 0.0;           ///< segment invariant
    Nats contribution = 0.0;  ///< information carried into the network
    Nats a = 0.0;             ///< control invariant of the segment
};

struct RankedItem {
    SpectrumEntry entry;
    bool invariant_mismatch = false;  ///< |alpha t - a_o| > 10% of |a_o|
};

struct RankedSpectrum {
    std::vector<RankedItem> items;
};

/// |alpha| descending, ties broken by segment index.
inline RankedSpectrum rank_spectrum(std::vector<SpectrumEntry> entries) {
    if (entries.empty()) throw ConfigError("rank_spectrum: no segments");
    for (const auto& e : entries)
        if (e.alpha == 0.0) throw DomainError("rank_spectrum: segment " + std::to_string(e.segment) + " has alpha = 0");
    std::sort(entries.begin(), entries.end(), [](const SpectrumEntry& a, const SpectrumEntry& b) {
        if (std::abs(a.alpha) != std::abs(b.alpha)) return std::abs(a.alpha) > std::abs(b.alpha);
        return a.segment < b.segment;
    });
    RankedSpectrum out;
    for (const auto& e : entries) {
        const double realized = e.alpha * e.duration;
        out.items.push_back({e, std::abs(realized - e.a_o) > 0.1 * std::abs(e.a_o)});
    }
    return out;
}

struct ProcessInfo {
    Nats full = 0.0;     ///< sum(a_o + 2a)
    Nats predict = 0.0;  ///< sum(a_o)
    Nats full_squared = 0.0;  ///< sum(a_o + a_o^2), the alternative reading
};

inline ProcessInfo total_process_info(const std::vector<std::pair<Nats, Nats>>& pairs) {
    ProcessInfo out;
    for (const auto& [a_o, a] : pairs) {
        out.full += a_o + 2.0 * a;
        out.predict += a_o;
        out.full_squared += a_o + a_o * a_o;
    }
    return out;
}

struct CodeSpec {
    double D = 2.0;
    double D0 = 2.0;
    double l_c = 0.0;   ///< S_predict / ln D
    double l_cs = 0.0;  ///< a_o[bits] / log2 D0
    double l_c_ceil = 0.0;
    double l_cs_ceil = 0.0;
    double l_cs_floor = 0.0;  ///< integer reading of the per-segment bound
};

inline CodeSpec codeword_lengths(Nats s_predict, double a_o_bits, double D, double D0) {
    if (!(D >= 2.0) || !(D0 >= 2.0)) throw DomainError("codeword_lengths: alphabet sizes must be >= 2");
    CodeSpec c;
    c.D = D;
    c.D0 = D0;
    c.l_c = s_predict / std::log(D);
    c.l_cs = a_o_bits / std::log2(D0);
    c.l_c_ceil = std::ceil(c.l_c);
    c.l_cs_ceil = std::ceil(c.l_cs);
    c.l_cs_floor = std::floor(c.l_cs);
    return c;
}

struct InNode {
    std::size_t id = 0;
    int level = 0;
    std::vector<std::size_t> members;   ///< segment indices held directly
    std::vector<std::size_t> children;  ///< node ids
    Nats accumulated_info = 0.0;
};

struct InfoNetwork {
    std::vector<InNode> nodes;  ///< the final node is last
    const InNode& final_node() const { return nodes.back(); }
};

/// Greedy consecutive triplets on the ranked order. Each level groups its
/// items by three; leftovers (n mod 3) are carried to the final node, which
/// also takes whatever remains once a level has at most three items.
inline InfoNetwork build_network(const RankedSpectrum& ranked) {
    if (ranked.items.empty()) throw ConfigError("build_network: no segments");
    struct Item {
        bool is_node;
        std::size_t index;
        Nats info;
    };
    InfoNetwork net;
    std::vector<Item> level_items;
    for (const auto& it : ranked.items) level_items.push_back({false, it.entry.segment, it.entry.contribution});
    std::vector<Item> carried;
    int level = 1;

    auto make_node = [&net](int lvl, const std::vector<Item>& parts) {
        InNode node;
        node.id = net.nodes.size();
        node.level = lvl;
        for (const auto& p : parts) {
            (p.is_node ? node.children : node.members).push_back(p.index);
            node.accumulated_info += p.info;
        }
        net.nodes.push_back(node);
        return Item{true, node.id, node.accumulated_info};
    };

    while (level_items.size() > 3) {
        std::vector<Item> next;
        const std::size_t full = level_items.size() / 3 * 3;
        for (std::size_t i = 0; i < full; i += 3)
            next.push_back(make_node(level, {level_items[i], level_items[i + 1], level_items[i + 2]}));
        carried.insert(carried.end(), level_items.begin() + static_cast<std::ptrdiff_t>(full), level_items.end());
        level_items = std::move(next);
        ++level;
    }
    std::vector<Item> last = level_items;
    last.insert(last.end(), carried.begin(), carried.end());
    make_node(level, last);
    return net;
}

/// phi = arctg[(x2 - x1)/(x2 + x1)], principal value.
inline double consolidation_angle(double x1, double x2) {
    if (x1 + x2 == 0.0) throw DomainError("consolidation_angle: undefined for x1 + x2 = 0");
    return std::atan((x2 - x1) / (x2 + x1));
}

}  // namespace ipf
