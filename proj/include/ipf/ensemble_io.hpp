#pragma once

// Ensemble export/import. Formats are described in docs/FORMATS.md.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ipf/sde_engine.hpp"

namespace ipf::io {

inline constexpr std::array<char, 8> kEnsembleMagic{'I', 'P', 'F', 'E', 'N', 'S', '\0', '\1'};
inline constexpr std::uint32_t kEnsembleVersion = 1;

/// Columnar CSV: t,path_id,x1..xn; rows ordered by path then time.
inline void write_ensemble_csv(std::ostream& os, const TrajectoryEnsemble& ens) {
    os << "t,path_id";
    for (int i = 0; i < ens.dimension(); ++i) os << ",x" << (i + 1);
    os << '\n';
    os << std::setprecision(17);
    for (std::size_t p = 0; p < ens.paths(); ++p) {
        for (std::size_t k = 0; k < ens.recorded_nodes(); ++k) {
            os << ens.time(k) << ',' << p;
            const auto x = ens.state(p, k);
            for (int i = 0; i < ens.dimension(); ++i) os << ',' << x(i);
            os << '\n';
        }
    }
}

inline TrajectoryEnsemble read_ensemble_csv(std::istream& is, std::uint64_t master_seed = 0) {
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("ensemble csv: empty input");
    int n = 0;
    {
        std::stringstream hs(line);
        std::string col;
        std::vector<std::string> cols;
        while (std::getline(hs, col, ',')) cols.push_back(col);
        if (cols.size() < 3 || cols[0] != "t" || cols[1] != "path_id") throw ConfigError("ensemble csv: bad header");
        n = static_cast<int>(cols.size()) - 2;
    }
    std::vector<double> times;
    std::vector<std::vector<double>> rows_by_path;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
        if (static_cast<int>(vals.size()) != n + 2)
            throw ConfigError("ensemble csv: wrong column count on line " + std::to_string(lineno));
        const auto p = static_cast<std::size_t>(vals[1]);
        if (p >= rows_by_path.size()) rows_by_path.resize(p + 1);
        if (p == 0) times.push_back(vals[0]);
        rows_by_path[p].insert(rows_by_path[p].end(), vals.begin() + 2, vals.end());
    }
    if (rows_by_path.empty() || times.size() < 2) throw ConfigError("ensemble csv: need at least two time nodes");
    const std::size_t nodes = times.size();
    const TimeGrid grid{times.front(), times.back(), (times.back() - times.front()) / static_cast<double>(nodes - 1), nodes};
    TrajectoryEnsemble ens(grid, 1, n, rows_by_path.size(), master_seed, ControlSchedule::off(n));
    for (std::size_t p = 0; p < rows_by_path.size(); ++p) {
        if (rows_by_path[p].size() != nodes * static_cast<std::size_t>(n))
            throw ConfigError("ensemble csv: path " + std::to_string(p) + " has a different node count");
        for (std::size_t k = 0; k < nodes; ++k)
            ens.state(p, k) = Eigen::Map<const Vector>(rows_by_path[p].data() + k * static_cast<std::size_t>(n), n);
    }
    return ens;
}

namespace detail {

template <class T>
void put(std::ostream& os, T v) {
    static_assert(std::endian::native == std::endian::little, "binary container assumes a little-endian host");
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!is) throw ConfigError("ensemble binary: truncated input");
    return v;
}

}  // namespace detail

inline void write_ensemble_binary(std::ostream& os, const TrajectoryEnsemble& ens) {
    os.write(kEnsembleMagic.data(), kEnsembleMagic.size());
    detail::put<std::uint32_t>(os, kEnsembleVersion);
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(ens.dimension()));
    detail::put<std::uint64_t>(os, ens.paths());
    detail::put<std::uint64_t>(os, ens.recorded_nodes());
    detail::put<double>(os, ens.grid().t0);
    detail::put<double>(os, ens.record_step());
    // seed record
    detail::put<std::uint64_t>(os, ens.master_seed());
    detail::put<std::uint64_t>(os, ens.stride());
    detail::put<double>(os, ens.grid().h);
    for (double v : ens.raw_states()) detail::put<double>(os, v);
}

inline TrajectoryEnsemble read_ensemble_binary(std::istream& is) {
    std::array<char, 8> magic{};
    is.read(magic.data(), magic.size());
    if (!is || magic != kEnsembleMagic) throw ConfigError("ensemble binary: bad magic");
    if (detail::get<std::uint32_t>(is) != kEnsembleVersion) throw ConfigError("ensemble binary: unsupported version");
    const auto n = static_cast<int>(detail::get<std::uint32_t>(is));
    const auto m = detail::get<std::uint64_t>(is);
    const auto nodes = detail::get<std::uint64_t>(is);
    const double t0 = detail::get<double>(is);
    const double step = detail::get<double>(is);
    const auto seed = detail::get<std::uint64_t>(is);
    (void)detail::get<std::uint64_t>(is);  // integration stride
    (void)detail::get<double>(is);         // integration step
    if (n < 1 || m < 1 || nodes < 2) throw ConfigError("ensemble binary: bad dimensions");
    const TimeGrid grid{t0, t0 + step * static_cast<double>(nodes - 1), step, static_cast<std::size_t>(nodes)};
    TrajectoryEnsemble ens(grid, 1, n, m, seed, ControlSchedule::off(n));
    for (double& v : ens.raw_states()) v = detail::get<double>(is);
    return ens;
}

}  // namespace ipf::io
