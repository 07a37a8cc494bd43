#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>
#include <algorithm>
#include <sstream>
#include <utility>

#include <boost/math/tools/toms748_solve.hpp>

#include "ipf/errors.hpp"

namespace ipf::roots {

struct Bracket {
    double lo;
    double hi;
};

struct Root {
    double x;
    double residual;
    std::uintmax_t iterations;
};

/// First sign change of f on (a, b] sampled at `steps` uniform points.
/// An exact zero at a sample point yields a degenerate bracket [x, x].
template <class F>
std::optional<Bracket> scan_first_bracket(F&& f, double a, double b, std::size_t steps) {
    const double h = (b - a) / static_cast<double>(steps);
    double x_prev = a;
    double f_prev = f(a);
    for (std::size_t i = 1; i <= steps; ++i) {
        const double x = (i == steps) ? b : a + h * static_cast<double>(i);
        const double fx = f(x);
        if (!std::isfinite(fx)) {
            x_prev = x;
            f_prev = fx;
            continue;
        }
        if (fx == 0.0) return Bracket{x, x};
        if (std::isfinite(f_prev) && (f_prev < 0.0) != (fx < 0.0)) return Bracket{x_prev, x};
        x_prev = x;
        f_prev = fx;
    }
    return std::nullopt;
}

/// Polish a bracketed root to full double precision.
template <class F>
Root polish(F&& f, Bracket br) {
    if (br.lo == br.hi) return {br.lo, f(br.lo), 0};
    std::uintmax_t iters = 200;
    const auto [lo, hi] = boost::math::tools::toms748_solve(
        f, br.lo, br.hi, boost::math::tools::eps_tolerance<double>(52), iters);
    const double flo = f(lo);
    const double fhi = f(hi);
    return std::abs(flo) <= std::abs(fhi) ? Root{lo, flo, iters} : Root{hi, fhi, iters};
}

/// Smallest root of f on (a, b]: bracketing scan followed by polishing.
template <class F>
Root first_root(F&& f, double a, double b, std::size_t steps, const std::string& what) {
    const auto br = scan_first_bracket(f, a, b, steps);
    if (!br) {
        std::ostringstream os;
        os << what << ": no sign change found in (" << a << ", " << b << "]";
        throw NoRootError(os.str());
    }
    return polish(f, *br);
}

/// Every root of f on (a, b] found by the scan, in ascending order.
template <class F>
std::vector<Root> all_roots(F&& f, double a, double b, std::size_t steps) {
    std::vector<Root> out;
    double lo = a;
    while (lo < b) {
        const auto br = scan_first_bracket(f, lo, b, steps);
        if (!br) break;
        out.push_back(polish(f, *br));
        const double next = br->hi + (b - a) * 1e-12;
        // restart the scan just after the bracket so the next sign change is picked up
        steps = std::max<std::size_t>(2, static_cast<std::size_t>(steps * (b - next) / (b - lo)));
        lo = next;
    }
    return out;
}

}  // namespace ipf::roots
