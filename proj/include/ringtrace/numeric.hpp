#pragma once

// Thin wrappers around Boost.Math's bracketing solvers so the rest of the
// library can speak in terms of (function, interval, tolerance).

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ringtrace/errors.hpp"

namespace ringtrace::numeric {

// Root of f in [lo, hi] with f(lo), f(hi) of opposite sign. Terminates when
// the bracket is narrower than abs_tol.
template <typename F>
double find_root(F&& f, double lo, double hi, double abs_tol, double f_lo, double f_hi,
                 std::uintmax_t max_iter = 200) {
    if (lo > hi) {
        std::swap(lo, hi);
        std::swap(f_lo, f_hi);
    }
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        throw NoSolutionError("root not bracketed in [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
    }
    auto tol = [abs_tol](double a, double b) { return std::fabs(b - a) <= abs_tol; };
    std::uintmax_t iters = max_iter;
    auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f_lo, f_hi, tol, iters);
    if (iters >= max_iter) {
        throw ConvergenceError("bracketing root solve hit the iteration cap",
                               std::fabs(b - a));
    }
    // Return the endpoint with the smaller residual.
    return std::fabs(f(a)) <= std::fabs(f(b)) ? a : b;
}

template <typename F>
double find_root(F&& f, double lo, double hi, double abs_tol) {
    return find_root(f, lo, hi, abs_tol, f(lo), f(hi));
}

struct Bracket {
    double lo;
    double hi;
    double f_lo;
    double f_hi;
};

// Uniform scan for sign changes. Points where f throws are treated as gaps.
template <typename F>
std::vector<Bracket> scan_sign_changes(F&& f, double lo, double hi, int steps) {
    std::vector<Bracket> out;
    bool have_prev = false;
    double x_prev = 0.0, f_prev = 0.0;
    for (int k = 0; k <= steps; ++k) {
        const double x = lo + (hi - lo) * k / steps;
        double fx = 0.0;
        try {
            fx = f(x);
        } catch (const NumericError&) {
            have_prev = false;
            continue;
        }
        if (!std::isfinite(fx)) {
            have_prev = false;
            continue;
        }
        if (have_prev && ((f_prev > 0.0) != (fx > 0.0) || fx == 0.0)) out.push_back({x_prev, x, f_prev, fx});
        have_prev = true;
        x_prev = x;
        f_prev = fx;
    }
    return out;
}

struct Minimum {
    double x;
    double value;
};

// Brent's method (golden section with parabolic steps) on [lo, hi].
template <typename F>
Minimum minimize(F&& f, double lo, double hi, int bits = 30, std::uintmax_t max_iter = 200) {
    std::uintmax_t iters = max_iter;
    auto [x, fx] = boost::math::tools::brent_find_minima(f, lo, hi, bits, iters);
    return {x, fx};
}

}  // namespace ringtrace::numeric
