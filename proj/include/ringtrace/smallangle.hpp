#pragma once

// Second-order small-angle model of the degenerate ring near the collinear
// threshold.
//
// With the pump at theta_p0 + delta and the daughters at signed angles
// alpha = +theta_s (signal) and alpha = -theta_i (idler) along one local
// azimuth, each index is expanded to second order in (delta, alpha) about the
// collinear point:
//
//     n(delta, alpha) = n~ + fp delta + fa alpha
//                       + fpp delta^2 / 2 + fpa delta alpha + faa alpha^2 / 2
//     n_p(delta)      = n~ + gp delta + gpp delta^2 / 2
//
// and substituted into the longitudinal and transverse matching conditions
//
//     n_s (1 - theta_s^2 / 2) + n_i (1 - theta_i^2 / 2) = 2 n_p
//     n_s theta_s = n_i theta_i.
//
// Eliminating theta_s - theta_i to leading order gives the closed form
//
//     theta_s^2 + theta_i^2 = -[2 (fp - gp) delta + (fpp - gpp) delta^2]
//                             / [(faa - n~) / 2 - fa^2 / n~],
//
// used as the starting point for a Newton solve of the polynomial system.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ringtrace/indicatrix.hpp"
#include "ringtrace/numeric.hpp"
#include "ringtrace/phasematch.hpp"

namespace ringtrace {

// Daughter wavelength of the design point for the wavelength sweep.
inline constexpr Wavelength kDesignWavelength{810.0};

struct ExpansionPoint {
    CrystalSpecies species;
    double phi_p = 0.0;
    double theta_p0 = 0.0;     // collinear degenerate pump angle at lambda
    double delta_theta_p = 0.0;
    Wavelength lambda{810.0};  // degenerate daughter wavelength; pump at lambda / 2
    double n_tilde = 0.0;      // daughter (slow) index at the collinear point
    double n_pump = 0.0;       // pump (fast) index at theta_p0
    IndexDerivatives along_0;   // daughter derivatives, signal tilted towards phi_s = 0
    IndexDerivatives along_90;  // same towards phi_s = 90 deg
    IndexDerivatives pump;      // pump derivatives (d_pump, d2_pump used)
    double collinear_residual = 0.0;
    Branch pump_branch = Branch::Fast;
    Branch daughter_branch = Branch::Slow;

    Wavelength lambda_p() const { return Wavelength{lambda.nm / 2.0}; }
    double theta_p() const { return theta_p0 + delta_theta_p; }
};

// Expansion at a given collinear angle and detuning.
inline ExpansionPoint make_expansion(const CrystalSpecies& species, double phi_p, double theta_p0,
                                     double delta_theta_p, Wavelength lambda,
                                     Branch pump_branch = Branch::Fast,
                                     Branch daughter_branch = Branch::Slow) {
    ExpansionPoint e;
    e.species = species;
    e.phi_p = phi_p;
    e.theta_p0 = theta_p0;
    e.delta_theta_p = delta_theta_p;
    e.lambda = lambda;
    e.pump_branch = pump_branch;
    e.daughter_branch = daughter_branch;
    e.along_0 = index_derivatives(species, lambda, theta_p0, phi_p, 0.0, 0.0, daughter_branch);
    e.along_90 = index_derivatives(species, lambda, theta_p0, phi_p, 0.0, kPi / 2, daughter_branch);
    e.pump = index_derivatives(species, e.lambda_p(), theta_p0, phi_p, 0.0, 0.0, pump_branch);
    e.n_tilde = e.along_0.n;
    e.n_pump = e.pump.n;
    e.collinear_residual =
        std::fabs(collinear_mismatch(species, theta_p0, phi_p, e.lambda_p(), lambda, pump_branch, daughter_branch));
    if (!(e.collinear_residual < 1e-10)) {
        std::ostringstream msg;
        msg << "theta_p0 = " << rad_to_deg(theta_p0) << " deg is not a collinear phase-matching angle at "
            << lambda.nm << " nm (residual " << e.collinear_residual << ")";
        throw ArgumentError(msg.str());
    }
    return e;
}

// Expansion for a pump at theta_p, detuned from the collinear angle of the
// same wavelength.
inline ExpansionPoint expansion_at(const CrystalSpecies& species, double phi_p, double theta_p, Wavelength lambda,
                                   Branch pump_branch = Branch::Fast, Branch daughter_branch = Branch::Slow) {
    const Wavelength lp{lambda.nm / 2.0};
    const double t0 = collinear_pump_angle(species, phi_p, lp, lambda, theta_p, pump_branch, daughter_branch);
    return make_expansion(species, phi_p, t0, theta_p - t0, lambda, pump_branch, daughter_branch);
}

// Expansion for the wavelength sweep: the detuning is fixed by the crystal
// cut at the design wavelength, delta = theta_p - theta_p0(design), and the
// indices are expanded about the collinear angle of `lambda` in the same
// root family.
inline ExpansionPoint sweep_expansion(const CrystalSpecies& species, double phi_p, double theta_p, Wavelength lambda,
                                      Wavelength design = kDesignWavelength, Branch pump_branch = Branch::Fast,
                                      Branch daughter_branch = Branch::Slow) {
    const double t_design = collinear_pump_angle(species, phi_p, Wavelength{design.nm / 2.0}, design, theta_p,
                                                 pump_branch, daughter_branch);
    const double t0 = collinear_pump_angle(species, phi_p, Wavelength{lambda.nm / 2.0}, lambda, t_design,
                                           pump_branch, daughter_branch);
    return make_expansion(species, phi_p, t0, theta_p - t_design, lambda, pump_branch, daughter_branch);
}

struct ExpansionEmission {
    double theta_s_90 = 0.0;        // internal, theta_s = theta_i at 90 deg
    double delta_theta_s_0 = 0.0;   // theta_s(0) - theta_s(90)
    double delta_theta_s_180 = 0.0; // theta_s(180) - theta_s(90)
    double n_s_0 = 0.0;             // expanded indices at the three azimuths
    double n_s_90 = 0.0;
    double n_s_180 = 0.0;

    double theta_s_0() const { return theta_s_90 + delta_theta_s_0; }
    double theta_s_180() const { return theta_s_90 + delta_theta_s_180; }
};

namespace detail {

struct AzimuthCoefficients {
    double a;   // n~ + fp delta + fpp delta^2 / 2
    double b;   // fa + fpa delta
    double c;   // faa / 2
    double np;  // expanded pump index
};

inline AzimuthCoefficients azimuth_coefficients(const ExpansionPoint& e, const IndexDerivatives& d, double sign) {
    const double dl = e.delta_theta_p;
    return {e.n_tilde + d.d_pump * dl + 0.5 * d.d2_pump * dl * dl, sign * (d.d_signal + d.d2_mixed * dl),
            0.5 * d.d2_signal, e.n_pump + e.pump.d_pump * dl + 0.5 * e.pump.d2_pump * dl * dl};
}

// Closed-form leading-order sum of squares theta_s^2 + theta_i^2.
inline double expansion_q(const ExpansionPoint& e, const IndexDerivatives& d) {
    const double dl = e.delta_theta_p;
    const double num = 2.0 * (d.d_pump - e.pump.d_pump) * dl + (d.d2_pump - e.pump.d2_pump) * dl * dl;
    const double den = 0.5 * (d.d2_signal - e.n_tilde) - d.d_signal * d.d_signal / e.n_tilde;
    return -num / den;
}

struct AzimuthAngles {
    double theta_s;
    double theta_i;
    double n_s;
};

inline AzimuthAngles solve_azimuth(const ExpansionPoint& e, const IndexDerivatives& d, double sign) {
    const double q = expansion_q(e, d);
    if (!(q >= 0.0)) {
        std::ostringstream msg;
        msg << "no ring at this detuning (delta theta_p = " << rad_to_deg(e.delta_theta_p)
            << " deg at " << e.lambda.nm << " nm)";
        throw NoSolutionError(msg.str());
    }
    if (q == 0.0) return {0.0, 0.0, e.n_tilde};
    const auto k = azimuth_coefficients(e, d, sign);
    const double diff = -k.b * q / e.n_tilde;
    const double sum = std::sqrt(std::max(0.0, 2.0 * q - diff * diff));
    Eigen::Vector2d x(0.5 * (sum + diff), 0.5 * (sum - diff));

    auto ns = [&](double t) { return k.a + k.b * t + k.c * t * t; };
    auto ni = [&](double t) { return k.a - k.b * t + k.c * t * t; };
    auto residual = [&](const Eigen::Vector2d& v) {
        return Eigen::Vector2d(ns(v[0]) * (1.0 - 0.5 * v[0] * v[0]) + ni(v[1]) * (1.0 - 0.5 * v[1] * v[1]) - 2.0 * k.np,
                               ns(v[0]) * v[0] - ni(v[1]) * v[1]);
    };
    for (int it = 0; it < 50; ++it) {
        const Eigen::Vector2d f = residual(x);
        const double ts = x[0], ti = x[1];
        const double dns = k.b + 2.0 * k.c * ts, dni = -k.b + 2.0 * k.c * ti;
        Eigen::Matrix2d jac;
        jac << dns * (1.0 - 0.5 * ts * ts) - ns(ts) * ts, dni * (1.0 - 0.5 * ti * ti) - ni(ti) * ti,
            dns * ts + ns(ts), -(dni * ti + ni(ti));
        const Eigen::Vector2d step = jac.fullPivLu().solve(-f);
        x += step;
        if (step.norm() < 1e-16) break;
    }
    if (!(residual(x).norm() < 1e-12) || x[0] < 0.0 || x[1] < 0.0) {
        throw ConvergenceError("expansion system did not converge", residual(x).norm());
    }
    return {x[0], x[1], ns(x[0])};
}

}  // namespace detail

// Emission angles of the expanded model at phi_s = 0, 90 and 180 deg.
inline ExpansionEmission emission_from_expansion(const ExpansionPoint& e) {
    const auto a0 = detail::solve_azimuth(e, e.along_0, 1.0);
    const auto a90 = detail::solve_azimuth(e, e.along_90, 1.0);
    const auto a180 = detail::solve_azimuth(e, e.along_0, -1.0);
    ExpansionEmission out;
    out.theta_s_90 = a90.theta_s;
    out.delta_theta_s_0 = a0.theta_s - a90.theta_s;
    out.delta_theta_s_180 = a180.theta_s - a90.theta_s;
    out.n_s_0 = a0.n_s;
    out.n_s_90 = a90.n_s;
    out.n_s_180 = a180.n_s;
    return out;
}

struct EccentricityEstimate {
    double internal = 0.0;
    double external = 0.0;
    double radius_ratio = 1.0;  // mean diameter along phi_s = 0 over that along 90 deg
    bool threshold_limit = false;  // delta = 0: the ratio is the delta -> 0 limit
};

// Leading-order ratio of the 0 and 90 deg diameters as the detuning vanishes.
inline double threshold_radius_ratio(const ExpansionPoint& e) {
    const double n = e.n_tilde;
    const double fa = e.along_0.d_signal;
    const double r2 = (n - e.along_90.d2_signal) / (n - e.along_0.d2_signal + 2.0 * fa * fa / n);
    return std::sqrt(r2);
}

// Ring eccentricity from the expanded model: the ratio of the mean
// 0/180 deg radius to the 90 deg radius, r = (2 theta_90 + dtheta_0 +
// dtheta_180) / (2 theta_90), and eps = sqrt(1 - r^(+-2)) with the exponent
// that keeps the bracket non-negative.
inline EccentricityEstimate eccentricity_estimate(const ExpansionPoint& e) {
    EccentricityEstimate out;
    if (e.delta_theta_p == 0.0) {
        out.radius_ratio = threshold_radius_ratio(e);
        out.threshold_limit = true;
        out.internal = out.external = eccentricity_from_axes(out.radius_ratio, 1.0);
        return out;
    }
    const auto em = emission_from_expansion(e);
    if (em.theta_s_90 <= 0.0) throw NoSolutionError("no ring at this detuning (zero radius)");
    out.radius_ratio = (2.0 * em.theta_s_90 + em.delta_theta_s_0 + em.delta_theta_s_180) / (2.0 * em.theta_s_90);
    out.internal = eccentricity_from_axes(out.radius_ratio, 1.0);
    const double t0 = std::tan(refract_external(em.n_s_0, em.theta_s_0()));
    const double t180 = std::tan(refract_external(em.n_s_180, em.theta_s_180()));
    const double t90 = std::tan(refract_external(em.n_s_90, em.theta_s_90));
    out.external = eccentricity_from_axes(0.5 * (t0 + t180), t90);
    return out;
}

struct EccTerms {
    double term1 = 0.0;  // d2n/dtheta_s2 towards phi_s = 0
    double term2 = 0.0;  // d2n/dtheta_s2 towards phi_s = 90 deg
    double term3 = 0.0;  // (2 / n~) (dn/dtheta_s towards phi_s = 0)^2
    double estimate = 0.0;  // term1 - term2 - term3
};

inline EccTerms eccentricity_terms(const ExpansionPoint& e) {
    EccTerms t;
    t.term1 = e.along_0.d2_signal;
    t.term2 = e.along_90.d2_signal;
    t.term3 = 2.0 / e.n_tilde * e.along_0.d_signal * e.along_0.d_signal;
    t.estimate = t.term1 - t.term2 - t.term3;
    return t;
}

// ---------------------------------------------------------------------------
// Wavelength sweep at a fixed crystal cut.

struct SweepSettings {
    Wavelength design = kDesignWavelength;
    double coarse_step_nm = 2.0;
    double tolerance_nm = 0.01;
    Branch pump_branch = Branch::Fast;
    Branch daughter_branch = Branch::Slow;
};

inline double sweep_eccentricity(const CrystalSpecies& species, double phi_p, double theta_p, Wavelength lambda,
                                 const SweepSettings& s = {}) {
    return eccentricity_estimate(
               sweep_expansion(species, phi_p, theta_p, lambda, s.design, s.pump_branch, s.daughter_branch))
        .internal;
}

struct MinEccentricity {
    double lambda_star_nm = 0.0;
    double ecc_at_min = 0.0;
    double bracket_lo_nm = 0.0;
    double bracket_hi_nm = 0.0;
    double theta_p = 0.0;
    bool at_bracket_edge = false;
    std::vector<std::string> warnings;
};

inline MinEccentricity min_eccentricity_wavelength(const CrystalSpecies& species, double phi_p, double theta_p,
                                                   double lo_nm, double hi_nm, const SweepSettings& s = {}) {
    if (!(lo_nm < hi_nm)) throw ArgumentError("wavelength bracket must satisfy lo < hi");
    if (!(s.coarse_step_nm > 0.0)) throw ArgumentError("coarse step must be positive");
    auto eps = [&](double nm) {
        try {
            return sweep_eccentricity(species, phi_p, theta_p, Wavelength{nm}, s);
        } catch (const NumericError&) {
            return std::numeric_limits<double>::infinity();
        }
    };
    const int steps = std::max(1, static_cast<int>(std::ceil((hi_nm - lo_nm) / s.coarse_step_nm - 1e-9)));
    int best = -1;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<double> grid;
    for (int k = 0; k <= steps; ++k) {
        const double nm = std::min(hi_nm, lo_nm + k * s.coarse_step_nm);
        grid.push_back(nm);
        const double v = eps(nm);
        if (v < best_val) {
            best_val = v;
            best = k;
        }
    }
    if (best < 0) {
        std::ostringstream msg;
        msg << "no ring anywhere in [" << lo_nm << ", " << hi_nm << "] nm at theta_p = " << rad_to_deg(theta_p)
            << " deg";
        throw NoSolutionError(msg.str());
    }
    MinEccentricity out;
    out.bracket_lo_nm = lo_nm;
    out.bracket_hi_nm = hi_nm;
    out.theta_p = theta_p;
    const double a = grid[std::max(0, best - 1)];
    const double b = grid[std::min(steps, best + 1)];
    const int bits = static_cast<int>(std::ceil(-std::log2(s.tolerance_nm / hi_nm))) + 2;
    const auto m = numeric::minimize(eps, a, b, bits);
    out.lambda_star_nm = m.value <= best_val ? m.x : grid[best];
    out.ecc_at_min = std::min(m.value, best_val);
    out.at_bracket_edge = best == 0 || best == steps;
    if (out.at_bracket_edge) {
        std::ostringstream msg;
        msg << "minimum at the bracket edge (" << out.lambda_star_nm << " nm); widen the bracket";
        out.warnings.push_back(msg.str());
    }
    return out;
}

// Wavelength where term1 = term2 in [lo, hi], expanded about the collinear
// angle of each wavelength.
inline std::optional<double> term_crossing_wavelength(const CrystalSpecies& species, double phi_p, double theta_p,
                                                      double lo_nm, double hi_nm, const SweepSettings& s = {}) {
    auto diff = [&](double nm) {
        const auto t = eccentricity_terms(
            sweep_expansion(species, phi_p, theta_p, Wavelength{nm}, s.design, s.pump_branch, s.daughter_branch));
        return t.term1 - t.term2;
    };
    const int steps = std::max(1, static_cast<int>(std::ceil((hi_nm - lo_nm) / s.coarse_step_nm)));
    const auto brackets = numeric::scan_sign_changes(diff, lo_nm, hi_nm, steps);
    if (brackets.empty()) return std::nullopt;
    const auto& b = brackets.front();
    return numeric::find_root(diff, b.lo, b.hi, s.tolerance_nm, b.f_lo, b.f_hi);
}

}  // namespace ringtrace
