#pragma once

// Single-mode-fibre pair spectra for the crossed two-crystal source.
//
// Model: monochromatic plane-wave pump, signal at w_d + dw and idler at
// w_d - dw. The signal and idler fibre modes are Gaussian with waist w,
// pointing at exterior polar angles theta_s' and theta_i' along local
// azimuths phi and phi + pi. A pair with in-plane transverse wavevector q
// (signal) and -q (idler; the pump carries none) is collected with
// amplitude exp(-w^2 (q - q_s0)^2 / 4) exp(-w^2 (q - q_i0)^2 / 4), where
// q_j0 = (w_j / c) sin(theta_j') is the mode axis; transverse wavevector is
// continuous across the exit face. Inside the crystal q fixes each photon's
// polar angle through n(theta) (w/c) sin(theta) = q, and the longitudinal
// mismatch dk = k_p - k_s cos(theta_s) - k_i cos(theta_i) weights the pair
// with sinc^2(dk L / 2):
//
//     S(dw) = w / sqrt(pi) integral dq sinc^2(dk L / 2) exp(-w^2 [(q - q_s0)^2 + (q - q_i0)^2] / 2).
//
// The prefactor makes S = 1 for a zero-length crystal with coincident
// signal and idler mode axes.
//
// The out-of-plane transverse direction is left out (one-dimensional q).

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ringtrace/indicatrix.hpp"
#include "ringtrace/phasematch.hpp"

namespace ringtrace {

struct CollectionMode {
    double theta_ext = 0.0;  // signal mode axis, exterior polar angle from the pump, rad
    double phi = 0.0;        // crystal-local azimuth of the signal mode, rad
    double waist_um = 100.0;
    bool single_mode = true;
    // Idler mode axis at azimuth phi + pi; defaults to theta_ext.
    std::optional<double> idler_theta_ext;

    double idler_theta() const { return idler_theta_ext.value_or(theta_ext); }
};

struct FrequencyGrid {
    std::vector<double> offsets;  // rad/s around the degenerate frequency

    static FrequencyGrid uniform(double half_span, std::size_t points) {
        if (points < 3 || points % 2 == 0) throw ArgumentError("frequency grid needs an odd point count >= 3");
        if (!(half_span > 0.0)) throw ArgumentError("frequency grid span must be positive");
        FrequencyGrid g;
        const std::size_t half = points / 2;
        for (std::size_t k = 0; k < points; ++k) {
            g.offsets.push_back(half_span * (static_cast<double>(k) - static_cast<double>(half)) /
                                static_cast<double>(half));
        }
        g.offsets[half] = 0.0;
        return g;
    }

    static FrequencyGrid standard() { return uniform(6e13, 2001); }

    void validate() const {
        const auto n = offsets.size();
        if (n < 3) throw ArgumentError("frequency grid needs at least 3 points");
        const double scale = std::max(std::fabs(offsets.front()), std::fabs(offsets.back()));
        for (std::size_t k = 0; k < n; ++k) {
            if (!std::isfinite(offsets[k])) throw ArgumentError("frequency grid must be finite");
            if (k > 0 && !(offsets[k] > offsets[k - 1])) throw ArgumentError("frequency grid must be strictly increasing");
            if (std::fabs(offsets[k] + offsets[n - 1 - k]) > 1e-9 * scale) {
                throw ArgumentError("frequency grid must be symmetric about zero");
            }
        }
    }
};

struct SpectrumCurve {
    std::vector<double> grid;    // rad/s
    std::vector<double> values;  // arbitrary units, consistent across curves
    Wavelength degenerate{810.0};
};

struct SpectrumSettings {
    int q_points = 241;         // odd, Simpson rule
    double q_half_width = 6.0;  // in units of the Gaussian acceptance width
    unsigned threads = 1;
};

namespace detail {

inline double sinc(double x) { return std::fabs(x) < 1e-8 ? 1.0 - x * x / 6.0 : std::sin(x) / x; }

// Internal polar angle at which a photon of vacuum wavenumber k0 along
// `phi` in the pump frame carries transverse wavevector q.
inline double internal_angle_for_q(const PrincipalIndices& principal, const PumpFrame& f, double phi, double k0,
                                   double q, Branch branch, double guess) {
    double theta = guess;
    for (int it = 0; it < 60; ++it) {
        const double n = wave_normal_indices(principal, f.direction(theta, phi)).select(branch);
        const double s = q / (n * k0);
        if (!(std::fabs(s) < 1.0)) throw GeometryError("transverse wavevector exceeds the photon wavenumber");
        const double next = std::asin(s);
        if (std::fabs(next - theta) < 1e-15) return next;
        theta = next;
    }
    return theta;
}

}  // namespace detail

inline SpectrumCurve pair_spectrum(const PumpConfig& pump, const CollectionMode& mode, double crystal_length_mm,
                                   const FrequencyGrid& grid, const SpectrumSettings& settings = {}) {
    grid.validate();
    if (!(mode.waist_um > 0.0)) throw ArgumentError("collection waist must be positive");
    if (!(crystal_length_mm >= 0.0)) throw ArgumentError("crystal length must be non-negative");
    if (settings.q_points < 3 || settings.q_points % 2 == 0) throw ArgumentError("q_points must be odd and >= 3");

    const PumpFrame f = pump.frame();
    const double omega_p = pump.lambda_p.angular_frequency();
    const double omega_d = 0.5 * omega_p;
    const double k_p = branch_index(pump.species, pump.lambda_p, f.z, pump.pump_branch) * omega_p / kSpeedOfLight;
    const double w = mode.waist_um * 1e-6;
    const double half_l = 0.5 * crystal_length_mm * 1e-3;
    const double sigma_q = 1.0 / (w * std::sqrt(2.0));
    const double sin_s = std::sin(mode.theta_ext), sin_i = std::sin(mode.idler_theta());

    SpectrumCurve out;
    out.grid = grid.offsets;
    out.values.assign(grid.offsets.size(), 0.0);
    out.degenerate = Wavelength::from_angular_frequency(omega_d);

    auto evaluate = [&](std::size_t idx) {
        const double dw = grid.offsets[idx];
        const double omega_s = omega_d + dw, omega_i = omega_d - dw;
        const Wavelength lambda_s = Wavelength::from_angular_frequency(omega_s);
        const Wavelength lambda_i = Wavelength::from_angular_frequency(omega_i);
        const auto ns = pump.species.principal_indices(lambda_s);
        const auto ni = pump.species.principal_indices(lambda_i);
        const double k0s = omega_s / kSpeedOfLight, k0i = omega_i / kSpeedOfLight;
        const double qs0 = k0s * sin_s, qi0 = k0i * sin_i;
        const double qbar = 0.5 * (qs0 + qi0);
        const double lo = std::max(0.0, qbar - settings.q_half_width * sigma_q);
        const double hi = qbar + settings.q_half_width * sigma_q;
        const int m = settings.q_points;
        const double h = (hi - lo) / (m - 1);
        double theta_s = mode.theta_ext / 1.8, theta_i = mode.idler_theta() / 1.8;
        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            const double q = lo + h * j;
            theta_s = detail::internal_angle_for_q(ns, f, mode.phi, k0s, q, pump.daughter_branch, theta_s);
            theta_i = detail::internal_angle_for_q(ni, f, mode.phi + kPi, k0i, q, pump.daughter_branch, theta_i);
            const double n_s = wave_normal_indices(ns, f.direction(theta_s, mode.phi)).select(pump.daughter_branch);
            const double n_i =
                wave_normal_indices(ni, f.direction(theta_i, mode.phi + kPi)).select(pump.daughter_branch);
            const double dk = k_p - n_s * k0s * std::cos(theta_s) - n_i * k0i * std::cos(theta_i);
            const double s = detail::sinc(dk * half_l);
            const double g = std::exp(-0.5 * w * w * ((q - qs0) * (q - qs0) + (q - qi0) * (q - qi0)));
            const double weight = (j == 0 || j == m - 1) ? 1.0 : (j % 2 == 1 ? 4.0 : 2.0);
            sum += weight * s * s * g;
        }
        out.values[idx] = sum * h / 3.0 * w / std::sqrt(kPi);
    };

    const std::size_t n = grid.offsets.size();
    const unsigned threads = std::clamp<unsigned>(settings.threads, 1u, static_cast<unsigned>(n));
    if (threads == 1) {
        for (std::size_t k = 0; k < n; ++k) evaluate(k);
        return out;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t k = t; k < n; k += threads) evaluate(k);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

namespace detail {

inline double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
    double s = 0.0;
    for (std::size_t k = 1; k < x.size(); ++k) s += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
    return s;
}

inline void require_curve(const SpectrumCurve& s) {
    if (s.grid.size() != s.values.size() || s.grid.size() < 2) {
        throw ArgumentError("spectrum grid and values must have equal length >= 2");
    }
    for (double v : s.values) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ArgumentError("spectrum values must be finite and non-negative");
    }
}

}  // namespace detail

// Bhattacharyya coefficient of the two area-normalised curves.
inline double overlap_integral(const SpectrumCurve& s1, const SpectrumCurve& s2) {
    detail::require_curve(s1);
    detail::require_curve(s2);
    if (s1.grid != s2.grid) throw ArgumentError("overlap_integral needs identical frequency grids");
    const double a1 = detail::trapezoid(s1.grid, s1.values);
    const double a2 = detail::trapezoid(s2.grid, s2.values);
    if (!(a1 > 0.0) || !(a2 > 0.0)) throw ArgumentError("degenerate input: zero-area spectrum");
    std::vector<double> g(s1.values.size());
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::sqrt(s1.values[k] / a1 * s2.values[k] / a2);
    return std::clamp(detail::trapezoid(s1.grid, g), 0.0, 1.0);
}

struct JointRate {
    double rate = 0.0;
    double band_lo = 0.0;  // rad/s offsets actually integrated
    double band_hi = 0.0;
    bool truncated = false;
    std::vector<std::string> warnings;
};

// Integral of the curve over signal wavelengths lambda_d +- band/2.
inline JointRate joint_rate(const SpectrumCurve& s, double band_nm) {
    detail::require_curve(s);
    if (!(band_nm > 0.0) || !(band_nm < 2.0 * s.degenerate.nm)) throw ArgumentError("band must be positive and below 2 lambda_d");
    const double omega_d = s.degenerate.angular_frequency();
    JointRate r;
    r.band_lo = Wavelength{s.degenerate.nm + 0.5 * band_nm}.angular_frequency() - omega_d;
    r.band_hi = Wavelength{s.degenerate.nm - 0.5 * band_nm}.angular_frequency() - omega_d;
    if (r.band_lo < s.grid.front() || r.band_hi > s.grid.back()) {
        r.truncated = true;
        r.band_lo = std::max(r.band_lo, s.grid.front());
        r.band_hi = std::min(r.band_hi, s.grid.back());
        std::ostringstream msg;
        msg << "band of " << band_nm << " nm exceeds the frequency grid; integral truncated to the grid";
        r.warnings.push_back(msg.str());
    }
    auto interp = [&](double x) {
        const auto it = std::upper_bound(s.grid.begin(), s.grid.end(), x);
        if (it == s.grid.begin()) return s.values.front();
        if (it == s.grid.end()) return s.values.back();
        const auto k = static_cast<std::size_t>(it - s.grid.begin());
        const double t = (x - s.grid[k - 1]) / (s.grid[k] - s.grid[k - 1]);
        return s.values[k - 1] + t * (s.values[k] - s.values[k - 1]);
    };
    std::vector<double> x{r.band_lo}, y{interp(r.band_lo)};
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
        if (s.grid[k] > r.band_lo && s.grid[k] < r.band_hi) {
            x.push_back(s.grid[k]);
            y.push_back(s.values[k]);
        }
    }
    x.push_back(r.band_hi);
    y.push_back(interp(r.band_hi));
    r.rate = detail::trapezoid(x, y);
    return r;
}

// ---------------------------------------------------------------------------
// Crossed-crystal sandwich.

struct MidpointCollection {
    CollectionMode mode;
    double theta_ext_1 = 0.0;  // ring 1 and ring 2 at the signal azimuth
    double theta_ext_2 = 0.0;
    std::vector<std::string> warnings;
};

namespace detail {

inline double wrap_angle(double phi) {
    double p = std::fmod(phi, 2.0 * kPi);
    if (p < 0.0) p += 2.0 * kPi;
    return p;
}

// Exterior signal angle of a trace at azimuth phi, interpolating linearly
// between neighbours when phi is not sampled.
inline double trace_exterior_at(const RingTrace& t, double phi, std::vector<std::string>& warnings) {
    if (t.samples.empty()) throw ArgumentError("empty ring trace");
    const double p = wrap_angle(phi);
    for (const auto& s : t.samples) {
        double d = std::fabs(s.phi_s - p);
        d = std::min(d, 2.0 * kPi - d);
        if (d < 1e-9) return s.theta_s_ext;
    }
    std::size_t k = 0;
    while (k < t.samples.size() && t.samples[k].phi_s < p) ++k;
    const auto& b = t.samples[k % t.samples.size()];
    const auto& a = t.samples[(k + t.samples.size() - 1) % t.samples.size()];
    const double span = wrap_angle(b.phi_s - a.phi_s);
    const double x = wrap_angle(p - a.phi_s) / span;
    std::ostringstream msg;
    msg << "azimuth " << rad_to_deg(p) << " deg not sampled; interpolated between " << rad_to_deg(a.phi_s) << " and "
        << rad_to_deg(b.phi_s) << " deg";
    warnings.push_back(msg.str());
    return a.theta_s_ext + x * (b.theta_s_ext - a.theta_s_ext);
}

}  // namespace detail

// Mode pointing halfway between the two rings: signal at azimuth phi, idler
// at phi + pi, each at the bisector of the two rings' exterior angles there.
inline MidpointCollection midpoint_collection(const RingTrace& trace_1, const RingTrace& trace_2, double phi,
                                              double waist_um = 100.0) {
    MidpointCollection m;
    m.theta_ext_1 = detail::trace_exterior_at(trace_1, phi, m.warnings);
    m.theta_ext_2 = detail::trace_exterior_at(trace_2, phi, m.warnings);
    const double idler_1 = detail::trace_exterior_at(trace_1, phi + kPi, m.warnings);
    const double idler_2 = detail::trace_exterior_at(trace_2, phi + kPi, m.warnings);
    m.mode.theta_ext = 0.5 * (m.theta_ext_1 + m.theta_ext_2);
    m.mode.idler_theta_ext = 0.5 * (idler_1 + idler_2);
    m.mode.phi = detail::wrap_angle(phi);
    m.mode.waist_um = waist_um;
    return m;
}

// Ring of the second crystal: same cut, rotated 90 deg about the pump, so
// its value at lab azimuth phi is the first crystal's at phi - 90 deg.
inline RingTrace second_crystal_trace(const RingTrace& first) { return relabel_azimuth(first, kPi / 2); }

// Collection points of the crossed pair: A where the rings cross (45 deg),
// B where they are furthest apart (0 deg).
inline constexpr double kPointA = kPi / 4;
inline constexpr double kPointB = 0.0;

struct OverlapResult {
    double overlap = 0.0;
    double rate_1 = 0.0;  // joint rates over the reference band
    double rate_2 = 0.0;
    CollectionMode collection;
};

inline constexpr double kReferenceBandNm = 20.0;

struct SandwichSpectra {
    MidpointCollection collection;
    SpectrumCurve crystal_1;
    SpectrumCurve crystal_2;
    OverlapResult result;
};

inline SandwichSpectra sandwich_spectra(const PumpConfig& pump, Wavelength lambda_s, double phi, double waist_um,
                                        double crystal_length_mm, const FrequencyGrid& grid = FrequencyGrid::standard(),
                                        const SpectrumSettings& settings = {}, double band_nm = kReferenceBandNm,
                                        std::size_t trace_samples = 360) {
    const auto t1 = trace_ring(pump, lambda_s, trace_samples, settings.threads);
    const auto t2 = second_crystal_trace(t1);
    SandwichSpectra out;
    out.collection = midpoint_collection(t1, t2, phi, waist_um);
    out.crystal_1 = pair_spectrum(pump, out.collection.mode, crystal_length_mm, grid, settings);
    // Crystal 2 sees the same lab mode at its own azimuth phi - 90 deg.
    CollectionMode local = out.collection.mode;
    local.phi = detail::wrap_angle(local.phi - kPi / 2);
    out.crystal_2 = pair_spectrum(pump, local, crystal_length_mm, grid, settings);
    out.result.overlap = overlap_integral(out.crystal_1, out.crystal_2);
    out.result.rate_1 = joint_rate(out.crystal_1, band_nm).rate;
    out.result.rate_2 = joint_rate(out.crystal_2, band_nm).rate;
    out.result.collection = out.collection.mode;
    return out;
}

}  // namespace ringtrace
