#pragma once

// Noncollinear Type-I phase matching: emission angles around the
// down-conversion ring, refraction to exterior angles, pump-angle inference
// and ring eccentricity.
//
// Geometry: the pump travels along z' of its PumpFrame. The signal leaves at
// local polar angle theta_s and azimuth phi_s, the idler at theta_i and
// phi_s + pi, so both daughters and the pump share one plane and the
// out-of-plane mismatch vanishes identically. The remaining two components
// (along z' and along the in-plane transverse direction) are driven to zero.

#include <algorithm>
#include <cmath>
#include <exception>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ringtrace/dispersion.hpp"
#include "ringtrace/errors.hpp"
#include "ringtrace/indicatrix.hpp"
#include "ringtrace/numeric.hpp"
#include "ringtrace/units.hpp"

namespace ringtrace {

struct PumpConfig {
    CrystalSpecies species;
    Wavelength lambda_p{405.0};
    double theta_p = 0.0;  // rad, crystal frame, (0, pi)
    double phi_p = 0.0;    // rad
    Branch pump_branch = Branch::Fast;
    Branch daughter_branch = Branch::Slow;

    PumpFrame frame() const { return PumpFrame::from_angles(theta_p, phi_p); }
};

struct MismatchVector {
    // Pump-local components of k_p - k_s - k_i, rad/m.
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    // Transverse component along the emission azimuth and perpendicular to it.
    double in_plane = 0.0;
    double out_of_plane = 0.0;
    double k_pump = 0.0;  // |k_p|, rad/m
    double n_p = 0.0;
    double n_s = 0.0;
    double n_i = 0.0;

    double norm() const { return std::sqrt(x * x + y * y + z * z); }
};

inline MismatchVector mismatch(const PumpConfig& pump, double theta_s, double theta_i, double phi_s,
                               Wavelength lambda_s) {
    const Wavelength lambda_i = idler_wavelength(pump.lambda_p, lambda_s);
    const PumpFrame f = pump.frame();
    const Vec3 s_dir = f.direction(theta_s, phi_s);
    const Vec3 i_dir = f.direction(theta_i, phi_s + kPi);

    MismatchVector m;
    m.n_p = branch_index(pump.species, pump.lambda_p, f.z, pump.pump_branch);
    m.n_s = branch_index(pump.species, lambda_s, s_dir, pump.daughter_branch);
    m.n_i = branch_index(pump.species, lambda_i, i_dir, pump.daughter_branch);

    m.k_pump = m.n_p * pump.lambda_p.vacuum_wavenumber();
    const double k_s = m.n_s * lambda_s.vacuum_wavenumber();
    const double k_i = m.n_i * lambda_i.vacuum_wavenumber();

    const Vec3 dk = m.k_pump * f.z - k_s * s_dir - k_i * i_dir;
    const Vec3 local = f.to_local(dk);
    m.x = local.x();
    m.y = local.y();
    m.z = local.z();
    m.in_plane = local.x() * std::cos(phi_s) + local.y() * std::sin(phi_s);
    m.out_of_plane = -local.x() * std::sin(phi_s) + local.y() * std::cos(phi_s);
    return m;
}

// Snell refraction through an exit face normal to the pump.
inline double refract_external(double n, double theta_internal) {
    const double s = n * std::sin(theta_internal);
    if (!(std::fabs(s) <= 1.0)) {
        throw GeometryError("total internal reflection at the exit face (n sin(theta) = " +
                            std::to_string(s) + ")");
    }
    return std::asin(s);
}

struct PhaseMatchSolution {
    double phi_s = 0.0;
    double theta_s = 0.0;
    double theta_i = 0.0;
    double phi_i = 0.0;
    double n_s = 0.0;
    double n_i = 0.0;
    double theta_s_ext = 0.0;
    double theta_i_ext = 0.0;
    double residual = 0.0;  // |dk| / |k_p|
    int iterations = 0;
};

inline constexpr double kPhaseMatchTolerance = 1e-9;

struct SolverOptions {
    int max_iterations = 100;
    double tolerance = kPhaseMatchTolerance;  // on |dk|/|k_p|
    double scan_max_theta = deg_to_rad(30.0);
    int scan_steps = 240;
};

namespace detail {

// Idler angle balancing the transverse momentum of a signal at theta_s.
inline double balancing_idler_angle(const PumpConfig& pump, double theta_s, double phi_s,
                                    Wavelength lambda_s) {
    const Wavelength lambda_i = idler_wavelength(pump.lambda_p, lambda_s);
    const PumpFrame f = pump.frame();
    const double k_s = branch_index(pump.species, lambda_s, f.direction(theta_s, phi_s),
                                    pump.daughter_branch) *
                       lambda_s.vacuum_wavenumber();
    const double q = k_s * std::sin(theta_s);
    double theta_i = theta_s;
    for (int it = 0; it < 50; ++it) {
        const double k_i = branch_index(pump.species, lambda_i, f.direction(theta_i, phi_s + kPi),
                                        pump.daughter_branch) *
                           lambda_i.vacuum_wavenumber();
        const double s = q / k_i;
        if (s >= 1.0) throw NoSolutionError("idler cannot balance the signal transverse momentum");
        const double next = std::asin(s);
        if (std::fabs(next - theta_i) < 1e-16) return next;
        theta_i = next;
    }
    return theta_i;
}

struct NewtonResult {
    double theta_s;
    double theta_i;
    double residual;
    int iterations;
    bool converged;
};

inline NewtonResult newton_emission(const PumpConfig& pump, double phi_s, Wavelength lambda_s,
                                    double theta_s, double theta_i, const SolverOptions& opt) {
    auto eval = [&](double ts, double ti) {
        const auto m = mismatch(pump, ts, ti, phi_s, lambda_s);
        return Eigen::Vector2d(m.z / m.k_pump, m.in_plane / m.k_pump);
    };
    Eigen::Vector2d x(theta_s, theta_i);
    Eigen::Vector2d fx = eval(x[0], x[1]);
    int it = 0;
    for (; it < opt.max_iterations; ++it) {
        if (fx.norm() < 1e-15) break;
        constexpr double h = 1e-7;
        Eigen::Matrix2d jac;
        jac.col(0) = (eval(x[0] + h, x[1]) - eval(x[0] - h, x[1])) / (2.0 * h);
        jac.col(1) = (eval(x[0], x[1] + h) - eval(x[0], x[1] - h)) / (2.0 * h);
        const Eigen::Vector2d step = jac.colPivHouseholderQr().solve(-fx);
        if (!step.allFinite()) break;
        double lambda = 1.0;
        bool improved = false;
        for (int k = 0; k < 30; ++k) {
            const Eigen::Vector2d trial = x + lambda * step;
            Eigen::Vector2d ft;
            try {
                ft = eval(trial[0], trial[1]);
            } catch (const Error&) {
                lambda *= 0.5;
                continue;
            }
            if (ft.norm() < fx.norm()) {
                x = trial;
                fx = ft;
                improved = true;
                break;
            }
            lambda *= 0.5;
        }
        if (!improved || step.norm() < 1e-16) break;
    }
    const auto m = mismatch(pump, x[0], x[1], phi_s, lambda_s);
    const double residual = m.norm() / m.k_pump;
    return {x[0], x[1], residual, it, residual < opt.tolerance && x[0] >= 0.0 && x[1] >= 0.0};
}

// Cold start: reduce to one unknown by balancing transverse momentum, then
// scan theta_s for a sign change of the longitudinal mismatch.
inline std::pair<double, double> bracket_emission(const PumpConfig& pump, double phi_s,
                                                  Wavelength lambda_s, const SolverOptions& opt) {
    auto longitudinal = [&](double ts) {
        const double ti = balancing_idler_angle(pump, ts, phi_s, lambda_s);
        const auto m = mismatch(pump, ts, ti, phi_s, lambda_s);
        return m.z / m.k_pump;
    };
    const auto brackets = numeric::scan_sign_changes(longitudinal, 1e-6, opt.scan_max_theta, opt.scan_steps);
    if (brackets.empty()) {
        std::ostringstream msg;
        msg << "no phase-matched solution at phi_s = " << rad_to_deg(phi_s) << " deg (theta_p = "
            << rad_to_deg(pump.theta_p) << " deg): no sign change for theta_s in (0, "
            << rad_to_deg(opt.scan_max_theta) << "] deg";
        throw NoSolutionError(msg.str());
    }
    const auto& b = brackets.front();
    const double ts = numeric::find_root(longitudinal, b.lo, b.hi, 1e-15, b.f_lo, b.f_hi);
    return {ts, balancing_idler_angle(pump, ts, phi_s, lambda_s)};
}

inline PhaseMatchSolution finish_solution(const PumpConfig& pump, double phi_s, Wavelength lambda_s,
                                          const NewtonResult& r) {
    const auto m = mismatch(pump, r.theta_s, r.theta_i, phi_s, lambda_s);
    PhaseMatchSolution sol;
    sol.phi_s = phi_s;
    sol.theta_s = r.theta_s;
    sol.theta_i = r.theta_i;
    sol.phi_i = phi_s + kPi;
    sol.n_s = m.n_s;
    sol.n_i = m.n_i;
    sol.residual = m.norm() / m.k_pump;
    sol.iterations = r.iterations;
    sol.theta_s_ext = refract_external(m.n_s, r.theta_s);
    sol.theta_i_ext = refract_external(m.n_i, r.theta_i);
    return sol;
}

}  // namespace detail

// Emission angles at one signal azimuth. `warm_start` (theta_s, theta_i)
// seeds the Newton iteration; without it, or if Newton fails, a bracketing
// scan supplies the starting point.
inline PhaseMatchSolution solve_emission(const PumpConfig& pump, Wavelength lambda_s, double phi_s,
                                         std::optional<std::pair<double, double>> warm_start = {},
                                         const SolverOptions& opt = {}) {
    pump.species.require_in_range(pump.lambda_p);
    pump.species.require_in_range(lambda_s);
    pump.species.require_in_range(idler_wavelength(pump.lambda_p, lambda_s));
    if (warm_start) {
        const auto r = detail::newton_emission(pump, phi_s, lambda_s, warm_start->first,
                                               warm_start->second, opt);
        if (r.converged) return detail::finish_solution(pump, phi_s, lambda_s, r);
    }
    const auto [ts, ti] = detail::bracket_emission(pump, phi_s, lambda_s, opt);
    const auto r = detail::newton_emission(pump, phi_s, lambda_s, ts, ti, opt);
    if (!r.converged) {
        std::ostringstream msg;
        msg << "phase-matching solve did not converge at phi_s = " << rad_to_deg(phi_s)
            << " deg; best |dk|/|k_p| = " << r.residual;
        throw ConvergenceError(msg.str(), r.residual);
    }
    return detail::finish_solution(pump, phi_s, lambda_s, r);
}

struct RingTrace {
    PumpConfig pump;
    Wavelength lambda_s;
    std::vector<PhaseMatchSolution> samples;  // sorted by phi_s, uniform over [0, 2pi)

    std::size_t n_samples() const { return samples.size(); }
};

inline double phi_sample(std::size_t k, std::size_t n) {
    return 2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
}

inline RingTrace trace_ring(const PumpConfig& pump, Wavelength lambda_s, std::size_t n_samples,
                            unsigned threads = 1, const SolverOptions& opt = {}) {
    if (n_samples < 4) throw ArgumentError("trace_ring needs at least 4 azimuth samples");
    RingTrace trace{pump, lambda_s, std::vector<PhaseMatchSolution>(n_samples)};

    auto solve_at = [&](std::size_t k, std::optional<std::pair<double, double>> seed) {
        const double phi = phi_sample(k, n_samples);
        try {
            trace.samples[k] = solve_emission(pump, lambda_s, phi, seed, opt);
        } catch (const NumericError& e) {
            std::ostringstream msg;
            msg << "ring trace failed at phi_s = " << rad_to_deg(phi) << " deg: " << e.what();
            throw NoSolutionError(msg.str());
        }
        return std::make_pair(trace.samples[k].theta_s, trace.samples[k].theta_i);
    };
    // Chunk [begin, end) warm-started from the already solved sample `begin`.
    auto sweep = [&](std::size_t begin, std::size_t end) {
        auto seed = std::make_pair(trace.samples[begin].theta_s, trace.samples[begin].theta_i);
        for (std::size_t k = begin + 1; k < end; ++k) seed = solve_at(k, seed);
    };

    // Serial pass over up to 8 seed azimuths, then the gaps between them.
    const std::size_t n_seeds = std::min<std::size_t>(8, n_samples);
    std::vector<std::size_t> seeds;
    std::optional<std::pair<double, double>> seed;
    for (std::size_t j = 0; j < n_seeds; ++j) {
        seeds.push_back(n_samples * j / n_seeds);
        seed = solve_at(seeds.back(), seed);
    }
    seeds.push_back(n_samples);

    threads = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(n_seeds));
    if (threads == 1) {
        for (std::size_t j = 0; j < n_seeds; ++j) sweep(seeds[j], seeds[j + 1]);
        return trace;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            pool.emplace_back([&, t] {
                try {
                    for (std::size_t j = t; j < n_seeds; j += threads) sweep(seeds[j], seeds[j + 1]);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return trace;
}

// Same ring with every azimuth label shifted by `delta` (rad), re-sorted.
inline RingTrace relabel_azimuth(RingTrace trace, double delta) {
    for (auto& s : trace.samples) {
        s.phi_s = std::fmod(s.phi_s + delta, 2.0 * kPi);
        if (s.phi_s < 0.0) s.phi_s += 2.0 * kPi;
        if (2.0 * kPi - s.phi_s < 1e-12) s.phi_s = 0.0;
        s.phi_i = s.phi_s + kPi;
    }
    std::sort(trace.samples.begin(), trace.samples.end(),
              [](const auto& a, const auto& b) { return a.phi_s < b.phi_s; });
    return trace;
}

// ---------------------------------------------------------------------------
// Collinear phase matching: theta_s = theta_i = 0.

// Longitudinal mismatch |k_p| - |k_s| - |k_i| of the collinear configuration,
// divided by |k_p|.
inline double collinear_mismatch(const CrystalSpecies& species, double theta_p, double phi_p,
                                 Wavelength lambda_p, Wavelength lambda_s, Branch pump_branch,
                                 Branch daughter_branch) {
    const PumpConfig pump{species, lambda_p, theta_p, phi_p, pump_branch, daughter_branch};
    const auto m = mismatch(pump, 0.0, 0.0, 0.0, lambda_s);
    return m.z / m.k_pump;
}

// All collinear phase-matching pump angles in (0, pi) for this azimuth.
inline std::vector<double> collinear_pump_angles(const CrystalSpecies& species, double phi_p,
                                                 Wavelength lambda_p, Wavelength lambda_s,
                                                 Branch pump_branch = Branch::Fast,
                                                 Branch daughter_branch = Branch::Slow) {
    auto g = [&](double t) {
        return collinear_mismatch(species, t, phi_p, lambda_p, lambda_s, pump_branch, daughter_branch);
    };
    std::vector<double> roots;
    for (const auto& b : numeric::scan_sign_changes(g, deg_to_rad(0.05), deg_to_rad(179.95), 1440)) {
        roots.push_back(numeric::find_root(g, b.lo, b.hi, 1e-14, b.f_lo, b.f_hi));
    }
    return roots;
}

// Collinear pump angle theta_p0; with several roots, the one nearest `hint`
// (or the smallest when no hint is given).
inline double collinear_pump_angle(const CrystalSpecies& species, double phi_p, Wavelength lambda_p,
                                   Wavelength lambda_s, std::optional<double> hint = {},
                                   Branch pump_branch = Branch::Fast,
                                   Branch daughter_branch = Branch::Slow) {
    const auto roots = collinear_pump_angles(species, phi_p, lambda_p, lambda_s, pump_branch, daughter_branch);
    if (roots.empty()) {
        std::ostringstream msg;
        msg << species.id << ": no collinear phase matching in (0, 180) deg at phi_p = "
            << rad_to_deg(phi_p) << " deg for " << lambda_p.nm << " -> " << lambda_s.nm << " nm";
        throw NoSolutionError(msg.str());
    }
    if (!hint) return roots.front();
    return *std::min_element(roots.begin(), roots.end(), [&](double a, double b) {
        return std::fabs(a - *hint) < std::fabs(b - *hint);
    });
}

// ---------------------------------------------------------------------------
// Inverse problem: pump angle from a measured exterior emission angle.

struct InferRequest {
    CrystalSpecies species;
    double phi_p = 0.0;
    Wavelength lambda_p{405.0};
    Wavelength lambda_s{810.0};
    double target_ext = 0.0;  // rad
    double target_phi_s = 0.0;
    Branch pump_branch = Branch::Fast;
    Branch daughter_branch = Branch::Slow;
    std::optional<double> theta_hint;  // selects the collinear root family
    double scan_step = deg_to_rad(0.05);
    double scan_span = deg_to_rad(20.0);
};

struct InferResult {
    double theta_p = 0.0;
    double theta_p0 = 0.0;  // collinear threshold of the same family
    double achieved_ext = 0.0;
};

inline InferResult infer_pump_angle(const InferRequest& req) {
    const double theta0 = collinear_pump_angle(req.species, req.phi_p, req.lambda_p, req.lambda_s,
                                               req.theta_hint, req.pump_branch, req.daughter_branch);
    auto exterior_at = [&](double theta_p, std::optional<std::pair<double, double>> seed) {
        const PumpConfig pump{req.species, req.lambda_p, theta_p, req.phi_p, req.pump_branch,
                              req.daughter_branch};
        return solve_emission(pump, req.lambda_s, req.target_phi_s, seed);
    };

    // The ring opens on one side of the collinear threshold only.
    for (double side : {-1.0, 1.0}) {
        std::optional<std::pair<double, double>> seed;
        double prev_theta = theta0;
        double prev_value = -req.target_ext;  // ring closed at the threshold
        for (double offset = req.scan_step; offset <= req.scan_span + 1e-12; offset += req.scan_step) {
            const double theta = theta0 + side * offset;
            if (theta <= 0.0 || theta >= kPi) break;
            PhaseMatchSolution sol;
            try {
                sol = exterior_at(theta, seed);
            } catch (const NumericError&) {
                break;
            }
            seed = std::make_pair(sol.theta_s, sol.theta_i);
            const double value = sol.theta_s_ext - req.target_ext;
            if ((value > 0.0) != (prev_value > 0.0)) {
                auto f = [&](double t) { return exterior_at(t, seed).theta_s_ext - req.target_ext; };
                const double root = numeric::find_root(f, prev_theta, theta, 1e-13, prev_value, value);
                return {root, theta0, exterior_at(root, seed).theta_s_ext};
            }
            prev_theta = theta;
            prev_value = value;
        }
    }
    std::ostringstream msg;
    msg << "no pump angle within +/-" << rad_to_deg(req.scan_span) << " deg of the collinear angle "
        << rad_to_deg(theta0) << " deg gives exterior angle " << rad_to_deg(req.target_ext)
        << " deg at phi_s = " << rad_to_deg(req.target_phi_s) << " deg";
    throw NoSolutionError(msg.str());
}

// ---------------------------------------------------------------------------
// Ring eccentricity.

enum class AngleKind { Exterior, Internal };

enum class EccentricityRule {
    // tan(theta(0)) / tan(theta(90)), the minor/major ratio of two half-axes
    // measured from the pump.
    AxisSamples,
    // Semi-axes from full diameters: (tan theta(0) + tan theta(180)) / 2 and
    // (tan theta(90) + tan theta(270)) / 2. Insensitive to a shifted centre.
    Diameters,
};

// Eccentricity sqrt(1 - r^2) with r = minor/major taken as the ratio <= 1.
inline double eccentricity_from_axes(double axis_a, double axis_b) {
    if (!(axis_a > 0.0 && axis_b > 0.0)) throw ArgumentError("ellipse axes must be positive");
    const double r = std::min(axis_a, axis_b) / std::max(axis_a, axis_b);
    return std::sqrt(std::max(0.0, 1.0 - r * r));
}

inline const PhaseMatchSolution& sample_at(const RingTrace& trace, double phi) {
    for (const auto& s : trace.samples) {
        double d = std::fmod(std::fabs(s.phi_s - phi), 2.0 * kPi);
        d = std::min(d, 2.0 * kPi - d);
        if (d < 1e-9) return s;
    }
    throw ArgumentError("ring trace has no sample at phi_s = " + std::to_string(rad_to_deg(phi)) + " deg");
}

inline double ring_eccentricity(const RingTrace& trace, AngleKind kind = AngleKind::Exterior,
                                EccentricityRule rule = EccentricityRule::AxisSamples) {
    auto tan_at = [&](double phi_deg) {
        const auto& s = sample_at(trace, deg_to_rad(phi_deg));
        if (!(s.residual < kPhaseMatchTolerance)) {
            throw NumericError("ring trace sample at " + std::to_string(phi_deg) + " deg is not converged");
        }
        return std::tan(kind == AngleKind::Exterior ? s.theta_s_ext : s.theta_s);
    };
    if (rule == EccentricityRule::AxisSamples) return eccentricity_from_axes(tan_at(0.0), tan_at(90.0));
    return eccentricity_from_axes(0.5 * (tan_at(0.0) + tan_at(180.0)), 0.5 * (tan_at(90.0) + tan_at(270.0)));
}

}  // namespace ringtrace
