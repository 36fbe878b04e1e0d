#pragma once

// Poynting-vector walk-off of the daughter photons and the ring shape it
// would produce at the crystal exit face.
//
// For a plane wave with unit wave normal s and displacement polarization D
// (from the indicatrix), the electric field is E = eps^-1 D, H is along
// s x E, and the Poynting vector E x H is along s |E|^2 - E (E . s).

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ringtrace/indicatrix.hpp"
#include "ringtrace/phasematch.hpp"

namespace ringtrace {

struct WalkoffSample {
    double phi_s = 0.0;
    Vec3 k_hat;
    Vec3 n_hat;  // unit Poynting vector
    double rho = 0.0;
};

inline double angle_between(const Vec3& a, const Vec3& b) { return std::atan2(a.cross(b).norm(), a.dot(b)); }

inline Vec3 poynting_direction(const PrincipalIndices& principal, const Vec3& k_hat, Branch branch) {
    const auto waves = wave_normal_eigenwaves(principal, k_hat);
    if (waves.slow.n - waves.fast.n < 1e-12 * waves.slow.n) {
        throw DegeneracyError("propagation along an optic axis: the Poynting direction is not unique");
    }
    const Vec3 a(1.0 / (principal.x * principal.x), 1.0 / (principal.y * principal.y),
                 1.0 / (principal.z * principal.z));
    const Vec3 e = a.cwiseProduct(waves.select(branch).displacement);
    return (k_hat * e.squaredNorm() - e * e.dot(k_hat)).normalized();
}

inline Vec3 poynting_direction(const CrystalSpecies& species, Wavelength lambda, const WaveDirection& dir,
                               Branch branch) {
    if (dir.frame != Frame::CrystalPrincipal) {
        throw ArgumentError("poynting_direction expects a crystal-principal-frame direction");
    }
    return poynting_direction(species.principal_indices(lambda), dir.unit_vector(), branch);
}

inline WalkoffSample walkoff_sample(const PumpConfig& pump, Wavelength lambda_s, const PhaseMatchSolution& sol) {
    WalkoffSample w;
    w.phi_s = sol.phi_s;
    w.k_hat = pump.frame().direction(sol.theta_s, sol.phi_s);
    w.n_hat = poynting_direction(pump.species.principal_indices(lambda_s), w.k_hat, pump.daughter_branch);
    w.rho = angle_between(w.k_hat, w.n_hat);
    return w;
}

inline std::vector<WalkoffSample> walkoff_ring(const RingTrace& trace) {
    std::vector<WalkoffSample> out;
    out.reserve(trace.samples.size());
    for (const auto& s : trace.samples) out.push_back(walkoff_sample(trace.pump, trace.lambda_s, s));
    return out;
}

inline std::vector<WalkoffSample> walkoff_ring(const PumpConfig& pump, Wavelength lambda_s, std::size_t n_samples,
                                               unsigned threads = 1) {
    return walkoff_ring(trace_ring(pump, lambda_s, n_samples, threads));
}

struct ExitFaceRings {
    double crystal_length_mm = 0.0;
    double poynting_ecc = 0.0;
    double momentum_ecc = 0.0;
    double relative_difference = 0.0;  // |poynting - momentum| / momentum
    // Largest distance between the two exit-face points of one azimuth, mm.
    double max_displacement_difference_mm = 0.0;
};

// Transverse exit-face displacement (pump-local x', y') of a ray born at the
// entrance face and travelling along `v` through a slab of thickness L.
inline Eigen::Vector2d exit_face_point(const PumpFrame& f, const Vec3& v, double length_mm) {
    const Vec3 local = f.to_local(v);
    return Eigen::Vector2d(local.x(), local.y()) * (length_mm / local.z());
}

// Semi-axes of both rings come from full diameters, (P(0) - P(180)) . x' / 2
// and (P(90) - P(270)) . y' / 2, so the lateral Poynting offset of the ring
// centre does not masquerade as ellipticity.
inline ExitFaceRings exit_face_comparison(const PumpConfig& pump, Wavelength lambda_s, double crystal_length_mm) {
    if (!(crystal_length_mm > 0.0)) throw ArgumentError("crystal length must be positive");
    const auto trace = trace_ring(pump, lambda_s, 4);
    const auto walk = walkoff_ring(trace);
    const PumpFrame f = pump.frame();

    std::vector<Eigen::Vector2d> k_pts, n_pts;
    ExitFaceRings out;
    out.crystal_length_mm = crystal_length_mm;
    for (const auto& w : walk) {
        k_pts.push_back(exit_face_point(f, w.k_hat, crystal_length_mm));
        n_pts.push_back(exit_face_point(f, w.n_hat, crystal_length_mm));
        out.max_displacement_difference_mm =
            std::max(out.max_displacement_difference_mm, (k_pts.back() - n_pts.back()).norm());
    }
    auto ecc = [](const std::vector<Eigen::Vector2d>& p) {
        const double sx = 0.5 * (p[0].x() - p[2].x());
        const double sy = 0.5 * (p[1].y() - p[3].y());
        return eccentricity_from_axes(sx, sy);
    };
    out.momentum_ecc = ecc(k_pts);
    out.poynting_ecc = ecc(n_pts);
    const double gap = std::fabs(out.poynting_ecc - out.momentum_ecc);
    out.relative_difference = out.momentum_ecc > 0.0 ? gap / out.momentum_ecc
                              : gap == 0.0          ? 0.0
                                                    : std::numeric_limits<double>::infinity();
    return out;
}

}  // namespace ringtrace
