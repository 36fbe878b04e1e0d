#pragma once

// Direction-dependent refractive indices from Fresnel's equation of wave
// normals, plus the pump-local frame used for emission angles.
//
// Fresnel's equation sum_j s_j^2 / (u - a_j) = 0, with u = n^-2 and
// a_j = n_j^-2, becomes after clearing denominators
//
//     u^2 - B u + C = 0,
//     B = sum_j s_j^2 (a_k + a_l),   C = sum_j s_j^2 a_k a_l,
//
// which is the characteristic polynomial of the inverse dielectric tensor
// diag(a) projected onto the plane normal to s. The roots are taken from
// that 2x2 projection: its discriminant is a sum of squares, so there is no
// cancellation near the optic axes and no 0/0 in the principal planes. The
// eigenvectors are the displacement-field polarizations.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "ringtrace/dispersion.hpp"
#include "ringtrace/errors.hpp"
#include "ringtrace/units.hpp"

namespace ringtrace {

using Vec3 = Eigen::Vector3d;

enum class Branch { Fast, Slow };

inline std::string_view to_string(Branch b) { return b == Branch::Fast ? "fast" : "slow"; }

inline Branch other(Branch b) { return b == Branch::Fast ? Branch::Slow : Branch::Fast; }

enum class Frame { CrystalPrincipal, PumpLocal };

struct WaveDirection {
    double theta = 0.0;  // polar angle from the frame's z axis, rad
    double phi = 0.0;    // azimuth from the frame's x axis, rad
    Frame frame = Frame::CrystalPrincipal;

    Vec3 unit_vector() const {
        return {std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta)};
    }

    static WaveDirection from_vector(const Vec3& v, Frame frame = Frame::CrystalPrincipal) {
        const Vec3 u = v.normalized();
        double phi = std::atan2(u.y(), u.x());
        if (phi < 0.0) phi += 2.0 * kPi;
        return {std::acos(std::clamp(u.z(), -1.0, 1.0)), phi, frame};
    }
};

// Orthonormal frame attached to the pump: z' along the pump wavevector, x'
// in the principal plane that contains the pump and the crystal z axis
// (x' = d s_p / d theta_p), y' = z' x x'. Local azimuth phi_s is measured
// from x'.
struct PumpFrame {
    Vec3 x;
    Vec3 y;
    Vec3 z;

    static PumpFrame from_angles(double theta_p, double phi_p) {
        const double st = std::sin(theta_p), ct = std::cos(theta_p);
        const double sp = std::sin(phi_p), cp = std::cos(phi_p);
        PumpFrame f;
        f.z = Vec3(st * cp, st * sp, ct);
        f.x = Vec3(ct * cp, ct * sp, -st);
        f.y = Vec3(-sp, cp, 0.0);
        return f;
    }

    // Crystal-frame unit vector at local polar angle `theta` (signed: negative
    // values point towards phi + pi) and local azimuth `phi`.
    Vec3 direction(double theta, double phi) const {
        return std::sin(theta) * (std::cos(phi) * x + std::sin(phi) * y) + std::cos(theta) * z;
    }

    // Components of a crystal-frame vector in this frame.
    Vec3 to_local(const Vec3& v) const { return {v.dot(x), v.dot(y), v.dot(z)}; }
};

struct IndexPair {
    double fast = 0.0;
    double slow = 0.0;

    double select(Branch b) const { return b == Branch::Fast ? fast : slow; }
};

struct Eigenwave {
    double n = 0.0;
    Vec3 displacement;  // unit D-field polarization, orthogonal to s
};

struct EigenwavePair {
    Eigenwave fast;
    Eigenwave slow;

    const Eigenwave& select(Branch b) const { return b == Branch::Fast ? fast : slow; }
};

namespace detail {

inline void require_finite(const PrincipalIndices& n, const Vec3& s) {
    if (!(std::isfinite(n.x) && std::isfinite(n.y) && std::isfinite(n.z)) ||
        !(n.x > 0.0 && n.y > 0.0 && n.z > 0.0)) {
        throw ArgumentError("principal indices must be finite and positive");
    }
    if (!s.allFinite() || std::fabs(s.norm() - 1.0) > 1e-9) {
        throw ArgumentError("propagation direction must be a finite unit vector");
    }
}

}  // namespace detail

inline EigenwavePair wave_normal_eigenwaves(const PrincipalIndices& principal, const Vec3& s) {
    detail::require_finite(principal, s);
    const Vec3 a(1.0 / (principal.x * principal.x), 1.0 / (principal.y * principal.y),
                 1.0 / (principal.z * principal.z));

    // Basis of the plane normal to s, built from the principal axis least
    // aligned with s.
    int k = 0;
    s.cwiseAbs().minCoeff(&k);
    const Vec3 e1 = s.cross(Vec3::Unit(k)).normalized();
    const Vec3 e2 = s.cross(e1);

    const double p = (a.array() * e1.array() * e1.array()).sum();
    const double q = (a.array() * e2.array() * e2.array()).sum();
    const double r = (a.array() * e1.array() * e2.array()).sum();

    const double mean = 0.5 * (p + q);
    const double half_diff = 0.5 * (p - q);
    const double root = std::hypot(half_diff, r);
    const double u_big = mean + root;    // fast wave: larger n^-2
    const double u_small = mean - root;  // slow wave

    // Eigenvector of [[p, r], [r, q]] for the larger eigenvalue, computed in
    // the numerically stable half-angle form.
    Vec3 d_fast;
    if (root == 0.0) {
        d_fast = e1;
    } else {
        const double angle = 0.5 * std::atan2(r, half_diff);
        d_fast = std::cos(angle) * e1 + std::sin(angle) * e2;
    }
    const Vec3 d_slow = s.cross(d_fast);

    return {{1.0 / std::sqrt(u_big), d_fast}, {1.0 / std::sqrt(u_small), d_slow}};
}

inline IndexPair wave_normal_indices(const PrincipalIndices& principal, const Vec3& s) {
    const auto w = wave_normal_eigenwaves(principal, s);
    return {w.fast.n, w.slow.n};
}

inline IndexPair wave_normal_indices(const PrincipalIndices& principal, const WaveDirection& dir) {
    return wave_normal_indices(principal, dir.unit_vector());
}

// Value of the cleared Fresnel polynomial u^2 - B u + C at u = n^-2,
// divided by u^2 so it is dimensionless.
inline double fresnel_residual(const PrincipalIndices& principal, const Vec3& s, double n) {
    const std::array<double, 3> a{1.0 / (principal.x * principal.x), 1.0 / (principal.y * principal.y),
                                  1.0 / (principal.z * principal.z)};
    const std::array<double, 3> s2{s.x() * s.x(), s.y() * s.y(), s.z() * s.z()};
    const double b = s2[0] * (a[1] + a[2]) + s2[1] * (a[0] + a[2]) + s2[2] * (a[0] + a[1]);
    const double c = s2[0] * a[1] * a[2] + s2[1] * a[0] * a[2] + s2[2] * a[0] * a[1];
    const double u = 1.0 / (n * n);
    return (u * u - b * u + c) / (u * u);
}

struct BranchIndex {
    Branch branch = Branch::Fast;
    double n = 0.0;
    WaveDirection direction;
    Wavelength lambda;
};

inline double branch_index(const CrystalSpecies& species, Wavelength lambda, const Vec3& s,
                           Branch branch) {
    return wave_normal_indices(species.principal_indices(lambda), s).select(branch);
}

inline BranchIndex branch_index(const CrystalSpecies& species, Wavelength lambda,
                                const WaveDirection& dir, Branch branch) {
    if (dir.frame != Frame::CrystalPrincipal) {
        throw ArgumentError("branch_index expects a crystal-principal-frame direction");
    }
    return {branch, branch_index(species, lambda, dir.unit_vector(), branch), dir, lambda};
}

// ---------------------------------------------------------------------------
// Angular derivatives of a branch index.
//
// The index is viewed as f(theta_p, alpha): pump polar angle theta_p (at
// fixed phi_p) and a signed emission angle alpha measured from the pump
// along local azimuth phi_s. All five derivatives come from central
// differences; each is recomputed at half the step and the difference is
// reported as a Richardson error estimate.

struct DerivativeSteps {
    double first = 1e-4;   // rad
    double second = 1e-3;  // rad
};

struct IndexDerivatives {
    double n = 0.0;
    double d_pump = 0.0;        // dn/dtheta_p
    double d_signal = 0.0;      // dn/dtheta_s
    double d2_pump = 0.0;       // d2n/dtheta_p2
    double d2_signal = 0.0;     // d2n/dtheta_s2
    double d2_mixed = 0.0;      // d2n/dtheta_p dtheta_s
    double d2_mixed_swapped = 0.0;  // same, differencing the other variable first
    double richardson_error = 0.0;  // max |D(h) - D(h/2)| over the set
};

inline IndexDerivatives index_derivatives(const CrystalSpecies& species, Wavelength lambda,
                                          double theta_p, double phi_p, double signal_theta,
                                          double signal_phi, Branch branch,
                                          DerivativeSteps steps = {}) {
    const auto principal = species.principal_indices(lambda);
    double min_gap = 1e300;
    auto f = [&](double dp, double alpha) {
        const PumpFrame frame = PumpFrame::from_angles(theta_p + dp, phi_p);
        const auto pair = wave_normal_indices(principal, frame.direction(signal_theta + alpha, signal_phi));
        min_gap = std::min(min_gap, pair.slow - pair.fast);
        return pair.select(branch);
    };

    const double f0 = f(0.0, 0.0);
    auto first_p = [&](double h) { return (f(h, 0.0) - f(-h, 0.0)) / (2.0 * h); };
    auto first_s = [&](double h) { return (f(0.0, h) - f(0.0, -h)) / (2.0 * h); };
    auto second_p = [&](double h) { return (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h); };
    auto second_s = [&](double h) { return (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h); };
    auto mixed = [&](double h) {
        return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
    };
    // Differentiate in alpha first, then difference that in theta_p.
    auto mixed_swapped = [&](double h) {
        auto ds = [&](double dp) { return (f(dp, h) - f(dp, -h)) / (2.0 * h); };
        return (ds(h) - ds(-h)) / (2.0 * h);
    };

    IndexDerivatives d;
    d.n = f0;
    const double h1 = steps.first, h2 = steps.second;
    d.d_pump = first_p(h1);
    d.d_signal = first_s(h1);
    d.d2_pump = second_p(h2);
    d.d2_signal = second_s(h2);
    d.d2_mixed = mixed(h2);
    d.d2_mixed_swapped = mixed_swapped(h2);

    const double errs[] = {
        std::fabs(d.d_pump - first_p(h1 / 2)),    std::fabs(d.d_signal - first_s(h1 / 2)),
        std::fabs(d.d2_pump - second_p(h2 / 2)),  std::fabs(d.d2_signal - second_s(h2 / 2)),
        std::fabs(d.d2_mixed - mixed(h2 / 2)),
    };
    d.richardson_error = *std::max_element(std::begin(errs), std::end(errs));

    // A stencil point on an optic axis makes the slow/fast sheets touch; the
    // index surface has a conical point there and differences are meaningless.
    const double scale = std::max(h1, h2);
    if (min_gap < 1e-3 * scale * scale) {
        throw DegeneracyError("finite-difference stencil touches an optic axis (branch gap " +
                              std::to_string(min_gap) + "); choose a different step or direction");
    }
    return d;
}

}  // namespace ringtrace
