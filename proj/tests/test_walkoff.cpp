#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ringtrace/walkoff.hpp"

using namespace ringtrace;

namespace {

const CrystalSpecies& bbo() { return default_registry().at("BBO"); }
const CrystalSpecies& bibo() { return default_registry().at("BiBO"); }

constexpr Wavelength kPump{405.0};
constexpr Wavelength kSignal{810.0};

PumpConfig ninety_cut() { return {bibo(), kPump, deg_to_rad(151.56), deg_to_rad(90.0)}; }

// Closed-form extraordinary walk-off of a uniaxial crystal.
double uniaxial_rho(double n_o, double n_e, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    const double n2 = 1.0 / (c * c / (n_o * n_o) + s * s / (n_e * n_e));
    return std::atan(0.5 * n2 * std::fabs(1.0 / (n_e * n_e) - 1.0 / (n_o * n_o)) * std::fabs(std::sin(2.0 * theta)));
}

}  // namespace

TEST(Walkoff, PrincipalAxesHaveNoWalkoff) {
    const auto n = bibo().principal_indices(kSignal);
    for (const Vec3& k : {Vec3(Vec3::UnitX()), Vec3(Vec3::UnitY()), Vec3(Vec3::UnitZ())}) {
        for (Branch b : {Branch::Fast, Branch::Slow}) {
            const Vec3 p = poynting_direction(n, k, b);
            EXPECT_LT(angle_between(p, k), 1e-15);
        }
    }
}

TEST(Walkoff, UniaxialOrdinaryHasNoWalkoff) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> th(0.05, kPi - 0.05), ph(0.0, 2.0 * kPi);
    for (int k = 0; k < 100; ++k) {
        const WaveDirection d{th(rng), ph(rng)};
        const Vec3 p = poynting_direction(bbo(), kSignal, d, Branch::Slow);
        EXPECT_LT(angle_between(p, d.unit_vector()), 1e-12);
    }
}

TEST(Walkoff, UniaxialExtraordinaryMatchesClosedForm) {
    const auto n = bbo().principal_indices(kSignal);
    std::mt19937_64 rng(32);
    std::uniform_real_distribution<double> th(0.05, kPi - 0.05), ph(0.0, 2.0 * kPi);
    for (int k = 0; k < 100; ++k) {
        const WaveDirection d{th(rng), ph(rng)};
        const Vec3 p = poynting_direction(bbo(), kSignal, d, Branch::Fast);
        EXPECT_NEAR(angle_between(p, d.unit_vector()), uniaxial_rho(n.x, n.z, d.theta), 1e-12);
    }
}

TEST(Walkoff, PoyntingIsUnitAndConsistent) {
    for (const auto& w : walkoff_ring(ninety_cut(), kSignal, 36)) {
        EXPECT_NEAR(w.n_hat.norm(), 1.0, 1e-14);
        EXPECT_GE(w.rho, 0.0);
        EXPECT_NEAR(w.n_hat.dot(w.k_hat), std::cos(w.rho), 1e-12);
    }
}

TEST(Walkoff, OpticAxisRaises) {
    EXPECT_THROW(poynting_direction(bbo(), kSignal, WaveDirection{0.0, 0.0}, Branch::Fast), DegeneracyError);
    const auto n = bibo().principal_indices(kSignal);
    const double ax = 1.0 / (n.x * n.x), ay = 1.0 / (n.y * n.y), az = 1.0 / (n.z * n.z);
    const double v = std::asin(std::sqrt((ax - ay) / (ax - az)));
    EXPECT_THROW(poynting_direction(n, Vec3(std::sin(v), 0.0, std::cos(v)), Branch::Slow), DegeneracyError);
}

TEST(Walkoff, NinetyCutAngles) {
    const auto w = walkoff_ring(ninety_cut(), kSignal, 4);
    EXPECT_NEAR(rad_to_deg(w[0].rho), 3.19, 0.05);
    EXPECT_NEAR(rad_to_deg(w[1].rho), 3.36, 0.05);
    EXPECT_NEAR(rad_to_deg(w[2].rho), 3.51, 0.05);
    EXPECT_NEAR(rad_to_deg(w[3].rho), 3.36, 0.05);
    EXPECT_NEAR(w[1].rho, w[3].rho, 1e-10);
}

TEST(Walkoff, BboDaughtersDoNotWalkOff) {
    const PumpConfig p{bbo(), kPump, deg_to_rad(29.392), 0.0};
    for (const auto& w : walkoff_ring(p, kSignal, 36)) EXPECT_LT(w.rho, 1e-12);
}

TEST(Walkoff, ContinuityAndMirrorSymmetry) {
    const auto w = walkoff_ring(ninety_cut(), kSignal, 360);
    for (std::size_t k = 0; k < 360; ++k) {
        EXPECT_LT(angle_between(w[k].n_hat, w[(k + 1) % 360].n_hat), 1e-3);
        if (k > 0) {
            EXPECT_NEAR(w[k].rho, w[360 - k].rho, 1e-8);
        }
    }
}

TEST(Walkoff, ExitFaceComparison) {
    const auto r = exit_face_comparison(ninety_cut(), kSignal, 0.8);
    EXPECT_NEAR(r.poynting_ecc, 0.168, 0.002);
    EXPECT_NEAR(r.momentum_ecc, 0.1685, 0.002);
    EXPECT_NEAR(r.relative_difference, 0.003, 0.0015);
}

TEST(Walkoff, MomentumRingMatchesInternalTrace) {
    const auto p = ninety_cut();
    const auto r = exit_face_comparison(p, kSignal, 0.8);
    const auto t = trace_ring(p, kSignal, 4);
    EXPECT_NEAR(r.momentum_ecc, ring_eccentricity(t, AngleKind::Internal, EccentricityRule::Diameters), 1e-6);
}

TEST(Walkoff, ShortCrystalDifferenceVanishes) {
    const auto p = ninety_cut();
    const double d1 = exit_face_comparison(p, kSignal, 1e-3).max_displacement_difference_mm;
    const double d2 = exit_face_comparison(p, kSignal, 1e-6).max_displacement_difference_mm;
    EXPECT_LT(d2, 1e-7);
    EXPECT_NEAR(d1 / d2, 1000.0, 1e-6);
    EXPECT_THROW(exit_face_comparison(p, kSignal, 0.0), ArgumentError);
}
