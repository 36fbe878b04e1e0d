#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ringtrace/indicatrix.hpp"

using namespace ringtrace;

namespace {

const CrystalSpecies& bbo() { return default_registry().at("BBO"); }
const CrystalSpecies& bibo() { return default_registry().at("BiBO"); }

// Closed-form extraordinary index of a uniaxial crystal.
double extraordinary(double n_o, double n_e, double theta) {
    const double c = std::cos(theta), s = std::sin(theta);
    return 1.0 / std::sqrt(c * c / (n_o * n_o) + s * s / (n_e * n_e));
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return Vec3(g(rng), g(rng), g(rng)).normalized();
}

}  // namespace

TEST(Indicatrix, AlongZGivesXAndY) {
    const PrincipalIndices n{1.75, 1.78, 1.91};
    const auto pair = wave_normal_indices(n, Vec3::UnitZ());
    EXPECT_NEAR(pair.fast, 1.75, 1e-15);
    EXPECT_NEAR(pair.slow, 1.78, 1e-15);
}

TEST(Indicatrix, PrincipalAxesGiveRemainingIndices) {
    const PrincipalIndices n{1.75, 1.78, 1.91};
    auto x = wave_normal_indices(n, Vec3::UnitX());
    EXPECT_NEAR(x.fast, 1.78, 1e-15);
    EXPECT_NEAR(x.slow, 1.91, 1e-15);
    auto y = wave_normal_indices(n, Vec3::UnitY());
    EXPECT_NEAR(y.fast, 1.75, 1e-15);
    EXPECT_NEAR(y.slow, 1.91, 1e-15);
}

TEST(Indicatrix, UniaxialOpticAxisIsDegenerate) {
    const PrincipalIndices n{1.66, 1.66, 1.55};
    const auto pair = wave_normal_indices(n, Vec3::UnitZ());
    EXPECT_DOUBLE_EQ(pair.fast, 1.66);
    EXPECT_DOUBLE_EQ(pair.slow, 1.66);
}

TEST(Indicatrix, UniaxialReductionRandomDirections) {
    const auto n = bbo().principal_indices(Wavelength{810.0});
    std::mt19937_64 rng(11);
    for (int k = 0; k < 200; ++k) {
        const Vec3 s = random_unit(rng);
        const double theta = std::acos(std::clamp(s.z(), -1.0, 1.0));
        const auto pair = wave_normal_indices(n, s);
        // Negative uniaxial: ordinary is slow, extraordinary is fast.
        EXPECT_NEAR(pair.slow, n.x, 1e-12);
        EXPECT_NEAR(pair.fast, extraordinary(n.x, n.z, theta), 1e-12);
    }
}

TEST(Indicatrix, RootsSatisfyFresnelEquation) {
    const auto n = bibo().principal_indices(Wavelength{810.0});
    std::mt19937_64 rng(12);
    for (int k = 0; k < 200; ++k) {
        const Vec3 s = random_unit(rng);
        const auto pair = wave_normal_indices(n, s);
        EXPECT_LT(std::fabs(fresnel_residual(n, s, pair.fast)), 1e-12);
        EXPECT_LT(std::fabs(fresnel_residual(n, s, pair.slow)), 1e-12);
    }
    // Principal planes, where a term of the uncleared equation is 0/0.
    for (double t : {0.0, 0.3, 1.0, kPi / 2}) {
        for (const Vec3& s : {Vec3(std::sin(t), 0, std::cos(t)), Vec3(0, std::sin(t), std::cos(t)),
                              Vec3(std::cos(t), std::sin(t), 0)}) {
            const auto pair = wave_normal_indices(n, s);
            EXPECT_LT(std::fabs(fresnel_residual(n, s, pair.fast)), 1e-12);
            EXPECT_LT(std::fabs(fresnel_residual(n, s, pair.slow)), 1e-12);
        }
    }
}

TEST(Indicatrix, BracketingRandomDirections) {
    std::mt19937_64 rng(13);
    for (const auto* c : {&bbo(), &bibo()}) {
        for (int k = 0; k < 200; ++k) {
            const Wavelength l{400.0 + 600.0 * std::uniform_real_distribution<double>()(rng)};
            const auto n = c->principal_indices(l);
            const auto pair = wave_normal_indices(n, random_unit(rng));
            EXPECT_LE(n.min(), pair.fast + 1e-15);
            EXPECT_LE(pair.fast, pair.slow);
            EXPECT_LE(pair.slow, n.max() + 1e-15);
        }
    }
}

TEST(Indicatrix, BranchContinuityOnGreatCircles) {
    // 100 samples along a 20 degree arc of a random great circle; a smooth
    // index surface moves by well under 1e-3 per 0.2 degree step.
    const auto n = bibo().principal_indices(Wavelength{810.0});
    std::mt19937_64 rng(14);
    for (int circle = 0; circle < 100; ++circle) {
        const Vec3 a = random_unit(rng);
        const Vec3 b = a.cross(random_unit(rng)).normalized();
        IndexPair prev = wave_normal_indices(n, a);
        for (int k = 1; k < 100; ++k) {
            const double t = deg_to_rad(20.0) * k / 99;
            const auto cur = wave_normal_indices(n, (std::cos(t) * a + std::sin(t) * b).normalized());
            EXPECT_LT(std::fabs(cur.fast - prev.fast), 1e-3);
            EXPECT_LT(std::fabs(cur.slow - prev.slow), 1e-3);
            prev = cur;
        }
    }
}

TEST(Indicatrix, EigenvectorsAreOrthonormalAndTransverse) {
    const auto n = bibo().principal_indices(Wavelength{810.0});
    const Vec3 a(1.0 / (n.x * n.x), 1.0 / (n.y * n.y), 1.0 / (n.z * n.z));
    std::mt19937_64 rng(15);
    for (int k = 0; k < 100; ++k) {
        const Vec3 s = random_unit(rng);
        const auto w = wave_normal_eigenwaves(n, s);
        EXPECT_NEAR(w.fast.displacement.norm(), 1.0, 1e-14);
        EXPECT_NEAR(w.fast.displacement.dot(s), 0.0, 1e-14);
        EXPECT_NEAR(w.fast.displacement.dot(w.slow.displacement), 0.0, 1e-14);
        // Projected inverse tensor maps D onto a multiple of itself.
        for (const auto* e : {&w.fast, &w.slow}) {
            Vec3 image = a.cwiseProduct(e->displacement);
            image -= s * s.dot(image);
            EXPECT_NEAR((image - e->displacement / (e->n * e->n)).norm(), 0.0, 1e-14);
        }
    }
}

TEST(Indicatrix, NonFiniteInputsRejected) {
    const PrincipalIndices n{1.75, 1.78, 1.91};
    EXPECT_THROW(wave_normal_indices(n, Vec3(NAN, 0, 1)), ArgumentError);
    EXPECT_THROW(wave_normal_indices(PrincipalIndices{NAN, 1.7, 1.8}, Vec3::UnitZ()), ArgumentError);
    EXPECT_THROW(wave_normal_indices(n, Vec3(0, 0, 2)), ArgumentError);
}

TEST(Indicatrix, BiboPumpFastDaughtersSlow) {
    const auto f = PumpFrame::from_angles(deg_to_rad(151.7), deg_to_rad(90.0));
    const WaveDirection pump_dir = WaveDirection::from_vector(f.z);
    const auto pump = branch_index(bibo(), Wavelength{405.0}, pump_dir, Branch::Fast);
    const auto daughter = branch_index(bibo(), Wavelength{810.0}, pump_dir, Branch::Slow);
    EXPECT_EQ(pump.branch, Branch::Fast);
    // Collinear type-I matching needs the fast pump index near the slow daughter index.
    EXPECT_NEAR(pump.n, daughter.n, 5e-3);
    EXPECT_LT(pump.n, wave_normal_indices(bibo().principal_indices(Wavelength{405.0}), f.z).slow);
}

TEST(Indicatrix, BboOrdinaryIsDirectionIndependent) {
    const Wavelength l{810.0};
    const double a = branch_index(bbo(), l, WaveDirection{0.3, 1.0}, Branch::Slow).n;
    const double b = branch_index(bbo(), l, WaveDirection{1.2, 4.0}, Branch::Slow).n;
    EXPECT_DOUBLE_EQ(a, b);
}

TEST(Indicatrix, BranchIndexRequiresCrystalFrame) {
    EXPECT_THROW(branch_index(bbo(), Wavelength{810.0}, WaveDirection{0.1, 0.0, Frame::PumpLocal}, Branch::Slow),
                 ArgumentError);
}

TEST(Indicatrix, BranchIndexPropagatesRangeError) {
    EXPECT_THROW(branch_index(bbo(), Wavelength{50.0}, WaveDirection{0.1, 0.0}, Branch::Slow), RangeError);
}

TEST(Indicatrix, PumpFrameIsRightHanded) {
    const auto f = PumpFrame::from_angles(2.6, 1.2);
    EXPECT_NEAR(f.x.cross(f.y).dot(f.z), 1.0, 1e-15);
    // x' lies in the plane spanned by the pump and crystal z.
    EXPECT_NEAR(f.x.dot(f.z.cross(Vec3::UnitZ()).normalized()), 0.0, 1e-15);
}

TEST(Indicatrix, WaveDirectionRoundTrip) {
    const WaveDirection d{1.1, 5.5};
    const auto back = WaveDirection::from_vector(d.unit_vector());
    EXPECT_NEAR(back.theta, 1.1, 1e-14);
    EXPECT_NEAR(back.phi, 5.5, 1e-14);
}

TEST(Indicatrix, BboOrdinaryDerivativesVanish) {
    const auto d = index_derivatives(bbo(), Wavelength{810.0}, deg_to_rad(29.0), 0.0, 0.0, 0.0, Branch::Slow);
    for (double v : {d.d_pump, d.d_signal, d.d2_pump, d.d2_signal, d.d2_mixed}) EXPECT_LT(std::fabs(v), 1e-8);
}

TEST(Indicatrix, BiboDerivativesAtNinetyCut) {
    const double theta_p = deg_to_rad(152.077), phi_p = deg_to_rad(90.0);
    const auto d = index_derivatives(bibo(), Wavelength{810.0}, theta_p, phi_p, 0.0, 0.0, Branch::Slow);
    EXPECT_GT(std::fabs(d.d_signal), 1e-3);
    EXPECT_LT(d.richardson_error, 1e-6);
    EXPECT_NEAR(d.d2_mixed, d.d2_mixed_swapped, 1e-6);
    // Along phi_s = 0 the signal tilts in the pump's own plane, so the first
    // derivatives in theta_p and theta_s coincide.
    EXPECT_NEAR(d.d_signal, d.d_pump, 1e-8);
    const auto d90 = index_derivatives(bibo(), Wavelength{810.0}, theta_p, phi_p, 0.0, kPi / 2, Branch::Slow);
    EXPECT_LT(std::fabs(d90.d_signal), 1e-9);
}

TEST(Indicatrix, DerivativesNearOpticAxisRaise) {
    // Place the evaluation point on a BiBO optic axis in the x-z plane.
    const auto n = bibo().principal_indices(Wavelength{810.0});
    const double ax = 1.0 / (n.x * n.x), ay = 1.0 / (n.y * n.y), az = 1.0 / (n.z * n.z);
    const double v = std::asin(std::sqrt((ax - ay) / (ax - az)));
    EXPECT_THROW(index_derivatives(bibo(), Wavelength{810.0}, v, 0.0, 0.0, 0.0, Branch::Slow), DegeneracyError);
}
