#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "ringtrace/spectra.hpp"

using namespace ringtrace;

namespace {

const CrystalSpecies& bbo() { return default_registry().at("BBO"); }
const CrystalSpecies& bibo() { return default_registry().at("BiBO"); }

constexpr Wavelength kPump{405.0};
constexpr Wavelength kSignal{810.0};
constexpr double kLength = 0.8;

PumpConfig cut_90() { return {bibo(), kPump, deg_to_rad(151.7), deg_to_rad(90.0)}; }
PumpConfig cut_0() { return {bibo(), kPump, deg_to_rad(51.0), 0.0}; }

FrequencyGrid coarse() { return FrequencyGrid::uniform(6e13, 201); }

SpectrumCurve curve(std::vector<double> grid, std::vector<double> values) {
    SpectrumCurve s;
    s.grid = std::move(grid);
    s.values = std::move(values);
    return s;
}

double peak(const SpectrumCurve& s) { return *std::max_element(s.values.begin(), s.values.end()); }

}  // namespace

TEST(Spectra, StandardGrid) {
    const auto g = FrequencyGrid::standard();
    ASSERT_EQ(g.offsets.size(), 2001u);
    EXPECT_DOUBLE_EQ(g.offsets.front(), -6e13);
    EXPECT_DOUBLE_EQ(g.offsets.back(), 6e13);
    EXPECT_EQ(g.offsets[1000], 0.0);
    EXPECT_NO_THROW(g.validate());
}

TEST(Spectra, AsymmetricGridRejected) {
    FrequencyGrid g{{-1e13, 0.0, 2e13}};
    EXPECT_THROW(g.validate(), ArgumentError);
    CollectionMode m;
    m.theta_ext = deg_to_rad(3.0);
    EXPECT_THROW(pair_spectrum(cut_90(), m, kLength, g), ArgumentError);
    EXPECT_THROW((FrequencyGrid{{1.0, 0.0, -1.0}}.validate()), ArgumentError);
}

TEST(Spectra, BadModeRejected) {
    CollectionMode m;
    m.theta_ext = deg_to_rad(3.0);
    m.waist_um = 0.0;
    EXPECT_THROW(pair_spectrum(cut_90(), m, kLength, coarse()), ArgumentError);
}

TEST(Spectra, ZeroLengthIsPureAcceptance) {
    // With L = 0 the sinc factor is 1 and the normalised q integral is
    // exp(-w^2 (q_s0 - q_i0)^2 / 4). The +-6 sigma cut drops
    // a tail of erfc(6 / sqrt 2) ~ 2e-9.
    CollectionMode m;
    m.theta_ext = deg_to_rad(3.0);
    m.phi = 0.3;
    m.waist_um = 100.0;
    const auto g = FrequencyGrid::uniform(6e13, 21);
    const auto s = pair_spectrum(cut_90(), m, 0.0, g);
    const double w = 100e-6;
    for (std::size_t k = 0; k < g.offsets.size(); ++k) {
        const double dq = 2.0 * g.offsets[k] / kSpeedOfLight * std::sin(m.theta_ext);
        const double expected = std::exp(-w * w * dq * dq / 4);
        EXPECT_NEAR(s.values[k], expected, 1e-8 * expected) << k;
    }
    EXPECT_NEAR(s.degenerate.nm, 810.0, 1e-9);
}

TEST(Spectra, ZeroLengthSmallWaistIsFlat) {
    const auto trace = trace_ring(cut_90(), kSignal, 8);
    CollectionMode m;
    m.theta_ext = trace.samples[2].theta_s_ext;
    m.phi = trace.samples[2].phi_s;
    m.waist_um = 10.0;
    const auto s = pair_spectrum(cut_90(), m, 0.0, coarse());
    const auto [lo, hi] = std::minmax_element(s.values.begin(), s.values.end());
    EXPECT_LT((*hi - *lo) / *hi, 0.03);
}

TEST(Spectra, SymmetricModesGiveSymmetricSpectrum) {
    // Ordinary daughters in BBO: every azimuth is equivalent.
    const PumpConfig bbo_pump{bbo(), kPump, deg_to_rad(29.392), 0.0};
    const auto ring = solve_emission(bbo_pump, kSignal, 0.7);
    // BiBO phi_p = 90 cut: the 90 / 270 deg pair is mirror symmetric.
    const auto bibo_ring = solve_emission(cut_90(), kSignal, kPi / 2);
    for (const auto& [pump, sol] : {std::pair{bbo_pump, ring}, std::pair{cut_90(), bibo_ring}}) {
        CollectionMode m;
        m.theta_ext = sol.theta_s_ext;
        m.phi = sol.phi_s;
        const auto s = pair_spectrum(pump, m, kLength, coarse());
        const std::size_t n = s.values.size();
        for (std::size_t k = 0; k < n; ++k) {
            EXPECT_NEAR(s.values[k], s.values[n - 1 - k], 1e-9 * peak(s)) << k;
        }
    }
}

TEST(Spectra, ThreadsGiveIdenticalCurves) {
    CollectionMode m;
    m.theta_ext = deg_to_rad(3.0);
    SpectrumSettings two;
    two.threads = 2;
    const auto a = pair_spectrum(cut_0(), m, kLength, coarse());
    const auto b = pair_spectrum(cut_0(), m, kLength, coarse(), two);
    EXPECT_EQ(a.values, b.values);
}

TEST(Spectra, MidpointCircularRings) {
    const PumpConfig p{bbo(), kPump, deg_to_rad(29.392), 0.0};
    const auto t1 = trace_ring(p, kSignal, 36);
    const auto m = midpoint_collection(t1, second_crystal_trace(t1), deg_to_rad(30.0));
    EXPECT_NEAR(m.mode.theta_ext, t1.samples[3].theta_s_ext, 1e-9);
    EXPECT_TRUE(m.warnings.empty());
}

TEST(Spectra, MidpointAtCrossingAndSeparation) {
    const auto t1 = trace_ring(cut_90(), kSignal, 360);
    const auto t2 = second_crystal_trace(t1);
    const auto a = midpoint_collection(t1, t2, kPointA);
    EXPECT_NEAR(a.theta_ext_1, a.theta_ext_2, 1e-9);
    EXPECT_NEAR(a.mode.theta_ext, a.theta_ext_1, 1e-9);
    const auto b = midpoint_collection(t1, t2, kPointB);
    EXPECT_GT(std::fabs(b.theta_ext_1 - b.theta_ext_2), deg_to_rad(0.01));
    EXPECT_GT(b.mode.theta_ext, std::min(b.theta_ext_1, b.theta_ext_2));
    EXPECT_LT(b.mode.theta_ext, std::max(b.theta_ext_1, b.theta_ext_2));
}

TEST(Spectra, MidpointInterpolatesWithWarning) {
    const auto t1 = trace_ring(cut_90(), kSignal, 8);
    const auto m = midpoint_collection(t1, second_crystal_trace(t1), deg_to_rad(10.0));
    EXPECT_FALSE(m.warnings.empty());
    const double lo = std::min(t1.samples[0].theta_s_ext, t1.samples[1].theta_s_ext);
    const double hi = std::max(t1.samples[0].theta_s_ext, t1.samples[1].theta_s_ext);
    EXPECT_GE(m.theta_ext_1, lo);
    EXPECT_LE(m.theta_ext_1, hi);
}

TEST(Spectra, PointAIdentical) {
    const auto s = sandwich_spectra(cut_90(), kSignal, kPointA, 100.0, kLength, coarse());
    for (std::size_t k = 0; k < s.crystal_1.values.size(); ++k) {
        EXPECT_NEAR(s.crystal_1.values[k], s.crystal_2.values[k], 1e-9 * peak(s.crystal_1));
    }
    EXPECT_NEAR(s.result.overlap, 1.0, 1e-9);
}

TEST(Spectra, PointBOverlapAndRates) {
    const auto s90 = sandwich_spectra(cut_90(), kSignal, kPointB, 100.0, kLength, coarse());
    const auto s0 = sandwich_spectra(cut_0(), kSignal, kPointB, 100.0, kLength, coarse());
    EXPECT_GT(s90.result.overlap, 0.99);
    EXPECT_GT(s0.result.overlap, 0.99);
    EXPECT_LT(s90.result.overlap, 1.0);
    // More eccentric rings sit further from the midpoint mode.
    EXPECT_LT(peak(s0.crystal_1), peak(s90.crystal_1));
    EXPECT_LT(s0.result.rate_1, s90.result.rate_1);
    EXPECT_LT(s0.result.rate_2, s90.result.rate_2);
}

TEST(Spectra, OverlapOfIdenticalAndDisjoint) {
    const std::vector<double> g{-2, -1, 0, 1, 2};
    const auto a = curve(g, {1, 2, 3, 2, 1});
    EXPECT_NEAR(overlap_integral(a, a), 1.0, 1e-15);
    const auto left = curve(g, {1, 1, 0, 0, 0});
    const auto right = curve(g, {0, 0, 0, 1, 1});
    EXPECT_EQ(overlap_integral(left, right), 0.0);
}

TEST(Spectra, OverlapErrors) {
    const std::vector<double> g{-1, 0, 1};
    EXPECT_THROW(overlap_integral(curve(g, {0, 0, 0}), curve(g, {1, 1, 1})), ArgumentError);
    EXPECT_THROW(overlap_integral(curve(g, {1, 1, 1}), curve({-2, 0, 2}, {1, 1, 1})), ArgumentError);
    EXPECT_THROW(overlap_integral(curve(g, {1, -1, 1}), curve(g, {1, 1, 1})), ArgumentError);
}

TEST(Spectra, OverlapPropertiesRandomCurves) {
    std::mt19937_64 rng(20240611);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto grid = FrequencyGrid::uniform(1.0, 51).offsets;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> v1(grid.size()), v2(grid.size());
        for (auto& x : v1) x = u(rng) < 0.2 ? 0.0 : u(rng);
        for (auto& x : v2) x = u(rng) < 0.2 ? 0.0 : u(rng);
        v1[25] += 0.1;
        v2[25] += 0.1;
        const auto a = curve(grid, v1), b = curve(grid, v2);
        const double o = overlap_integral(a, b);
        EXPECT_GE(o, 0.0);
        EXPECT_LE(o, 1.0);
        EXPECT_DOUBLE_EQ(o, overlap_integral(b, a));
        const double scale = 0.1 + 10.0 * u(rng);
        auto scaled = v1;
        for (auto& x : scaled) x *= scale;
        EXPECT_NEAR(overlap_integral(curve(grid, scaled), b), o, 1e-12);
    }
}

TEST(Spectra, JointRateOracle) {
    const auto g = FrequencyGrid::standard().offsets;
    const auto flat = curve(g, std::vector<double>(g.size(), 2.5));
    const auto r = joint_rate(flat, 20.0);
    const double c = kSpeedOfLight, two_pi = 2 * kPi;
    const double width = two_pi * c / 800e-9 - two_pi * c / 820e-9;
    EXPECT_NEAR(r.rate, 2.5 * width, 1e-9 * 2.5 * width);
    EXPECT_FALSE(r.truncated);
    EXPECT_EQ(joint_rate(curve(g, std::vector<double>(g.size(), 0.0)), 20.0).rate, 0.0);
}

TEST(Spectra, JointRateLinear) {
    CollectionMode m;
    m.theta_ext = deg_to_rad(3.0);
    const auto s = pair_spectrum(cut_90(), m, kLength, coarse());
    auto doubled = s;
    for (auto& v : doubled.values) v *= 2.0;
    EXPECT_NEAR(joint_rate(doubled, 20.0).rate, 2.0 * joint_rate(s, 20.0).rate, 1e-12 * joint_rate(doubled, 20.0).rate);
}

TEST(Spectra, JointRateTruncationWarns) {
    const auto g = FrequencyGrid::uniform(1e13, 101).offsets;
    const auto r = joint_rate(curve(g, std::vector<double>(g.size(), 1.0)), 20.0);
    EXPECT_TRUE(r.truncated);
    EXPECT_FALSE(r.warnings.empty());
    EXPECT_NEAR(r.rate, 2e13, 1e3);
}
