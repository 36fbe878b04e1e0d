// Acceptance run: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ringtrace/ringtrace.hpp"

using namespace ringtrace;

namespace {

const Wavelength kPump{405.0};
const Wavelength kSignal{810.0};

const CrystalSpecies& bbo() { return default_registry().at("BBO"); }
const CrystalSpecies& bibo() { return default_registry().at("BiBO"); }

class Criterion {
public:
    explicit Criterion(int id) : id_(id) {}

    void check(bool ok, const std::string& what) {
        ok_ = ok_ && ok;
        if (!detail_.empty()) detail_ += "; ";
        detail_ += (ok ? "" : "FAILED ") + what;
    }

    bool ok() const { return ok_; }

    void print() const { std::printf("criterion %d: %s  %s\n", id_, ok_ ? "PASS" : "FAIL", detail_.c_str()); }

private:
    int id_;
    bool ok_ = true;
    std::string detail_;
};

std::string fmt(double v) { return report::format_number(v); }

bool within(double v, double target, double tol) { return std::fabs(v - target) <= tol; }

double exterior_spread_deg(const RingTrace& t) {
    const auto [lo, hi] = std::minmax_element(t.samples.begin(), t.samples.end(),
                                              [](const auto& a, const auto& b) { return a.theta_s_ext < b.theta_s_ext; });
    return rad_to_deg(hi->theta_s_ext - lo->theta_s_ext);
}

double inferred_theta(double phi_p_deg, double target_deg, double hint_deg) {
    InferRequest req;
    req.species = bibo();
    req.phi_p = deg_to_rad(phi_p_deg);
    req.target_ext = deg_to_rad(target_deg);
    req.target_phi_s = deg_to_rad(phi_p_deg);
    req.theta_hint = deg_to_rad(hint_deg);
    return infer_pump_angle(req).theta_p;
}

double full_ecc(double theta_p, double phi_p) {
    return ring_eccentricity(trace_ring(PumpConfig{bibo(), kPump, theta_p, phi_p}, kSignal, 360));
}

void run(Criterion& c, const std::function<void(Criterion&)>& body) {
    try {
        body(c);
    } catch (const std::exception& e) {
        c.check(false, std::string("exception: ") + e.what());
    }
    c.print();
}

void criterion_1(Criterion& c) {
    const auto t = trace_ring(PumpConfig{bbo(), kPump, deg_to_rad(29.392), 0.0}, kSignal, 360);
    const double ecc = ring_eccentricity(t);
    const double spread = exterior_spread_deg(t);
    c.check(ecc <= 0.005, "ecc " + fmt(ecc) + " <= 0.005");
    c.check(spread < 1e-4, "theta_s' spread " + fmt(spread) + " deg < 1e-4");
}

void criterion_2(Criterion& c) {
    const double theta = inferred_theta(90.0, 4.10893, 152.0);
    const double ecc = full_ecc(theta, kPi / 2);
    c.check(within(ecc, 0.166, 0.010), "theta_p " + fmt(rad_to_deg(theta)) + " deg, ecc " + fmt(ecc) + " vs 0.166 +- 0.010");
}

void criterion_3(Criterion& c) {
    const double theta = inferred_theta(0.0, 4.05449, 51.0);
    const double ecc = full_ecc(theta, 0.0);
    c.check(within(ecc, 0.361, 0.015), "theta_p " + fmt(rad_to_deg(theta)) + " deg, ecc " + fmt(ecc) + " vs 0.361 +- 0.015");
}

void criterion_4(Criterion& c) {
    for (const auto& [name, phi_p, target, hint] :
         {std::tuple{"phi90", 90.0, 4.10893, 152.0}, std::tuple{"phi0", 0.0, 4.05449, 51.0}}) {
        const double theta = inferred_theta(phi_p, target, hint);
        const double full = full_ecc(theta, deg_to_rad(phi_p));
        const double approx = eccentricity_estimate(expansion_at(bibo(), deg_to_rad(phi_p), theta, kSignal)).internal;
        const double rel = std::fabs(approx - full) / full;
        c.check(rel < 0.10, std::string(name) + " small-angle " + fmt(approx) + " vs " + fmt(full) + " rel " + fmt(rel));
    }
    const double b = eccentricity_estimate(expansion_at(bbo(), 0.0, deg_to_rad(29.392), kSignal)).internal;
    c.check(b < 0.01, "BBO small-angle " + fmt(b) + " < 0.01");
}

void criterion_5(Criterion& c) {
    double lambda_star_152 = 0.0;
    for (double th : {152.071, 151.378, 149.21}) {
        const auto m = min_eccentricity_wavelength(bibo(), kPi / 2, deg_to_rad(th), 700.0, 800.0);
        const bool inside = !m.at_bracket_edge && m.lambda_star_nm > 700.0 && m.lambda_star_nm < 800.0;
        c.check(inside && m.ecc_at_min < 0.05,
                "theta_p " + fmt(th) + ": lambda* " + fmt(m.lambda_star_nm) + " nm, ecc " + fmt(m.ecc_at_min));
        if (th == 152.071) lambda_star_152 = m.lambda_star_nm;
    }
    const double e810 = sweep_eccentricity(bibo(), kPi / 2, deg_to_rad(151.378), kSignal);
    c.check(within(e810, 0.17, 0.03), "ecc(810) for 151.378 " + fmt(e810) + " vs 0.17 +- 0.03");
    const auto cross = term_crossing_wavelength(bibo(), kPi / 2, deg_to_rad(152.071), 700.0, 900.0);
    if (!cross) {
        c.check(false, "no term1 = term2 crossing in 700-900 nm");
        return;
    }
    c.check(std::fabs(*cross - lambda_star_152) <= 10.0,
            "term crossing " + fmt(*cross) + " nm vs lambda* " + fmt(lambda_star_152) + " nm within 10");
}

void criterion_6(Criterion& c) {
    const PumpConfig p{bibo(), kPump, deg_to_rad(151.56), kPi / 2};
    const auto w = walkoff_ring(p, kSignal, 4);
    const double expected[4] = {3.19, 3.36, 3.51, 3.36};
    for (int k = 0; k < 4; ++k) {
        const double rho = rad_to_deg(w[k].rho);
        c.check(within(rho, expected[k], 0.05), "rho(" + std::to_string(90 * k) + ") " + fmt(rho));
    }
    const auto e = exit_face_comparison(p, kSignal, 0.8);
    c.check(within(e.poynting_ecc, 0.168, 0.002), "Poynting ecc " + fmt(e.poynting_ecc));
    c.check(within(e.momentum_ecc, 0.1685, 0.002), "momentum ecc " + fmt(e.momentum_ecc));
    c.check(within(100.0 * e.relative_difference, 0.3, 0.15), "relative difference " + fmt(100.0 * e.relative_difference) + " %");
}

void criterion_7(Criterion& c) {
    const auto start = std::chrono::steady_clock::now();
    const NoiseSpec noise{2024, true, 10.0};
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<RingModel> truths;
    std::vector<double> ecc_true;
    for (int k = 0; k < 50; ++k) {
        const double ecc = 0.5 * u(rng);
        const double major = 0.8 + 0.3 * u(rng);
        const double minor = major * std::sqrt(1.0 - ecc * ecc);
        const bool along_x = u(rng) < 0.5;
        truths.push_back({1000.0, 100.0, 0.1 * (u(rng) - 0.5), 0.1 * (u(rng) - 0.5), along_x ? major : minor,
                          along_x ? minor : major, 0.04});
        ecc_true.push_back(ecc);
    }
    const auto fits = fit_batch(truths, ImageGeometry{}, noise);
    int good = 0;
    for (std::size_t k = 0; k < fits.size(); ++k) good += std::fabs(fits[k].ecc - ecc_true[k]) <= 0.01 ? 1 : 0;
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    c.check(good >= 48, std::to_string(good) + "/50 within 0.01");
    c.check(secs <= 300.0, "batch " + fmt(secs) + " s");

    std::vector<RingModel> circles(10, RingModel{1000.0, 100.0, 0.0, 0.0, 1.0, 1.0, 0.04});
    const auto cf = fit_batch(circles, ImageGeometry{}, NoiseSpec{500, true, 10.0});
    double ecc = 0.0, err = 0.0;
    for (const auto& f : cf) {
        ecc += f.ecc / cf.size();
        err += f.ecc_stat_error / cf.size();
    }
    c.check(ecc > 0.002 && ecc < 0.03, "circular mean ecc " + fmt(ecc));
    c.check(err > 0.002 && err < 0.03, "circular mean stat_error " + fmt(err));
}

void criterion_8(Criterion& c) {
    const PumpConfig cut90{bibo(), kPump, deg_to_rad(151.7), kPi / 2};
    const PumpConfig cut0{bibo(), kPump, deg_to_rad(51.0), 0.0};
    for (const auto* p : {&cut90, &cut0}) {
        const auto a = sandwich_spectra(*p, kSignal, kPointA, 100.0, 0.8);
        c.check(std::fabs(a.result.overlap - 1.0) <= 1e-9, "A overlap " + fmt(a.result.overlap));
    }
    double min_b = 1.0;
    bool rates_ordered = true;
    for (double waist : {50.0, 100.0, 200.0}) {
        const auto b90 = sandwich_spectra(cut90, kSignal, kPointB, waist, 0.8);
        const auto b0 = sandwich_spectra(cut0, kSignal, kPointB, waist, 0.8);
        min_b = std::min({min_b, b90.result.overlap, b0.result.overlap});
        rates_ordered = rates_ordered && b0.result.rate_1 < b90.result.rate_1 && b0.result.rate_2 < b90.result.rate_2;
    }
    c.check(min_b > 0.99, "B overlap min over waists 50/100/200 um " + fmt(min_b));
    c.check(rates_ordered, "phi0 B rate below phi90 B rate at every waist");
}

Vec3 random_unit(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    return Vec3(g(rng), g(rng), g(rng)).normalized();
}

void criterion_9(Criterion& c) {
    std::mt19937_64 rng(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);

    // Uniaxial reduction against the closed-form extraordinary index.
    double worst = 0.0;
    for (int k = 0; k < 200; ++k) {
        const auto n = bbo().principal_indices(Wavelength{450.0 + 600.0 * u(rng)});
        const Vec3 s = random_unit(rng);
        const double ct = s.z(), st2 = 1.0 - ct * ct;
        const double ne = 1.0 / std::sqrt(ct * ct / (n.x * n.x) + st2 / (n.z * n.z));
        const auto pair = wave_normal_indices(n, s);
        worst = std::max({worst, std::fabs(pair.slow - n.x), std::fabs(pair.fast - ne)});
    }
    c.check(worst <= 1e-12, "uniaxial oracle max error " + fmt(worst));

    // Branch continuity along random arcs.
    double max_step = 0.0;
    for (int circle = 0; circle < 100; ++circle) {
        const auto n = bibo().principal_indices(Wavelength{450.0 + 600.0 * u(rng)});
        const Vec3 a = random_unit(rng);
        const Vec3 b = a.cross(random_unit(rng)).normalized();
        IndexPair prev = wave_normal_indices(n, a);
        for (int k = 1; k < 100; ++k) {
            const double t = deg_to_rad(20.0) * k / 99;
            const auto cur = wave_normal_indices(n, (std::cos(t) * a + std::sin(t) * b).normalized());
            max_step = std::max({max_step, std::fabs(cur.fast - prev.fast), std::fabs(cur.slow - prev.slow)});
            prev = cur;
        }
    }
    c.check(max_step < 1e-3, "branch continuity max step " + fmt(max_step));

    // Independent mismatch evaluation on converged traces.
    int traces = 0;
    double worst_dk = 0.0;
    while (traces < 100) {
        const bool use_bbo = u(rng) < 0.3;
        const PumpConfig p = use_bbo ? PumpConfig{bbo(), kPump, deg_to_rad(29.0 + 1.5 * u(rng)), 2.0 * kPi * u(rng)}
                                     : PumpConfig{bibo(), kPump, deg_to_rad(150.0 + 2.0 * u(rng)), kPi / 2};
        const auto t = trace_ring(p, kSignal, 12);
        for (const auto& s : t.samples) {
            const auto m = mismatch(p, s.theta_s, s.theta_i, s.phi_s, kSignal);
            worst_dk = std::max(worst_dk, m.norm() / m.k_pump);
        }
        ++traces;
    }
    c.check(worst_dk < 1e-9, "max |dk|/|k_p| over 100 traces " + fmt(worst_dk));

    // Overlap bounds under random non-negative curves.
    const auto grid = FrequencyGrid::uniform(1.0, 41).offsets;
    double lo = 1.0, hi = 0.0;
    for (int k = 0; k < 200; ++k) {
        std::vector<double> v1(grid.size()), v2(grid.size());
        for (auto& x : v1) x = u(rng) < 0.3 ? 0.0 : u(rng);
        for (auto& x : v2) x = u(rng) < 0.3 ? 0.0 : u(rng);
        v1[20] += 0.01;
        v2[20] += 0.01;
        const double o = overlap_integral(SpectrumCurve{grid, v1}, SpectrumCurve{grid, v2});
        lo = std::min(lo, o);
        hi = std::max(hi, o);
    }
    c.check(lo >= 0.0 && hi <= 1.0, "overlap range [" + fmt(lo) + ", " + fmt(hi) + "] over 200 curves");
}

}  // namespace

int main() {
    const std::vector<std::function<void(Criterion&)>> bodies{criterion_1, criterion_2, criterion_3,
                                                              criterion_4, criterion_5, criterion_6,
                                                              criterion_7, criterion_8, criterion_9};
    bool all = true;
    for (std::size_t k = 0; k < bodies.size(); ++k) {
        Criterion c(static_cast<int>(k + 1));
        run(c, bodies[k]);
        all = all && c.ok();
    }
    std::fflush(stdout);
    return all ? 0 : 1;
}
