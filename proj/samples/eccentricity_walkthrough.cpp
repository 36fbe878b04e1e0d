// Walks through the three reference cuts: infer the pump angle from one
// measured exterior ring angle, trace the full ring, and compare with the
// small-angle estimate.

#include <cstdio>

#include "ringtrace/ringtrace.hpp"

using namespace ringtrace;

int main() {
    const auto& reg = default_registry();
    const Wavelength pump{405.0}, signal{810.0};

    struct Row {
        const char* crystal;
        double phi_p_deg;
        double ext_deg;  // measured exterior angle at phi_s = phi_p
        double hint_deg;
    };
    const Row rows[] = {{"BBO", 0.0, 4.12, 29.4}, {"BiBO", 90.0, 4.10893, 152.0}, {"BiBO", 0.0, 4.05449, 51.0}};

    std::printf("%-5s %8s %12s %10s %12s\n", "xtal", "phi_p", "theta_p", "ecc", "ecc_small");
    for (const auto& r : rows) {
        InferRequest req;
        req.species = reg.at(r.crystal);
        req.phi_p = deg_to_rad(r.phi_p_deg);
        req.target_ext = deg_to_rad(r.ext_deg);
        req.target_phi_s = req.phi_p;
        req.theta_hint = deg_to_rad(r.hint_deg);
        const double theta_p = infer_pump_angle(req).theta_p;

        const auto trace = trace_ring(PumpConfig{req.species, pump, theta_p, req.phi_p}, signal, 360);
        const auto est = eccentricity_estimate(expansion_at(req.species, req.phi_p, theta_p, signal));
        std::printf("%-5s %8.1f %12.5f %10.5f %12.5f\n", r.crystal, r.phi_p_deg, rad_to_deg(theta_p),
                    ring_eccentricity(trace), est.internal);
    }
}
