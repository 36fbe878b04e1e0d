#pragma once

#include <cmath>
#include <numbers>

namespace ringtrace {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = std::numbers::pi;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

// Vacuum wavelength. Every public interface takes nanometres; the
// micrometre view exists only for dispersion formulas.
struct Wavelength {
    double nm = 0.0;

    constexpr double um() const { return nm * 1e-3; }
    constexpr double meters() const { return nm * 1e-9; }
    double angular_frequency() const { return 2.0 * kPi * kSpeedOfLight / meters(); }
    // Vacuum wavenumber 2*pi/lambda in rad/m.
    double vacuum_wavenumber() const { return 2.0 * kPi / meters(); }

    static Wavelength from_angular_frequency(double omega) {
        return Wavelength{2.0 * kPi * kSpeedOfLight / omega * 1e9};
    }

    friend constexpr bool operator==(Wavelength, Wavelength) = default;
};

// Idler wavelength fixed by energy conservation, computed in frequency
// space: 1/lambda_i = 1/lambda_p - 1/lambda_s.
constexpr Wavelength idler_wavelength(Wavelength pump, Wavelength signal) {
    return Wavelength{1.0 / (1.0 / pump.nm - 1.0 / signal.nm)};
}

}  // namespace ringtrace
