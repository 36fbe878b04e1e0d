#pragma once

// Camera-like ring images and the seven-parameter elliptical ring fit.
//
// Object-plane coordinates are in cm with the origin at the image centre;
// column index runs along x, row index along y. The ellipse axes are
// parallel to the image axes.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "ringtrace/errors.hpp"

namespace ringtrace {

struct ImageGeometry {
    int width = 125;
    int height = 125;
    double pixel_pitch_um = 24.0;
    double magnification = 8.6;

    double cm_per_pixel() const { return pixel_pitch_um * 1e-4 * magnification; }
    double x_cm(int col) const { return (col - 0.5 * (width - 1)) * cm_per_pixel(); }
    double y_cm(int row) const { return (row - 0.5 * (height - 1)) * cm_per_pixel(); }

    void validate() const {
        if (width <= 0 || height <= 0) throw ArgumentError("image dimensions must be positive");
        if (!(pixel_pitch_um > 0.0) || !(magnification > 0.0)) {
            throw ArgumentError("pixel pitch and magnification must be positive");
        }
    }
};

struct ImageGrid {
    ImageGeometry geometry;
    std::vector<double> pixels;  // row-major, rows = y

    double at(int col, int row) const { return pixels[static_cast<std::size_t>(row) * geometry.width + col]; }
    double& at(int col, int row) { return pixels[static_cast<std::size_t>(row) * geometry.width + col]; }

    void validate() const {
        geometry.validate();
        if (pixels.size() != static_cast<std::size_t>(geometry.width) * geometry.height) {
            throw ArgumentError("pixel count does not match the image dimensions");
        }
        for (double v : pixels) {
            if (!std::isfinite(v) || v < 0.0) throw ArgumentError("image intensities must be finite and non-negative");
        }
    }
};

// semi_x and semi_y are the half-axes along the image axes; a() <= b().
struct RingModel {
    double amplitude = 1000.0;
    double background = 100.0;
    double x0 = 0.0;
    double y0 = 0.0;
    double semi_x = 1.0;
    double semi_y = 1.0;
    double sigma = 0.04;

    double a() const { return std::min(semi_x, semi_y); }
    double b() const { return std::max(semi_x, semi_y); }

    void validate() const {
        if (!(amplitude > 0.0)) throw ArgumentError("ring amplitude must be positive");
        if (!(sigma > 0.0)) throw ArgumentError("ring width must be positive");
        if (!(semi_x > 0.0) || !(semi_y > 0.0)) throw ArgumentError("ring semi-axes must be positive");
        if (!std::isfinite(background) || !std::isfinite(x0) || !std::isfinite(y0)) {
            throw ArgumentError("ring parameters must be finite");
        }
    }
};

inline double ellipse_eccentricity(double a, double b) {
    const double lo = std::min(a, b), hi = std::max(a, b);
    return std::sqrt(std::max(0.0, 1.0 - (lo / hi) * (lo / hi)));
}

inline double model_intensity(const RingModel& m, double x, double y) {
    const double u = (x - m.x0) / m.semi_x, v = (y - m.y0) / m.semi_y;
    const double d = std::sqrt(u * u + v * v) - 1.0;
    return m.background + m.amplitude * std::exp(-d * d * m.semi_x * m.semi_y / (2.0 * m.sigma * m.sigma));
}

// ---------------------------------------------------------------------------
// Synthesis

struct NoiseSpec {
    std::uint64_t seed = 1;
    bool poisson = true;
    double read_sigma = 0.0;  // counts
};

struct Synthesis {
    ImageGrid image;
    std::vector<std::string> warnings;
};

inline Synthesis synthesize(const RingModel& m, const ImageGeometry& g, const NoiseSpec& noise = {false, false, 0.0}) {
    g.validate();
    m.validate();
    if (!(noise.read_sigma >= 0.0)) throw ArgumentError("read noise must be non-negative");
    Synthesis out;
    out.image.geometry = g;
    out.image.pixels.resize(static_cast<std::size_t>(g.width) * g.height);
    const double reach_x = m.semi_x + 4.0 * m.sigma, reach_y = m.semi_y + 4.0 * m.sigma;
    if (m.x0 - reach_x < g.x_cm(0) || m.x0 + reach_x > g.x_cm(g.width - 1) || m.y0 - reach_y < g.y_cm(0) ||
        m.y0 + reach_y > g.y_cm(g.height - 1)) {
        out.warnings.push_back("ring extends past the image border");
    }
    std::mt19937_64 rng(noise.seed);
    std::normal_distribution<double> read(0.0, 1.0);
    for (int row = 0; row < g.height; ++row) {
        for (int col = 0; col < g.width; ++col) {
            double v = model_intensity(m, g.x_cm(col), g.y_cm(row));
            if (noise.poisson) v = static_cast<double>(std::poisson_distribution<std::int64_t>(v)(rng));
            if (noise.read_sigma > 0.0) v += noise.read_sigma * read(rng);
            out.image.at(col, row) = std::max(0.0, v);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Initialisation

struct RingInit {
    RingModel model;
    bool touches_border = false;
    std::vector<std::string> warnings;
};

namespace detail {

inline double median(std::vector<double> v) {
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

}  // namespace detail

inline RingInit fit_initialization(const ImageGrid& image) {
    image.validate();
    const auto& g = image.geometry;
    if (g.width < 8 || g.height < 8) throw InitializationError("image too small to hold a ring");

    std::vector<double> border;
    for (int col = 0; col < g.width; ++col) {
        border.push_back(image.at(col, 0));
        border.push_back(image.at(col, g.height - 1));
    }
    for (int row = 1; row + 1 < g.height; ++row) {
        border.push_back(image.at(0, row));
        border.push_back(image.at(g.width - 1, row));
    }
    const double bg = detail::median(border);
    std::vector<double> dev;
    for (double v : border) dev.push_back(std::fabs(v - bg));
    const double noise = std::max(1.4826 * detail::median(dev), std::sqrt(std::max(bg, 0.0)));
    const double peak = *std::max_element(image.pixels.begin(), image.pixels.end());
    // The brightest pixel of pure noise sits several sigma up; test the
    // 99th percentile instead.
    std::vector<double> sorted = image.pixels;
    const auto p99 = sorted.begin() + static_cast<std::ptrdiff_t>(0.99 * static_cast<double>(sorted.size() - 1));
    std::nth_element(sorted.begin(), p99, sorted.end());
    if (!(*p99 - bg > 3.0 * noise) || !(peak > bg)) {
        throw InitializationError("no ring-like feature above the background");
    }

    // Centroid of the bright pixels.
    const double cut = bg + 0.3 * (peak - bg);
    double sw = 0.0, sx = 0.0, sy = 0.0;
    for (int row = 0; row < g.height; ++row) {
        for (int col = 0; col < g.width; ++col) {
            const double w = image.at(col, row) - bg;
            if (image.at(col, row) < cut) continue;
            sw += w;
            sx += w * g.x_cm(col);
            sy += w * g.y_cm(row);
        }
    }
    RingInit init;
    init.model.background = bg;
    init.model.x0 = sx / sw;
    init.model.y0 = sy / sw;

    // Radial profile in one-pixel bins.
    const double step = g.cm_per_pixel();
    const std::size_t bins = static_cast<std::size_t>(std::hypot(g.width, g.height)) + 2;
    std::vector<double> sum(bins, 0.0), count(bins, 0.0);
    for (int row = 0; row < g.height; ++row) {
        for (int col = 0; col < g.width; ++col) {
            const double r = std::hypot(g.x_cm(col) - init.model.x0, g.y_cm(row) - init.model.y0) / step;
            const auto k = static_cast<std::size_t>(r);
            sum[k] += image.at(col, row) - bg;
            count[k] += 1.0;
        }
    }
    std::vector<double> profile(bins, 0.0);
    for (std::size_t k = 0; k < bins; ++k) profile[k] = count[k] > 0 ? sum[k] / count[k] : 0.0;
    // Skip the few central bins: too few pixels for a stable mean.
    const std::size_t first = 2;
    const auto top = std::max_element(profile.begin() + first, profile.end());
    const auto k_peak = static_cast<std::size_t>(top - profile.begin());
    const double half = 0.5 * *top;
    auto crossing = [&](int dir) {
        auto k = static_cast<std::ptrdiff_t>(k_peak);
        while (k + dir >= 0 && k + dir < static_cast<std::ptrdiff_t>(bins) && profile[k + dir] > half) k += dir;
        const auto k2 = k + dir;
        if (k2 < 0 || k2 >= static_cast<std::ptrdiff_t>(bins)) return static_cast<double>(k) + 0.5;
        const double f = (profile[k] - half) / (profile[k] - profile[k2]);
        return static_cast<double>(k) + 0.5 + dir * f;
    };
    const double fwhm = std::max(crossing(+1) - crossing(-1), 1.0);
    init.model.semi_x = init.model.semi_y = (static_cast<double>(k_peak) + 0.5) * step;
    init.model.sigma = fwhm * step / (2.0 * std::sqrt(2.0 * std::log(2.0)));
    init.model.amplitude = *top;

    const double reach = init.model.semi_x + 4.0 * init.model.sigma;
    if (init.model.x0 - reach < g.x_cm(0) || init.model.x0 + reach > g.x_cm(g.width - 1) ||
        init.model.y0 - reach < g.y_cm(0) || init.model.y0 + reach > g.y_cm(g.height - 1)) {
        init.touches_border = true;
        init.warnings.push_back("ring touches the image border; fit may be biased");
    }
    return init;
}

// ---------------------------------------------------------------------------
// Fit

struct RingFit {
    RingModel model;
    double ecc = 0.0;
    double ecc_stat_error = 0.0;
    double residual_rms = 0.0;
    int iterations = 0;
};

struct FitOptions {
    int max_iterations = 500;
    double cost_tolerance = 1e-10;  // relative
    double step_tolerance = 1e-12;
};

namespace detail {

using Params = Eigen::Matrix<double, 7, 1>;

// Positive quantities are fitted as logarithms.
inline Params to_params(const RingModel& m) {
    Params p;
    p << std::log(m.amplitude), m.background, m.x0, m.y0, std::log(m.semi_x), std::log(m.semi_y), std::log(m.sigma);
    return p;
}

inline RingModel from_params(const Params& p) {
    return {std::exp(p[0]), p[1], p[2], p[3], std::exp(p[4]), std::exp(p[5]), std::exp(p[6])};
}

struct Sampler {
    const ImageGrid& image;
    std::vector<double> xs, ys;

    explicit Sampler(const ImageGrid& img) : image(img) {
        const auto& g = img.geometry;
        for (int c = 0; c < g.width; ++c) xs.push_back(g.x_cm(c));
        for (int r = 0; r < g.height; ++r) ys.push_back(g.y_cm(r));
    }

    Eigen::VectorXd residuals(const Params& p) const {
        const RingModel m = from_params(p);
        Eigen::VectorXd r(static_cast<Eigen::Index>(image.pixels.size()));
        Eigen::Index k = 0;
        for (double y : ys) {
            for (double x : xs) {
                r[k] = model_intensity(m, x, y) - image.pixels[static_cast<std::size_t>(k)];
                ++k;
            }
        }
        return r;
    }

    Eigen::MatrixXd jacobian(const Params& p) const {
        Eigen::MatrixXd j(static_cast<Eigen::Index>(image.pixels.size()), 7);
        for (int c = 0; c < 7; ++c) {
            const double h = 1e-6 * std::max(1.0, std::fabs(p[c]));
            Params up = p, down = p;
            up[c] += h;
            down[c] -= h;
            j.col(c) = (residuals(up) - residuals(down)) / (2.0 * h);
        }
        return j;
    }
};

}  // namespace detail

inline RingFit fit_ring(const ImageGrid& image, const RingModel& init, const FitOptions& opt = {}) {
    image.validate();
    init.validate();
    const detail::Sampler s(image);
    detail::Params p = detail::to_params(init);
    Eigen::VectorXd r = s.residuals(p);
    double cost = 0.5 * r.squaredNorm();
    double lambda = 1e-3;
    bool converged = false;
    int it = 0;
    Eigen::MatrixXd j;
    for (; it < opt.max_iterations && !converged; ++it) {
        j = s.jacobian(p);
        const Eigen::Matrix<double, 7, 7> h = j.transpose() * j;
        const detail::Params grad = j.transpose() * r;
        while (true) {
            Eigen::Matrix<double, 7, 7> damped = h;
            damped.diagonal() += lambda * h.diagonal();
            const detail::Params step = damped.ldlt().solve(-grad);
            const detail::Params trial = p + step;
            const Eigen::VectorXd r_trial = s.residuals(trial);
            const double c_trial = 0.5 * r_trial.squaredNorm();
            if (!std::isfinite(c_trial) && lambda > 1e20) throw FitError("ring fit diverged", cost);
            if (std::isfinite(c_trial) && c_trial < cost) {
                const double rel = (cost - c_trial) / cost;
                p = trial;
                r = r_trial;
                cost = c_trial;
                lambda = std::max(lambda / 3.0, 1e-12);
                converged = rel < opt.cost_tolerance || step.norm() < opt.step_tolerance;
                break;
            }
            lambda *= 4.0;
            if (step.norm() < opt.step_tolerance || lambda > 1e20) {
                // No representable improvement left: at the optimum.
                converged = true;
                break;
            }
        }
    }
    if (!converged) {
        std::ostringstream msg;
        msg << "ring fit did not converge in " << opt.max_iterations << " iterations";
        throw FitError(msg.str(), cost);
    }

    RingFit fit;
    fit.model = detail::from_params(p);
    fit.iterations = it;
    const auto n = static_cast<double>(image.pixels.size());
    fit.residual_rms = std::sqrt(2.0 * cost / n);
    fit.ecc = ellipse_eccentricity(fit.model.semi_x, fit.model.semi_y);

    // Covariance of the log semi-axes; the axis ratio r = a / b has
    // var(log r) = var(la) + var(lb) - 2 cov(la, lb).
    j = s.jacobian(p);
    const Eigen::Matrix<double, 7, 7> h = j.transpose() * j;
    const Eigen::Matrix<double, 7, 7> cov = h.inverse() * (2.0 * cost / std::max(n - 7.0, 1.0));
    const double var_log_ratio = std::max(0.0, cov(4, 4) + cov(5, 5) - 2.0 * cov(4, 5));
    const double ratio = fit.model.a() / fit.model.b();
    const double sigma_ratio = ratio * std::sqrt(var_log_ratio);
    // Eccentricity of a one-sigma axis-ratio fluctuation about a circle;
    // below it the linear propagation d(ecc)/dr = -r/ecc is meaningless.
    const double floor = std::sqrt(std::max(0.0, 1.0 - (1.0 - sigma_ratio) * (1.0 - sigma_ratio)));
    fit.ecc_stat_error = fit.ecc > floor ? ratio / fit.ecc * sigma_ratio : floor;
    return fit;
}

inline RingFit fit_ring(const ImageGrid& image) { return fit_ring(image, fit_initialization(image).model); }

struct RepeatedError {
    double ecc_mean = 0.0;
    double ecc_spread = 0.0;  // sample standard deviation
};

inline RepeatedError repeated_measurement_error(const std::vector<RingFit>& fits) {
    if (fits.size() < 3) throw ArgumentError("repeated_measurement_error needs at least 3 fits");
    RepeatedError out;
    // Deviations from the first fit keep identical inputs exactly spread-free.
    const double ref = fits.front().ecc;
    const auto n = static_cast<double>(fits.size());
    double s1 = 0.0, s2 = 0.0;
    for (const auto& f : fits) {
        s1 += f.ecc - ref;
        s2 += (f.ecc - ref) * (f.ecc - ref);
    }
    out.ecc_mean = ref + s1 / n;
    out.ecc_spread = std::sqrt(std::max(0.0, (s2 - s1 * s1 / n) / (n - 1.0)));
    return out;
}

// Synthesise and fit each model with seed base_seed + index, in parallel.
inline std::vector<RingFit> fit_batch(const std::vector<RingModel>& truths, const ImageGeometry& g, NoiseSpec noise,
                                      unsigned threads = 1) {
    std::vector<RingFit> out(truths.size());
    std::vector<std::exception_ptr> errors(truths.size());
    auto task = [&](std::size_t k) {
        try {
            NoiseSpec n = noise;
            n.seed = noise.seed + k;
            out[k] = fit_ring(synthesize(truths[k], g, n).image);
        } catch (...) {
            errors[k] = std::current_exception();
        }
    };
    const unsigned t = std::clamp<unsigned>(threads, 1u, static_cast<unsigned>(std::max<std::size_t>(truths.size(), 1)));
    if (t == 1) {
        for (std::size_t k = 0; k < truths.size(); ++k) task(k);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned w = 0; w < t; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t k = w; k < truths.size(); k += t) task(k);
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Image files: 16-bit binary PGM (big-endian) and CSV (rows = y).

inline void write_pgm(const ImageGrid& image, const std::string& path) {
    image.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot open " + path + " for writing");
    const auto& g = image.geometry;
    out << "P5\n# pixel_pitch_um " << g.pixel_pitch_um << " magnification " << g.magnification << "\n"
        << g.width << ' ' << g.height << "\n65535\n";
    for (double v : image.pixels) {
        const auto q = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 65535L));
        const std::array<char, 2> bytes{static_cast<char>(q >> 8), static_cast<char>(q & 0xff)};
        out.write(bytes.data(), 2);
    }
    if (!out) throw ArgumentError("failed writing " + path);
}

inline ImageGrid read_pgm(const std::string& path, ImageGeometry defaults = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open " + path);
    auto token = [&]() {
        std::string t;
        while (in >> std::ws && in.peek() == '#') {
            std::string line;
            std::getline(in, line);
            std::istringstream c(line.substr(1));
            std::string key;
            double value = 0.0;
            while (c >> key >> value) {
                if (key == "pixel_pitch_um") defaults.pixel_pitch_um = value;
                if (key == "magnification") defaults.magnification = value;
            }
        }
        in >> t;
        return t;
    };
    if (token() != "P5") throw ArgumentError(path + ": not a binary PGM (P5)");
    ImageGrid img;
    try {
        defaults.width = std::stoi(token());
        defaults.height = std::stoi(token());
        const int maxval = std::stoi(token());
        if (maxval <= 0 || maxval > 65535) throw ArgumentError(path + ": bad PGM maxval");
        in.get();
        img.geometry = defaults;
        img.geometry.validate();
        const bool wide = maxval > 255;
        img.pixels.resize(static_cast<std::size_t>(defaults.width) * defaults.height);
        for (auto& v : img.pixels) {
            const int hi = in.get();
            const int lo = wide ? in.get() : 0;
            if (!in) throw ArgumentError(path + ": truncated PGM data");
            v = wide ? static_cast<double>((hi << 8) | lo) : static_cast<double>(hi);
        }
    } catch (const std::logic_error&) {
        throw ArgumentError(path + ": malformed PGM header");
    }
    return img;
}

inline void write_csv_image(const ImageGrid& image, const std::string& path) {
    image.validate();
    std::ofstream out(path);
    if (!out) throw ArgumentError("cannot open " + path + " for writing");
    out.precision(17);
    const auto& g = image.geometry;
    for (int col = 0; col < g.width; ++col) out << (col ? "," : "") << "c" << col;
    out << '\n';
    for (int row = 0; row < g.height; ++row) {
        for (int col = 0; col < g.width; ++col) out << (col ? "," : "") << image.at(col, row);
        out << '\n';
    }
}

inline ImageGrid read_csv_image(const std::string& path, ImageGeometry defaults = {}) {
    std::ifstream in(path);
    if (!in) throw ArgumentError("cannot open " + path);
    ImageGrid img;
    std::string line;
    int width = -1, rows = 0;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") continue;
        std::istringstream cells(line);
        std::string cell;
        std::vector<double> row;
        bool numeric = true;
        while (std::getline(cells, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
            } catch (const std::logic_error&) {
                numeric = false;
                break;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw ArgumentError(path + ": non-numeric cell in row " + std::to_string(rows + 1));
        }
        first = false;
        if (width < 0) width = static_cast<int>(row.size());
        if (static_cast<int>(row.size()) != width) throw ArgumentError(path + ": ragged CSV rows");
        img.pixels.insert(img.pixels.end(), row.begin(), row.end());
        ++rows;
    }
    if (rows == 0 || width <= 0) throw ArgumentError(path + ": empty image");
    defaults.width = width;
    defaults.height = rows;
    img.geometry = defaults;
    img.validate();
    return img;
}

}  // namespace ringtrace
