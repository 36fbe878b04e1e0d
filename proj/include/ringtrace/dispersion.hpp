#pragma once

// Crystal definitions and principal-axis refractive indices.
//
// Coefficient sets live in a JSON data file (see data/crystals.json, also
// embedded as the default registry). Each crystal names one algebraic
// dispersion form; wavelengths enter in nanometres and are converted to
// micrometres only inside DispersionModel::n_squared.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ringtrace/default_crystals.hpp"
#include "ringtrace/errors.hpp"
#include "ringtrace/units.hpp"

namespace ringtrace {

enum class SellmeierForm {
    // n^2 = A + B/(l^2 - C) - D l^2
    QuadraticPole,
    // n^2 = A + B/(l^2 - C) - D l^2 + E l^4 - F l^6
    QuadraticPolePoly,
    // n^2 = 1 + sum_k B_k l^2/(l^2 - C_k), coefficients as B1,C1,B2,C2,...
    Sum,
};

inline std::string_view to_string(SellmeierForm form) {
    switch (form) {
        case SellmeierForm::QuadraticPole: return "quadratic_pole";
        case SellmeierForm::QuadraticPolePoly: return "quadratic_pole_poly";
        case SellmeierForm::Sum: return "sellmeier";
    }
    return "unknown";
}

inline SellmeierForm parse_sellmeier_form(std::string_view id) {
    if (id == "quadratic_pole") return SellmeierForm::QuadraticPole;
    if (id == "quadratic_pole_poly") return SellmeierForm::QuadraticPolePoly;
    if (id == "sellmeier") return SellmeierForm::Sum;
    throw ValidationError("unknown form_id '" + std::string(id) +
                          "' (expected quadratic_pole, quadratic_pole_poly or sellmeier)");
}

struct DispersionModel {
    SellmeierForm form = SellmeierForm::QuadraticPole;
    std::vector<double> coefficients;

    static bool coefficient_count_ok(SellmeierForm form, std::size_t count) {
        switch (form) {
            case SellmeierForm::QuadraticPole: return count == 4;
            case SellmeierForm::QuadraticPolePoly: return count == 6;
            case SellmeierForm::Sum: return count >= 2 && count % 2 == 0;
        }
        return false;
    }

    double n_squared(Wavelength lambda) const {
        const double l2 = lambda.um() * lambda.um();
        const auto& c = coefficients;
        switch (form) {
            case SellmeierForm::QuadraticPole:
                return c[0] + c[1] / (l2 - c[2]) - c[3] * l2;
            case SellmeierForm::QuadraticPolePoly:
                return c[0] + c[1] / (l2 - c[2]) - c[3] * l2 + c[4] * l2 * l2 -
                       c[5] * l2 * l2 * l2;
            case SellmeierForm::Sum: {
                double n2 = 1.0;
                for (std::size_t k = 0; k + 1 < c.size(); k += 2) n2 += c[k] * l2 / (l2 - c[k + 1]);
                return n2;
            }
        }
        return 0.0;
    }

    double index(Wavelength lambda) const { return std::sqrt(n_squared(lambda)); }
};

enum class Symmetry { UniaxialNegative, BiaxialNegative };

inline std::string_view to_string(Symmetry s) {
    return s == Symmetry::UniaxialNegative ? "uniaxial-negative" : "biaxial-negative";
}

struct WavelengthRange {
    double min_nm = 0.0;
    double max_nm = 0.0;

    bool contains(Wavelength l) const { return l.nm >= min_nm && l.nm <= max_nm; }
};

struct PrincipalIndices {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    std::array<double, 3> as_array() const { return {x, y, z}; }
    double min() const { return std::min({x, y, z}); }
    double max() const { return std::max({x, y, z}); }
};

struct CrystalSpecies {
    std::string id;
    Symmetry symmetry = Symmetry::UniaxialNegative;
    // x, y, z principal axes. Uniaxial crystals carry the ordinary model in
    // both x and y.
    std::array<DispersionModel, 3> axes;
    WavelengthRange valid_range;
    std::string source;

    bool is_uniaxial() const { return symmetry == Symmetry::UniaxialNegative; }

    void require_in_range(Wavelength lambda) const {
        if (!valid_range.contains(lambda) || !std::isfinite(lambda.nm)) {
            std::ostringstream msg;
            msg << id << ": wavelength " << lambda.nm << " nm outside the dispersion validity range ["
                << valid_range.min_nm << ", " << valid_range.max_nm << "] nm";
            throw RangeError(msg.str(), valid_range.min_nm, valid_range.max_nm);
        }
    }

    PrincipalIndices principal_indices(Wavelength lambda) const {
        require_in_range(lambda);
        const double nx = axes[0].index(lambda);
        const double nz = axes[2].index(lambda);
        const double ny = is_uniaxial() ? nx : axes[1].index(lambda);
        return {nx, ny, nz};
    }
};

// Immutable after construction; lookups are safe from any thread.
class CrystalRegistry {
public:
    CrystalRegistry() = default;
    explicit CrystalRegistry(std::vector<CrystalSpecies> crystals) : crystals_(std::move(crystals)) {}

    const std::vector<CrystalSpecies>& crystals() const { return crystals_; }
    std::size_t size() const { return crystals_.size(); }

    bool contains(std::string_view id) const {
        return std::any_of(crystals_.begin(), crystals_.end(),
                           [&](const CrystalSpecies& c) { return c.id == id; });
    }

    std::vector<std::string> ids() const {
        std::vector<std::string> out;
        for (const auto& c : crystals_) out.push_back(c.id);
        return out;
    }

    const CrystalSpecies& at(std::string_view id) const {
        for (const auto& c : crystals_) {
            if (c.id == id) return c;
        }
        std::string msg = "unknown crystal '" + std::string(id) + "'; available:";
        for (const auto& c : crystals_) msg += " " + c.id;
        throw ValidationError(msg);
    }

private:
    std::vector<CrystalSpecies> crystals_;
};

namespace detail {

inline const nlohmann::json& require_key(const nlohmann::json& obj, const char* key,
                                         const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
        throw SchemaError(where + ": missing key '" + key + "'");
    }
    return obj.at(key);
}

inline DispersionModel parse_axis(const nlohmann::json& coeffs, SellmeierForm form,
                                  const std::string& where) {
    if (!coeffs.is_array()) throw SchemaError(where + ": coefficients must be an array");
    DispersionModel model{form, {}};
    for (const auto& v : coeffs) {
        if (!v.is_number()) throw SchemaError(where + ": coefficients must be numbers");
        model.coefficients.push_back(v.get<double>());
    }
    if (!DispersionModel::coefficient_count_ok(form, model.coefficients.size())) {
        throw ValidationError(where + ": " + std::to_string(model.coefficients.size()) +
                              " coefficients do not match form_id '" +
                              std::string(to_string(form)) + "'");
    }
    return model;
}

// Index positivity and axis ordering, sampled across the validity range.
inline void validate_species(const CrystalSpecies& c) {
    constexpr int kSamples = 64;
    const auto& r = c.valid_range;
    for (int k = 0; k <= kSamples; ++k) {
        const Wavelength l{r.min_nm + (r.max_nm - r.min_nm) * k / kSamples};
        for (int a = 0; a < 3; ++a) {
            const double n2 = c.axes[a].n_squared(l);
            if (!std::isfinite(n2) || n2 <= 1.0) {
                throw ValidationError(c.id + ": index not real and > 1 at " + std::to_string(l.nm) +
                                      " nm on axis " + "xyz"[a]);
            }
        }
        const auto n = c.principal_indices(l);
        if (c.symmetry == Symmetry::BiaxialNegative && !(n.x < n.y && n.y < n.z)) {
            throw ValidationError(c.id + ": biaxial-negative crystal requires n_x < n_y < n_z, violated at " +
                                  std::to_string(l.nm) + " nm");
        }
        if (c.symmetry == Symmetry::UniaxialNegative && !(n.z < n.x)) {
            throw ValidationError(c.id + ": uniaxial-negative crystal requires n_e < n_o, violated at " +
                                  std::to_string(l.nm) + " nm");
        }
    }
}

}  // namespace detail

// Parses the crystal data file contents. `origin` names the file in messages.
inline CrystalRegistry parse_crystal_database(std::string_view text,
                                              const std::string& origin = "<memory>") {
    if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
        throw ValidationError(origin + ": no crystals defined");
    }
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const nlohmann::json::parse_error& e) {
        throw SchemaError(origin + ": " + e.what());
    }
    if (doc.is_null() || (doc.is_object() && doc.empty())) {
        throw ValidationError(origin + ": no crystals defined");
    }
    const auto& list = detail::require_key(doc, "crystals", origin);
    if (!list.is_array()) throw SchemaError(origin + ": 'crystals' must be an array");
    if (list.empty()) throw ValidationError(origin + ": no crystals defined");

    std::vector<CrystalSpecies> out;
    for (std::size_t i = 0; i < list.size(); ++i) {
        const auto& entry = list[i];
        std::string where = origin + ": crystals[" + std::to_string(i) + "]";
        try {
            CrystalSpecies c;
            c.id = detail::require_key(entry, "id", where).get<std::string>();
            where += " ('" + c.id + "')";
            const auto sym = detail::require_key(entry, "symmetry", where).get<std::string>();
            if (sym == "uniaxial-negative") {
                c.symmetry = Symmetry::UniaxialNegative;
            } else if (sym == "biaxial-negative") {
                c.symmetry = Symmetry::BiaxialNegative;
            } else {
                throw ValidationError(where + ": unsupported symmetry '" + sym + "'");
            }
            const auto form =
                parse_sellmeier_form(detail::require_key(entry, "form_id", where).get<std::string>());
            const auto& range = detail::require_key(entry, "valid_range_nm", where);
            if (!range.is_array() || range.size() != 2) {
                throw SchemaError(where + ": valid_range_nm must be [min, max]");
            }
            c.valid_range = {range[0].get<double>(), range[1].get<double>()};
            if (!(c.valid_range.min_nm > 0.0 && c.valid_range.max_nm > c.valid_range.min_nm)) {
                throw ValidationError(where + ": valid_range_nm must satisfy 0 < min < max");
            }
            c.source = detail::require_key(entry, "source", where).get<std::string>();
            const auto& axes = detail::require_key(entry, "axes", where);
            if (c.is_uniaxial()) {
                const auto o = detail::parse_axis(detail::require_key(axes, "o", where), form, where + ".o");
                const auto e = detail::parse_axis(detail::require_key(axes, "e", where), form, where + ".e");
                c.axes = {o, o, e};
            } else {
                c.axes = {detail::parse_axis(detail::require_key(axes, "x", where), form, where + ".x"),
                          detail::parse_axis(detail::require_key(axes, "y", where), form, where + ".y"),
                          detail::parse_axis(detail::require_key(axes, "z", where), form, where + ".z")};
            }
            for (const auto& prev : out) {
                if (prev.id == c.id) throw ValidationError(where + ": duplicate crystal id");
            }
            detail::validate_species(c);
            out.push_back(std::move(c));
        } catch (const nlohmann::json::exception& e) {
            throw SchemaError(where + ": " + e.what());
        }
    }
    return CrystalRegistry(std::move(out));
}

inline CrystalRegistry load_crystal_database(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open crystal database '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_crystal_database(buf.str(), path);
}

inline const CrystalRegistry& default_registry() {
    static const CrystalRegistry registry = parse_crystal_database(kDefaultCrystalDatabase, "<embedded>");
    return registry;
}

inline PrincipalIndices principal_indices(const CrystalSpecies& species, Wavelength lambda) {
    return species.principal_indices(lambda);
}

}  // namespace ringtrace
