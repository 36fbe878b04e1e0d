// ringtrace: SPDC ring geometry, walk-off, spectra and ring-image fits.
//
// Exit status: 0 success, 2 invalid input, 3 numerical failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ringtrace/ringtrace.hpp"

using namespace ringtrace;
using report::JsonObject;
using report::Table;

namespace {

struct Globals {
    std::string crystal_db;
    unsigned threads = 1;
    std::string output;
    std::string format;
};

struct PumpArgs {
    std::string crystal;
    double theta_p = 0.0;
    double phi_p = 0.0;
    double lambda_p = 405.0;
    double lambda_s = 810.0;
    std::string pump_branch = "fast";
    std::string daughter_branch = "slow";
};

Branch parse_branch(const std::string& s) { return s == "slow" ? Branch::Slow : Branch::Fast; }

void add_crystal(CLI::App* sub, PumpArgs& a) {
    sub->add_option("--crystal", a.crystal, "Crystal id (see `crystals`)")->required();
}

void add_branches(CLI::App* sub, PumpArgs& a) {
    sub->add_option("--pump-branch", a.pump_branch, "Pump polarization branch")
        ->check(CLI::IsMember({"fast", "slow"}))
        ->capture_default_str();
    sub->add_option("--daughter-branch", a.daughter_branch, "Signal/idler polarization branch")
        ->check(CLI::IsMember({"fast", "slow"}))
        ->capture_default_str();
}

void add_pump(CLI::App* sub, PumpArgs& a, bool with_signal = true) {
    add_crystal(sub, a);
    sub->add_option("--theta-p", a.theta_p, "Pump polar angle in the crystal frame, deg")
        ->required()
        ->check(CLI::Range(0.0, 180.0));
    sub->add_option("--phi-p", a.phi_p, "Pump azimuth in the crystal frame, deg")->capture_default_str();
    sub->add_option("--lambda-p", a.lambda_p, "Pump wavelength, nm")->check(CLI::PositiveNumber)->capture_default_str();
    if (with_signal) {
        sub->add_option("--lambda-s", a.lambda_s, "Signal wavelength, nm")
            ->check(CLI::PositiveNumber)
            ->capture_default_str();
    }
    add_branches(sub, a);
}

CrystalRegistry load_registry(const Globals& g) {
    if (!g.crystal_db.empty()) return load_crystal_database(g.crystal_db);
    if (const char* env = std::getenv("RINGTRACE_CRYSTAL_DB"); env != nullptr && *env != '\0') {
        return load_crystal_database(env);
    }
    return default_registry();
}

PumpConfig make_pump(const CrystalRegistry& reg, const PumpArgs& a) {
    return {reg.at(a.crystal), Wavelength{a.lambda_p}, deg_to_rad(a.theta_p), deg_to_rad(a.phi_p),
            parse_branch(a.pump_branch), parse_branch(a.daughter_branch)};
}

JsonObject pump_json(const PumpArgs& a) {
    JsonObject o;
    o.text("crystal", a.crystal)
        .number("theta_p_deg", a.theta_p)
        .number("phi_p_deg", a.phi_p)
        .number("lambda_p_nm", a.lambda_p)
        .number("lambda_s_nm", a.lambda_s);
    return o;
}

// Writes to --output or stdout.
class Sink {
public:
    explicit Sink(const std::string& path) {
        if (!path.empty()) {
            file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
            if (!*file_) throw ArgumentError("cannot open output file '" + path + "'");
        }
    }
    std::ostream& out() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

void warn(const std::vector<std::string>& warnings) {
    for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
}

std::string pick_format(const Globals& g, const std::string& fallback) {
    const std::string f = g.format.empty() ? fallback : g.format;
    if (f != "json" && f != "csv") throw ArgumentError("--format must be json or csv");
    return f;
}

void emit_table(const Globals& g, const std::string& default_format, const JsonObject& meta, const Table& t) {
    Sink sink(g.output);
    if (pick_format(g, default_format) == "csv") {
        t.write_csv(sink.out());
    } else {
        JsonObject o = meta;
        o.objects("rows", t.json_rows());
        sink.out() << o.render();
    }
}

void emit_object(const Globals& g, const JsonObject& o, const std::vector<std::string>& csv_keys = {},
                 const std::vector<double>& csv_values = {}) {
    Sink sink(g.output);
    if (pick_format(g, "json") == "csv") {
        if (csv_keys.empty()) throw ArgumentError("this command has no CSV form; use --format json");
        Table t{csv_keys, {csv_values}};
        t.write_csv(sink.out());
    } else {
        sink.out() << o.render();
    }
}

// ---------------------------------------------------------------------------
// Commands

void cmd_crystals(const Globals& g, double lambda_nm) {
    const auto reg = load_registry(g);
    std::vector<JsonObject> rows;
    Sink sink(g.output);
    const bool csv = pick_format(g, "json") == "csv";
    if (csv) sink.out() << "id,symmetry,min_nm,max_nm,n_x,n_y,n_z,source\n";
    for (const auto& c : reg.crystals()) {
        std::optional<PrincipalIndices> n;
        if (lambda_nm > 0.0 && c.valid_range.contains(Wavelength{lambda_nm})) n = c.principal_indices(Wavelength{lambda_nm});
        if (csv) {
            sink.out() << c.id << ',' << to_string(c.symmetry) << ',' << report::format_number(c.valid_range.min_nm) << ','
                       << report::format_number(c.valid_range.max_nm);
            for (double v : {n ? n->x : NAN, n ? n->y : NAN, n ? n->z : NAN}) sink.out() << ',' << report::format_number(v);
            sink.out() << ',' << report::quote(c.source) << '\n';
            continue;
        }
        JsonObject o;
        o.text("id", c.id)
            .text("symmetry", std::string(to_string(c.symmetry)))
            .number("min_nm", c.valid_range.min_nm)
            .number("max_nm", c.valid_range.max_nm)
            .text("source", c.source);
        if (n) o.numbers("principal_indices", {n->x, n->y, n->z});
        rows.push_back(std::move(o));
    }
    if (!csv) {
        JsonObject out;
        if (lambda_nm > 0.0) out.number("lambda_nm", lambda_nm);
        out.objects("crystals", rows);
        sink.out() << out.render();
    }
}

void cmd_ring(const Globals& g, const PumpArgs& a, std::size_t samples) {
    const auto reg = load_registry(g);
    const auto trace = trace_ring(make_pump(reg, a), Wavelength{a.lambda_s}, samples, g.threads);
    Table t{{"phi_s_deg", "theta_s_deg", "theta_i_deg", "theta_s_ext_deg", "n_s", "n_i", "residual"}, {}};
    for (const auto& s : trace.samples) {
        t.rows.push_back({rad_to_deg(s.phi_s), rad_to_deg(s.theta_s), rad_to_deg(s.theta_i), rad_to_deg(s.theta_s_ext),
                          s.n_s, s.n_i, s.residual});
    }
    emit_table(g, "csv", pump_json(a), t);
}

JsonObject small_angle_json(const CrystalSpecies& c, const PumpArgs& a) {
    JsonObject o;
    try {
        const auto e = expansion_at(c, deg_to_rad(a.phi_p), deg_to_rad(a.theta_p), Wavelength{a.lambda_s},
                                    parse_branch(a.pump_branch), parse_branch(a.daughter_branch));
        const auto est = eccentricity_estimate(e);
        o.number("ecc_internal", est.internal)
            .number("ecc_external", est.external)
            .number("theta_p0_deg", rad_to_deg(e.theta_p0))
            .boolean("threshold_limit", est.threshold_limit);
    } catch (const NumericError& err) {
        o.text("error", err.what());
    } catch (const ArgumentError& err) {
        o.text("error", err.what());
    }
    return o;
}

void cmd_ecc(const Globals& g, const PumpArgs& a, std::size_t samples) {
    const auto reg = load_registry(g);
    const auto pump = make_pump(reg, a);
    const auto trace = trace_ring(pump, Wavelength{a.lambda_s}, samples, g.threads);
    const double ext = ring_eccentricity(trace);
    const double internal = ring_eccentricity(trace, AngleKind::Internal);
    double lo = trace.samples.front().theta_s_ext, hi = lo, mean = 0.0;
    for (const auto& s : trace.samples) {
        lo = std::min(lo, s.theta_s_ext);
        hi = std::max(hi, s.theta_s_ext);
        mean += s.theta_s_ext / static_cast<double>(trace.samples.size());
    }
    JsonObject o = pump_json(a);
    o.integer("samples", static_cast<long long>(samples))
        .number("ecc", ext)
        .number("ecc_internal", internal)
        .number("theta_s_ext_mean_deg", rad_to_deg(mean))
        .number("theta_s_ext_spread_deg", rad_to_deg(hi - lo))
        .number("theta_s_ext_0_deg", rad_to_deg(sample_at(trace, 0.0).theta_s_ext))
        .number("theta_s_ext_90_deg", rad_to_deg(sample_at(trace, kPi / 2).theta_s_ext))
        .object("small_angle", small_angle_json(pump.species, a));
    emit_object(g, o, {"ecc", "ecc_internal", "theta_s_ext_mean_deg"}, {ext, internal, rad_to_deg(mean)});
}

void cmd_infer(const Globals& g, const PumpArgs& a, double theta_ext, double phi_s, std::optional<double> hint,
               std::size_t samples) {
    const auto reg = load_registry(g);
    InferRequest req;
    req.species = reg.at(a.crystal);
    req.phi_p = deg_to_rad(a.phi_p);
    req.lambda_p = Wavelength{a.lambda_p};
    req.lambda_s = Wavelength{a.lambda_s};
    req.target_ext = deg_to_rad(theta_ext);
    req.target_phi_s = deg_to_rad(phi_s);
    req.pump_branch = parse_branch(a.pump_branch);
    req.daughter_branch = parse_branch(a.daughter_branch);
    if (hint) req.theta_hint = deg_to_rad(*hint);
    const auto r = infer_pump_angle(req);
    PumpArgs solved = a;
    solved.theta_p = rad_to_deg(r.theta_p);
    const double ecc = ring_eccentricity(trace_ring(make_pump(reg, solved), req.lambda_s, samples, g.threads));
    JsonObject o = pump_json(solved);
    o.number("theta_ext_target_deg", theta_ext)
        .number("phi_s_deg", phi_s)
        .number("theta_p0_deg", rad_to_deg(r.theta_p0))
        .number("achieved_ext_deg", rad_to_deg(r.achieved_ext))
        .number("ecc", ecc);
    emit_object(g, o, {"theta_p_deg", "ecc"}, {solved.theta_p, ecc});
}

SweepSettings sweep_settings(const PumpArgs& a, double design, double step) {
    SweepSettings s;
    s.design = Wavelength{design};
    s.coarse_step_nm = step;
    s.pump_branch = parse_branch(a.pump_branch);
    s.daughter_branch = parse_branch(a.daughter_branch);
    return s;
}

void cmd_min_lambda(const Globals& g, const PumpArgs& a, double lo, double hi, double design, double step) {
    const auto reg = load_registry(g);
    const auto& c = reg.at(a.crystal);
    const auto s = sweep_settings(a, design, step);
    const auto m = min_eccentricity_wavelength(c, deg_to_rad(a.phi_p), deg_to_rad(a.theta_p), lo, hi, s);
    warn(m.warnings);
    JsonObject o;
    o.number("lambda_star_nm", m.lambda_star_nm)
        .number("ecc_at_min", m.ecc_at_min)
        .numbers("bracket", {m.bracket_lo_nm, m.bracket_hi_nm})
        .number("theta_p_deg", rad_to_deg(m.theta_p))
        .text("crystal", a.crystal)
        .number("phi_p_deg", a.phi_p)
        .boolean("at_bracket_edge", m.at_bracket_edge);
    try {
        o.number("ecc_at_design", sweep_eccentricity(c, deg_to_rad(a.phi_p), deg_to_rad(a.theta_p), s.design, s));
    } catch (const NumericError&) {
        o.null("ecc_at_design");
    }
    const auto cross = term_crossing_wavelength(c, deg_to_rad(a.phi_p), deg_to_rad(a.theta_p), lo, hi, s);
    if (cross) o.number("term_crossing_nm", *cross);
    else o.null("term_crossing_nm");
    o.texts("warnings", m.warnings);
    emit_object(g, o, {"lambda_star_nm", "ecc_at_min", "theta_p_deg"}, {m.lambda_star_nm, m.ecc_at_min, rad_to_deg(m.theta_p)});
}

void cmd_terms(const Globals& g, const PumpArgs& a, double lo, double hi, double step, double design) {
    if (!(lo < hi) || !(step > 0.0)) throw ArgumentError("terms needs --lo < --hi and --step > 0");
    const auto reg = load_registry(g);
    const auto& c = reg.at(a.crystal);
    const auto s = sweep_settings(a, design, step);
    Table t{{"lambda_nm", "term1", "term2", "term3", "ecc_estimate"}, {}};
    const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
    for (int k = 0; k <= n; ++k) {
        const double nm = lo + step * k;
        const auto e = sweep_expansion(c, deg_to_rad(a.phi_p), deg_to_rad(a.theta_p), Wavelength{nm}, s.design,
                                       s.pump_branch, s.daughter_branch);
        const auto terms = eccentricity_terms(e);
        double ecc = NAN;
        try {
            ecc = eccentricity_estimate(e).internal;
        } catch (const NumericError&) {
        }
        t.rows.push_back({nm, terms.term1, terms.term2, terms.term3, ecc});
    }
    JsonObject meta;
    meta.text("crystal", a.crystal).number("theta_p_deg", a.theta_p).number("phi_p_deg", a.phi_p);
    emit_table(g, "csv", meta, t);
}

void cmd_walkoff(const Globals& g, const PumpArgs& a, std::size_t samples) {
    const auto reg = load_registry(g);
    const auto ring = walkoff_ring(make_pump(reg, a), Wavelength{a.lambda_s}, samples, g.threads);
    Table t{{"phi_s_deg", "rho_deg"}, {}};
    for (const auto& w : ring) t.rows.push_back({rad_to_deg(w.phi_s), rad_to_deg(w.rho)});
    emit_table(g, "csv", pump_json(a), t);
}

void cmd_exitface(const Globals& g, const PumpArgs& a, double length) {
    const auto reg = load_registry(g);
    const auto r = exit_face_comparison(make_pump(reg, a), Wavelength{a.lambda_s}, length);
    JsonObject o = pump_json(a);
    o.number("crystal_length_mm", r.crystal_length_mm)
        .number("poynting_ecc", r.poynting_ecc)
        .number("momentum_ecc", r.momentum_ecc)
        .number("relative_difference", r.relative_difference)
        .number("max_displacement_difference_mm", r.max_displacement_difference_mm);
    emit_object(g, o, {"poynting_ecc", "momentum_ecc", "relative_difference"},
                {r.poynting_ecc, r.momentum_ecc, r.relative_difference});
}

struct SpectraArgs {
    std::string point = "B";
    std::optional<double> phi;
    double waist_um = 100.0;
    double length_mm = 0.8;
    std::size_t points = 2001;
    double span = 6e13;
    double band_nm = kReferenceBandNm;
    std::size_t trace_samples = 360;
};

void add_spectra_options(CLI::App* sub, SpectraArgs& s) {
    sub->add_option("--point", s.point, "Collection point: A (rings cross, 45 deg) or B (furthest apart, 0 deg)")
        ->check(CLI::IsMember({"A", "B"}))
        ->capture_default_str();
    sub->add_option("--phi", s.phi, "Collection azimuth, deg (overrides --point)");
    sub->add_option("--waist", s.waist_um, "Fibre mode waist at the crystal, um")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--length", s.length_mm, "Crystal length, mm")->check(CLI::NonNegativeNumber)->capture_default_str();
    sub->add_option("--points", s.points, "Frequency grid points (odd)")->capture_default_str();
    sub->add_option("--span", s.span, "Grid half-span, rad/s")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--band", s.band_nm, "Signal band for the joint rate, nm")->check(CLI::PositiveNumber)->capture_default_str();
    sub->add_option("--trace-samples", s.trace_samples, "Ring azimuth samples for the midpoint")->capture_default_str();
}

SandwichSpectra run_sandwich(const Globals& g, const PumpArgs& a, const SpectraArgs& s) {
    const auto reg = load_registry(g);
    const double phi = s.phi ? deg_to_rad(*s.phi) : (s.point == "A" ? kPointA : kPointB);
    SpectrumSettings settings;
    settings.threads = g.threads;
    auto r = sandwich_spectra(make_pump(reg, a), Wavelength{a.lambda_s}, phi, s.waist_um, s.length_mm,
                              FrequencyGrid::uniform(s.span, s.points), settings, s.band_nm, s.trace_samples);
    warn(r.collection.warnings);
    const auto j = joint_rate(r.crystal_1, s.band_nm);
    warn(j.warnings);
    return r;
}

void cmd_spectra(const Globals& g, const PumpArgs& a, const SpectraArgs& s) {
    const auto r = run_sandwich(g, a, s);
    Table t{{"delta_omega_rad_s", "s_crystal1", "s_crystal2"}, {}};
    for (std::size_t k = 0; k < r.crystal_1.grid.size(); ++k) {
        t.rows.push_back({r.crystal_1.grid[k], r.crystal_1.values[k], r.crystal_2.values[k]});
    }
    JsonObject meta = pump_json(a);
    meta.number("overlap", r.result.overlap);
    emit_table(g, "csv", meta, t);
}

void cmd_overlap(const Globals& g, const PumpArgs& a, const SpectraArgs& s) {
    const auto r = run_sandwich(g, a, s);
    JsonObject pointing;
    pointing.number("theta_ext", rad_to_deg(r.result.collection.theta_ext))
        .number("phi", rad_to_deg(r.result.collection.phi))
        .number("idler_theta_ext", rad_to_deg(r.result.collection.idler_theta()));
    JsonObject o;
    o.number("overlap", r.result.overlap)
        .number("rate_1", r.result.rate_1)
        .number("rate_2", r.result.rate_2)
        .object("collection_pointing_deg", pointing)
        .number("theta_ext_ring_1_deg", rad_to_deg(r.collection.theta_ext_1))
        .number("theta_ext_ring_2_deg", rad_to_deg(r.collection.theta_ext_2))
        .number("waist_um", s.waist_um)
        .number("crystal_length_mm", s.length_mm)
        .number("band_nm", s.band_nm)
        .object("pump", pump_json(a))
        .texts("warnings", r.collection.warnings);
    emit_object(g, o, {"overlap", "rate_1", "rate_2"}, {r.result.overlap, r.result.rate_1, r.result.rate_2});
}

struct SynthArgs {
    double ecc = 0.172;
    double semi_major = 1.0;
    std::string major_axis = "y";
    RingModel model;
    NoiseSpec noise{1, true, 10.0};
    bool noiseless = false;
    bool no_poisson = false;
    ImageGeometry geometry;
    std::string image_path;
};

bool is_csv_path(const std::string& p) { return std::filesystem::path(p).extension() == ".csv"; }

JsonObject model_json(const RingModel& m) {
    JsonObject o;
    o.number("amplitude", m.amplitude)
        .number("background", m.background)
        .number("x0_cm", m.x0)
        .number("y0_cm", m.y0)
        .number("a_cm", m.semi_x)
        .number("b_cm", m.semi_y)
        .number("sigma_cm", m.sigma);
    return o;
}

void cmd_synth(const Globals& g, SynthArgs s) {
    if (!(s.ecc >= 0.0 && s.ecc < 1.0)) throw ArgumentError("--ecc must lie in [0, 1)");
    const double minor = s.semi_major * std::sqrt(1.0 - s.ecc * s.ecc);
    s.model.semi_x = s.major_axis == "x" ? s.semi_major : minor;
    s.model.semi_y = s.major_axis == "x" ? minor : s.semi_major;
    NoiseSpec noise = s.noise;
    if (s.noiseless) noise = {s.noise.seed, false, 0.0};
    if (s.no_poisson) noise.poisson = false;
    const auto syn = synthesize(s.model, s.geometry, noise);
    warn(syn.warnings);
    if (is_csv_path(s.image_path)) write_csv_image(syn.image, s.image_path);
    else write_pgm(syn.image, s.image_path);
    JsonObject o = model_json(s.model);
    o.number("ecc", ellipse_eccentricity(s.model.semi_x, s.model.semi_y))
        .text("image", s.image_path)
        .integer("width", s.geometry.width)
        .integer("height", s.geometry.height)
        .number("cm_per_pixel", s.geometry.cm_per_pixel())
        .integer("seed", static_cast<long long>(noise.seed))
        .boolean("poisson", noise.poisson)
        .number("read_noise", noise.read_sigma)
        .texts("warnings", syn.warnings);
    emit_object(g, o);
}

void cmd_fit(const Globals& g, const std::string& input, std::optional<double> pitch, std::optional<double> mag) {
    ImageGeometry geom;
    if (pitch) geom.pixel_pitch_um = *pitch;
    if (mag) geom.magnification = *mag;
    ImageGrid img = is_csv_path(input) ? read_csv_image(input, geom) : read_pgm(input, geom);
    if (pitch) img.geometry.pixel_pitch_um = *pitch;
    if (mag) img.geometry.magnification = *mag;
    const auto init = fit_initialization(img);
    warn(init.warnings);
    const auto f = fit_ring(img, init.model);
    JsonObject o = model_json(f.model);
    o.number("ecc", f.ecc)
        .number("ecc_stat_error", f.ecc_stat_error)
        .number("residual_rms", f.residual_rms)
        .integer("iterations", f.iterations)
        .texts("warnings", init.warnings);
    emit_object(g, o, {"ecc", "ecc_stat_error", "residual_rms"}, {f.ecc, f.ecc_stat_error, f.residual_rms});
}

// ---------------------------------------------------------------------------
// Reproduction suite

void write_table_file(const std::filesystem::path& dir, const std::string& name, const Table& t) {
    std::ofstream out(dir / name);
    if (!out) throw ArgumentError("cannot write " + (dir / name).string());
    t.write_csv(out);
}

void cmd_repro(const Globals& g, const std::string& data_dir) {
    const auto reg = load_registry(g);
    const auto& bbo = reg.at("BBO");
    const auto& bibo = reg.at("BiBO");
    const Wavelength lp{405.0}, ls{810.0};
    std::optional<std::filesystem::path> dir;
    if (!data_dir.empty()) {
        dir = data_dir;
        std::filesystem::create_directories(*dir);
    }
    auto ring_table = [](const RingTrace& t) {
        Table tab{{"phi_s_deg", "theta_s_ext_deg"}, {}};
        for (const auto& s : t.samples) tab.rows.push_back({rad_to_deg(s.phi_s), rad_to_deg(s.theta_s_ext)});
        return tab;
    };

    // Eccentricity of the three reference cuts.
    JsonObject cuts;
    {
        const PumpConfig p{bbo, lp, deg_to_rad(29.392), 0.0};
        const auto t = trace_ring(p, ls, 360, g.threads);
        double lo = t.samples[0].theta_s_ext, hi = lo;
        for (const auto& s : t.samples) {
            lo = std::min(lo, s.theta_s_ext);
            hi = std::max(hi, s.theta_s_ext);
        }
        const auto est = eccentricity_estimate(expansion_at(bbo, 0.0, p.theta_p, ls));
        JsonObject o;
        o.number("theta_p_deg", 29.392)
            .number("ecc", ring_eccentricity(t))
            .number("ecc_small_angle", est.internal)
            .number("theta_s_ext_deg", rad_to_deg(t.samples[0].theta_s_ext))
            .number("theta_s_ext_spread_deg", rad_to_deg(hi - lo));
        cuts.object("BBO", o);
        if (dir) write_table_file(*dir, "ring_bbo.csv", ring_table(t));
    }
    for (const auto& [name, phi_p, target, phi_s, hint] :
         {std::tuple{"BiBO_phi90", 90.0, 4.10893, 90.0, 152.0}, std::tuple{"BiBO_phi0", 0.0, 4.05449, 0.0, 51.0}}) {
        InferRequest req;
        req.species = bibo;
        req.phi_p = deg_to_rad(phi_p);
        req.target_ext = deg_to_rad(target);
        req.target_phi_s = deg_to_rad(phi_s);
        req.theta_hint = deg_to_rad(hint);
        const auto r = infer_pump_angle(req);
        const PumpConfig p{bibo, lp, r.theta_p, req.phi_p};
        const auto est = eccentricity_estimate(expansion_at(bibo, req.phi_p, r.theta_p, ls));
        JsonObject o;
        o.number("theta_p_deg", rad_to_deg(r.theta_p))
            .number("ecc", ring_eccentricity(trace_ring(p, ls, 360, g.threads)))
            .number("ecc_small_angle", est.internal)
            .number("ecc_small_angle_external", est.external);
        cuts.object(name, o);
    }

    // BiBO ring at the nominal cut.
    JsonObject bibo_ring;
    {
        const PumpConfig p{bibo, lp, deg_to_rad(151.563), deg_to_rad(90.0)};
        const auto t = trace_ring(p, ls, 360, g.threads);
        bibo_ring.number("theta_p_deg", 151.563)
            .number("theta_s_ext_0_deg", rad_to_deg(sample_at(t, 0.0).theta_s_ext))
            .number("theta_s_ext_90_deg", rad_to_deg(sample_at(t, kPi / 2).theta_s_ext))
            .number("ecc", ring_eccentricity(t));
        if (dir) write_table_file(*dir, "ring_bibo.csv", ring_table(t));
    }

    // Expansion terms and minimum-eccentricity wavelengths.
    JsonObject terms, minima;
    {
        const double theta = deg_to_rad(152.077);
        const auto cross = term_crossing_wavelength(bibo, kPi / 2, theta, 700.0, 900.0);
        if (cross) terms.number("term_crossing_nm", *cross);
        else terms.null("term_crossing_nm");
        terms.number("theta_p_deg", 152.077);
        if (dir) {
            Table t{{"lambda_nm", "term1", "term2", "term3"}, {}};
            for (double nm = 700.0; nm <= 900.0 + 1e-9; nm += 2.0) {
                const auto e = eccentricity_terms(sweep_expansion(bibo, kPi / 2, theta, Wavelength{nm}));
                t.rows.push_back({nm, e.term1, e.term2, e.term3});
            }
            write_table_file(*dir, "expansion_terms.csv", t);
        }
        std::vector<JsonObject> curves;
        Table sweep{{"lambda_nm", "ecc_152.071", "ecc_151.378", "ecc_149.21"}, {}};
        for (double th : {152.071, 151.378, 149.21}) {
            const auto m = min_eccentricity_wavelength(bibo, kPi / 2, deg_to_rad(th), 700.0, 800.0);
            JsonObject o;
            o.number("theta_p_deg", th).number("lambda_star_nm", m.lambda_star_nm).number("ecc_at_min", m.ecc_at_min);
            try {
                o.number("ecc_at_810", sweep_eccentricity(bibo, kPi / 2, deg_to_rad(th), ls));
            } catch (const NumericError&) {
                o.null("ecc_at_810");
            }
            curves.push_back(std::move(o));
        }
        minima.objects("curves", curves);
        if (dir) {
            for (double nm = 700.0; nm <= 900.0 + 1e-9; nm += 2.0) {
                std::vector<double> row{nm};
                for (double th : {152.071, 151.378, 149.21}) {
                    try {
                        row.push_back(sweep_eccentricity(bibo, kPi / 2, deg_to_rad(th), Wavelength{nm}));
                    } catch (const NumericError&) {
                        row.push_back(NAN);
                    }
                }
                sweep.rows.push_back(row);
            }
            write_table_file(*dir, "ecc_vs_lambda.csv", sweep);
        }
    }

    // Walk-off.
    JsonObject walk;
    {
        const PumpConfig p{bibo, lp, deg_to_rad(151.56), deg_to_rad(90.0)};
        const auto w = walkoff_ring(p, ls, 4);
        walk.numbers("rho_deg_0_90_180_270",
                         {rad_to_deg(w[0].rho), rad_to_deg(w[1].rho), rad_to_deg(w[2].rho), rad_to_deg(w[3].rho)});
        const auto e = exit_face_comparison(p, ls, 0.8);
        walk.number("poynting_ecc", e.poynting_ecc)
            .number("momentum_ecc", e.momentum_ecc)
            .number("relative_difference", e.relative_difference);
        if (dir) {
            Table t{{"phi_s_deg", "rho_deg"}, {}};
            for (const auto& s : walkoff_ring(p, ls, 360, g.threads)) t.rows.push_back({rad_to_deg(s.phi_s), rad_to_deg(s.rho)});
            write_table_file(*dir, "walkoff.csv", t);
        }
    }

    // Two-crystal spectra.
    JsonObject spectra;
    {
        SpectrumSettings settings;
        settings.threads = g.threads;
        std::vector<JsonObject> rows;
        for (const auto& [name, phi_p, theta] : {std::tuple{"phi90", 90.0, 151.7}, std::tuple{"phi0", 0.0, 51.0}}) {
            const PumpConfig p{bibo, lp, deg_to_rad(theta), deg_to_rad(phi_p)};
            for (const auto& [label, phi] : {std::pair{"A", kPointA}, std::pair{"B", kPointB}}) {
                const auto r = sandwich_spectra(p, ls, phi, 100.0, 0.8, FrequencyGrid::standard(), settings);
                JsonObject o;
                o.text("cut", name).text("point", label).number("overlap", r.result.overlap)
                    .number("rate_1", r.result.rate_1).number("rate_2", r.result.rate_2);
                rows.push_back(std::move(o));
                if (dir && std::string(label) == "B") {
                    Table t{{"delta_omega_rad_s", "s_crystal1", "s_crystal2"}, {}};
                    for (std::size_t k = 0; k < r.crystal_1.grid.size(); ++k) {
                        t.rows.push_back({r.crystal_1.grid[k], r.crystal_1.values[k], r.crystal_2.values[k]});
                    }
                    write_table_file(*dir, std::string("spectra_") + name + "_B.csv", t);
                }
            }
        }
        spectra.number("waist_um", 100.0).objects("sandwich", rows);
    }

    // Image fit, seeded.
    JsonObject fits;
    {
        const NoiseSpec noise{1, true, 10.0};
        const RingModel elliptic{1000.0, 100.0, 0.0, 0.0, std::sqrt(1 - 0.172 * 0.172), 1.0, 0.04};
        const RingModel circular{1000.0, 100.0, 0.0, 0.0, 1.0, 1.0, 0.04};
        const auto fe = fit_ring(synthesize(elliptic, ImageGeometry{}, noise).image);
        const auto fc = fit_ring(synthesize(circular, ImageGeometry{}, noise).image);
        fits.number("ecc_true_0.172", fe.ecc)
            .number("stat_error_0.172", fe.ecc_stat_error)
            .number("ecc_true_0", fc.ecc)
            .number("stat_error_0", fc.ecc_stat_error);
    }

    JsonObject o;
    o.object("eccentricity_table", cuts)
        .object("rings", bibo_ring)
        .object("expansion_terms", terms)
        .object("min_eccentricity", minima)
        .object("walkoff", walk)
        .object("spectra", spectra)
        .object("image_fit", fits);
    if (dir) o.text("data_dir", dir->string());
    Sink sink(g.output);
    sink.out() << o.render();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPDC ring geometry in uniaxial and biaxial crystals", "ringtrace"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Globals g;
    app.add_option("--crystal-db", g.crystal_db, "Crystal database file (default: RINGTRACE_CRYSTAL_DB, then built-in)");
    app.add_option("--threads", g.threads, "Worker thread cap")->check(CLI::Range(1u, 256u))->capture_default_str();
    app.add_option("--output,-o", g.output, "Output file (default: stdout)");
    app.add_option("--format", g.format, "Output format")->check(CLI::IsMember({"json", "csv"}));

    double crystals_lambda = 0.0;
    auto* crystals = app.add_subcommand("crystals", "List the crystal database");
    crystals->add_option("--lambda", crystals_lambda, "Also print principal indices at this wavelength, nm");

    PumpArgs ring_args;
    std::size_t ring_samples = 360;
    auto* ring = app.add_subcommand("ring", "Trace the degenerate emission ring");
    add_pump(ring, ring_args);
    ring->add_option("--samples", ring_samples, "Azimuth samples")->check(CLI::Range(4, 100000))->capture_default_str();

    PumpArgs ecc_args;
    std::size_t ecc_samples = 360;
    auto* ecc = app.add_subcommand("ecc", "Ring eccentricity from the full solver and the small-angle model");
    add_pump(ecc, ecc_args);
    ecc->add_option("--samples", ecc_samples, "Azimuth samples (multiple of 4)")->capture_default_str();

    PumpArgs infer_args;
    double infer_ext = 0.0, infer_phi_s = 0.0;
    std::optional<double> infer_hint;
    std::size_t infer_samples = 360;
    auto* infer = app.add_subcommand("infer-theta", "Pump angle reproducing a measured exterior ring angle");
    add_crystal(infer, infer_args);
    infer->add_option("--phi-p", infer_args.phi_p, "Pump azimuth, deg")->capture_default_str();
    infer->add_option("--lambda-p", infer_args.lambda_p, "Pump wavelength, nm")->capture_default_str();
    infer->add_option("--lambda-s", infer_args.lambda_s, "Signal wavelength, nm")->capture_default_str();
    infer->add_option("--theta-ext", infer_ext, "Measured exterior signal angle, deg")->required()->check(CLI::PositiveNumber);
    infer->add_option("--phi-s", infer_phi_s, "Azimuth of the measurement, deg")->capture_default_str();
    infer->add_option("--theta-hint", infer_hint, "Approximate pump angle selecting the root family, deg");
    infer->add_option("--samples", infer_samples, "Samples for the eccentricity at the result")->capture_default_str();
    add_branches(infer, infer_args);

    PumpArgs min_args;
    double min_lo = 700.0, min_hi = 800.0, min_design = 810.0, min_step = 2.0;
    auto* minl = app.add_subcommand("min-lambda", "Wavelength of minimum ring eccentricity at a fixed cut");
    add_pump(minl, min_args, false);
    minl->add_option("--lo", min_lo, "Bracket start, nm")->capture_default_str();
    minl->add_option("--hi", min_hi, "Bracket end, nm")->capture_default_str();
    minl->add_option("--design", min_design, "Wavelength the cut detuning refers to, nm")->capture_default_str();
    minl->add_option("--step", min_step, "Coarse scan step, nm")->capture_default_str();

    PumpArgs terms_args;
    double terms_lo = 700.0, terms_hi = 900.0, terms_step = 2.0, terms_design = 810.0;
    auto* terms = app.add_subcommand("terms", "Index-curvature terms and eccentricity over a wavelength sweep");
    add_pump(terms, terms_args, false);
    terms->add_option("--lo", terms_lo, "Sweep start, nm")->capture_default_str();
    terms->add_option("--hi", terms_hi, "Sweep end, nm")->capture_default_str();
    terms->add_option("--step", terms_step, "Sweep step, nm")->capture_default_str();
    terms->add_option("--design", terms_design, "Wavelength the cut detuning refers to, nm")->capture_default_str();

    PumpArgs walk_args;
    std::size_t walk_samples = 360;
    auto* walk = app.add_subcommand("walkoff", "Poynting walk-off angle around the ring");
    add_pump(walk, walk_args);
    walk->add_option("--samples", walk_samples, "Azimuth samples")->check(CLI::Range(4, 100000))->capture_default_str();

    PumpArgs exit_args;
    double exit_length = 0.8;
    auto* exitface = app.add_subcommand("exitface", "Exit-face ring shape from Poynting vs wave vectors");
    add_pump(exitface, exit_args);
    exitface->add_option("--length", exit_length, "Crystal length, mm")->check(CLI::PositiveNumber)->capture_default_str();

    PumpArgs spec_args;
    SpectraArgs spec_opts;
    auto* spectra = app.add_subcommand("spectra", "Single-mode pair spectra of both crossed crystals");
    add_pump(spectra, spec_args);
    add_spectra_options(spectra, spec_opts);

    PumpArgs ov_args;
    SpectraArgs ov_opts;
    auto* overlap = app.add_subcommand("overlap", "Spectral overlap and joint rates of the crossed crystals");
    add_pump(overlap, ov_args);
    add_spectra_options(overlap, ov_opts);

    SynthArgs synth_args;
    auto* synth = app.add_subcommand("synth", "Write a synthetic ring image (PGM, or CSV by extension)");
    synth->add_option("--image", synth_args.image_path, "Image path (.pgm or .csv)")->required();
    synth->add_option("--ecc", synth_args.ecc, "Ring eccentricity")->capture_default_str();
    synth->add_option("--semi-major", synth_args.semi_major, "Semi-major axis, cm")->check(CLI::PositiveNumber)->capture_default_str();
    synth->add_option("--major-axis", synth_args.major_axis, "Image axis of the major axis")
        ->check(CLI::IsMember({"x", "y"}))
        ->capture_default_str();
    synth->add_option("--amplitude", synth_args.model.amplitude, "Peak counts above background")->capture_default_str();
    synth->add_option("--background", synth_args.model.background, "Background counts")->capture_default_str();
    synth->add_option("--sigma", synth_args.model.sigma, "Radial Gaussian width, cm")->capture_default_str();
    synth->add_option("--x0", synth_args.model.x0, "Centre x, cm")->capture_default_str();
    synth->add_option("--y0", synth_args.model.y0, "Centre y, cm")->capture_default_str();
    synth->add_option("--seed", synth_args.noise.seed, "Noise seed")->capture_default_str();
    synth->add_option("--read-noise", synth_args.noise.read_sigma, "Gaussian read noise, counts")->capture_default_str();
    synth->add_flag("--no-poisson", synth_args.no_poisson, "Disable shot noise");
    synth->add_flag("--noiseless", synth_args.noiseless, "Exact model values");
    synth->add_option("--width", synth_args.geometry.width, "Pixels along x")->capture_default_str();
    synth->add_option("--height", synth_args.geometry.height, "Pixels along y")->capture_default_str();
    synth->add_option("--pixel-pitch", synth_args.geometry.pixel_pitch_um, "Camera pixel pitch, um")->capture_default_str();
    synth->add_option("--magnification", synth_args.geometry.magnification, "Imaging magnification")->capture_default_str();

    std::string fit_input;
    std::optional<double> fit_pitch, fit_mag;
    auto* fit = app.add_subcommand("fit", "Fit the elliptical ring model to an image");
    fit->add_option("--input,--image", fit_input, "Image path (.pgm or .csv)")->required();
    fit->add_option("--pixel-pitch", fit_pitch, "Camera pixel pitch, um (default from file, else 24)");
    fit->add_option("--magnification", fit_mag, "Imaging magnification (default from file, else 8.6)");

    std::string repro_dir;
    auto* repro = app.add_subcommand("repro", "Run the table and figure reproductions and print a summary");
    repro->add_option("--data-dir", repro_dir, "Also write the figure data as CSV files here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*crystals) cmd_crystals(g, crystals_lambda);
        else if (*ring) cmd_ring(g, ring_args, ring_samples);
        else if (*ecc) cmd_ecc(g, ecc_args, ecc_samples);
        else if (*infer) cmd_infer(g, infer_args, infer_ext, infer_phi_s, infer_hint, infer_samples);
        else if (*minl) cmd_min_lambda(g, min_args, min_lo, min_hi, min_design, min_step);
        else if (*terms) cmd_terms(g, terms_args, terms_lo, terms_hi, terms_step, terms_design);
        else if (*walk) cmd_walkoff(g, walk_args, walk_samples);
        else if (*exitface) cmd_exitface(g, exit_args, exit_length);
        else if (*spectra) cmd_spectra(g, spec_args, spec_opts);
        else if (*overlap) cmd_overlap(g, ov_args, ov_opts);
        else if (*synth) cmd_synth(g, synth_args);
        else if (*fit) cmd_fit(g, fit_input, fit_pitch, fit_mag);
        else if (*repro) cmd_repro(g, repro_dir);
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
