#pragma once

// Run configuration: JSON documents layered over a named preset, with
// strict key checking and a content hash for manifests.
//
// Time-valued keys are in hours unless their name ends in _min.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "isc/analysis.hpp"
#include "isc/controllers.hpp"
#include "isc/dither.hpp"
#include "isc/experiments.hpp"
#include "isc/plant.hpp"

namespace isc {

using nlohmann::json;

struct IntegratorSettings {
    double h = 5e-5;
    std::size_t record_stride = 20;
};

struct ExperimentSettings {
    std::size_t n_traj = 60;
    Interval rho0{4.0, 30.0};
    double u0 = 1.0;
    double q_el0 = std::numeric_limits<double>::quiet_NaN();  // NaN → Q/3
    double t_final_min = 225.0;
    std::uint64_t seed = 1;
    bool random_dither_phase = false;
};

struct AnalysisSettings {
    Interval u{-40.0, 40.0};
    std::size_t n_grid = 801;
    Interval rho{0.0, 50.0};
    Interval q{0.0, 2170.0};
    std::size_t n_seeds = 5;
    bool oracle = true;
    std::vector<double> phase_plane_u{-40.0, 0.0, 40.0};
    std::size_t phase_plane_n = 33;
};

struct SweepSettings {
    std::size_t n_values = 20;
    std::size_t n_seeds = 5;
    double spread = 0.15;
    std::vector<ControllerKind> controllers{ControllerKind::gisc, ControllerKind::hmisc, ControllerKind::fxisc};
};

struct RunConfig {
    std::string name = "mnpass_static";
    PlantVariant variant = PlantVariant::static_inflow;
    HighwayParams plant;
    double rho_ref = 20.0;
    DitherConfig dither;
    ControllerGains gains;
    ControllerKind controller = ControllerKind::gisc;
    IntegratorSettings integrator;
    ExperimentSettings experiment;
    AnalysisSettings analysis;
    SweepSettings sweep;
    json metadata = json::object();

    [[nodiscard]] EnsembleConfig ensemble(unsigned threads = 1) const {
        EnsembleConfig e;
        e.controller = controller;
        e.variant = variant;
        e.params = plant;
        e.gains = gains;
        e.dither = dither;
        e.rho_ref = rho_ref;
        e.n_traj = experiment.n_traj;
        e.rho0_range = experiment.rho0;
        e.u0 = experiment.u0;
        e.q_el0 = experiment.q_el0;
        e.t_final = experiment.t_final_min / 60.0;
        e.seed = experiment.seed;
        e.h = integrator.h;
        e.record_stride = integrator.record_stride;
        e.random_dither_phase = experiment.random_dither_phase;
        e.threads = threads;
        return e;
    }

    [[nodiscard]] ResponseMapOptions response_map_options(unsigned threads = 1) const {
        ResponseMapOptions o;
        o.u_box = analysis.u;
        o.n_grid = analysis.n_grid;
        o.rho_box = analysis.rho;
        o.q_box = analysis.q;
        o.rho_ref = rho_ref;
        o.n_seeds = analysis.n_seeds;
        o.with_oracle = analysis.oracle;
        o.threads = threads;
        return o;
    }
};

// -----------------------------------------------------------------------------
// JSON <-> RunConfig
// -----------------------------------------------------------------------------

namespace detail {

/// Reads keys from one JSON object, rejecting any key it was not asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
    }
    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + path_ + "." + it.key() + "'");
        }
    }
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

    [[nodiscard]] bool has(const std::string& key) const { return j_.contains(key); }
    void mark(const std::string& key) { seen_.insert(key); }

    template <class T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("config key '" + path_ + "." + key + "' has the wrong type");
        }
    }
    void get_nullable(const std::string& key, double& out) {
        seen_.insert(key);
        if (!j_.contains(key)) return;
        if (j_.at(key).is_null()) {
            out = std::numeric_limits<double>::quiet_NaN();
            return;
        }
        get(key, out);
    }
    const json& raw(const std::string& key) {
        seen_.insert(key);
        return j_.at(key);
    }
    void interval(const std::string& lo, const std::string& hi, Interval& out) {
        get(lo, out.lo);
        get(hi, out.hi);
        if (!(out.hi >= out.lo)) throw ConfigError(path_ + ": " + hi + " must be >= " + lo);
    }
    [[nodiscard]] const std::string& path() const { return path_; }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline Rational rational_from_json(const json& v) {
    if (v.is_string()) return Rational::parse(v.get<std::string>());
    if (v.is_number_integer()) return Rational{v.get<std::int64_t>()};
    if (v.is_number()) return Rational::parse(v.dump());
    throw ConfigError("dither frequency must be a number or a \"p/q\" string");
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
    json j;
    j["name"] = c.name;
    j["controller"] = to_string(c.controller);
    const auto& p = c.plant;
    j["plant"] = {{"variant", to_string(c.variant)},
                  {"v_free", p.v_free},
                  {"v_jam", p.v_jam},
                  {"rho_jam", p.rho_jam},
                  {"rho_crit", p.rho_crit},
                  {"L", p.length},
                  {"Q", p.demand},
                  {"a", p.a},
                  {"b", p.b},
                  {"gamma_el", p.gamma_el},
                  {"gamma_gp", p.gamma_gp},
                  {"delta", p.delta},
                  {"a_tilde", p.a_tilde},
                  {"k_m", p.k_m},
                  {"k_rho", p.k_rho},
                  {"eps0", p.eps0}};
    j["reference"] = {{"rho_ref", c.rho_ref}};
    json omega = json::array();
    for (const auto& w : c.dither.omega) omega.push_back(w.str());
    j["dither"] = {{"omega", omega}, {"eps_p", c.dither.eps_p}, {"eps_a", c.dither.eps_a}};
    const auto& g = c.gains;
    j["gains"] = {{"k", g.k},   {"alpha", g.alpha}, {"sigma", g.sigma},      {"T0", g.T0},
                  {"T", g.T},   {"eps_f", g.eps_f}, {"xi_floor", g.xi_floor}};
    j["integrator"] = {{"h", c.integrator.h}, {"record_stride", c.integrator.record_stride}};
    const auto& e = c.experiment;
    j["experiment"] = {{"n_traj", e.n_traj},
                       {"rho0_min", e.rho0.lo},
                       {"rho0_max", e.rho0.hi},
                       {"u0", e.u0},
                       {"q_el0", std::isfinite(e.q_el0) ? json(e.q_el0) : json(nullptr)},
                       {"t_final_min", e.t_final_min},
                       {"seed", e.seed},
                       {"random_dither_phase", e.random_dither_phase}};
    const auto& a = c.analysis;
    j["analysis"] = {{"u_min", a.u.lo},
                     {"u_max", a.u.hi},
                     {"n_grid", a.n_grid},
                     {"rho_min", a.rho.lo},
                     {"rho_max", a.rho.hi},
                     {"q_min", a.q.lo},
                     {"q_max", a.q.hi},
                     {"n_seeds", a.n_seeds},
                     {"oracle", a.oracle},
                     {"phase_plane_u", a.phase_plane_u},
                     {"phase_plane_n", a.phase_plane_n}};
    json ctrls = json::array();
    for (auto k : c.sweep.controllers) ctrls.push_back(to_string(k));
    j["sweep"] = {{"n_values", c.sweep.n_values},
                  {"n_seeds", c.sweep.n_seeds},
                  {"spread", c.sweep.spread},
                  {"controllers", ctrls}};
    j["metadata"] = c.metadata;
    return j;
}

/// Strict parse: every key must be known; absent keys keep the defaults of
/// `base`. Performs all parameter validation.
inline RunConfig from_json(const json& j, RunConfig c = {}) {
    detail::Section top(j, "config");
    top.get("name", c.name);
    if (top.has("controller")) c.controller = parse_controller_kind(top.raw("controller").get<std::string>());

    if (top.has("plant")) {
        detail::Section s(top.raw("plant"), "plant");
        if (s.has("variant")) c.variant = parse_plant_variant(s.raw("variant").get<std::string>());
        auto& p = c.plant;
        s.get("v_free", p.v_free);
        s.get("v_jam", p.v_jam);
        s.get("rho_jam", p.rho_jam);
        s.get("rho_crit", p.rho_crit);
        s.get("L", p.length);
        s.get("Q", p.demand);
        s.get("a", p.a);
        s.get("b", p.b);
        s.get("gamma_el", p.gamma_el);
        s.get("gamma_gp", p.gamma_gp);
        s.get("delta", p.delta);
        s.get("a_tilde", p.a_tilde);
        s.get("k_m", p.k_m);
        s.get("k_rho", p.k_rho);
        s.get("eps0", p.eps0);
    }
    if (top.has("reference")) {
        detail::Section s(top.raw("reference"), "reference");
        s.get("rho_ref", c.rho_ref);
    }
    if (top.has("dither")) {
        detail::Section s(top.raw("dither"), "dither");
        if (s.has("omega")) {
            const auto& w = s.raw("omega");
            c.dither.omega.clear();
            if (w.is_array()) {
                for (const auto& v : w) c.dither.omega.push_back(detail::rational_from_json(v));
            } else {
                c.dither.omega.push_back(detail::rational_from_json(w));
            }
        }
        // eps_mu is accepted as another name for the oscillator timescale.
        if (s.has("eps_p") && s.has("eps_mu")) {
            double a = 0.0, b = 0.0;
            s.get("eps_p", a);
            s.get("eps_mu", b);
            if (a != b) throw ConfigError("dither: eps_p and its alias eps_mu disagree");
        }
        s.get("eps_mu", c.dither.eps_p);
        s.get("eps_p", c.dither.eps_p);
        s.get("eps_a", c.dither.eps_a);
    }
    if (top.has("gains")) {
        detail::Section s(top.raw("gains"), "gains");
        auto& g = c.gains;
        s.get("k", g.k);
        s.get("alpha", g.alpha);
        s.get("sigma", g.sigma);
        s.get("T0", g.T0);
        s.get("T", g.T);
        s.get("eps_f", g.eps_f);
        s.get("xi_floor", g.xi_floor);
    }
    if (top.has("integrator")) {
        detail::Section s(top.raw("integrator"), "integrator");
        s.get("h", c.integrator.h);
        s.get("record_stride", c.integrator.record_stride);
    }
    if (top.has("experiment")) {
        detail::Section s(top.raw("experiment"), "experiment");
        auto& e = c.experiment;
        if (s.has("n_traj") && s.raw("n_traj").is_number_integer() && s.raw("n_traj").get<std::int64_t>() < 1) {
            throw ConfigError("experiment: n_traj must be >= 1");
        }
        s.get("n_traj", e.n_traj);
        s.interval("rho0_min", "rho0_max", e.rho0);
        s.get("u0", e.u0);
        s.get_nullable("q_el0", e.q_el0);
        s.get("t_final_min", e.t_final_min);
        s.get("seed", e.seed);
        s.get("random_dither_phase", e.random_dither_phase);
    }
    if (top.has("analysis")) {
        detail::Section s(top.raw("analysis"), "analysis");
        auto& a = c.analysis;
        s.interval("u_min", "u_max", a.u);
        s.get("n_grid", a.n_grid);
        s.interval("rho_min", "rho_max", a.rho);
        s.interval("q_min", "q_max", a.q);
        s.get("n_seeds", a.n_seeds);
        s.get("oracle", a.oracle);
        s.get("phase_plane_u", a.phase_plane_u);
        s.get("phase_plane_n", a.phase_plane_n);
    }
    if (top.has("sweep")) {
        detail::Section s(top.raw("sweep"), "sweep");
        s.get("n_values", c.sweep.n_values);
        s.get("n_seeds", c.sweep.n_seeds);
        s.get("spread", c.sweep.spread);
        if (s.has("controllers")) {
            c.sweep.controllers.clear();
            for (const auto& v : s.raw("controllers")) c.sweep.controllers.push_back(parse_controller_kind(v.get<std::string>()));
        }
    }
    if (top.has("metadata")) {
        c.metadata = top.raw("metadata");
        if (!c.metadata.is_object()) throw ConfigError("metadata must be an object");
    }

    c.plant.validate();
    c.gains.validate();
    if (const auto r = validate_frequencies(c.dither.omega); !r.ok()) {
        throw ConfigError("dither frequencies: " + r.describe());
    }
    if (!(c.dither.eps_p > 0.0) || !(c.dither.eps_a > 0.0)) throw ConfigError("dither: eps_p and eps_a must be positive");
    if (!(c.integrator.h > 0.0)) throw ConfigError("integrator: h must be positive");
    if (c.integrator.record_stride < 1) throw ConfigError("integrator: record_stride must be >= 1");
    if (c.experiment.n_traj < 1) throw ConfigError("experiment: n_traj must be >= 1");
    if (!(c.experiment.t_final_min > 0.0)) throw ConfigError("experiment: t_final_min must be positive");
    if (c.analysis.n_grid < 3) throw ConfigError("analysis: n_grid must be >= 3");
    if (c.analysis.phase_plane_n < 2) throw ConfigError("analysis: phase_plane_n must be >= 2");
    return c;
}

// -----------------------------------------------------------------------------
// Presets
// -----------------------------------------------------------------------------

inline RunConfig preset_mnpass_static() {
    RunConfig c;
    c.name = "mnpass_static";
    c.plant = mnpass_static_params();
    // Radius of the initial-condition ball in the stability statement; carried
    // along for completeness, unused by the simulator.
    c.metadata = {{"tau_tilde", 3.0}, {"rho_ref_over_rho_crit", 0.8}};
    return c;
}

inline RunConfig preset_mnpass_dynamic() {
    RunConfig c = preset_mnpass_static();
    c.name = "mnpass_dynamic";
    c.variant = PlantVariant::dynamic_behavior;
    c.plant = mnpass_dynamic_params();
    c.dither.eps_p = 0.01;
    c.dither.eps_a = 0.001;
    c.gains.k = 0.01;
    c.gains.sigma = 1;
    c.gains.T0 = 0.01;
    c.gains.T = 0.5;
    c.experiment.n_traj = 20;
    c.experiment.rho0 = {10.0, 30.0};
    c.experiment.q_el0 = c.plant.demand / 3.0;
    c.analysis.rho = {0.0, 160.0};
    c.analysis.q = {0.0, c.plant.demand};
    c.sweep.controllers = {ControllerKind::gisc, ControllerKind::hmisc};
    c.metadata = json::object();
    return c;
}

inline std::vector<std::string> preset_names() { return {"mnpass_static", "mnpass_dynamic"}; }

inline RunConfig preset(const std::string& name) {
    if (name == "mnpass_static") return preset_mnpass_static();
    if (name == "mnpass_dynamic") return preset_mnpass_dynamic();
    throw ConfigError("unknown preset '" + name + "' (valid: mnpass_static, mnpass_dynamic)");
}

// -----------------------------------------------------------------------------
// Overrides, files, hashing
// -----------------------------------------------------------------------------

/// Applies "a.b.c=value" to a JSON patch. The value is parsed as JSON when
/// possible (numbers, booleans, arrays, null) and taken as a string otherwise.
inline void apply_override(json& patch, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "' is not of the form key.path=value");
    }
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;

    json* node = &patch;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("override '" + assignment + "' has an empty key");
        if (!node->is_object()) *node = json::object();
        if (dot == std::string::npos) {
            (*node)[key] = value;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config file '" + path + "' is not valid JSON");
    return j;
}

/// Preset (or the "preset" named inside the file), then the file, then the
/// overrides, in that order.
inline RunConfig resolve_config(const std::string& preset_name, const std::string& config_path,
                                const std::vector<std::string>& overrides) {
    json patch = json::object();
    std::string base = preset_name;
    if (!config_path.empty()) {
        patch = read_json_file(config_path);
        if (!patch.is_object()) throw ConfigError("config file must hold a JSON object");
        if (patch.contains("preset")) {
            if (base.empty()) base = patch["preset"].get<std::string>();
            patch.erase("preset");
        }
        // A dumped config (config.json of a run) names its preset.
        if (base.empty() && patch.contains("name") && patch["name"].is_string()) {
            const auto names = preset_names();
            const auto n = patch["name"].get<std::string>();
            if (std::find(names.begin(), names.end(), n) != names.end()) base = n;
        }
    }
    for (const auto& o : overrides) apply_override(patch, o);
    if (patch.contains("dither") && patch["dither"].is_object()) {
        auto& d = patch["dither"];
        if (d.contains("eps_mu") && !d.contains("eps_p")) {
            d["eps_p"] = d["eps_mu"];
            d.erase("eps_mu");
        }
    }
    const RunConfig start = preset(base.empty() ? "mnpass_static" : base);
    json merged = to_json(start);
    // Arrays are replaced wholesale by merge_patch; metadata is too.
    merged.merge_patch(patch);
    if (patch.contains("metadata")) merged["metadata"] = patch["metadata"];
    return from_json(merged, start);
}

/// FNV-1a over the canonical dump. nlohmann objects keep keys sorted, so the
/// hash does not depend on key order in the input files.
inline std::string config_hash(const json& j) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : j.dump()) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace isc
