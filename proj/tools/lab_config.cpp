#include "lab_config.hpp"

#include <cstdint>
#include <fstream>

#include "displab/errors.hpp"

namespace displab {

using nlohmann::json;

CoefficientSet LabConfig::coefficients() const {
    CoefficientSet c;
    c.isotherm = Isotherm{alpha, beta};
    c.kappa = kappa;
    c.D = D;
    c.Ds = Ds;
    return c;
}

namespace {

[[noreturn]] void bad_field(const std::string& path, const std::string& why) {
    fail(ErrorKind::input, "config: " + path + " " + why);
}

void check_keys(const json& obj, const std::string& section,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) bad_field(section, "must be an object");
    for (const auto& item : obj.items()) {
        bool known = false;
        for (const char* key : allowed)
            if (item.key() == key) {
                known = true;
                break;
            }
        if (!known) bad_field(section + "." + item.key(), "is not a recognized field");
    }
}

double get_number(const json& obj, const std::string& section, const char* key,
                  double fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number()) bad_field(section + "." + key, "must be a number");
    return v.get<double>();
}

int get_integer(const json& obj, const std::string& section, const char* key, int fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_number_integer()) bad_field(section + "." + key, "must be an integer");
    return v.get<int>();
}

std::string get_string(const json& obj, const std::string& section, const char* key,
                       const std::string& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    if (!v.is_string()) bad_field(section + "." + key, "must be a string");
    return v.get<std::string>();
}

/// A 2x2 coefficient matrix: a scalar s (s * Id), a diagonal [d1, d2], or a
/// full matrix [[a, b], [c, d]].
Eigen::Matrix2d get_matrix(const json& obj, const std::string& section, const char* key,
                           const Eigen::Matrix2d& fallback) {
    if (!obj.contains(key)) return fallback;
    const json& v = obj.at(key);
    const std::string path = section + "." + key;
    if (v.is_number()) return v.get<double>() * Eigen::Matrix2d::Identity();
    if (!v.is_array() || v.size() != 2)
        bad_field(path, "must be a scalar, a diagonal pair, or a 2x2 matrix");
    Eigen::Matrix2d m;
    if (v[0].is_number() && v[1].is_number()) {
        m << v[0].get<double>(), 0.0, 0.0, v[1].get<double>();
        return m;
    }
    for (int r = 0; r < 2; ++r) {
        const json& row = v[static_cast<std::size_t>(r)];
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
            bad_field(path, "must be a scalar, a diagonal pair, or a 2x2 matrix");
        m(r, 0) = row[0].get<double>();
        m(r, 1) = row[1].get<double>();
    }
    return m;
}

std::vector<double> get_array(const json& obj, const std::string& section, const char* key) {
    if (!obj.contains(key)) return {};
    const json& v = obj.at(key);
    if (!v.is_array()) bad_field(section + "." + key, "must be an array of numbers");
    std::vector<double> out;
    out.reserve(v.size());
    for (const json& e : v) {
        if (!e.is_number()) bad_field(section + "." + key, "must be an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

json matrix_json(const Eigen::Matrix2d& m) {
    return json::array({json::array({m(0, 0), m(0, 1)}), json::array({m(1, 0), m(1, 1)})});
}

}  // namespace

void load_config_file(LabConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::input, "cannot open config file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::parse_error& e) {
        fail(ErrorKind::input, std::string("config: invalid JSON: ") + e.what());
    }
    check_keys(root, "config",
               {"geometry", "coefficients", "velocity", "sweep", "table", "macro", "jobs"});

    if (root.contains("geometry")) {
        const json& g = root.at("geometry");
        check_keys(g, "geometry", {"radius", "h"});
        cfg.radius = get_number(g, "geometry", "radius", cfg.radius);
        cfg.h = get_number(g, "geometry", "h", cfg.h);
    }
    if (root.contains("coefficients")) {
        const json& c = root.at("coefficients");
        check_keys(c, "coefficients", {"alpha", "beta", "kappa", "d", "ds"});
        cfg.alpha = get_number(c, "coefficients", "alpha", cfg.alpha);
        cfg.beta = get_number(c, "coefficients", "beta", cfg.beta);
        cfg.kappa = get_number(c, "coefficients", "kappa", cfg.kappa);
        cfg.D = get_matrix(c, "coefficients", "d", cfg.D);
        cfg.Ds = get_matrix(c, "coefficients", "ds", cfg.Ds);
    }
    if (root.contains("velocity")) {
        const json& v = root.at("velocity");
        check_keys(v, "velocity", {"recipe", "surface_speed"});
        cfg.velocity = get_string(v, "velocity", "recipe", cfg.velocity);
        cfg.surface_speed = get_number(v, "velocity", "surface_speed", cfg.surface_speed);
    }
    if (root.contains("sweep")) {
        const json& s = root.at("sweep");
        check_keys(s, "sweep", {"min", "max", "points", "spacing", "u0"});
        cfg.sweep_min = get_number(s, "sweep", "min", cfg.sweep_min);
        cfg.sweep_max = get_number(s, "sweep", "max", cfg.sweep_max);
        cfg.sweep_points = get_integer(s, "sweep", "points", cfg.sweep_points);
        cfg.sweep_spacing = get_string(s, "sweep", "spacing", cfg.sweep_spacing);
        if (!cfg.sweep_spacing.empty() && cfg.sweep_spacing != "linear" &&
            cfg.sweep_spacing != "log")
            bad_field("sweep.spacing", "must be linear or log");
        cfg.u0 = get_number(s, "sweep", "u0", cfg.u0);
    }
    if (root.contains("table")) {
        const json& t = root.at("table");
        check_keys(t, "table", {"u_max", "linear_points", "log_points"});
        cfg.table_u_max = get_number(t, "table", "u_max", cfg.table_u_max);
        cfg.table_linear = get_integer(t, "table", "linear_points", cfg.table_linear);
        cfg.table_log = get_integer(t, "table", "log_points", cfg.table_log);
    }
    if (root.contains("macro")) {
        const json& m = root.at("macro");
        check_keys(m, "macro",
                   {"dim", "cells", "length", "dt", "t_end", "initial", "baseline",
                    "amplitude", "width", "surface_init", "surface_value", "u_in", "v_in"});
        cfg.macro.dim = get_integer(m, "macro", "dim", cfg.macro.dim);
        cfg.macro.cells = get_integer(m, "macro", "cells", cfg.macro.cells);
        cfg.macro.length = get_number(m, "macro", "length", cfg.macro.length);
        cfg.macro.dt = get_number(m, "macro", "dt", cfg.macro.dt);
        cfg.macro.t_end = get_number(m, "macro", "t_end", cfg.macro.t_end);
        cfg.macro.initial = get_string(m, "macro", "initial", cfg.macro.initial);
        cfg.macro.baseline = get_number(m, "macro", "baseline", cfg.macro.baseline);
        cfg.macro.amplitude = get_number(m, "macro", "amplitude", cfg.macro.amplitude);
        cfg.macro.width = get_number(m, "macro", "width", cfg.macro.width);
        cfg.macro.surface_init = get_string(m, "macro", "surface_init", cfg.macro.surface_init);
        cfg.macro.surface_value = get_number(m, "macro", "surface_value", cfg.macro.surface_value);
        if (m.contains("u_in")) cfg.macro.u_in = get_array(m, "macro", "u_in");
        if (m.contains("v_in")) cfg.macro.v_in = get_array(m, "macro", "v_in");
    }
    cfg.jobs = get_integer(root, "config", "jobs", cfg.jobs);
}

json config_json(const LabConfig& cfg) {
    json j;
    j["geometry"] = {{"radius", cfg.radius}, {"h", cfg.h}};
    j["coefficients"] = {{"alpha", cfg.alpha},
                         {"beta", cfg.beta},
                         {"kappa", cfg.kappa},
                         {"d", matrix_json(cfg.D)},
                         {"ds", matrix_json(cfg.Ds)}};
    j["velocity"] = {{"recipe", cfg.velocity}, {"surface_speed", cfg.surface_speed}};
    j["sweep"] = {{"min", cfg.sweep_min},
                  {"max", cfg.sweep_max},
                  {"points", cfg.sweep_points},
                  {"spacing", cfg.sweep_spacing.empty() ? "linear" : cfg.sweep_spacing},
                  {"u0", cfg.u0}};
    j["table"] = {{"u_max", cfg.table_u_max},
                  {"linear_points", cfg.table_linear},
                  {"log_points", cfg.table_log}};
    json mac = {{"dim", cfg.macro.dim},
                {"cells", cfg.macro.cells},
                {"length", cfg.macro.length},
                {"dt", cfg.macro.dt},
                {"t_end", cfg.macro.t_end},
                {"initial", cfg.macro.initial},
                {"baseline", cfg.macro.baseline},
                {"amplitude", cfg.macro.amplitude},
                {"width", cfg.macro.width},
                {"surface_init", cfg.macro.surface_init},
                {"surface_value", cfg.macro.surface_value}};
    if (!cfg.macro.u_in.empty()) mac["u_in"] = cfg.macro.u_in;
    if (!cfg.macro.v_in.empty()) mac["v_in"] = cfg.macro.v_in;
    j["macro"] = std::move(mac);
    // Worker count steers execution only, never results; keeping it out of
    // the canonical document keeps the hash stable across parallel settings.
    return j;
}

std::string config_hash(const json& canonical) {
    const std::string bytes = canonical.dump();
    std::uint64_t hash = 14695981039346656037ull;
    for (const char ch : bytes) {
        hash ^= static_cast<unsigned char>(ch);
        hash *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace displab
