#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "displab/errors.hpp"
#include "displab/macro.hpp"
#include "displab/sweep.hpp"
#include "displab/velocity.hpp"
#include "displab/version.hpp"
#include "lab_config.hpp"
#include "verify_suite.hpp"

namespace displab {
namespace {

using nlohmann::json;

std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int resolve_jobs(int cli_jobs, int cfg_jobs) {
    if (cli_jobs > 0) return cli_jobs;
    if (cfg_jobs > 0) return cfg_jobs;
    if (const char* env = std::getenv("DISPERSION_LAB_JOBS")) {
        const long n = std::strtol(env, nullptr, 10);
        if (n > 0) return static_cast<int>(n);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

std::ofstream open_output(const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::input, "cannot open output file: " + path);
    return out;
}

/// Mesh and geometry as configured, either built fresh or loaded from a
/// previously written mesh file.
struct MeshBundle {
    CellGeometry geom;
    CellMesh mesh;
    SurfaceMesh surf;
    std::string source;  ///< "built" or the input path
};

MeshBundle make_mesh(const LabConfig& cfg, const std::string& mesh_in) {
    MeshBundle mb;
    if (!mesh_in.empty()) {
        auto [mesh, geom] = read_mesh_file(mesh_in);
        mb.mesh = std::move(mesh);
        mb.geom = geom;
        mb.source = mesh_in;
    } else {
        mb.geom.obstacle_radius = cfg.radius;
        mb.mesh = build_cell_mesh(mb.geom, cfg.h);
        mb.source = "built";
    }
    mb.surf = extract_surface_mesh(mb.mesh, mb.geom);
    return mb;
}

json mesh_json(const MeshBundle& mb) {
    return {{"source", mb.source},
            {"h", mb.mesh.h},
            {"nodes", mb.mesh.num_nodes()},
            {"triangles", mb.mesh.num_triangles()},
            {"boundary_segments", mb.surf.num_segments()},
            {"fluid_area", mb.geom.fluid_area},
            {"surface_length", mb.geom.surface_length}};
}

json velocity_json(const VelocityField& vel, double surface_speed) {
    return {{"recipe", to_string(vel.recipe)},
            {"surface_speed", surface_speed},
            {"l2_norm", vel.l2_norm},
            {"drift", {vel.drift.x(), vel.drift.y()}}};
}

void write_manifest(const std::string& path, const json& manifest) {
    std::ofstream out = open_output(path);
    out << manifest.dump(2) << '\n';
}

/// Options shared by every subcommand, resolved into a LabConfig.
struct CommonOptions {
    std::string config_path;
    std::string mesh_in;
    std::string mesh_out;
    std::string manifest_path;
    double h = 0.0;
    double radius = -1.0;
    std::string velocity;
    double surface_speed = std::numeric_limits<double>::quiet_NaN();
    int jobs = 0;

    void add(CLI::App& sub) {
        sub.add_option("--config", config_path, "JSON configuration file");
        sub.add_option("--mesh-h", h, "target mesh spacing of the unit cell");
        sub.add_option("--radius", radius, "obstacle radius (0 <= r < 1/2)");
        sub.add_option("--mesh-in", mesh_in, "load the cell mesh from this file");
        sub.add_option("--mesh-out", mesh_out, "write the cell mesh to this file");
        sub.add_option("--velocity", velocity, "velocity recipe: none|symmetric|nonsymmetric");
        sub.add_option("--surface-speed", surface_speed,
                       "tangential surface velocity magnitude");
        sub.add_option("--jobs", jobs,
                       "worker threads (default: DISPERSION_LAB_JOBS, then all cores)");
        sub.add_option("--manifest", manifest_path,
                       "manifest path (default: <out>.manifest.json)");
    }

    LabConfig resolve() const {
        LabConfig cfg;
        if (!config_path.empty()) load_config_file(cfg, config_path);
        if (h > 0.0) cfg.h = h;
        if (radius >= 0.0) cfg.radius = radius;
        if (!velocity.empty()) cfg.velocity = velocity;
        if (std::isfinite(surface_speed)) cfg.surface_speed = surface_speed;
        if (jobs > 0) cfg.jobs = jobs;
        return cfg;
    }
};

// ---------------------------------------------------------------------------
// mesh

int cmd_mesh(const CommonOptions& common) {
    LabConfig cfg = common.resolve();
    const MeshBundle mb = make_mesh(cfg, common.mesh_in);
    validate_mesh(mb.mesh, mb.geom);

    const double r = mb.geom.obstacle_radius;
    const double area_exact = 1.0 - M_PI * r * r;
    const double length_exact = 2.0 * M_PI * r;
    std::printf("nodes              %d\n", mb.mesh.num_nodes());
    std::printf("triangles          %d\n", mb.mesh.num_triangles());
    std::printf("boundary segments  %d\n", mb.surf.num_segments());
    std::printf("spacing h          %.6g\n", mb.mesh.h);
    std::printf("fluid area         %.12g  (exact %.12g, error %.3e)\n", mb.geom.fluid_area,
                area_exact, std::abs(mb.geom.fluid_area - area_exact));
    std::printf("surface length     %.12g  (exact %.12g, error %.3e)\n",
                mb.geom.surface_length, length_exact,
                std::abs(mb.geom.surface_length - length_exact));

    std::vector<std::string> outputs;
    if (!common.mesh_out.empty()) {
        write_mesh_file(common.mesh_out, mb.mesh, mb.geom);
        outputs.push_back(common.mesh_out);
        std::printf("mesh written to    %s\n", common.mesh_out.c_str());
    }

    std::string manifest_path = common.manifest_path;
    if (manifest_path.empty() && !common.mesh_out.empty())
        manifest_path = common.mesh_out + ".manifest.json";
    if (!manifest_path.empty()) {
        const json cfgj = config_json(cfg);
        json m;
        m["command"] = "mesh";
        m["code_version"] = code_version;
        m["config"] = cfgj;
        m["config_hash"] = config_hash(cfgj);
        m["mesh"] = mesh_json(mb);
        m["outputs"] = outputs;
        m["failures"] = 0;
        write_manifest(manifest_path, m);
    }
    return 0;
}

// ---------------------------------------------------------------------------
// sweeps

struct SweepOptions {
    CommonOptions common;
    std::string out;
    std::string dump_system;
    std::string dump_correctors;
    std::string velocity_out;
    double min = std::numeric_limits<double>::quiet_NaN();
    double max = std::numeric_limits<double>::quiet_NaN();
    int points = 0;
    std::string spacing;
    double u0 = std::numeric_limits<double>::quiet_NaN();

    void add(CLI::App& sub, bool fixed_u0) {
        common.add(sub);
        sub.add_option("--out", out, "CSV output path")->required();
        sub.add_option("--min", min, "first parameter value");
        sub.add_option("--max", max, "last parameter value");
        sub.add_option("--points", points, "number of parameter values");
        sub.add_option("--spacing", spacing, "grid spacing: linear|log");
        if (fixed_u0)
            sub.add_option("--u0", u0, "concentration the tensors are evaluated at");
        sub.add_option("--dump-system", dump_system,
                       "write the assembled cell matrix of the first point "
                       "(coordinate text: row col value)");
        sub.add_option("--dump-correctors", dump_correctors,
                       "write corrector fields of the first point to "
                       "<prefix>_bulk.csv and <prefix>_surface.csv");
        sub.add_option("--velocity-out", velocity_out, "write the velocity field as CSV");
    }
};

/// Per-command grid defaults: concentrations start at zero on a linear
/// grid, coefficient magnitudes span decades on a log grid.
void apply_sweep_defaults(LabConfig& cfg, SweepParameter param) {
    const bool is_u0 = param == SweepParameter::u0;
    if (std::isnan(cfg.sweep_min)) cfg.sweep_min = is_u0 ? 0.0 : 0.01;
    if (std::isnan(cfg.sweep_max)) cfg.sweep_max = 100.0;
    if (cfg.sweep_points <= 0) cfg.sweep_points = is_u0 ? 25 : 20;
    if (cfg.sweep_spacing.empty()) cfg.sweep_spacing = is_u0 ? "linear" : "log";
}

json point_json(const SweepPoint& p, bool limit_row) {
    json j;
    if (limit_row)
        j["value"] = "limit";
    else
        j["value"] = p.value;
    j["status"] = p.ok ? "ok" : "failed";
    if (!p.ok) {
        j["error"] = p.error;
        return j;
    }
    j["fprime"] = p.fprime;
    j["residual"] = {p.residual[0], p.residual[1]};
    j["iterations"] = {p.iterations[0], p.iterations[1]};
    j["lambda_min"] = p.tensor.lambda_min;
    j["sym_gap"] = p.tensor.sym_gap;
    return j;
}

/// Dump diagnostics for the first grid point: the assembled system matrix
/// (direction-independent) and the corrector fields of both directions.
void dump_first_point(const SweepOptions& opt, const MeshBundle& mb,
                      const VelocityField& vel, const SweepSpec& spec,
                      std::vector<std::string>& outputs) {
    CoefficientSet c = spec.coeffs;
    double u0 = spec.u0;
    const double value = spec.range.points().front();
    switch (spec.parameter) {
        case SweepParameter::u0: u0 = value; break;
        case SweepParameter::ds: c.Ds = value * spec.coeffs.Ds; break;
        case SweepParameter::kappa: c.kappa = value; break;
    }

    if (!opt.dump_system.empty()) {
        const LinearSystem sys = assemble_cell_system(mb.mesh, mb.surf, vel, c,
                                                      c.isotherm.slope(u0), 0, 1.0);
        std::ofstream out = open_output(opt.dump_system);
        write_system(out, sys);
        outputs.push_back(opt.dump_system);
    }

    if (!opt.dump_correctors.empty()) {
        const CellSolution sol = solve_cell(mb.mesh, mb.surf, vel, c, u0);
        {
            std::ofstream out = open_output(opt.dump_correctors + "_bulk.csv");
            out << "node_index,y1,y2,chi1,chi2\n";
            for (int n = 0; n < mb.mesh.num_nodes(); ++n) {
                const Vec2& y = mb.mesh.nodes[static_cast<std::size_t>(n)];
                out << n << ',' << num(y.x()) << ',' << num(y.y()) << ','
                    << num(sol.dir[0].chi[n]) << ',' << num(sol.dir[1].chi[n]) << '\n';
            }
            outputs.push_back(opt.dump_correctors + "_bulk.csv");
        }
        if (!mb.surf.empty()) {
            std::ofstream out = open_output(opt.dump_correctors + "_surface.csv");
            out << "loop_index,y1,y2,omega1,omega2\n";
            for (int k = 0; k < mb.surf.num_nodes(); ++k) {
                const Vec2& y = mb.mesh.nodes[static_cast<std::size_t>(mb.surf.nodes[static_cast<std::size_t>(k)])];
                out << k << ',' << num(y.x()) << ',' << num(y.y()) << ','
                    << num(sol.dir[0].omega[k]) << ',' << num(sol.dir[1].omega[k]) << '\n';
            }
            outputs.push_back(opt.dump_correctors + "_surface.csv");
        }
    }
}

int cmd_sweep(SweepParameter param, const SweepOptions& opt) {
    LabConfig cfg = opt.common.resolve();
    if (std::isfinite(opt.min)) cfg.sweep_min = opt.min;
    if (std::isfinite(opt.max)) cfg.sweep_max = opt.max;
    if (opt.points > 0) cfg.sweep_points = opt.points;
    if (!opt.spacing.empty()) cfg.sweep_spacing = opt.spacing;
    if (std::isfinite(opt.u0)) cfg.u0 = opt.u0;
    apply_sweep_defaults(cfg, param);

    SweepSpec spec;
    spec.parameter = param;
    spec.range.min = cfg.sweep_min;
    spec.range.max = cfg.sweep_max;
    spec.range.count = cfg.sweep_points;
    spec.range.log_spacing = cfg.sweep_spacing == "log";
    spec.coeffs = cfg.coefficients();
    spec.u0 = cfg.u0;
    spec.range.validate();
    spec.coeffs.validate();

    const MeshBundle mb = make_mesh(cfg, opt.common.mesh_in);
    const VelocityField vel = build_velocity(velocity_recipe_from_string(cfg.velocity),
                                             mb.mesh, mb.surf, cfg.surface_speed);

    std::vector<std::string> outputs;
    if (!opt.common.mesh_out.empty()) {
        write_mesh_file(opt.common.mesh_out, mb.mesh, mb.geom);
        outputs.push_back(opt.common.mesh_out);
    }
    if (!opt.velocity_out.empty()) {
        std::ofstream out = open_output(opt.velocity_out);
        write_velocity_csv(out, mb.mesh, mb.surf, vel);
        outputs.push_back(opt.velocity_out);
    }
    dump_first_point(opt, mb, vel, spec, outputs);

    const int jobs = resolve_jobs(opt.common.jobs, cfg.jobs);
    const SweepResult result = run_sweep(mb.mesh, mb.surf, vel, spec, jobs);
    {
        std::ofstream out = open_output(opt.out);
        write_sweep_csv(out, spec, result);
        outputs.push_back(opt.out);
    }

    const json cfgj = config_json(cfg);
    json m;
    m["command"] = std::string("sweep-") +
                   (param == SweepParameter::u0 ? "u0"
                                                : param == SweepParameter::ds ? "ds" : "kappa");
    m["code_version"] = code_version;
    m["config"] = cfgj;
    m["config_hash"] = config_hash(cfgj);
    m["jobs"] = jobs;
    m["mesh"] = mesh_json(mb);
    m["velocity"] = velocity_json(vel, cfg.surface_speed);
    json points = json::array();
    for (const SweepPoint& p : result.points) points.push_back(point_json(p, false));
    points.push_back(point_json(result.limit, true));
    m["points"] = std::move(points);
    m["outputs"] = outputs;
    m["failures"] = result.failures();
    const std::string manifest_path =
        opt.common.manifest_path.empty() ? opt.out + ".manifest.json" : opt.common.manifest_path;
    write_manifest(manifest_path, m);

    std::printf("%s: %d points (%d failed) -> %s\n", m["command"].get<std::string>().c_str(),
                static_cast<int>(result.points.size()), result.failures(), opt.out.c_str());
    for (const SweepPoint& p : result.points)
        if (!p.ok)
            std::fprintf(stderr, "point %s failed: %s\n", num(p.value).c_str(),
                         p.error.c_str());
    if (!result.limit.ok)
        std::fprintf(stderr, "limit row failed: %s\n", result.limit.error.c_str());
    return result.failures() > 0 ? 1 : 0;
}

// ---------------------------------------------------------------------------
// macro

struct MacroOptions {
    CommonOptions common;
    std::string out;
    std::string fields_out;
};

int cmd_macro(const MacroOptions& opt) {
    LabConfig cfg = opt.common.resolve();
    cfg.macro.validate();

    const MeshBundle mb = make_mesh(cfg, opt.common.mesh_in);
    const VelocityField vel = build_velocity(velocity_recipe_from_string(cfg.velocity),
                                             mb.mesh, mb.surf, cfg.surface_speed);
    const CoefficientSet coeffs = cfg.coefficients();
    const MacroMeasures meas{mb.geom.fluid_area, mb.geom.surface_length};

    const int jobs = resolve_jobs(opt.common.jobs, cfg.jobs);
    const std::vector<double> grid =
        default_concentration_grid(cfg.table_linear, cfg.table_log, cfg.table_u_max);
    const DispersionTable table =
        build_dispersion_table(mb.mesh, mb.surf, vel, coeffs, grid, jobs);

    const MacroRun run = run_macro(cfg.macro, coeffs.isotherm, meas, table);

    std::vector<std::string> outputs;
    {
        std::ofstream out = open_output(opt.out);
        out << "t,mass,stored_energy,min_u,max_u\n";
        for (const TimeSample& s : run.series)
            out << num(s.t) << ',' << num(s.mass) << ',' << num(s.stored_energy) << ','
                << num(s.min_u) << ',' << num(s.max_u) << '\n';
        outputs.push_back(opt.out);
    }
    if (!opt.fields_out.empty()) {
        std::ofstream out = open_output(opt.fields_out);
        out << "cell,x,y,u,z\n";
        const double dx = run.state.dx;
        for (int c = 0; c < run.state.u.size(); ++c) {
            const int ix = c % run.state.n;
            const int iy = c / run.state.n;
            out << c << ',' << num((ix + 0.5) * dx) << ','
                << num(cfg.macro.dim == 2 ? (iy + 0.5) * dx : 0.0) << ','
                << num(run.state.u[c]) << ',' << num(run.state.z[c]) << '\n';
        }
        outputs.push_back(opt.fields_out);
    }

    const json cfgj = config_json(cfg);
    json m;
    m["command"] = "macro";
    m["code_version"] = code_version;
    m["config"] = cfgj;
    m["config_hash"] = config_hash(cfgj);
    m["jobs"] = jobs;
    m["mesh"] = mesh_json(mb);
    m["velocity"] = velocity_json(vel, cfg.surface_speed);
    m["table"] = {{"samples", static_cast<int>(table.u0.size())},
                  {"u_max", cfg.table_u_max},
                  {"limit_lambda_min", table.limit.lambda_min}};
    m["run"] = {{"dim", cfg.macro.dim},
                {"cells", cfg.macro.cells},
                {"dt", run.dt},
                {"steps", run.steps},
                {"newton_iterations", run.newton_iterations},
                {"final_mass", run.series.back().mass},
                {"final_max_u", run.series.back().max_u}};

    // Echo of the initial data; kept nodewise for grids small enough to be
    // useful in a diff.
    const int total = cfg.macro.dim == 1 ? cfg.macro.cells : cfg.macro.cells * cfg.macro.cells;
    if (total <= 4096) {
        std::vector<double> u_in(static_cast<std::size_t>(total));
        std::vector<double> v_in(static_cast<std::size_t>(total));
        for (int c = 0; c < total; ++c) {
            const auto [u, v] = initial_pair(cfg.macro, coeffs.isotherm, meas, c);
            u_in[static_cast<std::size_t>(c)] = u;
            v_in[static_cast<std::size_t>(c)] = v;
        }
        m["initial"] = {{"u_in", u_in}, {"v_in", v_in}};
    } else {
        m["initial"] = {{"min_u", run.series.front().min_u},
                        {"max_u", run.series.front().max_u}};
    }

    m["outputs"] = outputs;
    m["failures"] = 0;
    const std::string manifest_path =
        opt.common.manifest_path.empty() ? opt.out + ".manifest.json" : opt.common.manifest_path;
    write_manifest(manifest_path, m);

    std::printf("macro: %d steps of dt=%.6g, %d Newton iterations -> %s\n", run.steps, run.dt,
                run.newton_iterations, opt.out.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyCliOptions {
    CommonOptions common;
    std::string out;
    bool inject_fault = false;
};

int cmd_verify(const VerifyCliOptions& opt) {
    LabConfig cfg = opt.common.resolve();
    VerifyOptions vo;
    vo.h = cfg.h;
    vo.inject_fault = opt.inject_fault;

    const std::vector<CheckResult> checks = run_verify_suite(cfg, vo);
    int failed = 0;
    for (const CheckResult& c : checks) {
        std::printf("%s  %-44s measured %11.4e  bound %11.4e\n", c.pass ? "PASS" : "FAIL",
                    c.name.c_str(), c.measured, c.bound);
        failed += c.pass ? 0 : 1;
    }
    std::printf("%zu checks, %d failed%s\n", checks.size(), failed,
                opt.inject_fault ? " (fault injection active)" : "");

    std::vector<std::string> outputs;
    if (!opt.out.empty()) {
        std::ofstream out = open_output(opt.out);
        out << "check,status,measured,bound\n";
        for (const CheckResult& c : checks)
            out << '"' << c.name << "\"," << (c.pass ? "pass" : "fail") << ','
                << num(c.measured) << ',' << num(c.bound) << '\n';
        outputs.push_back(opt.out);
    }

    std::string manifest_path = opt.common.manifest_path;
    if (manifest_path.empty() && !opt.out.empty()) manifest_path = opt.out + ".manifest.json";
    if (!manifest_path.empty()) {
        const json cfgj = config_json(cfg);
        json m;
        m["command"] = "verify";
        m["code_version"] = code_version;
        m["config"] = cfgj;
        m["config_hash"] = config_hash(cfgj);
        m["inject_fault"] = opt.inject_fault;
        json rows = json::array();
        for (const CheckResult& c : checks)
            rows.push_back({{"check", c.name},
                            {"pass", c.pass},
                            {"measured", c.measured},
                            {"bound", c.bound}});
        m["checks"] = std::move(rows);
        m["outputs"] = outputs;
        m["failures"] = failed;
        write_manifest(manifest_path, m);
    }
    return failed;
}

}  // namespace
}  // namespace displab

int main(int argc, char** argv) {
    using namespace displab;

    CLI::App app{
        "dispersion-lab: effective dispersion tensors of a periodic perforated cell "
        "with adsorbing obstacle surfaces, parameter sweeps, and the resulting "
        "macroscopic transport"};
    app.require_subcommand(1);

    CommonOptions mesh_common;
    CLI::App* mesh_cmd = app.add_subcommand("mesh", "build, check and export the cell mesh");
    mesh_common.add(*mesh_cmd);

    SweepOptions u0_opt;
    CLI::App* u0_cmd =
        app.add_subcommand("sweep-u0", "dispersion tensors over a concentration grid");
    u0_opt.add(*u0_cmd, false);

    SweepOptions ds_opt;
    CLI::App* ds_cmd = app.add_subcommand(
        "sweep-ds", "dispersion tensors over surface-diffusion magnitudes");
    ds_opt.add(*ds_cmd, true);

    SweepOptions kappa_opt;
    CLI::App* kappa_cmd =
        app.add_subcommand("sweep-kappa", "dispersion tensors over exchange rates");
    kappa_opt.add(*kappa_cmd, true);

    MacroOptions macro_opt;
    CLI::App* macro_cmd =
        app.add_subcommand("macro", "run the homogenized evolution on a periodic box");
    macro_opt.common.add(*macro_cmd);
    macro_cmd->add_option("--out", macro_opt.out, "time-series CSV output path")->required();
    macro_cmd->add_option("--fields-out", macro_opt.fields_out,
                          "write the final concentration field as CSV");

    VerifyCliOptions verify_opt;
    CLI::App* verify_cmd =
        app.add_subcommand("verify", "run the cross-cutting invariant checks");
    verify_opt.common.add(*verify_cmd);
    verify_cmd->add_option("--out", verify_opt.out, "write the check report as CSV");
    verify_cmd->add_flag("--inject-fault", verify_opt.inject_fault,
                         "skew assembled tensors by 1e-3 to prove the checks catch it");

    CLI11_PARSE(app, argc, argv);

    try {
        if (mesh_cmd->parsed()) return cmd_mesh(mesh_common);
        if (u0_cmd->parsed()) return cmd_sweep(SweepParameter::u0, u0_opt);
        if (ds_cmd->parsed()) return cmd_sweep(SweepParameter::ds, ds_opt);
        if (kappa_cmd->parsed()) return cmd_sweep(SweepParameter::kappa, kappa_opt);
        if (macro_cmd->parsed()) return cmd_macro(macro_opt);
        if (verify_cmd->parsed()) return cmd_verify(verify_opt);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 2;
    }
    return 0;
}
