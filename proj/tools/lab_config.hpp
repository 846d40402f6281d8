#pragma once

#include <string>

#include <json.hpp>

#include "displab/cell_problems.hpp"
#include "displab/macro.hpp"
#include "displab/sweep.hpp"

namespace displab {

/// Resolved run configuration shared by all subcommands.  Values come from
/// built-in defaults, then an optional JSON config file, then command-line
/// overrides, in that order.
struct LabConfig {
    // geometry
    double radius = 0.2;
    double h = 1.0 / 32.0;

    // transport coefficients
    double alpha = 1.0;
    double beta = 1.0;
    double kappa = 1.0;
    Eigen::Matrix2d D = Eigen::Matrix2d::Identity();
    Eigen::Matrix2d Ds = Eigen::Matrix2d::Identity();

    // velocity manufacture
    std::string velocity = "symmetric";
    double surface_speed = 0.0;

    // sweep grid; NaN / 0 mean "use the per-command default"
    double sweep_min = std::numeric_limits<double>::quiet_NaN();
    double sweep_max = std::numeric_limits<double>::quiet_NaN();
    int sweep_points = 0;
    std::string sweep_spacing;
    double u0 = 2.5;  ///< fixed concentration for the Ds / kappa sweeps

    // dispersion table driving the macro run
    double table_u_max = 1e4;
    int table_linear = 8;
    int table_log = 12;

    // macroscopic evolution
    MacroConfig macro;

    int jobs = 0;  ///< 0: DISPERSION_LAB_JOBS, then hardware concurrency

    CoefficientSet coefficients() const;
};

/// Merge a JSON config file into `cfg`.  Unknown keys and type mismatches
/// are usage errors naming the offending field path.
void load_config_file(LabConfig& cfg, const std::string& path);

/// Canonical JSON echo of a fully resolved configuration.  Key order and
/// number formatting are fixed, so equal configurations serialize to equal
/// bytes and the hash below identifies a run.
nlohmann::json config_json(const LabConfig& cfg);

/// FNV-1a (64 bit) of the canonical serialization, as 16 hex digits.
std::string config_hash(const nlohmann::json& canonical);

}  // namespace displab
