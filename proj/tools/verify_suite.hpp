#pragma once

#include <string>
#include <vector>

#include "lab_config.hpp"

namespace displab {

struct CheckResult {
    std::string name;
    bool pass = false;
    double measured = 0.0;  ///< the quantity the bound constrains
    double bound = 0.0;
};

struct VerifyOptions {
    double h = 1.0 / 32.0;
    bool inject_fault = false;  ///< skew every assembled tensor by 1e-3
};

/// Run the cross-cutting invariant suite: velocity drift and slip, cell
/// right-hand-side compatibility, equivalence of the two tensor formulas
/// under refinement, coercivity of the symmetric part, no-flow tensor
/// symmetry, the symmetrized-assembly identity, and linear-isotherm
/// invariance.  The fault switch perturbs assembled tensors so the
/// downstream checks demonstrably catch a broken assembly.
std::vector<CheckResult> run_verify_suite(const LabConfig& cfg, const VerifyOptions& opt);

}  // namespace displab
