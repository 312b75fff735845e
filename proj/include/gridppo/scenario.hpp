#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "gridppo/case.hpp"

namespace gridppo {

// One operating condition: per-bus loads and initial generator settings,
// optionally labeled with the oracle optimum.
struct Scenario {
    std::uint64_t id = 0;
    Vec Pd, Qd;    // MW, MVAr per bus
    Vec Pg0, Vg0;  // MW, p.u. per generator
    bool feasible = false;
    bool labeled = false;
    Vec Pg_opt, Vg_opt;
    double cost_opt = std::numeric_limits<double>::quiet_NaN();     // oracle objective, $/h
    double cost_replay = std::numeric_limits<double>::quiet_NaN();  // oracle setpoints run through the power flow
    double z = 0.0;  // reward correction, points
};

// Affine cost-to-points map shared by every scenario of a dataset.
struct Calibration {
    bool defined = false;
    double k = 0.0;
    double b = 0.0;
    double c_min = 0.0;
    double c_max = 0.0;
};

// Points awarded to a feasible outcome at the oracle optimum.
inline constexpr double kOptimumPoints = 500.0;

/// k and b from the spread of replayed oracle costs; undefined when fewer
/// than two distinct costs exist.
Calibration calibrate(const std::vector<Scenario>& labeled);

/// Sets z on every labeled scenario so that its optimum maps to kOptimumPoints.
void apply_calibration(std::vector<Scenario>& scenarios, const Calibration& cal);

/// Scenario holding the case's own loads and generator settings.
Scenario scenario_from_case(const Case& c);

/// Copy of `c` with the scenario's loads and initial setpoints installed.
Case apply_scenario(const Case& c, const Scenario& s);

void check_dimensions(const Case& c, const Scenario& s);

}  // namespace gridppo
