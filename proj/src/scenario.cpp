#include "gridppo/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gridppo {

Calibration calibrate(const std::vector<Scenario>& labeled) {
    Calibration cal;
    bool any = false;
    for (const auto& s : labeled) {
        if (!s.labeled || !std::isfinite(s.cost_replay)) continue;
        if (!any) {
            cal.c_min = cal.c_max = s.cost_replay;
            any = true;
        }
        cal.c_min = std::min(cal.c_min, s.cost_replay);
        cal.c_max = std::max(cal.c_max, s.cost_replay);
    }
    if (!any || !(cal.c_max > cal.c_min)) return cal;
    const double span = cal.c_max - cal.c_min;
    cal.k = -kOptimumPoints / span;
    cal.b = kOptimumPoints * cal.c_max / span;
    cal.defined = true;
    return cal;
}

void apply_calibration(std::vector<Scenario>& scenarios, const Calibration& cal) {
    for (auto& s : scenarios) {
        s.z = (cal.defined && s.labeled) ? kOptimumPoints - (cal.k * s.cost_replay + cal.b) : 0.0;
    }
}

Scenario scenario_from_case(const Case& c) {
    Scenario s;
    const auto nb = static_cast<Eigen::Index>(c.bus_count());
    const auto ng = static_cast<Eigen::Index>(c.gen_count());
    s.Pd.resize(nb);
    s.Qd.resize(nb);
    for (Eigen::Index i = 0; i < nb; ++i) {
        s.Pd(i) = c.buses[static_cast<std::size_t>(i)].Pd;
        s.Qd(i) = c.buses[static_cast<std::size_t>(i)].Qd;
    }
    s.Pg0.resize(ng);
    s.Vg0.resize(ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
        s.Pg0(g) = c.generators[static_cast<std::size_t>(g)].Pg;
        s.Vg0(g) = c.generators[static_cast<std::size_t>(g)].Vg;
    }
    return s;
}

void check_dimensions(const Case& c, const Scenario& s) {
    const auto nb = static_cast<Eigen::Index>(c.bus_count());
    const auto ng = static_cast<Eigen::Index>(c.gen_count());
    if (s.Pd.size() != nb || s.Qd.size() != nb || s.Pg0.size() != ng || s.Vg0.size() != ng)
        throw std::invalid_argument("scenario " + std::to_string(s.id) + " does not match the case dimensions");
    if (s.labeled && (s.Pg_opt.size() != ng || s.Vg_opt.size() != ng))
        throw std::invalid_argument("scenario " + std::to_string(s.id) + " has labels of the wrong length");
}

Case apply_scenario(const Case& c, const Scenario& s) {
    check_dimensions(c, s);
    Case out = c;
    for (std::size_t i = 0; i < out.bus_count(); ++i) {
        out.buses[i].Pd = s.Pd(static_cast<Eigen::Index>(i));
        out.buses[i].Qd = s.Qd(static_cast<Eigen::Index>(i));
    }
    for (std::size_t g = 0; g < out.gen_count(); ++g) {
        out.generators[g].Pg = s.Pg0(static_cast<Eigen::Index>(g));
        out.generators[g].Vg = s.Vg0(static_cast<Eigen::Index>(g));
    }
    return out;
}

}  // namespace gridppo
