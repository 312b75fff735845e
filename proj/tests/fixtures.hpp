#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "gridppo/case.hpp"

namespace fixtures {

inline std::string source_path(const std::string& rel) { return std::string(GRIDPPO_SOURCE_DIR) + "/" + rel; }

inline gridppo::Case case14() { return gridppo::load_case(source_path("data/case14.m")); }
inline gridppo::Case case14_mod() { return gridppo::load_case(source_path("data/case14_mod.m")); }

inline const nlohmann::json& reference() {
    static const nlohmann::json j = [] {
        std::ifstream in(source_path("tests/data/case14_reference.json"));
        return nlohmann::json::parse(in);
    }();
    return j;
}

// Slack bus 1 feeding a PQ load at bus 2 through one line.
inline std::string two_bus_text(double r, double x, double pd, double qd, double vg = 1.0, double rate = 0.0,
                                double b = 0.0) {
    std::ostringstream os;
    os.precision(17);
    os << "baseMVA 100\n"
       << "bus\n"
       << "1 3 0 0 0 0 1 1 0 0 1 1.1 0.9\n"
       << "2 1 " << pd << ' ' << qd << " 0 0 1 1 0 0 1 1.1 0.9\n"
       << "gen\n"
       << "1 0 0 500 -500 " << vg << " 100 1 500 0\n"
       << "branch\n"
       << "1 2 " << r << ' ' << x << ' ' << b << ' ' << rate << " 0 0 0 0 1 -360 360\n"
       << "gencost\n"
       << "2 0 0 3 0.01 40 0\n";
    return os.str();
}

inline gridppo::Case two_bus(double r, double x, double pd, double qd, double vg = 1.0, double rate = 0.0) {
    return gridppo::parse_case(two_bus_text(r, x, pd, qd, vg, rate));
}

}  // namespace fixtures
