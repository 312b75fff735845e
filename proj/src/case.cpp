#include "gridppo/case.hpp"

#include <cmath>
#include <numbers>
#include <set>
#include <sstream>

namespace gridppo {

CaseParseError::CaseParseError(std::size_t line, const std::string& what)
    : CaseError("line " + std::to_string(line) + ": " + what), line_(line) {}

std::optional<std::size_t> Case::find_bus(int id) const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].id == id) return i;
    }
    return std::nullopt;
}

std::size_t Case::bus_index(int id) const {
    if (auto i = find_bus(id)) return *i;
    throw CaseError("undefined bus " + std::to_string(id));
}

std::size_t Case::slack_index() const {
    for (std::size_t i = 0; i < buses.size(); ++i) {
        if (buses[i].kind == BusKind::Slack) return i;
    }
    throw CaseError("case has no slack bus");
}

std::vector<std::string> validate_case(const Case& c) {
    std::vector<std::string> out;
    auto add = [&out](const std::string& s) { out.push_back(s); };

    if (!(c.baseMVA > 0.0) || !std::isfinite(c.baseMVA)) add("baseMVA must be positive");
    if (c.buses.size() < 2) add("case needs at least 2 buses");
    if (c.generators.empty()) add("case needs at least 1 generator");

    std::set<int> ids;
    std::vector<int> slacks;
    for (const auto& b : c.buses) {
        const std::string tag = "bus " + std::to_string(b.id);
        if (!ids.insert(b.id).second) add("duplicate " + tag);
        if (!(b.Vmin < b.Vmax)) add(tag + ": Vmin must be below Vmax");
        if (!std::isfinite(b.Pd) || !std::isfinite(b.Qd)) add(tag + ": non-finite load");
        if (!std::isfinite(b.Gs) || !std::isfinite(b.Bs)) add(tag + ": non-finite shunt");
        if (b.kind == BusKind::Slack) slacks.push_back(b.id);
    }
    if (slacks.empty()) add("no slack bus");
    if (slacks.size() > 1) {
        std::ostringstream os;
        os << "multiple slack buses:";
        for (int id : slacks) os << ' ' << id;
        add(os.str());
    }

    for (std::size_t k = 0; k < c.branches.size(); ++k) {
        const auto& br = c.branches[k];
        const std::string tag = "branch " + std::to_string(k + 1) + " (" + std::to_string(br.from) +
                                "-" + std::to_string(br.to) + ")";
        if (!ids.contains(br.from)) add(tag + ": undefined bus " + std::to_string(br.from));
        if (!ids.contains(br.to)) add(tag + ": undefined bus " + std::to_string(br.to));
        if (br.from == br.to) add(tag + ": from and to buses coincide");
        if (br.r == 0.0 && br.x == 0.0) add(tag + ": zero impedance");
        if (!std::isfinite(br.r) || !std::isfinite(br.x) || !std::isfinite(br.b_charging))
            add(tag + ": non-finite impedance");
        if (br.S_max < 0.0 || std::isnan(br.S_max)) add(tag + ": negative flow limit");
        if (br.tap < 0.0) add(tag + ": negative tap ratio");
    }

    std::set<std::size_t> gen_buses;
    for (std::size_t g = 0; g < c.generators.size(); ++g) {
        const auto& gen = c.generators[g];
        const std::string tag = "generator " + std::to_string(g + 1) + " (bus " + std::to_string(gen.bus) + ")";
        auto bi = c.find_bus(gen.bus);
        if (!bi) {
            add(tag + ": undefined bus " + std::to_string(gen.bus));
        } else {
            gen_buses.insert(*bi);
            if (c.buses[*bi].kind == BusKind::PQ) add(tag + ": attached to a PQ bus");
        }
        if (!(gen.Pmin <= gen.Pmax)) add(tag + ": Pmin exceeds Pmax");
        if (!(gen.Qmin <= gen.Qmax)) add(tag + ": Qmin exceeds Qmax");
        if (!std::isfinite(gen.Pmin) || !std::isfinite(gen.Pmax)) add(tag + ": active limits must be finite");
        if (!(gen.Vg > 0.0)) add(tag + ": voltage setpoint must be positive");
        const auto& cost = gen.cost;
        if (!std::isfinite(cost.c2) || !std::isfinite(cost.c1) || !std::isfinite(cost.c0))
            add(tag + ": non-finite cost coefficient");
        if (cost.c2 < 0.0) add(tag + ": negative quadratic cost");
    }
    for (std::size_t i = 0; i < c.buses.size(); ++i) {
        const auto& b = c.buses[i];
        if (b.kind != BusKind::PQ && !gen_buses.contains(i))
            add("bus " + std::to_string(b.id) + ": voltage-controlled bus without a generator");
    }
    return out;
}

BranchAdmittance branch_admittance(const Branch& br) {
    if (br.r == 0.0 && br.x == 0.0)
        throw CaseError("zero-impedance branch " + std::to_string(br.from) + "-" + std::to_string(br.to));
    const Complex ys = 1.0 / Complex(br.r, br.x);
    const Complex half_charging(0.0, br.b_charging / 2.0);
    const double t = br.tap_ratio();
    const Complex tap = std::polar(t, br.shift * std::numbers::pi / 180.0);
    BranchAdmittance a;
    a.ytt = ys + half_charging;
    a.yff = a.ytt / (t * t);
    a.yft = -ys / std::conj(tap);
    a.ytf = -ys / tap;
    return a;
}

CMat build_ybus(const Case& c) {
    const auto n = static_cast<Eigen::Index>(c.bus_count());
    CMat y = CMat::Zero(n, n);
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        const auto f = static_cast<Eigen::Index>(c.bus_index(br.from));
        const auto t = static_cast<Eigen::Index>(c.bus_index(br.to));
        const auto a = branch_admittance(br);
        y(f, f) += a.yff;
        y(f, t) += a.yft;
        y(t, f) += a.ytf;
        y(t, t) += a.ytt;
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& b = c.buses[static_cast<std::size_t>(i)];
        y(i, i) += Complex(b.Gs, b.Bs) / c.baseMVA;
    }
    return y;
}

Case override_branch_limit(const Case& c, int from, int to, double s_max) {
    Case out = c;
    bool found = false;
    for (auto& br : out.branches) {
        if ((br.from == from && br.to == to) || (br.from == to && br.to == from)) {
            br.S_max = s_max;
            found = true;
        }
    }
    if (!found)
        throw CaseError("no branch between buses " + std::to_string(from) + " and " + std::to_string(to));
    return out;
}

}  // namespace gridppo
