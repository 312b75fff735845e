#include "gridppo/environment.hpp"

#include <algorithm>
#include <stdexcept>

#include "gridppo/opf.hpp"

namespace gridppo {
namespace {

struct Box {
    double lo, hi;
};

Box pg_box(const Case& c, std::size_t g) { return {c.generators[g].Pmin, c.generators[g].Pmax}; }

Box vg_box(const Case& c, std::size_t g) {
    const auto& bus = c.buses[c.bus_index(c.generators[g].bus)];
    return {bus.Vmin, bus.Vmax};
}

double to_unit(double v, Box b) { return b.hi > b.lo ? (v - b.lo) / (b.hi - b.lo) : 0.0; }
double from_unit(double u, Box b) { return b.lo + u * (b.hi - b.lo); }

}  // namespace

const char* to_string(RewardBranch b) {
    switch (b) {
        case RewardBranch::Diverged: return "diverged";
        case RewardBranch::Violation: return "violation";
        case RewardBranch::Feasible: return "feasible";
    }
    return "?";
}

RewardBranch reward_branch(const PfSolution& pf, const ViolationReport& report) {
    if (!pf.converged) return RewardBranch::Diverged;
    return report.empty() ? RewardBranch::Feasible : RewardBranch::Violation;
}

ViolationPenalties violation_penalties(const ViolationReport& report, const RewardParams& p) {
    return {p.w_p * report.pgen_total(), p.w_v * report.vbus_total(), p.w_l * report.branch_total()};
}

double compute_reward(const PfSolution& pf, const ViolationReport& report, double cost, const RewardParams& p) {
    switch (reward_branch(pf, report)) {
        case RewardBranch::Diverged: return p.divergence_penalty;
        case RewardBranch::Violation: {
            const auto w = violation_penalties(report, p);
            return std::max(-(w.pgen + w.vbus + w.branch), p.violation_cap);
        }
        case RewardBranch::Feasible: return p.k * cost + p.b + p.z;
    }
    return p.divergence_penalty;
}

Vec normalize_setpoints(const Case& c, const Vec& Pg, const Vec& Vg) {
    const auto ng = static_cast<Eigen::Index>(c.gen_count());
    if (Pg.size() != ng || Vg.size() != ng) throw std::invalid_argument("setpoint length does not match generator count");
    Vec u(2 * ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
        u(g) = to_unit(Pg(g), pg_box(c, static_cast<std::size_t>(g)));
        u(ng + g) = to_unit(Vg(g), vg_box(c, static_cast<std::size_t>(g)));
    }
    return u;
}

void denormalize_setpoints(const Case& c, const Vec& u, Vec& Pg, Vec& Vg) {
    const auto ng = static_cast<Eigen::Index>(c.gen_count());
    if (u.size() != 2 * ng) throw std::invalid_argument("normalized setpoints must have length 2·s");
    Pg.resize(ng);
    Vg.resize(ng);
    for (Eigen::Index g = 0; g < ng; ++g) {
        Pg(g) = from_unit(u(g), pg_box(c, static_cast<std::size_t>(g)));
        Vg(g) = from_unit(u(ng + g), vg_box(c, static_cast<std::size_t>(g)));
    }
}

Vec encode_state(const Case& c, const Scenario& s, const Vec& Pg, const Vec& Vg) {
    check_dimensions(c, s);
    const auto nb = static_cast<Eigen::Index>(c.bus_count());
    Vec x(state_width(c));
    x.head(nb) = s.Pd / c.baseMVA;
    x.segment(nb, nb) = s.Qd / c.baseMVA;
    x.tail(action_width(c)) = normalize_setpoints(c, Pg, Vg);
    return x;
}

Vec decode_action(const Case& c, const Vec& target, const Vec& current) {
    if (target.size() != action_width(c) || current.size() != action_width(c))
        throw std::invalid_argument("action length " + std::to_string(target.size()) + " does not match 2·s = " +
                                    std::to_string(action_width(c)));
    return target - current;
}

GridEnv::GridEnv(const Case& c, EnvConfig cfg, Calibration cal)
    : base_(c), case_(c), cfg_(cfg), cal_(cal), solver_(c, cfg.pf) {
    if (cfg_.horizon < 1) throw std::invalid_argument("episode horizon must be at least 1");
    cfg_.reward.k = cal_.k;
    cfg_.reward.b = cal_.b;
}

Vec GridEnv::setpoints() const {
    Vec Pg(static_cast<Eigen::Index>(case_.gen_count())), Vg(Pg.size());
    for (std::size_t g = 0; g < case_.gen_count(); ++g) {
        Pg(static_cast<Eigen::Index>(g)) = case_.generators[g].Pg;
        Vg(static_cast<Eigen::Index>(g)) = case_.generators[g].Vg;
    }
    return normalize_setpoints(case_, Pg, Vg);
}

Vec GridEnv::state() const {
    Vec x(state_dim());
    const auto nb = static_cast<Eigen::Index>(case_.bus_count());
    x.head(nb) = scenario_.Pd / case_.baseMVA;
    x.segment(nb, nb) = scenario_.Qd / case_.baseMVA;
    x.tail(action_dim()) = setpoints();
    return x;
}

Vec GridEnv::reset(const Scenario& s) {
    if (!s.Pd.allFinite() || !s.Qd.allFinite() || !s.Pg0.allFinite() || !s.Vg0.allFinite())
        throw std::invalid_argument("scenario " + std::to_string(s.id) + " has non-finite entries");
    case_ = apply_scenario(base_, s);
    scenario_ = s;
    cfg_.reward.z = s.z;
    pf_ = solver_.solve(case_);
    report_ = pf_.converged ? check_violations(case_, pf_, cfg_.feasibility_tol) : ViolationReport{};
    t_ = 0;
    done_ = false;
    doa_ = !pf_.converged;
    active_ = true;
    return state();
}

StepResult GridEnv::step(const Vec& target) {
    if (!active_ || done_) throw std::logic_error("step called on a finished episode; call reset first");
    const Vec current = setpoints();
    const Vec delta = decode_action(case_, target, current);
    StepResult r;
    ++t_;
    if (doa_) {
        r.next_state = state();
        r.reward = cfg_.reward.divergence_penalty;
        r.branch = RewardBranch::Diverged;
        r.done = done_ = true;
        return r;
    }
    const Vec next = (current + cfg_.step_scale * delta).cwiseMax(0.0).cwiseMin(1.0);
    Vec Pg, Vg;
    denormalize_setpoints(case_, next, Pg, Vg);
    for (std::size_t g = 0; g < case_.gen_count(); ++g) {
        case_.generators[g].Pg = Pg(static_cast<Eigen::Index>(g));
        case_.generators[g].Vg = Vg(static_cast<Eigen::Index>(g));
    }
    pf_ = solver_.solve(case_);
    report_ = pf_.converged ? check_violations(case_, pf_, cfg_.feasibility_tol) : ViolationReport{};
    r.branch = reward_branch(pf_, report_);
    r.cost = pf_.converged ? gen_cost(case_, pf_.Pg) : 0.0;
    r.reward = compute_reward(pf_, report_, r.cost, cfg_.reward);
    r.next_state = state();
    r.done = done_ = !pf_.converged || t_ >= cfg_.horizon;
    return r;
}

}  // namespace gridppo
