#pragma once

#include <string>

#include "gridppo/case.hpp"
#include "gridppo/power_flow.hpp"
#include "gridppo/scenario.hpp"

namespace gridppo {

struct RewardParams {
    double k = 0.0;
    double b = 0.0;
    double z = 0.0;
    double w_p = 10.0;     // points per MW
    double w_v = 1000.0;   // points per p.u.
    double w_l = 10.0;     // points per MVA
    double violation_cap = -4000.0;
    double divergence_penalty = -5000.0;
};

enum class RewardBranch { Diverged, Violation, Feasible };
const char* to_string(RewardBranch b);

RewardBranch reward_branch(const PfSolution& pf, const ViolationReport& report);

/// Three-way reward: divergence penalty, capped weighted violation penalty,
/// or k·cost + b + z.
double compute_reward(const PfSolution& pf, const ViolationReport& report, double cost, const RewardParams& p);

// Weighted penalty (points, non-negative) of each violation class.
struct ViolationPenalties {
    double pgen = 0.0, vbus = 0.0, branch = 0.0;
};
ViolationPenalties violation_penalties(const ViolationReport& report, const RewardParams& p);

struct EnvConfig {
    int horizon = 5;
    double step_scale = 1.0;
    double feasibility_tol = 1e-4;  // per-unit of each limit class (MW, p.u., MVA)
    RewardParams reward;
    PfOptions pf;
};

/// Generator setpoints in [0, 1]: Pg over [Pmin, Pmax], Vg over the
/// generator bus's [Vmin, Vmax]. Layout [Pg_1..Pg_s, Vg_1..Vg_s].
Vec normalize_setpoints(const Case& c, const Vec& Pg, const Vec& Vg);
void denormalize_setpoints(const Case& c, const Vec& normalized, Vec& Pg, Vec& Vg);

/// [Pd/base, Qd/base, normalized Pg, normalized Vg], length 2·(m + s).
Vec encode_state(const Case& c, const Scenario& s, const Vec& Pg, const Vec& Vg);

/// Delta from the current normalized setpoints to the actor's target.
Vec decode_action(const Case& c, const Vec& target, const Vec& current);

inline Eigen::Index state_width(const Case& c) { return static_cast<Eigen::Index>(2 * (c.bus_count() + c.gen_count())); }
inline Eigen::Index action_width(const Case& c) { return static_cast<Eigen::Index>(2 * c.gen_count()); }
inline Eigen::Index actor_input_width(const Case& c) { return static_cast<Eigen::Index>(2 * c.bus_count()); }

struct StepResult {
    Vec next_state;
    double reward = 0.0;
    bool done = false;
    RewardBranch branch = RewardBranch::Diverged;
    double cost = 0.0;  // $/h at the realized dispatch; 0 when diverged
};

/// Episodic grid environment. Not thread-safe; use one instance per worker.
class GridEnv {
public:
    GridEnv(const Case& c, EnvConfig cfg, Calibration cal);

    Vec reset(const Scenario& s);
    StepResult step(const Vec& target);

    Eigen::Index state_dim() const { return state_width(base_); }
    Eigen::Index action_dim() const { return action_width(base_); }
    bool done() const { return done_; }
    bool dead_on_arrival() const { return doa_; }
    int step_index() const { return t_; }
    const Case& current_case() const { return case_; }
    const PfSolution& last_pf() const { return pf_; }
    const ViolationReport& last_report() const { return report_; }
    const EnvConfig& config() const { return cfg_; }
    Vec setpoints() const;  // normalized

private:
    Vec state() const;

    Case base_;
    Case case_;
    EnvConfig cfg_;
    Calibration cal_;
    PowerFlowSolver solver_;
    Scenario scenario_;
    PfSolution pf_;
    ViolationReport report_;
    int t_ = 0;
    bool done_ = true;
    bool doa_ = false;
    bool active_ = false;
};

}  // namespace gridppo
