#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "gridppo/environment.hpp"
#include "gridppo/ppo.hpp"

namespace gridppo {

enum class Outcome { Success, Violation, Diverged };
const char* to_string(Outcome o);

enum class ViolationCategory { None, Pgen, Vbus, Branch, Diverged };
const char* to_string(ViolationCategory v);

// Report values standing in for the agent cost of failed scenarios.
inline constexpr double kViolationSentinel = 20000.0;
inline constexpr double kDivergenceSentinel = 30000.0;

struct ScenarioRecord {
    std::uint64_t scenario_id = 0;
    Outcome status = Outcome::Diverged;
    double agent_cost = 0.0;  // $/h at the final state, NaN when diverged
    double oracle_cost = 0.0;
    double deviation_pct = 0.0;  // NaN unless successful
    ViolationCategory category = ViolationCategory::Diverged;
    int steps_used = 0;
    double agent_cost_sentinel() const;
};

struct EvalMetrics {
    std::size_t n = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
    double mean_deviation_pct = 0.0;  // over successes
    double max_deviation_pct = 0.0;
    double min_deviation_pct = 0.0;
    std::array<std::size_t, 4> breakdown{};  // pgen, vbus, branch, diverged
    int horizon = 0;
    std::vector<ScenarioRecord> records;

    std::size_t count(ViolationCategory v) const;
};

// Maps the environment state to a normalized setpoint target.
using Actor = std::function<Vec(const Scenario&, const Vec& state)>;

/// Deterministic actor-mean policy.
Actor mean_actor(const Policy& policy);

/// Runs every scenario for the full horizon (or until divergence) with the
/// given actor. Success means the final power flow converged with no limit
/// excess. A failure is filed under the class with the largest weighted penalty.
EvalMetrics evaluate_agent(const Case& c, const Actor& actor, const std::vector<Scenario>& scenarios,
                           const EnvConfig& cfg, unsigned threads = 1);
EvalMetrics evaluate_agent(const Case& c, const Policy& policy, const std::vector<Scenario>& scenarios,
                           const EnvConfig& cfg, unsigned threads = 1);

/// Writes <prefix>.csv (per scenario), <prefix>.json (summary) and
/// <prefix>_series.csv (agent vs oracle cost by index).
void emit_report(const EvalMetrics& m, const std::string& prefix);

std::string summary_json(const EvalMetrics& m);

}  // namespace gridppo
