#include "gridppo/evaluation.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <algorithm>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "gridppo/opf.hpp"

namespace gridppo {

const char* to_string(Outcome o) {
    switch (o) {
        case Outcome::Success: return "success";
        case Outcome::Violation: return "violation";
        case Outcome::Diverged: return "diverged";
    }
    return "?";
}

const char* to_string(ViolationCategory v) {
    switch (v) {
        case ViolationCategory::None: return "none";
        case ViolationCategory::Pgen: return "pgen";
        case ViolationCategory::Vbus: return "vbus";
        case ViolationCategory::Branch: return "branch";
        case ViolationCategory::Diverged: return "diverged";
    }
    return "?";
}

double ScenarioRecord::agent_cost_sentinel() const {
    switch (status) {
        case Outcome::Success: return agent_cost;
        case Outcome::Violation: return kViolationSentinel;
        case Outcome::Diverged: return kDivergenceSentinel;
    }
    return kDivergenceSentinel;
}

std::size_t EvalMetrics::count(ViolationCategory v) const {
    switch (v) {
        case ViolationCategory::Pgen: return breakdown[0];
        case ViolationCategory::Vbus: return breakdown[1];
        case ViolationCategory::Branch: return breakdown[2];
        case ViolationCategory::Diverged: return breakdown[3];
        case ViolationCategory::None: return successes;
    }
    return 0;
}

Actor mean_actor(const Policy& policy) {
    return [&policy](const Scenario&, const Vec& state) -> Vec {
        return policy.mean(Mat(state.transpose())).row(0).transpose();
    };
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

ScenarioRecord run_one(GridEnv& env, const Actor& actor, const Scenario& s) {
    ScenarioRecord r;
    r.scenario_id = s.id;
    r.oracle_cost = s.labeled ? s.cost_opt : kNaN;
    Vec state = env.reset(s);
    while (!env.done()) {
        state = env.step(actor(s, state)).next_state;
        ++r.steps_used;
    }
    const auto& pf = env.last_pf();
    r.deviation_pct = kNaN;
    if (!pf.converged) {
        r.status = Outcome::Diverged;
        r.category = ViolationCategory::Diverged;
        r.agent_cost = kNaN;
        return r;
    }
    r.agent_cost = gen_cost(env.current_case(), pf.Pg);
    const auto& rep = env.last_report();
    if (rep.empty()) {
        r.status = Outcome::Success;
        r.category = ViolationCategory::None;
        if (s.labeled) r.deviation_pct = 100.0 * (r.agent_cost - r.oracle_cost) / r.oracle_cost;
        return r;
    }
    r.status = Outcome::Violation;
    const auto w = violation_penalties(rep, env.config().reward);
    r.category = ViolationCategory::Pgen;
    double worst = w.pgen;
    if (w.vbus > worst) r.category = ViolationCategory::Vbus, worst = w.vbus;
    if (w.branch > worst) r.category = ViolationCategory::Branch;
    return r;
}

}  // namespace

EvalMetrics evaluate_agent(const Case& c, const Actor& actor, const std::vector<Scenario>& scenarios,
                           const EnvConfig& cfg, unsigned threads) {
    EvalMetrics m;
    m.n = scenarios.size();
    m.horizon = cfg.horizon;
    m.records.resize(scenarios.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        GridEnv env(c, cfg, {});
        for (std::size_t i = next++; i < scenarios.size(); i = next++) m.records[i] = run_one(env, actor, scenarios[i]);
    };
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(scenarios.size(), 1)));
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    double dev_sum = 0.0;
    std::size_t dev_n = 0;
    m.max_deviation_pct = -std::numeric_limits<double>::infinity();
    m.min_deviation_pct = std::numeric_limits<double>::infinity();
    for (const auto& r : m.records) {
        switch (r.category) {
            case ViolationCategory::None: ++m.successes; break;
            case ViolationCategory::Pgen: ++m.breakdown[0]; break;
            case ViolationCategory::Vbus: ++m.breakdown[1]; break;
            case ViolationCategory::Branch: ++m.breakdown[2]; break;
            case ViolationCategory::Diverged: ++m.breakdown[3]; break;
        }
        if (r.status == Outcome::Success && std::isfinite(r.deviation_pct)) {
            dev_sum += r.deviation_pct;
            ++dev_n;
            m.max_deviation_pct = std::max(m.max_deviation_pct, r.deviation_pct);
            m.min_deviation_pct = std::min(m.min_deviation_pct, r.deviation_pct);
        }
    }
    m.success_rate = m.n ? static_cast<double>(m.successes) / static_cast<double>(m.n) : 0.0;
    if (dev_n) {
        m.mean_deviation_pct = dev_sum / static_cast<double>(dev_n);
    } else {
        m.mean_deviation_pct = m.max_deviation_pct = m.min_deviation_pct = kNaN;
    }
    return m;
}

EvalMetrics evaluate_agent(const Case& c, const Policy& policy, const std::vector<Scenario>& scenarios,
                           const EnvConfig& cfg, unsigned threads) {
    return evaluate_agent(c, mean_actor(policy), scenarios, cfg, threads);
}

namespace {

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(17);
    return out;
}

// Empty cell for values that do not exist (diverged cost, failed deviation).
std::string cell(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::string summary_json(const EvalMetrics& m) {
    nlohmann::json j;
    j["scenarios"] = m.n;
    j["horizon"] = m.horizon;
    j["successes"] = m.successes;
    j["success_rate"] = m.success_rate;
    j["mean_deviation_pct"] = num(m.mean_deviation_pct);
    j["max_deviation_pct"] = num(m.max_deviation_pct);
    j["min_deviation_pct"] = num(m.min_deviation_pct);
    j["failures"] = {{"pgen", m.breakdown[0]}, {"vbus", m.breakdown[1]}, {"branch", m.breakdown[2]},
                     {"diverged", m.breakdown[3]}};
    j["sentinels"] = {{"violation", kViolationSentinel}, {"diverged", kDivergenceSentinel}};
    return j.dump(2);
}

void emit_report(const EvalMetrics& m, const std::string& prefix) {
    {
        auto out = open_out(prefix + ".csv");
        out << "scenario_id,status,agent_cost_raw,agent_cost_sentinel,oracle_cost,deviation_pct,violation_category,"
               "steps_used\n";
        for (const auto& r : m.records)
            out << r.scenario_id << ',' << to_string(r.status) << ',' << cell(r.agent_cost) << ','
                << cell(r.agent_cost_sentinel()) << ',' << cell(r.oracle_cost) << ',' << cell(r.deviation_pct) << ','
                << to_string(r.category) << ',' << r.steps_used << '\n';
        if (!out) throw std::runtime_error("write failed for " + prefix + ".csv");
    }
    {
        auto out = open_out(prefix + ".json");
        out << summary_json(m) << '\n';
        if (!out) throw std::runtime_error("write failed for " + prefix + ".json");
    }
    {
        auto out = open_out(prefix + "_series.csv");
        out << "index,agent_cost,oracle_cost\n";
        for (std::size_t i = 0; i < m.records.size(); ++i)
            out << i << ',' << cell(m.records[i].agent_cost_sentinel()) << ',' << cell(m.records[i].oracle_cost) << '\n';
        if (!out) throw std::runtime_error("write failed for " + prefix + "_series.csv");
    }
}

}  // namespace gridppo
