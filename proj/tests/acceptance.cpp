// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [criterion numbers...]   (all ten when none are given)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "gridppo/checkpoint.hpp"
#include "gridppo/config.hpp"
#include "gridppo/dataset.hpp"
#include "gridppo/evaluation.hpp"
#include "gridppo/imitation.hpp"
#include "gridppo/opf.hpp"
#include "gridppo/power_flow.hpp"
#include "gridppo/training.hpp"

using namespace gridppo;

namespace {

// ---- pinned tolerances ----
constexpr Eigen::Index kStateWidth = 38;
constexpr Eigen::Index kActionWidth = 10;
constexpr double kPfVoltageTol = 1e-6;          // p.u., complex voltage vs reference
constexpr double kJacobianRelTol = 1e-4;
constexpr int kJacobianStates = 50;
constexpr double kOpfObjectiveRelTol = 1e-3;    // 0.1 %
constexpr double kReplayViolationTol = 1e-4;
constexpr double kGaeTol = 1e-12;
constexpr double kLogProbTol = 1e-9;
constexpr double kBanditOptimum = 0.7;
constexpr double kBanditTol = 0.05;
constexpr int kBanditSeeds = 5;
constexpr int kBanditSeedsNeeded = 4;
constexpr int kBanditMaxUpdates = 200;
constexpr double kImitationRmsePMw = 2.0;
constexpr double kImitationRmseVPu = 5e-3;
constexpr std::size_t kDeskTrain = 5000;
constexpr std::size_t kDeskTest = 1000;
constexpr int kHeadlineSeeds = 3;
constexpr int kHeadlineSeedsNeeded = 2;
constexpr double kHeadlineSuccess = 0.90;
constexpr double kHeadlineGain = 0.25;
constexpr double kMeanDeviationPct = 2.0;
constexpr double kMaxDeviationPct = 5.0;
constexpr int kRewardOutcomes = 10000;
constexpr int kReplayScenarios = 100;
constexpr double kReplayRewardTol = 1e-6;
constexpr double kDivergenceReward = -5000.0;

std::string src(const std::string& rel) { return std::string(GRIDPPO_SOURCE_DIR) + "/" + rel; }

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(double v, int prec = 6) {
    std::ostringstream os;
    os.precision(prec);
    os << v;
    return os.str();
}

const nlohmann::json& reference() {
    static const nlohmann::json j = [] {
        std::ifstream in(src("tests/data/case14_reference.json"));
        return nlohmann::json::parse(in);
    }();
    return j;
}

const Case& case14() {
    static const Case c = load_case(src("data/case14.m"));
    return c;
}

const Case& case14_mod() {
    static const Case c = load_case(src("data/case14_mod.m"));
    return c;
}

// Desk pool: 6000 scenarios labeled and split 5000 / 1000, as configs/desk.conf describes.
struct Desk {
    TrainConfig cfg;
    Dataset train, test;
};

const Desk& desk() {
    static const Desk d = [] {
        Desk out;
        out.cfg = load_config(src("configs/desk.conf"));
        const Case& c = case14_mod();
        const Dataset all = label_scenarios(c, generate_scenarios(c, out.cfg.gen), out.cfg.gen);
        std::tie(out.train, out.test) = split(all, out.cfg.n_train, out.cfg.gen.seed);
        std::cout << "  desk pool: " << all.scenarios.size() << " labeled of " << all.n_generated << ", train "
                  << out.train.scenarios.size() << ", test " << out.test.scenarios.size() << std::endl;
        return out;
    }();
    return d;
}

// Actor pretrained on the full desk training set.
struct Pretrained {
    Checkpoint ck;
    PretrainResult result;
};

const Pretrained& pretrained() {
    static const Pretrained p = [] {
        Pretrained out;
        const auto& d = desk();
        out.ck = initial_checkpoint(d.cfg, &case14_mod());
        out.result = pretrain_checkpoint(d.cfg, case14_mod(), d.train, out.ck);
        return out;
    }();
    return p;
}

// ---- criteria ----

Verdict dimensions() {
    const Case& c = case14_mod();
    GridEnv env(c, {}, {});
    const Vec s = env.reset(scenario_from_case(c));
    const bool ok = state_width(c) == kStateWidth && action_width(c) == kActionWidth && s.size() == kStateWidth &&
                    env.action_dim() == kActionWidth;
    return {ok, "state " + std::to_string(s.size()) + ", action " + std::to_string(env.action_dim())};
}

CVec perturb(const CVec& V, Eigen::Index i, bool magnitude, double h) {
    CVec W = V;
    if (magnitude) W(i) = std::polar(std::abs(V(i)) + h, std::arg(V(i)));
    else W(i) = std::polar(std::abs(V(i)), std::arg(V(i)) + h);
    return W;
}

Verdict power_flow() {
    const Case& c = case14();
    const PfSolution s = solve_pf(c);
    if (!s.converged) return {false, "nominal power flow diverged"};
    const auto& ref = reference()["pf_nominal"];
    double worst_v = 0.0;
    for (Eigen::Index i = 0; i < s.V.size(); ++i) {
        const double vm = ref["Vm"][static_cast<std::size_t>(i)].get<double>();
        const double va = ref["Va_deg"][static_cast<std::size_t>(i)].get<double>() * std::numbers::pi / 180.0;
        worst_v = std::max(worst_v, std::abs(s.V(i) - std::polar(vm, va)));
    }

    // Columns ordered as compute_jacobian: angles at PV then PQ buses, magnitudes at PQ buses.
    std::vector<std::pair<Eigen::Index, bool>> vars;
    for (BusKind k : {BusKind::PV, BusKind::PQ})
        for (std::size_t i = 0; i < c.bus_count(); ++i)
            if (c.buses[i].kind == k) vars.emplace_back(static_cast<Eigen::Index>(i), false);
    for (std::size_t i = 0; i < c.bus_count(); ++i)
        if (c.buses[i].kind == BusKind::PQ) vars.emplace_back(static_cast<Eigen::Index>(i), true);
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> ang(-0.4, 0.4), mag(0.9, 1.1);
    const double h = 1e-6;
    double worst_j = 0.0;
    for (int trial = 0; trial < kJacobianStates; ++trial) {
        CVec V(static_cast<Eigen::Index>(c.bus_count()));
        for (Eigen::Index i = 0; i < V.size(); ++i) V(i) = std::polar(mag(rng), ang(rng));
        const Mat J = compute_jacobian(c, V);
        if (J.cols() != static_cast<Eigen::Index>(vars.size())) return {false, "jacobian width mismatch"};
        for (std::size_t k = 0; k < vars.size(); ++k) {
            const auto [i, m] = vars[k];
            const Vec fd = (compute_mismatch(c, perturb(V, i, m, h)) - compute_mismatch(c, perturb(V, i, m, -h))) / (2 * h);
            const Vec col = J.col(static_cast<Eigen::Index>(k));
            worst_j = std::max(worst_j, (fd - col).cwiseAbs().maxCoeff() / std::max(1.0, col.cwiseAbs().maxCoeff()));
        }
    }
    return {worst_v <= kPfVoltageTol && worst_j <= kJacobianRelTol,
            "max |V - V_ref| " + fmt(worst_v, 3) + " p.u., worst jacobian column error " + fmt(worst_j, 3) + " over " +
                std::to_string(kJacobianStates) + " states"};
}

// Replays oracle setpoints through the power flow; true when no limit is exceeded.
bool replay_clean(const Case& c, const Scenario& base, const OpfSolution& opf) {
    Scenario s = base;
    s.Pg0 = opf.Pg_opt;
    s.Vg0 = opf.Vg_opt;
    const PfSolution pf = solve_pf(apply_scenario(c, s));
    return pf.converged && check_violations(c, pf, kReplayViolationTol).empty();
}

Verdict opf_oracle() {
    std::ostringstream detail;
    bool ok = true;
    for (const auto& [c, key] : {std::pair{&case14(), "opf_nominal"}, std::pair{&case14_mod(), "opf_modified"}}) {
        const OpfSolution s = solve_opf(*c);
        const double ref = reference()[key]["objective"].get<double>();
        const double rel = std::abs(s.objective - ref) / ref;
        const bool clean = s.status == OpfStatus::Optimal && replay_clean(*c, scenario_from_case(*c), s);
        ok = ok && s.status == OpfStatus::Optimal && rel <= kOpfObjectiveRelTol && clean;
        detail << key << " " << fmt(s.objective, 8) << " vs " << fmt(ref, 8) << " (rel " << fmt(rel, 2)
               << (clean ? ", replay clean" : ", replay VIOLATES") << "); ";
    }
    // Replays on perturbed scenarios of the modified case.
    GenerationParams gp;
    gp.n = 40;
    gp.seed = 77;
    int solved = 0, clean = 0;
    for (const auto& s : generate_scenarios(case14_mod(), gp)) {
        const OpfSolution o = solve_opf(apply_scenario(case14_mod(), s));
        if (o.status != OpfStatus::Optimal) continue;
        ++solved;
        clean += replay_clean(case14_mod(), s, o);
    }
    ok = ok && clean == solved && solved > 0;
    detail << clean << "/" << solved << " perturbed replays clean";
    return {ok, detail.str()};
}

Verdict ppo_math() {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    double worst_sum = 0.0, worst_l1 = 0.0;
    bool lambda0_exact = true;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 1 + trial % 40;
        std::vector<Transition> traj(static_cast<std::size_t>(n));
        for (auto& t : traj) {
            t.reward = u(rng);
            t.value = u(rng);
        }
        const bool terminal = trial % 2 == 0;
        traj.back().done = terminal;
        const double boot = u(rng);
        const double gamma = 0.9 + 0.1 * (u(rng) + 3.0) / 6.0;
        const double lam = (u(rng) + 3.0) / 6.0;
        std::vector<double> delta(traj.size());
        for (std::size_t t = 0; t < traj.size(); ++t) {
            const double vn = t + 1 < traj.size() ? traj[t + 1].value : (terminal ? 0.0 : boot);
            delta[t] = traj[t].reward + gamma * vn - traj[t].value;
        }
        // Direct summation A_t = Σ_l (γλ)^l δ_{t+l}.
        const auto g = compute_gae(traj, {gamma, lam}, boot);
        for (std::size_t t = 0; t < traj.size(); ++t) {
            double a = 0.0, w = 1.0;
            for (std::size_t l = t; l < traj.size(); ++l, w *= gamma * lam) a += w * delta[l];
            worst_sum = std::max(worst_sum, std::abs(a - g.advantages(static_cast<Eigen::Index>(t))));
        }
        // λ = 0: one-step TD errors.
        const auto g0 = compute_gae(traj, {gamma, 0.0}, boot);
        for (std::size_t t = 0; t < traj.size(); ++t)
            lambda0_exact = lambda0_exact && g0.advantages(static_cast<Eigen::Index>(t)) == delta[t];
        // λ = 1: Monte Carlo return minus the value baseline.
        const auto g1 = compute_gae(traj, {gamma, 1.0}, boot);
        for (std::size_t t = 0; t < traj.size(); ++t) {
            double ret = terminal ? 0.0 : boot;
            for (std::size_t l = traj.size(); l-- > t;) ret = traj[l].reward + gamma * ret;
            worst_l1 = std::max(worst_l1, std::abs(ret - traj[t].value - g1.advantages(static_cast<Eigen::Index>(t))));
        }
    }

    struct Clip {
        double ratio, adv, expect;
    };
    bool clip_ok = true;
    for (const Clip& c : {Clip{1.5, 2.0, 2.4}, Clip{0.5, -1.0, -0.8}, Clip{1.0, 3.0, 3.0}, Clip{0.5, 1.0, 0.5},
                          Clip{1.5, -1.0, -1.5}, Clip{1.1, 2.0, 2.2}})
        clip_ok = clip_ok && clipped_surrogate(c.ratio, c.adv, 0.2) == c.expect;

    struct Lp {
        std::vector<double> mean, log_std, action;
        double expect;
    };
    double worst_lp = 0.0;
    for (const Lp& f : {Lp{{0.0}, {0.0}, {0.0}, -0.9189385332046727},
                        Lp{{0.5, -1.0}, {std::log(0.5), 0.0}, {1.0, 0.0}, -2.1447298858494},
                        Lp{{0.2, 0.4, 0.6}, {-1.0, -2.0, 0.5}, {0.3, 0.1, 1.6}, -2.9346173521858825}}) {
        const auto map = [](const std::vector<double>& v) {
            return Vec(Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())));
        };
        const Vec ls = map(f.log_std);
        worst_lp = std::max(worst_lp, std::abs(nn::gaussian_log_prob<double>(map(f.mean), ls, map(f.action)) - f.expect));
    }
    const bool ok = worst_sum <= kGaeTol && worst_l1 <= kGaeTol && lambda0_exact && clip_ok && worst_lp <= kLogProbTol;
    return {ok, "GAE sum vs recursion " + fmt(worst_sum, 3) + ", lambda=1 vs Monte Carlo " + fmt(worst_l1, 3) +
                    ", lambda=0 " + (lambda0_exact ? "exact" : "NOT exact") + ", clip examples " +
                    (clip_ok ? "exact" : "WRONG") + ", log-prob error " + fmt(worst_lp, 3)};
}

Verdict bandit() {
    TrainConfig cfg = load_config(src("configs/bandit.conf"));
    if (cfg.ppo.updates > kBanditMaxUpdates) return {false, "bandit preset exceeds the update budget"};
    int hits = 0;
    std::ostringstream detail;
    for (int seed = 1; seed <= kBanditSeeds; ++seed) {
        cfg.seed = static_cast<std::uint64_t>(seed);
        const auto out = run_bandit_training(cfg, initial_checkpoint(cfg, nullptr));
        const double mu = out.checkpoint.policy.mean(Mat::Ones(1, 1))(0, 0);
        hits += !out.aborted && std::abs(mu - kBanditOptimum) <= kBanditTol;
        detail << (seed > 1 ? ", " : "") << fmt(mu, 4);
    }
    return {hits >= kBanditSeedsNeeded,
            std::to_string(hits) + "/" + std::to_string(kBanditSeeds) + " seeds within " + fmt(kBanditTol) +
                " after " + std::to_string(cfg.ppo.updates) + " updates (means " + detail.str() + ")"};
}

Verdict imitation() {
    const auto& d = desk();
    if (d.train.scenarios.size() != kDeskTrain) return {false, "desk train set has the wrong size"};
    const auto& p = pretrained();
    const double rp = p.result.heldout.rmse_p(), rv = p.result.heldout.rmse_v();
    return {p.result.n_heldout > 0 && rp <= kImitationRmsePMw && rv <= kImitationRmseVPu,
            "held-out (" + std::to_string(p.result.n_heldout) + ") RMSE Pg " + fmt(rp, 4) + " MW, Vg " + fmt(rv, 4) +
                " p.u.; train " + std::to_string(p.result.n_train)};
}

struct HeadlineRun {
    std::uint64_t seed = 0;
    EvalMetrics baseline, trained;
    bool aborted = false;
    double seconds = 0.0;
    bool accepted() const {
        return !aborted && trained.success_rate >= kHeadlineSuccess &&
               trained.success_rate >= baseline.success_rate + kHeadlineGain;
    }
};

const std::vector<HeadlineRun>& headline_runs() {
    static const std::vector<HeadlineRun> runs = [] {
        std::vector<HeadlineRun> out;
        const auto& d = desk();
        const Case& c = case14_mod();
        for (int s = 1; s <= kHeadlineSeeds; ++s) {
            const auto t0 = std::chrono::steady_clock::now();
            TrainConfig cfg = load_config(src("configs/reduced_init.conf"));
            cfg.seed = static_cast<std::uint64_t>(s);
            HeadlineRun r;
            r.seed = cfg.seed;
            Checkpoint ck = initial_checkpoint(cfg, &c);
            pretrain_checkpoint(cfg, c, d.train, ck);
            r.baseline = evaluate_agent(c, ck.policy, d.test.scenarios, cfg.env_cfg);
            const auto res = run_training(cfg, c, d.train, {}, ck);
            r.aborted = res.aborted;
            r.trained = evaluate_agent(c, res.checkpoint.policy, d.test.scenarios, cfg.env_cfg);
            r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cout << "  seed " << s << ": imitation-only success " << fmt(r.baseline.success_rate, 4)
                      << ", after " << res.checkpoint.update << " PPO updates " << fmt(r.trained.success_rate, 4)
                      << " (cost deviation mean " << fmt(r.trained.mean_deviation_pct, 4) << "%, max "
                      << fmt(r.trained.max_deviation_pct, 4) << "%)" << (r.aborted ? " ABORTED" : "") << ", "
                      << fmt(r.seconds, 4) << " s" << std::endl;
            out.push_back(std::move(r));
        }
        return out;
    }();
    return runs;
}

Verdict headline() {
    if (desk().test.scenarios.size() != kDeskTest) return {false, "desk test set has the wrong size"};
    int accepted = 0;
    for (const auto& r : headline_runs()) accepted += r.accepted();
    return {accepted >= kHeadlineSeedsNeeded, std::to_string(accepted) + "/" + std::to_string(kHeadlineSeeds) +
                                                   " seeds reach success >= " + fmt(kHeadlineSuccess) + " and +" +
                                                   fmt(kHeadlineGain) + " over imitation-only"};
}

// Judged on the accepted runs of the previous criterion; a majority of them must meet both bounds.
Verdict cost_quality() {
    int accepted = 0, good = 0;
    std::ostringstream detail;
    for (const auto& r : headline_runs()) {
        if (!r.accepted()) continue;
        ++accepted;
        const bool ok = r.trained.successes > 0 && r.trained.mean_deviation_pct <= kMeanDeviationPct &&
                        r.trained.max_deviation_pct <= kMaxDeviationPct;
        good += ok;
        detail << " seed " << r.seed << " mean " << fmt(r.trained.mean_deviation_pct, 4) << "% max "
               << fmt(r.trained.max_deviation_pct, 4) << "%;";
    }
    return {accepted > 0 && 2 * good > accepted,
            std::to_string(good) + "/" + std::to_string(accepted) + " accepted runs within mean " +
                fmt(kMeanDeviationPct) + "% and max " + fmt(kMaxDeviationPct) + "%:" + detail.str()};
}

Verdict reward_law() {
    const auto& d = desk();
    const Case& c = case14_mod();
    const EnvConfig cfg;
    GridEnv env(c, cfg, d.train.calibration);
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> act(-0.25, 1.25);
    std::uniform_int_distribution<std::size_t> pick(0, d.train.scenarios.size() - 1);
    int counts[3] = {0, 0, 0}, bad = 0, outcomes = 0;
    while (outcomes < kRewardOutcomes) {
        const Scenario& s = d.train.scenarios[pick(rng)];
        env.reset(s);
        if (env.done()) continue;
        const Vec a = Vec::NullaryExpr(kActionWidth, [&] { return act(rng); });
        const StepResult r = env.step(a);
        ++outcomes;
        const bool diverged = !env.last_pf().converged;
        const bool violated = !diverged && !env.last_report().empty();
        const bool feasible = !diverged && env.last_report().empty();
        if (int(diverged) + int(violated) + int(feasible) != 1) ++bad;
        ++counts[static_cast<int>(r.branch)];
        if (diverged) bad += r.branch != RewardBranch::Diverged || r.reward != kDivergenceReward;
        else if (violated)
            bad += r.branch != RewardBranch::Violation || !(r.reward < 0.0 && r.reward >= cfg.reward.violation_cap);
        else
            bad += r.branch != RewardBranch::Feasible ||
                   std::abs(r.reward - (d.train.calibration.k * r.cost + d.train.calibration.b + s.z)) > 1e-9;
    }

    double worst_replay = 0.0;
    const std::size_t n_replay = std::min<std::size_t>(kReplayScenarios, d.test.scenarios.size());
    for (std::size_t i = 0; i < n_replay; ++i) {
        const Scenario& s = d.test.scenarios[i];
        env.reset(s);
        const StepResult r = env.step(normalize_setpoints(c, s.Pg_opt, s.Vg_opt));
        worst_replay = std::max(worst_replay, std::abs(r.reward - kOptimumPoints));
    }

    // Heavy loading with every generator at its floor diverges.
    Scenario heavy = scenario_from_case(c);
    heavy.Pd *= 1.5;
    heavy.Qd *= 1.5;
    env.reset(heavy);
    const StepResult dv = env.step(Vec::Zero(kActionWidth));
    const bool div_ok = dv.branch == RewardBranch::Diverged && dv.reward == kDivergenceReward;

    const bool ok = bad == 0 && worst_replay <= kReplayRewardTol && n_replay == kReplayScenarios && div_ok;
    return {ok, std::to_string(outcomes) + " random steps, " + std::to_string(bad) + " inconsistent (diverged " +
                    std::to_string(counts[0]) + ", violation " + std::to_string(counts[1]) + ", feasible " +
                    std::to_string(counts[2]) + "); oracle replay max |r - 500| " + fmt(worst_replay, 3) + " on " +
                    std::to_string(n_replay) + "; divergence reward " + fmt(dv.reward)};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Verdict determinism() {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "gridppo_acceptance";
    fs::create_directories(dir);
    const auto p = [&](const char* name) { return (dir / name).string(); };
    const std::string case_path = src("data/case14_mod.m");
    std::ostringstream sink;
    auto cli = [&](std::vector<std::string> args, std::string* out = nullptr) {
        std::ostringstream o;
        const int code = cli_main(args, o, sink);
        if (out) *out = o.str();
        return code;
    };

    bool ok = true;
    for (const char* ext : {"a.jsonl", "b.jsonl"})
        ok = ok && cli({"gen-data", "--case", case_path, "--n", "300", "--seed", "9", "--out", p(ext)}) == 0;
    ok = ok && cli({"gen-data", "--case", case_path, "--n", "300", "--seed", "9", "--out", p("a.bin")}) == 0 &&
         cli({"gen-data", "--case", case_path, "--n", "300", "--seed", "9", "--out", p("b.bin")}) == 0;
    const bool gen_same = ok && slurp(p("a.jsonl")) == slurp(p("b.jsonl")) && slurp(p("a.bin")) == slurp(p("b.bin")) &&
                          !slurp(p("a.jsonl")).empty();

    save_checkpoint(pretrained().ck, p("ck.json"));
    save_dataset(desk().test, p("test.bin"));
    std::string e1, e2;
    ok = cli({"eval", "--checkpoint", p("ck.json"), "--data", p("test.bin"), "--case", case_path, "--report", p("r1")},
             &e1) == 0 &&
         cli({"eval", "--checkpoint", p("ck.json"), "--data", p("test.bin"), "--case", case_path, "--report", p("r2")},
             &e2) == 0;
    const bool eval_same = ok && e1 == e2 && slurp(p("r1.csv")) == slurp(p("r2.csv")) &&
                           slurp(p("r1_series.csv")) == slurp(p("r2_series.csv")) && !e1.empty();
    fs::remove_all(dir);
    return {gen_same && eval_same, std::string("gen-data (jsonl and bin) ") + (gen_same ? "identical" : "DIFFERS") +
                                       ", eval on " + std::to_string(desk().test.scenarios.size()) + " scenarios " +
                                       (eval_same ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
    const std::map<int, std::pair<const char*, std::function<Verdict()>>> criteria{
        {1, {"dimension parity", dimensions}},
        {2, {"power-flow correctness", power_flow}},
        {3, {"OPF oracle correctness", opf_oracle}},
        {4, {"PPO math", ppo_math}},
        {5, {"bandit convergence", bandit}},
        {6, {"imitation quality", imitation}},
        {7, {"headline success rate", headline}},
        {8, {"cost quality", cost_quality}},
        {9, {"reward law", reward_law}},
        {10, {"determinism", determinism}},
    };
    std::vector<int> chosen;
    for (int i = 1; i < argc; ++i) {
        const int k = std::atoi(argv[i]);
        if (!criteria.count(k)) {
            std::cerr << "unknown criterion " << argv[i] << '\n';
            return 1;
        }
        chosen.push_back(k);
    }
    if (chosen.empty())
        for (const auto& [k, _] : criteria) chosen.push_back(k);

    int failed = 0;
    for (int k : chosen) {
        const auto& [name, fn] = criteria.at(k);
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        failed += !v.pass;
        std::cout << "criterion " << k << ' ' << (v.pass ? "PASS" : "FAIL") << "  " << name << ": " << v.detail << " ["
                  << fmt(secs, 3) << " s]" << std::endl;
    }
    return failed == 0 ? 0 : 1;
}
