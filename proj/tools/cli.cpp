#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "gridppo/checkpoint.hpp"
#include "gridppo/config.hpp"
#include "gridppo/dataset.hpp"
#include "gridppo/evaluation.hpp"
#include "gridppo/imitation.hpp"
#include "gridppo/opf.hpp"
#include "gridppo/power_flow.hpp"
#include "gridppo/training.hpp"

namespace gridppo {

namespace {

using nlohmann::json;

// Thrown by handlers for a bad flag combination discovered after parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr const char* kDefaultCase = "data/case14_mod.m";

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

const char* kind_name(BusKind k) {
    switch (k) {
        case BusKind::PQ: return "PQ";
        case BusKind::PV: return "PV";
        case BusKind::Slack: return "slack";
    }
    return "?";
}

json violations_json(const ViolationReport& r) {
    json j = {{"pgen", json::array()}, {"vbus", json::array()}, {"branch", json::array()}};
    for (const auto& e : r.pgen) j["pgen"].push_back({{"gen", e.index}, {"excess_mw", e.amount}});
    for (const auto& e : r.vbus) j["vbus"].push_back({{"bus", e.index}, {"excess_pu", e.amount}});
    for (const auto& e : r.branch)
        j["branch"].push_back(
            {{"branch", e.index}, {"end", e.end == BranchEnd::From ? "from" : "to"}, {"excess_mva", e.amount}});
    return j;
}

void print_violations(std::ostream& out, const Case& c, const ViolationReport& r) {
    out << (r.empty() ? "violations: none\n" : "violations:\n");
    for (const auto& e : r.pgen) out << "  gen " << c.generators[e.index].bus << " Pg off by " << e.amount << " MW\n";
    for (const auto& e : r.vbus) out << "  bus " << c.buses[e.index].id << " Vm off by " << e.amount << " p.u.\n";
    for (const auto& e : r.branch) {
        const auto& br = c.branches[e.index];
        out << "  branch " << br.from << '-' << br.to << (e.end == BranchEnd::From ? " (from)" : " (to)") << " over by "
            << e.amount << " MVA\n";
    }
}

int solve_pf_cmd(const std::string& case_path, bool as_json, bool no_qlim, double tol, std::ostream& out) {
    const Case c = load_case(case_path);
    PfOptions opt;
    opt.enforce_q_limits = !no_qlim;
    const PfSolution s = solve_pf(c, opt);
    if (!s.converged) {
        if (as_json)
            out << json{{"converged", false}, {"iterations", s.iterations}, {"message", s.message}}.dump(2) << '\n';
        else
            out << "power flow diverged after " << s.iterations << " iterations: " << s.message << '\n';
        return kExitNumerical;
    }
    const ViolationReport viol = check_violations(c, s, tol);
    const Vec vm = s.V.cwiseAbs();
    Vec va(s.V.size());
    for (Eigen::Index i = 0; i < va.size(); ++i) va(i) = std::arg(s.V(i)) * 180.0 / std::numbers::pi;
    if (as_json) {
        json j;
        j["converged"] = true;
        j["iterations"] = s.iterations;
        j["max_mismatch"] = s.max_mismatch;
        j["Vm"] = vec_json(vm);
        j["Va_deg"] = vec_json(va);
        j["Pg"] = vec_json(s.Pg);
        j["Qg"] = vec_json(s.Qg);
        j["Sf"] = vec_json(s.Sf);
        j["St"] = vec_json(s.St);
        j["cost"] = gen_cost(c, s.Pg);
        j["violations"] = violations_json(viol);
        out << j.dump(2) << '\n';
        return kExitOk;
    }
    out << "converged in " << s.iterations << " iterations, max mismatch " << s.max_mismatch << " p.u.\n";
    out << std::fixed << std::setprecision(6);
    out << "bus  type    Vm(pu)      Va(deg)\n";
    for (std::size_t i = 0; i < c.bus_count(); ++i)
        out << std::setw(3) << c.buses[i].id << "  " << std::setw(5) << kind_name(c.buses[i].kind) << "  "
            << std::setw(9) << vm(static_cast<Eigen::Index>(i)) << "  " << std::setw(11)
            << va(static_cast<Eigen::Index>(i)) << '\n';
    out << "gen bus     Pg(MW)    Qg(MVAr)\n";
    for (std::size_t g = 0; g < c.gen_count(); ++g)
        out << std::setw(7) << c.generators[g].bus << "  " << std::setw(10) << s.Pg(static_cast<Eigen::Index>(g))
            << "  " << std::setw(10) << s.Qg(static_cast<Eigen::Index>(g)) << '\n';
    out << "branch    Sf(MVA)    St(MVA)   limit\n";
    for (std::size_t b = 0; b < c.branches.size(); ++b) {
        const auto& br = c.branches[b];
        out << std::setw(3) << br.from << '-' << std::setw(2) << std::left << br.to << std::right << "  " << std::setw(9)
            << s.Sf(static_cast<Eigen::Index>(b)) << "  " << std::setw(9) << s.St(static_cast<Eigen::Index>(b)) << "  ";
        if (br.has_limit()) out << br.S_max;
        else out << '-';
        out << '\n';
    }
    out << "cost " << gen_cost(c, s.Pg) << " $/h\n";
    print_violations(out, c, viol);
    return kExitOk;
}

int solve_opf_cmd(const std::string& case_path, bool as_json, std::ostream& out) {
    const Case c = load_case(case_path);
    const OpfSolution s = solve_opf(c);
    const bool ok = s.status == OpfStatus::Optimal;
    if (as_json) {
        json j;
        j["status"] = to_string(s.status);
        j["iterations"] = s.iterations;
        j["message"] = s.message;
        if (ok) {
            j["objective"] = s.objective;
            j["Pg"] = vec_json(s.Pg_opt);
            j["Qg"] = vec_json(s.Qg_opt);
            j["Vg"] = vec_json(s.Vg_opt);
        }
        out << j.dump(2) << '\n';
    } else {
        out << "status " << to_string(s.status) << " after " << s.iterations << " iterations";
        if (!s.message.empty()) out << ": " << s.message;
        out << '\n';
        if (ok) {
            out << std::fixed << std::setprecision(6) << "objective " << s.objective << " $/h\n";
            out << "gen bus     Pg(MW)    Qg(MVAr)    Vg(pu)\n";
            for (std::size_t g = 0; g < c.gen_count(); ++g) {
                const auto i = static_cast<Eigen::Index>(g);
                out << std::setw(7) << c.generators[g].bus << "  " << std::setw(10) << s.Pg_opt(i) << "  "
                    << std::setw(10) << s.Qg_opt(i) << "  " << std::setw(8) << s.Vg_opt(i) << '\n';
            }
        }
    }
    return ok ? kExitOk : kExitNumerical;
}

std::pair<double, double> parse_range(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw UsageError("--range expects lo:hi, got '" + s + "'");
    try {
        std::size_t p1 = 0, p2 = 0;
        const double lo = std::stod(s.substr(0, colon), &p1);
        const double hi = std::stod(s.substr(colon + 1), &p2);
        if (p1 != colon || p2 != s.size() - colon - 1) throw std::invalid_argument("trailing characters");
        if (!(lo > 0.0 && lo <= hi)) throw UsageError("--range needs 0 < lo <= hi");
        return {lo, hi};
    } catch (const std::logic_error&) {
        throw UsageError("--range expects lo:hi, got '" + s + "'");
    }
}

void print_dataset_line(std::ostream& out, const std::string& label, const Dataset& ds) {
    out << label << ": " << ds.scenarios.size() << " scenarios";
    if (ds.calibration.defined)
        out << ", calibration k " << ds.calibration.k << " b " << ds.calibration.b << " (cost " << ds.calibration.c_min
            << " to " << ds.calibration.c_max << " $/h)";
    else
        out << ", calibration undefined";
    out << '\n';
}

struct GenDataArgs {
    std::string case_path = kDefaultCase;
    std::size_t n = 6000;
    std::string range = "0.6:1.4";
    std::uint64_t seed = 1;
    std::string out;
    std::string labels;
    bool system_wide = false;
    unsigned threads = 1;
    std::optional<std::size_t> n_train;
    std::string test_out;
    double max_failure_rate = 0.05;
};

int gen_data_cmd(const GenDataArgs& a, std::ostream& out, std::ostream& err) {
    if (a.n_train.has_value() != !a.test_out.empty()) throw UsageError("--n-train and --test-out go together");
    if (a.n_train && *a.n_train > a.n) throw UsageError("--n-train exceeds --n");
    const Case c = load_case(a.case_path);
    GenerationParams gp;
    gp.n = a.n;
    std::tie(gp.load_lo, gp.load_hi) = parse_range(a.range);
    gp.seed = a.seed;
    gp.per_bus = !a.system_wide;
    LabelOptions lo;
    lo.threads = a.threads;
    lo.max_failure_rate = a.max_failure_rate;
    const auto scenarios = generate_scenarios(c, gp);
    Dataset ds;
    try {
        ds = a.labels.empty() ? label_scenarios(c, scenarios, gp, lo)
                              : ingest_labels(c, scenarios, load_labels(a.labels), gp, lo);
    } catch (const LabelingError& e) {
        const std::string partial = a.out + ".partial";
        save_dataset(e.partial(), partial);
        err << "gen-data: " << e.what() << "; " << e.partial().scenarios.size() << " labeled scenarios kept in "
            << partial << '\n';
        return kExitNumerical;
    }
    out << "generated " << ds.n_generated << ", dropped infeasible " << ds.n_infeasible << ", oracle failures "
        << ds.n_failed << '\n';
    if (a.n_train) {
        const std::size_t keep = std::min(*a.n_train, ds.scenarios.size());
        auto [train, test] = split(ds, keep, a.seed);
        save_dataset(train, a.out);
        save_dataset(test, a.test_out);
        print_dataset_line(out, a.out, train);
        print_dataset_line(out, a.test_out, test);
    } else {
        save_dataset(ds, a.out);
        print_dataset_line(out, a.out, ds);
    }
    return kExitOk;
}

TrainConfig config_or_default(const std::string& path) { return path.empty() ? TrainConfig{} : load_config(path); }

struct PretrainArgs {
    std::string data, out, curve, config, case_path;
    std::optional<int> epochs, batch;
    std::optional<double> lr, fraction, holdout;
    std::optional<std::string> optimizer;
    std::optional<std::uint64_t> seed;
};

int pretrain_cmd(const PretrainArgs& a, std::ostream& out) {
    TrainConfig cfg = config_or_default(a.config);
    if (a.epochs) cfg.pretrain.epochs = *a.epochs;
    if (a.batch) cfg.pretrain.batch = *a.batch;
    if (a.lr) cfg.pretrain.lr = *a.lr;
    if (a.holdout) cfg.pretrain.holdout = *a.holdout;
    if (a.fraction) cfg.pretrain_fraction = *a.fraction;
    if (a.seed) cfg.seed = *a.seed;
    if (a.optimizer) cfg.pretrain.optimizer = optimizer_from_string(*a.optimizer);
    if (!a.case_path.empty()) cfg.case_path = a.case_path;
    if (cfg.env != "grid") throw UsageError("pretrain needs a grid config");
    // Re-validate overrides.
    cfg = parse_config(config_text(cfg));
    const Case c = load_case(cfg.case_path);
    const Dataset train = load_dataset(a.data, case_fingerprint(c));
    Checkpoint ck = initial_checkpoint(cfg, &c);
    const PretrainResult r = pretrain_checkpoint(cfg, c, train, ck);
    save_checkpoint(ck, a.out);
    if (!a.curve.empty()) write_loss_curve(r.curve, a.curve);
    out << std::setprecision(6) << "pretrained on " << r.n_train << " scenarios (" << r.n_heldout << " held out), "
        << cfg.pretrain.epochs << " epochs\n";
    out << "train RMSE Pg " << r.train.rmse_p() << " MW, Vg " << r.train.rmse_v() << " p.u.\n";
    if (r.n_heldout > 0)
        out << "held-out RMSE Pg " << r.heldout.rmse_p() << " MW, Vg " << r.heldout.rmse_v() << " p.u.\n";
    out << "checkpoint " << a.out << '\n';
    return kExitOk;
}

struct TrainArgs {
    std::string config, data, init, out, log, eval_data, case_path;
    std::optional<int> updates;
    std::optional<std::uint64_t> seed;
    bool quiet = false;
};

int train_cmd(const TrainArgs& a, std::ostream& out, std::ostream& err) {
    TrainConfig cfg = config_or_default(a.config);
    if (a.updates) cfg.ppo.updates = *a.updates;
    if (a.seed) cfg.seed = *a.seed;
    if (!a.case_path.empty()) cfg.case_path = a.case_path;
    cfg = parse_config(config_text(cfg));

    TrainHooks hooks;
    hooks.checkpoint_path = a.out;
    hooks.log_path = a.log;
    if (!a.quiet)
        hooks.on_row = [&out](const TrainLogRow& r) {
            out << "update " << r.update << " return " << r.mean_return << " clip " << r.clip_fraction << " log_std "
                << r.log_std_mean;
            if (std::isfinite(r.eval_success))
                out << " eval success " << r.eval_success << " deviation " << r.eval_mean_deviation << '%';
            out << std::endl;
        };

    TrainOutcome res;
    if (cfg.env == "bandit") {
        Checkpoint init = a.init.empty() ? initial_checkpoint(cfg, nullptr) : load_checkpoint(a.init);
        res = run_bandit_training(cfg, std::move(init), hooks);
    } else {
        if (a.data.empty()) throw UsageError("train needs --data for the grid environment");
        const Case c = load_case(cfg.case_path);
        const auto fp = case_fingerprint(c);
        const Dataset train = load_dataset(a.data, fp);
        std::vector<Scenario> eval;
        if (!a.eval_data.empty()) {
            eval = load_dataset(a.eval_data, fp).scenarios;
            if (eval.size() > cfg.eval_scenarios) eval.resize(cfg.eval_scenarios);
        }
        Checkpoint init = a.init.empty() ? initial_checkpoint(cfg, &c) : load_checkpoint(a.init, fp);
        res = run_training(cfg, c, train, eval, std::move(init), hooks);
    }
    out << "checkpoint " << a.out << " at update " << res.checkpoint.update << '\n';
    if (res.aborted) {
        err << "train: stopped on numerical failure: " << res.abort_reason << '\n';
        return kExitNumerical;
    }
    return kExitOk;
}

struct EvalArgs {
    std::string checkpoint, data, case_path = kDefaultCase, report;
    std::optional<int> horizon;
    std::optional<std::size_t> limit;
    unsigned threads = 1;
};

EvalMetrics run_eval(const EvalArgs& a) {
    const Case c = load_case(a.case_path);
    const auto fp = case_fingerprint(c);
    const Checkpoint ck = load_checkpoint(a.checkpoint, fp);
    if (!(ck.normalization == normalization_of(c)))
        throw CheckpointError("checkpoint normalization does not match the case generator limits");
    Dataset ds = load_dataset(a.data, fp);
    if (a.limit && ds.scenarios.size() > *a.limit) ds.scenarios.resize(*a.limit);
    EnvConfig env = ck.config_text.empty() ? EnvConfig{} : parse_config(ck.config_text).env_cfg;
    if (a.horizon) env.horizon = *a.horizon;
    return evaluate_agent(c, ck.policy, ds.scenarios, env, a.threads);
}

int eval_cmd(const EvalArgs& a, std::ostream& out) {
    const EvalMetrics m = run_eval(a);
    if (!a.report.empty()) emit_report(m, a.report);
    out << summary_json(m) << '\n';
    return kExitOk;
}

void add_case_option(CLI::App* app, std::string& path) {
    app->add_option("--case", path, "Case file (MATPOWER tables or JSON)")->capture_default_str();
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Learn AC OPF generator setpoints with PPO", "gridppo"};
    app.require_subcommand(1);
    app.fallthrough(false);

    std::string pf_case = kDefaultCase;
    bool pf_json = false, pf_no_qlim = false;
    double pf_tol = 1e-4;
    auto* pf = app.add_subcommand("solve-pf", "Newton-Raphson power flow of a case");
    add_case_option(pf, pf_case);
    pf->add_flag("--json", pf_json, "JSON output");
    pf->add_flag("--no-qlim", pf_no_qlim, "Ignore generator reactive limits");
    pf->add_option("--tol", pf_tol, "Violation reporting tolerance")->capture_default_str();

    std::string opf_case = kDefaultCase;
    bool opf_json = false;
    auto* opf = app.add_subcommand("solve-opf", "Interior-point AC OPF of a case");
    add_case_option(opf, opf_case);
    opf->add_flag("--json", opf_json, "JSON output");

    GenDataArgs gd;
    auto* gen = app.add_subcommand("gen-data", "Generate perturbed scenarios and label them with the OPF oracle");
    add_case_option(gen, gd.case_path);
    gen->add_option("--n", gd.n, "Scenarios to generate")->capture_default_str();
    gen->add_option("--range", gd.range, "Load multiplier range lo:hi")->capture_default_str();
    gen->add_option("--seed", gd.seed, "Generation and split seed")->capture_default_str();
    gen->add_option("--out", gd.out, "Output dataset (.jsonl, or .bin for the binary form)")->required();
    gen->add_option("--labels", gd.labels, "Ingest external labels (JSON lines) instead of running the oracle");
    gen->add_flag("--system-wide", gd.system_wide, "One load multiplier for the whole system");
    gen->add_option("--threads", gd.threads, "Labeling threads, 0 for all cores")->capture_default_str();
    gen->add_option("--n-train", gd.n_train, "Split: scenarios kept in --out, the rest go to --test-out");
    gen->add_option("--test-out", gd.test_out, "Test dataset path when splitting");
    gen->add_option("--max-failure-rate", gd.max_failure_rate, "Oracle failure rate that aborts labeling")
        ->capture_default_str();

    PretrainArgs pa;
    auto* pre = app.add_subcommand("pretrain", "Supervised actor initialization on oracle labels");
    pre->add_option("--data", pa.data, "Training dataset")->required();
    pre->add_option("--out", pa.out, "Checkpoint to write")->required();
    pre->add_option("--epochs", pa.epochs, "Epochs (config default 50)");
    pre->add_option("--curve", pa.curve, "Loss curve CSV");
    pre->add_option("--config", pa.config, "Run configuration");
    pre->add_option("--case", pa.case_path, "Case file (overrides the config)");
    pre->add_option("--fraction", pa.fraction, "Share of the training set to use");
    pre->add_option("--lr", pa.lr, "Learning rate");
    pre->add_option("--batch", pa.batch, "Minibatch size");
    pre->add_option("--holdout", pa.holdout, "Held-out share");
    pre->add_option("--optimizer", pa.optimizer, "adam or sgd");
    pre->add_option("--seed", pa.seed, "Seed for initialization and shuffling");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "PPO training from a fresh or pretrained checkpoint");
    tr->add_option("--config", ta.config, "Run configuration");
    tr->add_option("--data", ta.data, "Training scenario pool");
    tr->add_option("--init", ta.init, "Starting checkpoint (fresh networks when omitted)");
    tr->add_option("--out", ta.out, "Checkpoint to write")->required();
    tr->add_option("--log", ta.log, "Per-update CSV log");
    tr->add_option("--eval-data", ta.eval_data, "Held-out scenarios scored during training");
    tr->add_option("--case", ta.case_path, "Case file (overrides the config)");
    tr->add_option("--updates", ta.updates, "PPO updates (overrides the config)");
    tr->add_option("--seed", ta.seed, "Seed (overrides the config)");
    tr->add_flag("--quiet", ta.quiet, "No per-update progress");

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Score a checkpoint's deterministic actor on a dataset");
    auto add_eval_options = [](CLI::App* sub, EvalArgs& e) {
        sub->add_option("--checkpoint", e.checkpoint, "Checkpoint")->required();
        sub->add_option("--data", e.data, "Labeled test dataset")->required();
        add_case_option(sub, e.case_path);
        sub->add_option("--horizon", e.horizon, "Steps per episode (default from the checkpoint config)");
        sub->add_option("--limit", e.limit, "Score only the first N scenarios");
        sub->add_option("--threads", e.threads, "Worker threads")->capture_default_str();
    };
    add_eval_options(ev, ea);
    ev->add_option("--report", ea.report, "Also write report files with this prefix");

    EvalArgs ra;
    auto* rep = app.add_subcommand("report", "Evaluate and write per-scenario CSV, JSON summary and cost series");
    add_eval_options(rep, ra);
    rep->add_option("--out", ra.report, "Report prefix (writes PREFIX.csv, PREFIX.json, PREFIX_series.csv)")
        ->required();

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitUsage;
    }

    try {
        if (pf->parsed()) return solve_pf_cmd(pf_case, pf_json, pf_no_qlim, pf_tol, out);
        if (opf->parsed()) return solve_opf_cmd(opf_case, opf_json, out);
        if (gen->parsed()) return gen_data_cmd(gd, out, err);
        if (pre->parsed()) return pretrain_cmd(pa, out);
        if (tr->parsed()) return train_cmd(ta, out, err);
        if (ev->parsed()) return eval_cmd(ea, out);
        if (rep->parsed()) {
            eval_cmd(ra, out);
            err << "wrote " << ra.report << ".csv, " << ra.report << ".json, " << ra.report << "_series.csv\n";
            return kExitOk;
        }
    } catch (const NumericalError& e) {
        err << "gridppo: numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        err << "gridppo: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

int cli_main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return cli_main(args, std::cout, std::cerr);
}

}  // namespace gridppo
