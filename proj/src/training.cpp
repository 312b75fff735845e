#include "gridppo/training.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace gridppo {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Independent streams for initialization and training from one seed.
constexpr std::uint64_t kTrainStream = 0x5851f42d4c957f2dULL;

std::string cell(double v) {
    if (!std::isfinite(v)) return "";
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

bool finite(const Checkpoint& ck) {
    return nn::all_finite(ck.policy.actor) && ck.policy.log_std.allFinite() && nn::all_finite(ck.critic);
}

TrainOutcome train_loop(const TrainConfig& cfg, Environment& env, Checkpoint init, const TrainHooks& hooks,
                        const std::function<void(const Policy&, TrainLogRow&)>& evaluate) {
    TrainOutcome out;
    out.checkpoint = std::move(init);
    out.checkpoint.config_text = config_text(cfg);
    Checkpoint work = out.checkpoint;
    work.stage = "train";
    Rng rng(cfg.seed ^ kTrainStream ^ static_cast<std::uint64_t>(work.update));

    PpoConfig ppo = cfg.ppo;
    ppo.updates = 1;
    for (int u = 0; u < cfg.ppo.updates; ++u) {
        TrainLogRow row;
        try {
            train_ppo(env, work.policy, work.critic, work.optimizers, ppo, cfg.gae, rng, [&](const UpdateReport& r) {
                row.mean_return = r.mean_return;
                row.actor_loss = r.stats.actor_loss;
                row.critic_loss = r.stats.critic_loss;
                row.clip_fraction = r.stats.clip_fraction;
                row.approx_kl = r.stats.approx_kl;
                return true;
            });
            if (!finite(work)) throw NumericalError("non-finite parameters after update " + std::to_string(work.update + 1));
        } catch (const NumericalError& e) {
            out.aborted = true;
            out.abort_reason = e.what();
            break;
        }
        ++work.update;
        row.update = work.update;
        row.log_std_mean = work.policy.log_std.mean();
        row.eval_success = row.eval_mean_deviation = kNaN;
        const bool last = u + 1 == cfg.ppo.updates;
        if (evaluate && cfg.eval_every > 0 && (work.update % cfg.eval_every == 0 || last)) evaluate(work.policy, row);
        out.log.push_back(row);
        out.checkpoint = work;
        if (hooks.on_row) hooks.on_row(row);
        if (!hooks.log_path.empty()) write_train_log(out.log, hooks.log_path);
        if (!hooks.checkpoint_path.empty() && cfg.checkpoint_every > 0 && work.update % cfg.checkpoint_every == 0)
            save_checkpoint(out.checkpoint, hooks.checkpoint_path);
    }
    if (!hooks.checkpoint_path.empty()) save_checkpoint(out.checkpoint, hooks.checkpoint_path);
    if (!hooks.log_path.empty()) write_train_log(out.log, hooks.log_path);
    return out;
}

}  // namespace

Checkpoint initial_checkpoint(const TrainConfig& cfg, const Case* c) {
    Checkpoint ck;
    Rng rng(cfg.seed);
    Eigen::Index in = 1, state = 1, act = 1;
    if (c) {
        in = actor_input_width(*c);
        state = state_width(*c);
        act = action_width(*c);
        ck.case_fingerprint = case_fingerprint(*c);
        ck.normalization = normalization_of(*c);
    }
    ck.policy = make_policy(static_cast<int>(in), cfg.actor_hidden, static_cast<int>(act), cfg.log_std_init, rng);
    ck.critic = make_critic(static_cast<int>(state), cfg.critic_hidden, rng);
    ck.stage = "init";
    ck.config_text = config_text(cfg);
    return ck;
}

PretrainResult pretrain_checkpoint(const TrainConfig& cfg, const Case& c, const Dataset& train, Checkpoint& ck) {
    const Dataset part = cfg.pretrain_fraction < 1.0 ? take_fraction(train, cfg.pretrain_fraction, cfg.seed) : train;
    PretrainOptions opt = cfg.pretrain;
    opt.seed = cfg.seed;
    auto r = pretrain_actor(c, part, ck.policy, opt);
    ck.stage = "pretrain";
    ck.calibration = train.calibration;
    ck.config_text = config_text(cfg);
    return r;
}

TrainOutcome run_training(const TrainConfig& cfg, const Case& c, const Dataset& train,
                          const std::vector<Scenario>& eval, Checkpoint init, const TrainHooks& hooks) {
    if (train.scenarios.empty()) throw std::invalid_argument("training needs a non-empty scenario pool");
    if (!train.calibration.defined) throw std::invalid_argument("training pool has no reward calibration");
    if (init.case_fingerprint != case_fingerprint(c))
        throw CheckpointError("initial checkpoint was built for a different case");
    init.calibration = train.calibration;
    ScenarioEnv env(c, cfg.env_cfg, train.calibration, train.scenarios);
    auto evaluate = [&](const Policy& p, TrainLogRow& row) {
        if (eval.empty()) return;
        const auto m = evaluate_agent(c, p, eval, cfg.env_cfg, cfg.threads);
        row.eval_success = m.success_rate;
        row.eval_mean_deviation = m.mean_deviation_pct;
    };
    return train_loop(cfg, env, std::move(init), hooks, evaluate);
}

TrainOutcome run_bandit_training(const TrainConfig& cfg, Checkpoint init, const TrainHooks& hooks) {
    BanditEnv env(cfg.bandit_optimum);
    auto evaluate = [&](const Policy& p, TrainLogRow& row) {
        // Success: mean within 0.05 of the optimum.
        const double mu = p.mean(Mat::Ones(1, 1))(0, 0);
        row.eval_success = std::abs(mu - cfg.bandit_optimum) <= 0.05 ? 1.0 : 0.0;
    };
    return train_loop(cfg, env, std::move(init), hooks, evaluate);
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "update,mean_return,actor_loss,critic_loss,clip_fraction,approx_kl,log_std_mean,eval_success_rate,"
           "eval_mean_deviation_pct\n";
    for (const auto& r : log)
        out << r.update << ',' << cell(r.mean_return) << ',' << cell(r.actor_loss) << ',' << cell(r.critic_loss) << ','
            << cell(r.clip_fraction) << ',' << cell(r.approx_kl) << ',' << cell(r.log_std_mean) << ','
            << cell(r.eval_success) << ',' << cell(r.eval_mean_deviation) << '\n';
    if (!out) throw std::runtime_error("write failed for " + path);
}

}  // namespace gridppo
