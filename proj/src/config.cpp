#include "gridppo/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <boost/program_options.hpp>

namespace po = boost::program_options;

namespace gridppo {

std::vector<int> parse_widths(const std::string& s) {
    std::vector<int> out;
    std::stringstream ss(s);
    for (std::string item; std::getline(ss, item, ',');) {
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        if (b == std::string::npos) throw ConfigError("empty layer width in '" + s + "'");
        int w = 0;
        const auto* first = item.data() + b;
        const auto* last = item.data() + e + 1;
        const auto [p, ec] = std::from_chars(first, last, w);
        if (ec != std::errc() || p != last || w < 1) throw ConfigError("bad layer width '" + item + "'");
        out.push_back(w);
    }
    if (out.empty()) throw ConfigError("no layer widths given");
    return out;
}

namespace {

// String-valued fields that need conversion after parsing.
struct Raw {
    std::string actor_hidden, critic_hidden, optimizer;
};

po::options_description describe(TrainConfig& c, Raw& raw) {
    po::options_description d;
    d.add_options()
        ("run.seed", po::value(&c.seed))
        ("run.env", po::value(&c.env))
        ("run.case", po::value(&c.case_path))
        ("run.threads", po::value(&c.threads))
        ("run.bandit_optimum", po::value(&c.bandit_optimum))
        ("network.actor_hidden", po::value(&raw.actor_hidden))
        ("network.critic_hidden", po::value(&raw.critic_hidden))
        ("network.log_std_init", po::value(&c.log_std_init))
        ("ppo.clip_eps", po::value(&c.ppo.clip_eps))
        ("ppo.epochs", po::value(&c.ppo.epochs))
        ("ppo.minibatch", po::value(&c.ppo.minibatch))
        ("ppo.actor_lr", po::value(&c.ppo.actor_lr))
        ("ppo.critic_lr", po::value(&c.ppo.critic_lr))
        ("ppo.rollout_steps", po::value(&c.ppo.rollout_steps))
        ("ppo.updates", po::value(&c.ppo.updates))
        ("ppo.entropy_coef", po::value(&c.ppo.entropy_coef))
        ("ppo.normalize_advantages", po::value(&c.ppo.normalize_advantages))
        ("ppo.target_kl", po::value(&c.ppo.target_kl))
        ("ppo.log_std_min", po::value(&c.ppo.log_std_min))
        ("gae.gamma", po::value(&c.gae.gamma))
        ("gae.lambda", po::value(&c.gae.lam))
        ("env.horizon", po::value(&c.env_cfg.horizon))
        ("env.step_scale", po::value(&c.env_cfg.step_scale))
        ("env.feasibility_tol", po::value(&c.env_cfg.feasibility_tol))
        ("reward.w_p", po::value(&c.env_cfg.reward.w_p))
        ("reward.w_v", po::value(&c.env_cfg.reward.w_v))
        ("reward.w_l", po::value(&c.env_cfg.reward.w_l))
        ("reward.violation_cap", po::value(&c.env_cfg.reward.violation_cap))
        ("reward.divergence_penalty", po::value(&c.env_cfg.reward.divergence_penalty))
        ("pretrain.epochs", po::value(&c.pretrain.epochs))
        ("pretrain.lr", po::value(&c.pretrain.lr))
        ("pretrain.batch", po::value(&c.pretrain.batch))
        ("pretrain.holdout", po::value(&c.pretrain.holdout))
        ("pretrain.optimizer", po::value(&raw.optimizer))
        ("pretrain.fraction", po::value(&c.pretrain_fraction))
        ("data.n", po::value(&c.gen.n))
        ("data.load_lo", po::value(&c.gen.load_lo))
        ("data.load_hi", po::value(&c.gen.load_hi))
        ("data.seed", po::value(&c.gen.seed))
        ("data.per_bus", po::value(&c.gen.per_bus))
        ("data.n_train", po::value(&c.n_train))
        ("train.eval_every", po::value(&c.eval_every))
        ("train.eval_scenarios", po::value(&c.eval_scenarios))
        ("train.checkpoint_every", po::value(&c.checkpoint_every));
    return d;
}

void validate(const TrainConfig& c) {
    auto need = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    need(c.env == "grid" || c.env == "bandit", "run.env must be grid or bandit");
    need(c.ppo.clip_eps > 0.0, "ppo.clip_eps must be positive");
    need(c.ppo.epochs >= 1 && c.ppo.minibatch >= 1 && c.ppo.rollout_steps >= 1, "ppo sizes must be >= 1");
    need(c.ppo.updates >= 0, "ppo.updates must be >= 0");
    need(c.ppo.actor_lr > 0.0 && c.ppo.critic_lr > 0.0, "learning rates must be positive");
    need(c.gae.gamma >= 0.0 && c.gae.gamma <= 1.0 && c.gae.lam >= 0.0 && c.gae.lam <= 1.0,
         "gae.gamma and gae.lambda must lie in [0, 1]");
    need(c.env_cfg.horizon >= 1, "env.horizon must be >= 1");
    need(c.env_cfg.reward.w_p > 0.0 && c.env_cfg.reward.w_v > 0.0 && c.env_cfg.reward.w_l > 0.0,
         "reward weights must be positive");
    need(c.pretrain.epochs >= 0 && c.pretrain.batch >= 1 && c.pretrain.lr > 0.0, "bad pretrain settings");
    need(c.pretrain.holdout >= 0.0 && c.pretrain.holdout < 1.0, "pretrain.holdout must lie in [0, 1)");
    need(c.pretrain_fraction > 0.0 && c.pretrain_fraction <= 1.0, "pretrain.fraction must lie in (0, 1]");
    need(c.gen.load_lo > 0.0 && c.gen.load_lo <= c.gen.load_hi, "data load range must satisfy 0 < lo <= hi");
    need(c.n_train <= c.gen.n, "data.n_train exceeds data.n");
}

std::string join(const std::vector<int>& w) {
    std::string s;
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
    return s;
}

std::string num(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

}  // namespace

TrainConfig parse_config(const std::string& text) {
    TrainConfig c;
    Raw raw{join(c.actor_hidden), join(c.critic_hidden), to_string(c.pretrain.optimizer)};
    const auto desc = describe(c, raw);
    std::istringstream in(text);
    po::variables_map vm;
    try {
        po::store(po::parse_config_file(in, desc, false), vm);
        po::notify(vm);
    } catch (const po::error& e) {
        throw ConfigError(e.what());
    }
    c.actor_hidden = parse_widths(raw.actor_hidden);
    c.critic_hidden = parse_widths(raw.critic_hidden);
    try {
        c.pretrain.optimizer = optimizer_from_string(raw.optimizer);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    validate(c);
    return c;
}

TrainConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string config_text(const TrainConfig& c) {
    std::ostringstream o;
    const auto b = [](bool v) { return v ? "true" : "false"; };
    o << "[run]\n"
      << "seed = " << c.seed << "\n"
      << "env = " << c.env << "\n"
      << "case = " << c.case_path << "\n"
      << "threads = " << c.threads << "\n"
      << "bandit_optimum = " << num(c.bandit_optimum) << "\n\n"
      << "[network]\n"
      << "actor_hidden = " << join(c.actor_hidden) << "\n"
      << "critic_hidden = " << join(c.critic_hidden) << "\n"
      << "log_std_init = " << num(c.log_std_init) << "\n\n"
      << "[ppo]\n"
      << "clip_eps = " << num(c.ppo.clip_eps) << "\n"
      << "epochs = " << c.ppo.epochs << "\n"
      << "minibatch = " << c.ppo.minibatch << "\n"
      << "actor_lr = " << num(c.ppo.actor_lr) << "\n"
      << "critic_lr = " << num(c.ppo.critic_lr) << "\n"
      << "rollout_steps = " << c.ppo.rollout_steps << "\n"
      << "updates = " << c.ppo.updates << "\n"
      << "entropy_coef = " << num(c.ppo.entropy_coef) << "\n"
      << "normalize_advantages = " << b(c.ppo.normalize_advantages) << "\n"
      << "target_kl = " << num(c.ppo.target_kl) << "\n"
      << "log_std_min = " << num(c.ppo.log_std_min) << "\n\n"
      << "[gae]\n"
      << "gamma = " << num(c.gae.gamma) << "\n"
      << "lambda = " << num(c.gae.lam) << "\n\n"
      << "[env]\n"
      << "horizon = " << c.env_cfg.horizon << "\n"
      << "step_scale = " << num(c.env_cfg.step_scale) << "\n"
      << "feasibility_tol = " << num(c.env_cfg.feasibility_tol) << "\n\n"
      << "[reward]\n"
      << "w_p = " << num(c.env_cfg.reward.w_p) << "\n"
      << "w_v = " << num(c.env_cfg.reward.w_v) << "\n"
      << "w_l = " << num(c.env_cfg.reward.w_l) << "\n"
      << "violation_cap = " << num(c.env_cfg.reward.violation_cap) << "\n"
      << "divergence_penalty = " << num(c.env_cfg.reward.divergence_penalty) << "\n\n"
      << "[pretrain]\n"
      << "epochs = " << c.pretrain.epochs << "\n"
      << "lr = " << num(c.pretrain.lr) << "\n"
      << "batch = " << c.pretrain.batch << "\n"
      << "holdout = " << num(c.pretrain.holdout) << "\n"
      << "optimizer = " << to_string(c.pretrain.optimizer) << "\n"
      << "fraction = " << num(c.pretrain_fraction) << "\n\n"
      << "[data]\n"
      << "n = " << c.gen.n << "\n"
      << "load_lo = " << num(c.gen.load_lo) << "\n"
      << "load_hi = " << num(c.gen.load_hi) << "\n"
      << "seed = " << c.gen.seed << "\n"
      << "per_bus = " << b(c.gen.per_bus) << "\n"
      << "n_train = " << c.n_train << "\n\n"
      << "[train]\n"
      << "eval_every = " << c.eval_every << "\n"
      << "eval_scenarios = " << c.eval_scenarios << "\n"
      << "checkpoint_every = " << c.checkpoint_every << "\n";
    return o.str();
}

}  // namespace gridppo
