#pragma once

#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridppo/environment.hpp"
#include "gridppo/nn.hpp"

namespace gridppo {

using Rng = std::mt19937_64;
using Policy = nn::PolicyParams<double>;
using Critic = nn::CriticParams<double>;

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Transition {
    Vec state;
    Vec action;
    double log_prob = 0.0;  // under the collection-time policy
    double reward = 0.0;
    double value = 0.0;
    bool done = false;
};

struct GaeConfig {
    double gamma = 0.99;
    double lam = 0.95;
};

struct PpoConfig {
    double clip_eps = 0.2;
    int epochs = 10;
    int minibatch = 256;
    double actor_lr = 3e-4;
    double critic_lr = 1e-3;
    int rollout_steps = 2048;
    int updates = 100;
    double entropy_coef = 0.0;
    bool normalize_advantages = true;
    double target_kl = 0.0;       // > 0 stops the epochs once the sampled KL passes 1.5x this
    double log_std_min = -4.0;    // floor on the policy log standard deviation
};

/// Σ_t γ^t r_{t+1}.
double discounted_return(const std::vector<double>& rewards, double gamma);

struct GaeResult {
    Vec advantages;
    Vec returns;  // advantages + values, the critic targets
};

/// Advantages over a buffer that may hold several episodes; accumulation
/// restarts at every done flag. `bootstrap_value` is V of the state after the
/// last transition and is ignored when that transition is terminal.
GaeResult compute_gae(const std::vector<Transition>& traj, const GaeConfig& cfg, double bootstrap_value);

/// min(r·A, clip(r, 1-ε, 1+ε)·A).
double clipped_surrogate(double ratio, double advantage, double clip_eps);

// Episodic environment seen by the trainer.
class Environment {
public:
    struct Step {
        Vec next_state;
        double reward = 0.0;
        bool done = false;
    };
    virtual ~Environment() = default;
    virtual Vec reset(Rng& rng) = 0;
    virtual Step step(const Vec& action) = 0;
    virtual Eigen::Index state_dim() const = 0;
    virtual Eigen::Index action_dim() const = 0;
};

// One-step bandit with reward -(a - optimum)² and a constant unit state.
class BanditEnv : public Environment {
public:
    explicit BanditEnv(double optimum = 0.7) : optimum_(optimum) {}
    Vec reset(Rng&) override { return Vec::Ones(1); }
    Step step(const Vec& a) override { return {Vec::Ones(1), -(a(0) - optimum_) * (a(0) - optimum_), true}; }
    Eigen::Index state_dim() const override { return 1; }
    Eigen::Index action_dim() const override { return 1; }

private:
    double optimum_;
};

// Grid environment whose resets draw a scenario uniformly from a pool.
class ScenarioEnv : public Environment {
public:
    ScenarioEnv(const Case& c, EnvConfig cfg, Calibration cal, std::vector<Scenario> pool);
    Vec reset(Rng& rng) override;
    Step step(const Vec& action) override;
    Eigen::Index state_dim() const override { return env_.state_dim(); }
    Eigen::Index action_dim() const override { return env_.action_dim(); }
    const GridEnv& grid() const { return env_; }

private:
    GridEnv env_;
    std::vector<Scenario> pool_;
};

struct Rollout {
    std::vector<Transition> transitions;
    double bootstrap_value = 0.0;
    std::vector<double> episode_returns;  // undiscounted, completed episodes only
};

/// Runs the stochastic policy for `n_steps` transitions. Every call starts a
/// fresh episode; a trailing unfinished episode is bootstrapped by the critic.
Rollout collect_rollouts(Environment& env, const Policy& policy, const Critic& critic, int n_steps, Rng& rng);

struct Optimizers {
    nn::AdamState<double> actor;  // actor weights followed by log_std
    nn::AdamState<double> critic;
};

struct UpdateStats {
    double mean_ratio = 1.0;
    double clip_fraction = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
    double first_clip_fraction = 0.0;  // first minibatch of the first epoch
    int epochs_run = 0;
};

/// Clipped-surrogate actor ascent and squared-error critic descent over
/// shuffled minibatches. Throws NumericalError on a non-finite loss or update.
UpdateStats ppo_update(Policy& policy, Critic& critic, Optimizers& opt, const std::vector<Transition>& batch,
                       const GaeResult& gae, const PpoConfig& cfg, Rng& rng);

Policy make_policy(int input_width, const std::vector<int>& hidden, int action_width, double log_std_init, Rng& rng);
Critic make_critic(int state_width, const std::vector<int>& hidden, Rng& rng);

struct UpdateReport {
    int update = 0;
    double mean_return = 0.0;
    UpdateStats stats;
};

/// Collect, estimate advantages and update for cfg.updates rounds. The callback
/// sees each update's report and may return false to stop early.
void train_ppo(Environment& env, Policy& policy, Critic& critic, Optimizers& opt, const PpoConfig& cfg,
               const GaeConfig& gae, Rng& rng, const std::function<bool(const UpdateReport&)>& on_update = {});

}  // namespace gridppo
