#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gridppo/checkpoint.hpp"
#include "gridppo/config.hpp"
#include "gridppo/dataset.hpp"
#include "gridppo/evaluation.hpp"

namespace gridppo {

struct TrainLogRow {
    int update = 0;
    double mean_return = 0.0;
    double actor_loss = 0.0;
    double critic_loss = 0.0;
    double clip_fraction = 0.0;
    double approx_kl = 0.0;
    double log_std_mean = 0.0;
    double eval_success = 0.0;        // NaN on updates without evaluation
    double eval_mean_deviation = 0.0; // percent, NaN likewise
};

struct TrainOutcome {
    Checkpoint checkpoint;  // last good state
    std::vector<TrainLogRow> log;
    bool aborted = false;
    std::string abort_reason;
};

/// Fresh networks for the case (or the bandit) with the configured widths,
/// log_std initialization and seed.
Checkpoint initial_checkpoint(const TrainConfig& cfg, const Case* c);

/// Imitation pretraining of `ck` on ceil(pretrain_fraction·N) of `train`.
PretrainResult pretrain_checkpoint(const TrainConfig& cfg, const Case& c, const Dataset& train, Checkpoint& ck);

struct TrainHooks {
    std::string checkpoint_path;  // written every checkpoint_every updates and at the end; empty skips
    std::string log_path;         // CSV, rewritten as rows arrive; empty skips
    std::function<void(const TrainLogRow&)> on_row;
};

/// PPO from `init` for cfg.ppo.updates updates. Rollouts draw scenarios from
/// `train`; every eval_every updates the deterministic actor is scored on
/// `eval`. A numerical failure stops training and returns the last good
/// checkpoint with `aborted` set.
TrainOutcome run_training(const TrainConfig& cfg, const Case& c, const Dataset& train,
                          const std::vector<Scenario>& eval, Checkpoint init, const TrainHooks& hooks = {});

/// Same loop on the one-dimensional bandit.
TrainOutcome run_bandit_training(const TrainConfig& cfg, Checkpoint init, const TrainHooks& hooks = {});

void write_train_log(const std::vector<TrainLogRow>& log, const std::string& path);

}  // namespace gridppo
