#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gridppo/dataset.hpp"
#include "gridppo/ppo.hpp"

namespace gridppo {

enum class Optimizer { Adam, Sgd };
const char* to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct PretrainOptions {
    int epochs = 50;
    double lr = 1e-3;
    int batch = 64;
    double holdout = 0.01;  // fraction kept out of training
    std::uint64_t seed = 1;
    Optimizer optimizer = Optimizer::Adam;
};

// Actor inputs (loads over baseMVA) and normalized oracle setpoints, one row per scenario.
struct LabeledSet {
    Mat X;
    Mat Y;
};

/// Throws std::invalid_argument on unlabeled scenarios.
LabeledSet make_examples(const Case& c, const std::vector<Scenario>& scenarios);

struct MseReport {
    double mse_p = 0.0;  // MW²
    double mse_v = 0.0;  // p.u.²
    double rmse_p() const;
    double rmse_v() const;
};

/// Squared errors of the actor mean against the labels, in physical units,
/// averaged over scenarios and over the generators of each block.
MseReport eval_mse(const Case& c, const Policy& policy, const std::vector<Scenario>& scenarios);

struct EpochLoss {
    int epoch = 0;
    double train_mse = 0.0;    // normalized units, mean over the epoch's minibatches
    double heldout_mse = 0.0;  // normalized units, after the epoch; NaN when nothing is held out
};

struct PretrainResult {
    std::vector<EpochLoss> curve;
    MseReport train;
    MseReport heldout;
    std::size_t n_train = 0;
    std::size_t n_heldout = 0;
};

/// Regresses the actor mean onto the labeled setpoints with minibatch MSE.
/// log_std is left alone. Deterministic for a given seed and dataset order.
PretrainResult pretrain_actor(const Case& c, const Dataset& ds, Policy& policy, const PretrainOptions& opt);

void write_loss_curve(const std::vector<EpochLoss>& curve, const std::string& path);

}  // namespace gridppo
