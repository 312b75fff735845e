#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gridppo/dataset.hpp"
#include "gridppo/environment.hpp"
#include "gridppo/imitation.hpp"
#include "gridppo/ppo.hpp"

namespace gridppo {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Everything a gen-data / pretrain / train / eval run needs besides file paths.
struct TrainConfig {
    std::uint64_t seed = 1;
    std::string env = "grid";  // "grid" or "bandit"
    std::string case_path = "data/case14_mod.m";

    std::vector<int> actor_hidden{64, 64};
    std::vector<int> critic_hidden{64, 64};
    double log_std_init = -1.0;

    PpoConfig ppo;
    GaeConfig gae;
    EnvConfig env_cfg;

    PretrainOptions pretrain;
    double pretrain_fraction = 1.0;  // share of the training set used for imitation

    GenerationParams gen{6000, 0.6, 1.4, 1, true};
    std::size_t n_train = 5000;  // the rest of the generated pool is the test set

    int eval_every = 10;              // updates between held-out evaluations; 0 disables
    std::size_t eval_scenarios = 200; // size of the held-out slice
    int checkpoint_every = 50;
    unsigned threads = 1;
    double bandit_optimum = 0.7;
};

/// Parses `key = value` lines grouped under [section] headers; '#' starts a
/// comment. Unknown keys and malformed values raise ConfigError. Keys left out
/// keep their defaults.
TrainConfig parse_config(const std::string& text);
TrainConfig load_config(const std::string& path);

/// Full config in the same format, every key written.
std::string config_text(const TrainConfig& cfg);

std::vector<int> parse_widths(const std::string& s);

}  // namespace gridppo
