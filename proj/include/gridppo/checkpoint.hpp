#pragma once

#include <optional>
#include <stdexcept>
#include <string>

#include "gridppo/case.hpp"
#include "gridppo/ppo.hpp"
#include "gridppo/scenario.hpp"

namespace gridppo {

inline constexpr int kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Setpoint boxes and load scale the actor was trained against.
struct Normalization {
    double base_mva = 100.0;
    Vec pg_min, pg_max, vg_min, vg_max;
};
Normalization normalization_of(const Case& c);
bool operator==(const Normalization& a, const Normalization& b);

struct Checkpoint {
    int version = kCheckpointVersion;
    std::string case_fingerprint;  // empty for non-grid environments
    Normalization normalization;
    Calibration calibration;
    Policy policy;
    Critic critic;
    Optimizers optimizers;
    int update = 0;           // PPO updates applied so far
    std::string stage;        // "init", "pretrain" or "train"
    std::string config_text;  // run configuration that produced it
};

/// JSON document; written to a sibling temporary file and renamed into place
/// so an interrupted write never replaces a good checkpoint.
void save_checkpoint(const Checkpoint& ck, const std::string& path);

/// Throws CheckpointError on a malformed file, an unknown version, or a case
/// fingerprint different from `expected_fingerprint`.
Checkpoint load_checkpoint(const std::string& path,
                           const std::optional<std::string>& expected_fingerprint = std::nullopt);

std::string checkpoint_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);

}  // namespace gridppo
