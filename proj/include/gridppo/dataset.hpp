#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gridppo/case.hpp"
#include "gridppo/opf.hpp"
#include "gridppo/scenario.hpp"

namespace gridppo {

inline constexpr int kDatasetVersion = 1;

struct GenerationParams {
    std::size_t n = 0;
    double load_lo = 0.6;
    double load_hi = 1.4;
    std::uint64_t seed = 1;
    bool per_bus = true;  // false draws one multiplier for the whole system
};

struct Dataset {
    int version = kDatasetVersion;
    std::string case_fingerprint;
    GenerationParams params;
    Calibration calibration;
    std::size_t n_generated = 0;
    std::size_t n_infeasible = 0;
    std::size_t n_failed = 0;
    std::vector<Scenario> scenarios;
};

class DatasetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loads are the case's base loads times a uniform draw in [lo, hi] (one per
/// bus, reactive load scaled with the same factor); Pg0 and Vg0 are uniform in
/// the generator boxes. Ids follow generation order.
std::vector<Scenario> generate_scenarios(const Case& c, const GenerationParams& params);

struct LabelOptions {
    unsigned threads = 1;             // 0 picks the hardware concurrency
    double max_failure_rate = 0.05;   // oracle failures (not infeasibility) tolerated
    std::size_t min_checked = 20;     // failures are judged once this many scenarios are done
    double replay_tol = 1e-4;
    OpfOptions opf;
};

enum class LabelOutcome { Labeled, Infeasible, Failed };

/// Solves one scenario and replays the optimum through the power flow.
/// Oracle iteration limits and unclean replays count as failures.
LabelOutcome label_scenario(const Case& c, Scenario& s, const LabelOptions& opt);

class LabelingError : public std::runtime_error {
public:
    LabelingError(const std::string& what, Dataset partial) : std::runtime_error(what), partial_(std::move(partial)) {}
    const Dataset& partial() const { return partial_; }

private:
    Dataset partial_;
};

/// Labels every scenario, drops infeasible ones and calibrates rewards on the
/// survivors. Throws LabelingError, carrying what was labeled so far, when
/// failures exceed the configured rate.
Dataset label_scenarios(const Case& c, const std::vector<Scenario>& scenarios, const GenerationParams& params,
                        const LabelOptions& opt = {});

// Precomputed oracle result for one scenario id.
struct ExternalLabel {
    std::uint64_t id = 0;
    bool feasible = false;
    Vec Pg_opt, Vg_opt;
    double cost_opt = 0.0;
};

/// One JSON object per line: {"id", "feasible", "Pg_opt", "Vg_opt", "cost_opt"}.
std::vector<ExternalLabel> load_labels(const std::string& path);
void save_labels(const std::vector<ExternalLabel>& labels, const std::string& path);

/// Like label_scenarios but takes optima from `labels` instead of the oracle.
/// Scenarios without a label are counted as failures.
Dataset ingest_labels(const Case& c, const std::vector<Scenario>& scenarios, const std::vector<ExternalLabel>& labels,
                      const GenerationParams& params, const LabelOptions& opt = {});

/// Seeded shuffle into train and test. Calibration is recomputed on the train
/// part and copied to both.
std::pair<Dataset, Dataset> split(const Dataset& ds, std::size_t n_train, std::uint64_t seed);
std::pair<Dataset, Dataset> split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// The first ceil(fraction·N) scenarios of a seeded shuffle, calibration kept.
Dataset take_fraction(const Dataset& ds, double fraction, std::uint64_t seed);

/// JSON-lines by default; a ".bin" extension selects the binary columnar form.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path, const std::optional<std::string>& expected_fingerprint = std::nullopt);

}  // namespace gridppo
