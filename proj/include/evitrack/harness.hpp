#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evitrack/dataset.hpp"
#include "evitrack/metrics.hpp"

namespace evitrack {

// One experiment arm: a descriptor that keys every output row plus the
// inference configuration behind it.
struct MethodSpec {
    std::string descriptor;
    InferenceConfig config;
};

struct HarnessSettings {
    EvalSettings eval;
    std::vector<std::uint64_t> seeds{0, 1, 2};
    int window = 20;  // offsets in [-window, +window] around t_DD
};

// A metric column: forecasting metrics carry their horizon, filtering
// metrics use H = 0.
struct MetricKey {
    MetricId id;
    int H;
    bool operator<(const MetricKey& o) const {
        return id != o.id ? id < o.id : H < o.H;
    }
    bool operator==(const MetricKey& o) const { return id == o.id && H == o.H; }
};

std::string metric_key_name(const MetricKey& k);  // e.g. "pll_h1", "ba_filt"

// Mean and across-seed sample std of the per-seed trajectory means at each
// offset around t_DD.
struct AlignedSeries {
    MetricKey key;
    std::string method;
    std::string bin;  // "early" / "mid" / "late" / "all"
    std::vector<int> offsets;
    std::vector<double> mean;
    std::vector<double> stdev;
    std::vector<std::int64_t> n;  // trajectory contributions per offset (per seed)
    int n_seeds = 0;
};

struct PrePostSummary {
    std::string method;
    std::string bin;
    MetricKey key;
    double pre_mean = 0.0, pre_std = 0.0;
    double post_mean = 0.0, post_std = 0.0;
};

struct EmptyBinError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ExperimentResult {
    std::vector<AlignedSeries> series;
    std::vector<PrePostSummary> summaries;
    ClampStats clamps;
};

// Per-trajectory aligned curves for one (method, seed, trajectory) work
// item; the raw material both aggregation paths (in-memory and record
// files) reduce over.
struct ItemCurves {
    int traj_id;
    std::vector<double> value;  // key-major, offset-minor
    std::vector<char> has;
};

// Runs every (method, seed, trajectory) item and aggregates. Work items
// execute in parallel; aggregation folds them in a fixed order, so results
// are bit-identical regardless of thread count. If records_dir is set,
// per-(method, seed) record files are written for later re-aggregation.
ExperimentResult run_experiment(const Dataset& ds, const std::vector<MethodSpec>& methods,
                                const WorldModelParams& p, const HarnessSettings& settings,
                                std::uint64_t root_seed,
                                const std::filesystem::path& records_dir = {});

// Aggregate pre-computed records (the summarize path).
ExperimentResult aggregate_records(const Dataset& ds, const std::filesystem::path& records_dir,
                                   const HarnessSettings& settings);

// The named experiments. The inference defaults (sigma_bg,
// ess_threshold_fraction, keep_children) come from `defaults`.
std::vector<MethodSpec> main_methods(const InferenceConfig& defaults);
std::vector<MethodSpec> scoring_sweep(const InferenceConfig& defaults);
std::vector<MethodSpec> g_sweep(const InferenceConfig& defaults);
std::vector<MethodSpec> c_sweep(const InferenceConfig& defaults);
std::vector<MethodSpec> k_sweep(const InferenceConfig& defaults);
std::vector<MethodSpec> methods_for_experiment(const std::string& name,
                                               const InferenceConfig& defaults);

// Output writers. Aligned series go to aligned_<metric>.tsv (one file per
// metric: columns method, bin, offset, mean, std, n), summaries to
// summary.tsv (method, bin, metric, pre_mean, pre_std, post_mean,
// post_std). Infinite G serializes as "inf" in manifests.
void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result);
void write_run_manifest(const std::filesystem::path& dir, const std::string& resolved_config,
                        const std::vector<MethodSpec>& methods, const HarnessSettings& settings,
                        std::uint64_t root_seed, const ClampStats& clamps);

}  // namespace evitrack
