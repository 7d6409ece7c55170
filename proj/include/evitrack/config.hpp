#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evitrack/dataset.hpp"
#include "evitrack/harness.hpp"

namespace evitrack {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Full run configuration, loaded from an INI-style key-value file with
// [section] headers. Unknown sections or keys are rejected. The literal
// "inf" denotes an infinite global-pruning interval.
struct RunConfig {
    WorldModelParams world;

    struct GridBlock {
        double z_min = -6.0;
        double z_max = 6.0;
        int n_points = 1201;
    } grid;

    struct DatasetBlock {
        int per_bin = 100;
        double tau = 0.8;
        std::uint64_t root_seed = 0;
        std::uint64_t attempt_cap = 1000000;
        DDBins bins;
    } dataset;

    InferenceConfig inference_defaults;  // sigma_bg, ess fraction, keep_children

    HarnessSettings harness;

    std::filesystem::path output_dir = "out";

    QuadratureGrid make_quadrature_grid() const {
        return make_grid(grid.z_min, grid.z_max, grid.n_points);
    }
};

// Parse and validate. EVITRACK_SEED in the environment overrides
// dataset.root_seed. Throws ConfigError on unknown keys, malformed values,
// or world-model validation failures; stability warnings go to warnings.
RunConfig load_config(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

// Parse from an in-memory string (used by tests and the shipped defaults).
RunConfig parse_config(const std::string& text, std::vector<std::string>* warnings = nullptr);

// The benchmark defaults as a config-file string; parse_config(default_config_text())
// is what `gen-data` and `run` use when no --config is given.
std::string default_config_text();

// Serialize a resolved config back to the file format (round-trips through
// parse_config; embedded in run manifests).
std::string serialize_config(const RunConfig& cfg);

}  // namespace evitrack
