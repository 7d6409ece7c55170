#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <vector>

#include "evitrack/exact_filter.hpp"
#include "evitrack/world_model.hpp"

namespace evitrack {

// DD-time bins: early [30, 80), mid [80, 140), late [140, 170]; times below
// 30 or above 170 (or never disambiguating) are rejected.
struct DDBins {
    int reject_below = 30;
    int early_hi = 80;
    int mid_hi = 140;
    int reject_above = 170;

    std::optional<DDBinLabel> classify(int t_dd) const {
        if (t_dd < reject_below || t_dd > reject_above) return std::nullopt;
        if (t_dd < early_hi) return DDBinLabel::Early;
        if (t_dd < mid_hi) return DDBinLabel::Mid;
        return DDBinLabel::Late;
    }
};

struct GenerationStats {
    std::uint64_t attempts = 0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected_below = 0;   // t_DD < reject_below
    std::uint64_t rejected_above = 0;   // t_DD > reject_above
    std::uint64_t rejected_none = 0;    // never crossed tau
    std::uint64_t rejected_full = 0;    // bin already full

    double rejection_fraction() const {
        return attempts == 0 ? 0.0
                             : 1.0 - static_cast<double>(accepted) / static_cast<double>(attempts);
    }
};

struct Dataset {
    std::vector<Trajectory> trajectories;  // ordered by id (acceptance order)
    GenerationStats stats;
};

struct ExhaustedAttemptsError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Rejection-sample per_bin trajectories per DD bin. Candidate c simulates
// with seed derive_seed(root_seed, "dataset.sim", c) and is labeled by the
// exact filter; candidates are processed in blocks in parallel and merged
// in index order, so the result is a pure function of (params, grid, bins,
// per_bin, root_seed, tau). Throws ExhaustedAttemptsError at the cap.
Dataset generate_dataset(const WorldModelParams& p, const QuadratureGrid& grid, const DDBins& bins,
                         int per_bin, std::uint64_t root_seed, double tau,
                         std::uint64_t attempt_cap = 1000000);

// One file per trajectory (rows: t, z_true, x) plus manifest.tsv with the
// per-trajectory sidecar records and generation stats.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace evitrack
