#pragma once

#include <span>
#include <string>
#include <vector>

#include "evitrack/world_model.hpp"

namespace evitrack {

// Closed-form scalar Kalman recursion for the linear special case
// (v0 = 0 so the drift is the identity, d = 0 so the emission is the
// identity). Independent oracle for the quadrature filter.
struct KalmanResult {
    std::vector<double> mean;
    std::vector<double> var;
};
KalmanResult kalman_oracle(std::span<const double> obs, const WorldModelParams& p);

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

// The built-in oracle suite: kalman, order-stats, additivity,
// metric-identity, sis-equivalence. `filter` selects checks by substring
// (empty runs all).
std::vector<CheckResult> run_verification(const std::string& filter = "");

}  // namespace evitrack
