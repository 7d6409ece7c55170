#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "evitrack/inference.hpp"

namespace evitrack {

// Log-domain guard: values that would be -inf are clamped here and counted.
constexpr double log_floor = -1e9;

struct ClampStats {
    std::uint64_t clamps = 0;
};

struct FilteringStats {
    double z_hat;
    double bias;
    double variance;
    double mse;
    double ba_filt;
};

// Weighted moments of the hypothesis endpoints against the true latent.
// mse = bias^2 + variance holds exactly up to roundoff.
FilteringStats filtering_stats(const HypothesisSet& set, std::span<const double> weights,
                               double z_true);

// 1 / sum(pi^2) for normalized weights.
double ess(std::span<const double> weights);

// -sum pi log pi with 0 log 0 := 0; divided by log K when normalized.
double weight_entropy(std::span<const double> weights, bool normalized);

// M transition-prior rollouts of length H from every hypothesis endpoint;
// returns the count x M endpoint matrix (row-major). Draw order is
// hypothesis-major, rollout-minor, step-inner, so any caller consuming the
// same stream gets identical rollouts.
std::vector<double> rollout_endpoints(const HypothesisSet& set, int H, int M,
                                      const WorldModelParams& p, Rng& rng);

double forecast_pll(const HypothesisSet& set, std::span<const double> weights, double x_future,
                    int H, int M, const WorldModelParams& p, Rng& rng, ClampStats& clamps);

double forecast_mse(const HypothesisSet& set, std::span<const double> weights, double x_future,
                    int H, int M, const WorldModelParams& p, Rng& rng);

double forecast_ba(const HypothesisSet& set, std::span<const double> weights,
                   double z_true_future, int H, int M, const WorldModelParams& p, Rng& rng);

// All three from one rollout bundle (what the run loop uses; the individual
// ops above give identical values when started from the same stream state).
struct ForecastValues {
    double pll;
    double mse;
    double ba;
};
ForecastValues forecast_bundle(const HypothesisSet& set, std::span<const double> weights,
                               double x_future, double z_true_future, int H, int M,
                               const WorldModelParams& p, Rng& rng, ClampStats& clamps);

enum class MetricId : std::uint8_t {
    PLL,
    MSE,
    BA,
    ZMse,
    ZBias,
    ZVar,
    BAFilt,
    ESS,
    EntropyNorm,
};
constexpr int metric_id_count = 9;

// Stable identifier used in file names and record files.
const char* metric_name(MetricId id);

struct StepRecord {
    std::int32_t t;
    std::int32_t H;  // 0 for filtering metrics
    MetricId id;
    double value;
};

struct EvalSettings {
    std::vector<int> horizons{1, 5, 10};
    int m_rollouts = 20;
};

// Emit filtering metrics at time t and forecasting metrics for every
// horizon with t + H <= T. Rollout streams derive from the method seed as
// (seed, "rollout", t, H) so PLL/MSE/BA at one (t, H) share rollouts and
// reruns reproduce them.
void evaluate_step(const HypothesisSet& set, std::span<const double> weights,
                   const Trajectory& traj, int t, const EvalSettings& eval,
                   std::uint64_t method_seed, const WorldModelParams& p,
                   std::vector<StepRecord>& out, ClampStats& clamps);

// Step sink: run_inference calls it after every inference step.
struct StepSink {
    virtual ~StepSink() = default;
    virtual void on_step(const HypothesisSet& set, const std::vector<double>& weights,
                         const Trajectory& traj, int t) = 0;
};

// The rolling loop: init on x_1, then one step per later observation, with
// the sink invoked after every step. Deterministic given seed. Returns the
// final hypothesis set (used by from-scratch score recomputation checks).
HypothesisSet run_inference(const Trajectory& traj, const InferenceConfig& config,
                            const WorldModelParams& p, std::uint64_t seed, StepSink& sink);

// Sink that evaluates the full metric set into a record vector.
class MetricCollector : public StepSink {
  public:
    MetricCollector(const EvalSettings& eval, const WorldModelParams& p, std::uint64_t method_seed)
        : eval_(eval), p_(p), method_seed_(method_seed) {}

    void on_step(const HypothesisSet& set, const std::vector<double>& weights,
                 const Trajectory& traj, int t) override {
        evaluate_step(set, weights, traj, t, eval_, method_seed_, p_, records, clamps);
    }

    std::vector<StepRecord> records;
    ClampStats clamps;

  private:
    EvalSettings eval_;
    WorldModelParams p_;
    std::uint64_t method_seed_;
};

}  // namespace evitrack
