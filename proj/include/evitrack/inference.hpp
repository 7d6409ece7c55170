#pragma once

#include <optional>
#include <string>
#include <vector>

#include "evitrack/scoring.hpp"
#include "evitrack/world_model.hpp"

namespace evitrack {

// K retained latent trajectory prefixes with accumulated scores. Prefixes
// and lineage are row-major (count x capacity); column t-1 holds the state
// at time t. Lineage stores the row index each hypothesis extended from at
// that step (-1 at t=1), which after resampling or global pruning traces
// where a trajectory came from.
struct HypothesisSet {
    int t = 0;         // current prefix length
    int capacity = 0;  // reserved columns (trajectory length T)
    int count = 0;
    std::vector<double> prefixes;
    std::vector<int> lineage;
    std::vector<double> scores;

    double state(int i, int time) const {  // time is 1-based
        return prefixes[static_cast<std::size_t>(i) * capacity + (time - 1)];
    }
    double endpoint(int i) const { return state(i, t); }
};

enum class Method { EviTrack, SIS, BPF };

std::string to_string(Method m);

struct InferenceConfig {
    Method method = Method::EviTrack;
    ScoreKind kind = ScoreKind::joint();
    int K = 32;
    int C = 2;                    // children per parent; 1 for SIS/BPF
    std::optional<int> G;         // global prune interval; nullopt = infinity
    int keep_children = 1;        // children retained per parent before global pruning
    double ess_threshold_fraction = 0.5;  // BPF only

    int budget() const { return K * C; }
};

// "evitrack-J" / "evitrack-E" / "evitrack-TBD" / "sis" / "bpf"
std::string method_descriptor(const InferenceConfig& c);

// Normalized mixture weights pi_i = exp(S_i - LSE(S)).
std::vector<double> mixture_weights(const HypothesisSet& set);

// K draws from the initial prior, scored on the first observation.
HypothesisSet init_hypotheses(const InferenceConfig& config, const WorldModelParams& p, double x1,
                              int capacity, Rng& rng);

// Branch each parent into C transition samples, keep the highest-scoring
// keep_children per parent (ties to the lowest child index), then apply
// global top-K pruning when the new time is a multiple of G.
void evitrack_step(HypothesisSet& set, double x_new, const InferenceConfig& config,
                   const WorldModelParams& p, Rng& rng);

// Keep the K_keep highest-scoring trajectories (score desc, index asc on
// ties); survivors stay in their original relative order.
void global_prune(HypothesisSet& set, int K_keep);

// One transition-prior propagation per particle, Evidence score increment.
void sis_step(HypothesisSet& set, double x_new, const WorldModelParams& p, Rng& rng);

// SIS propagation, then systematic resampling when ESS = 1/sum(pi^2) drops
// below the threshold fraction of the particle count; scores reset to 0.
void bpf_step(HypothesisSet& set, double x_new, const InferenceConfig& config,
              const WorldModelParams& p, Rng& rng);

// Dispatch on config.method.
void inference_step(HypothesisSet& set, double x_new, const InferenceConfig& config,
                    const WorldModelParams& p, Rng& rng);

// Empirical-vs-reference comparison of the local selection law: the child
// kept among C transition samples follows C p(z) F(S(z))^(C-1) where F is
// the CDF of the score under the transition. The observation context is
// x = h(mu(z_parent)). Reference probabilities come from a fine quadrature
// grid over mu +- 8 sigma_z; the chi-square statistic is computed over
// 64 bins spanning mu +- 5 sigma_z (tails folded into the edge bins,
// low-expectation bins merged), with the 99% quantile threshold.
struct DensityCheckResult {
    std::vector<double> bin_edges;
    std::vector<std::int64_t> observed;
    std::vector<double> expected;  // counts, same scale as observed
    double chi_square = 0.0;
    int dof = 0;
    double threshold_99 = 0.0;
    bool pass = false;
    double empirical_mode = 0.0;  // bin centers
    double map_mode = 0.0;        // argmax_z S(z) by grid search
    double bin_width = 0.0;
};

DensityCheckResult selected_child_density_check(const WorldModelParams& p, double z_parent,
                                                const ScoreKind& kind, int C, int n_samples,
                                                Rng& rng);

}  // namespace evitrack
