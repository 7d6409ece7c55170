#include "evitrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evitrack {

FilteringStats filtering_stats(const HypothesisSet& set, std::span<const double> weights,
                               double z_true) {
    FilteringStats s{};
    for (int i = 0; i < set.count; ++i) s.z_hat += weights[i] * set.endpoint(i);
    s.bias = s.z_hat - z_true;
    double ts = sign_of(z_true);
    for (int i = 0; i < set.count; ++i) {
        double z = set.endpoint(i);
        s.variance += weights[i] * (z - s.z_hat) * (z - s.z_hat);
        s.mse += weights[i] * (z - z_true) * (z - z_true);
        if (sign_of(z) == ts) s.ba_filt += weights[i];
    }
    return s;
}

double ess(std::span<const double> weights) {
    double sumsq = 0.0;
    for (double w : weights) sumsq += w * w;
    return 1.0 / sumsq;
}

double weight_entropy(std::span<const double> weights, bool normalized) {
    double h = 0.0;
    for (double w : weights)
        if (w > 0.0) h -= w * std::log(w);
    if (!normalized) return h;
    if (weights.size() < 2) return 0.0;
    return h / std::log(static_cast<double>(weights.size()));
}

std::vector<double> rollout_endpoints(const HypothesisSet& set, int H, int M,
                                      const WorldModelParams& p, Rng& rng) {
    std::vector<double> ends(static_cast<std::size_t>(set.count) * M);
    for (int i = 0; i < set.count; ++i) {
        double z0 = set.endpoint(i);
        for (int m = 0; m < M; ++m) {
            double z = z0;
            for (int h = 0; h < H; ++h) z = transition_sample(z, p, rng);
            ends[static_cast<std::size_t>(i) * M + m] = z;
        }
    }
    return ends;
}

namespace {

double pll_from(const HypothesisSet& set, std::span<const double> weights,
                std::span<const double> ends, double x_future, int M, const WorldModelParams& p,
                ClampStats& clamps) {
    double total_max = -std::numeric_limits<double>::infinity();
    std::vector<double> terms(set.count);
    const double log_m = std::log(static_cast<double>(M));
    for (int i = 0; i < set.count; ++i) {
        // l_i = LSE_m emission_logpdf(x_future, z_im) - log M
        double mx = -std::numeric_limits<double>::infinity();
        for (int m = 0; m < M; ++m)
            mx = std::max(mx, emission_logpdf(x_future, ends[static_cast<std::size_t>(i) * M + m], p));
        double s = 0.0;
        for (int m = 0; m < M; ++m)
            s += std::exp(emission_logpdf(x_future, ends[static_cast<std::size_t>(i) * M + m], p) - mx);
        double li = mx + std::log(s) - log_m;
        if (li < log_floor) {
            li = log_floor;
            ++clamps.clamps;
        }
        double lw;
        if (weights[i] > 0.0) {
            lw = std::log(weights[i]);
        } else {
            lw = log_floor;
            ++clamps.clamps;
        }
        terms[i] = lw + li;
        total_max = std::max(total_max, terms[i]);
    }
    double s = 0.0;
    for (double v : terms) s += std::exp(v - total_max);
    return total_max + std::log(s);
}

double mse_from(const HypothesisSet& set, std::span<const double> weights,
                std::span<const double> ends, double x_future, int M, const WorldModelParams& p) {
    double xhat = 0.0;
    for (int i = 0; i < set.count; ++i) {
        double mean_h = 0.0;
        for (int m = 0; m < M; ++m)
            mean_h += emission_mean(ends[static_cast<std::size_t>(i) * M + m], p);
        xhat += weights[i] * mean_h / M;
    }
    double e = xhat - x_future;
    return e * e;
}

double ba_from(const HypothesisSet& set, std::span<const double> weights,
               std::span<const double> ends, double z_true_future, int M) {
    double ts = sign_of(z_true_future);
    double ba = 0.0;
    for (int i = 0; i < set.count; ++i) {
        int hits = 0;
        for (int m = 0; m < M; ++m)
            if (sign_of(ends[static_cast<std::size_t>(i) * M + m]) == ts) ++hits;
        ba += weights[i] * hits / M;
    }
    return ba;
}

}  // namespace

double forecast_pll(const HypothesisSet& set, std::span<const double> weights, double x_future,
                    int H, int M, const WorldModelParams& p, Rng& rng, ClampStats& clamps) {
    auto ends = rollout_endpoints(set, H, M, p, rng);
    return pll_from(set, weights, ends, x_future, M, p, clamps);
}

double forecast_mse(const HypothesisSet& set, std::span<const double> weights, double x_future,
                    int H, int M, const WorldModelParams& p, Rng& rng) {
    auto ends = rollout_endpoints(set, H, M, p, rng);
    return mse_from(set, weights, ends, x_future, M, p);
}

double forecast_ba(const HypothesisSet& set, std::span<const double> weights,
                   double z_true_future, int H, int M, const WorldModelParams& p, Rng& rng) {
    auto ends = rollout_endpoints(set, H, M, p, rng);
    return ba_from(set, weights, ends, z_true_future, M);
}

ForecastValues forecast_bundle(const HypothesisSet& set, std::span<const double> weights,
                               double x_future, double z_true_future, int H, int M,
                               const WorldModelParams& p, Rng& rng, ClampStats& clamps) {
    auto ends = rollout_endpoints(set, H, M, p, rng);
    return {pll_from(set, weights, ends, x_future, M, p, clamps),
            mse_from(set, weights, ends, x_future, M, p),
            ba_from(set, weights, ends, z_true_future, M)};
}

const char* metric_name(MetricId id) {
    switch (id) {
        case MetricId::PLL: return "pll";
        case MetricId::MSE: return "mse";
        case MetricId::BA: return "ba";
        case MetricId::ZMse: return "z_mse";
        case MetricId::ZBias: return "z_bias";
        case MetricId::ZVar: return "z_var";
        case MetricId::BAFilt: return "ba_filt";
        case MetricId::ESS: return "ess";
        case MetricId::EntropyNorm: return "weight_entropy";
    }
    return "?";
}

void evaluate_step(const HypothesisSet& set, std::span<const double> weights,
                   const Trajectory& traj, int t, const EvalSettings& eval,
                   std::uint64_t method_seed, const WorldModelParams& p,
                   std::vector<StepRecord>& out, ClampStats& clamps) {
    const int T = static_cast<int>(traj.obs.size());
    double z_true = traj.latent[t - 1];
    FilteringStats fs = filtering_stats(set, weights, z_true);
    out.push_back({t, 0, MetricId::ZMse, fs.mse});
    out.push_back({t, 0, MetricId::ZBias, fs.bias});
    out.push_back({t, 0, MetricId::ZVar, fs.variance});
    out.push_back({t, 0, MetricId::BAFilt, fs.ba_filt});
    out.push_back({t, 0, MetricId::ESS, ess(weights)});
    out.push_back({t, 0, MetricId::EntropyNorm, weight_entropy(weights, true)});

    for (int H : eval.horizons) {
        if (t + H > T) continue;
        Rng rng(derive_seed(method_seed, "rollout", t, H));
        ForecastValues fv = forecast_bundle(set, weights, traj.obs[t + H - 1],
                                            traj.latent[t + H - 1], H, eval.m_rollouts, p, rng,
                                            clamps);
        out.push_back({t, H, MetricId::PLL, fv.pll});
        out.push_back({t, H, MetricId::MSE, fv.mse});
        out.push_back({t, H, MetricId::BA, fv.ba});
    }
}

HypothesisSet run_inference(const Trajectory& traj, const InferenceConfig& config,
                            const WorldModelParams& p, std::uint64_t seed, StepSink& sink) {
    const int T = static_cast<int>(traj.obs.size());
    if (T < 2) throw std::invalid_argument("run_inference: trajectory too short");
    Rng rng(seed);
    HypothesisSet set = init_hypotheses(config, p, traj.obs[0], T, rng);
    for (int t = 2; t <= T; ++t) {
        inference_step(set, traj.obs[t - 1], config, p, rng);
        sink.on_step(set, mixture_weights(set), traj, t);
    }
    return set;
}

}  // namespace evitrack
