#include "evitrack/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace evitrack {

std::string to_string(Method m) {
    switch (m) {
        case Method::EviTrack: return "evitrack";
        case Method::SIS: return "sis";
        case Method::BPF: return "bpf";
    }
    return "?";
}

std::string method_descriptor(const InferenceConfig& c) {
    if (c.method == Method::EviTrack) return "evitrack-" + to_string(c.kind);
    return to_string(c.method);
}

std::vector<double> mixture_weights(const HypothesisSet& set) {
    std::vector<double> w(set.count);
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < set.count; ++i) mx = std::max(mx, set.scores[i]);
    double sum = 0.0;
    for (int i = 0; i < set.count; ++i) {
        w[i] = std::exp(set.scores[i] - mx);
        sum += w[i];
    }
    for (double& v : w) v /= sum;
    return w;
}

HypothesisSet init_hypotheses(const InferenceConfig& config, const WorldModelParams& p, double x1,
                              int capacity, Rng& rng) {
    HypothesisSet set;
    set.t = 1;
    set.capacity = capacity;
    set.count = config.K;
    set.prefixes.assign(static_cast<std::size_t>(set.count) * capacity, 0.0);
    set.lineage.assign(static_cast<std::size_t>(set.count) * capacity, -1);
    set.scores.resize(set.count);
    for (int i = 0; i < set.count; ++i) {
        double z1 = p.mu0 + p.sigma0 * rng.gauss();
        set.prefixes[static_cast<std::size_t>(i) * capacity] = z1;
        set.scores[i] = initial_score(config.kind, z1, x1, p);
    }
    return set;
}

namespace {

void append_state(HypothesisSet& set, int row, int time, double z, int parent) {
    set.prefixes[static_cast<std::size_t>(row) * set.capacity + (time - 1)] = z;
    set.lineage[static_cast<std::size_t>(row) * set.capacity + (time - 1)] = parent;
}

}  // namespace

void evitrack_step(HypothesisSet& set, double x_new, const InferenceConfig& config,
                   const WorldModelParams& p, Rng& rng) {
    const int t_new = set.t + 1;
    if (t_new > set.capacity) throw std::logic_error("hypothesis set capacity exceeded");
    const int keep = std::min(config.keep_children, config.C);

    if (keep == 1) {
        // In-place: each parent row keeps its single best child.
        std::vector<double> children(config.C);
        for (int i = 0; i < set.count; ++i) {
            double zp = set.endpoint(i);
            int best = 0;
            double best_inc = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < config.C; ++j) {
                children[j] = transition_sample(zp, p, rng);
                double inc = score_increment(config.kind, zp, children[j], x_new, p);
                if (inc > best_inc) {  // strict: ties keep the lowest index
                    best_inc = inc;
                    best = j;
                }
            }
            append_state(set, i, t_new, children[best], i);
            set.scores[i] += best_inc;
        }
        set.t = t_new;
    } else {
        // Pool grows; copy surviving rows into a fresh set.
        struct Child {
            int parent;
            double z;
            double score;
        };
        std::vector<Child> kept;
        kept.reserve(static_cast<std::size_t>(set.count) * keep);
        std::vector<std::pair<double, int>> ranked(config.C);  // (increment, child index)
        for (int i = 0; i < set.count; ++i) {
            double zp = set.endpoint(i);
            std::vector<double> children(config.C);
            for (int j = 0; j < config.C; ++j) {
                children[j] = transition_sample(zp, p, rng);
                ranked[j] = {score_increment(config.kind, zp, children[j], x_new, p), j};
            }
            std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
                return a.first > b.first;
            });
            for (int k = 0; k < keep; ++k)
                kept.push_back({i, children[ranked[k].second], set.scores[i] + ranked[k].first});
        }
        HypothesisSet next;
        next.t = t_new;
        next.capacity = set.capacity;
        next.count = static_cast<int>(kept.size());
        next.prefixes.assign(static_cast<std::size_t>(next.count) * next.capacity, 0.0);
        next.lineage.assign(static_cast<std::size_t>(next.count) * next.capacity, -1);
        next.scores.resize(next.count);
        for (int r = 0; r < next.count; ++r) {
            const Child& c = kept[r];
            std::copy_n(set.prefixes.begin() + static_cast<std::size_t>(c.parent) * set.capacity,
                        set.t, next.prefixes.begin() + static_cast<std::size_t>(r) * next.capacity);
            std::copy_n(set.lineage.begin() + static_cast<std::size_t>(c.parent) * set.capacity,
                        set.t, next.lineage.begin() + static_cast<std::size_t>(r) * next.capacity);
            append_state(next, r, t_new, c.z, c.parent);
            next.scores[r] = c.score;
        }
        set = std::move(next);
    }

    if (config.G && t_new % *config.G == 0) global_prune(set, config.K);
}

void global_prune(HypothesisSet& set, int K_keep) {
    if (K_keep > set.count) throw std::invalid_argument("global_prune: K_keep exceeds count");
    if (K_keep == set.count) return;
    std::vector<int> order(set.count);
    std::iota(order.begin(), order.end(), 0);
    // Rank by score descending, index ascending on exact ties.
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (set.scores[a] != set.scores[b]) return set.scores[a] > set.scores[b];
        return a < b;
    });
    std::vector<char> keep(set.count, 0);
    for (int k = 0; k < K_keep; ++k) keep[order[k]] = 1;

    HypothesisSet next;
    next.t = set.t;
    next.capacity = set.capacity;
    next.count = K_keep;
    next.prefixes.assign(static_cast<std::size_t>(K_keep) * set.capacity, 0.0);
    next.lineage.assign(static_cast<std::size_t>(K_keep) * set.capacity, -1);
    next.scores.resize(K_keep);
    int r = 0;
    for (int i = 0; i < set.count; ++i) {
        if (!keep[i]) continue;
        std::copy_n(set.prefixes.begin() + static_cast<std::size_t>(i) * set.capacity, set.t,
                    next.prefixes.begin() + static_cast<std::size_t>(r) * set.capacity);
        std::copy_n(set.lineage.begin() + static_cast<std::size_t>(i) * set.capacity, set.t,
                    next.lineage.begin() + static_cast<std::size_t>(r) * set.capacity);
        next.scores[r] = set.scores[i];
        ++r;
    }
    set = std::move(next);
}

void sis_step(HypothesisSet& set, double x_new, const WorldModelParams& p, Rng& rng) {
    const int t_new = set.t + 1;
    if (t_new > set.capacity) throw std::logic_error("hypothesis set capacity exceeded");
    for (int i = 0; i < set.count; ++i) {
        double z = transition_sample(set.endpoint(i), p, rng);
        append_state(set, i, t_new, z, i);
        set.scores[i] += emission_logpdf(x_new, z, p);
    }
    set.t = t_new;
}

void bpf_step(HypothesisSet& set, double x_new, const InferenceConfig& config,
              const WorldModelParams& p, Rng& rng) {
    sis_step(set, x_new, p, rng);
    const int N = set.count;
    std::vector<double> w = mixture_weights(set);
    double sumsq = 0.0;
    for (double v : w) sumsq += v * v;
    double ess = 1.0 / sumsq;
    if (ess >= config.ess_threshold_fraction * N) return;

    // Systematic resampling: one uniform offset, N evenly spaced positions.
    double u = rng.uniform() / N;
    std::vector<int> idx(N);
    double cum = w[0];
    int j = 0;
    for (int m = 0; m < N; ++m) {
        double pos = u + static_cast<double>(m) / N;
        while (pos > cum && j + 1 < N) cum += w[++j];
        idx[m] = j;
    }
    HypothesisSet next;
    next.t = set.t;
    next.capacity = set.capacity;
    next.count = N;
    next.prefixes.resize(set.prefixes.size());
    next.lineage.resize(set.lineage.size());
    next.scores.assign(N, 0.0);
    for (int m = 0; m < N; ++m) {
        std::copy_n(set.prefixes.begin() + static_cast<std::size_t>(idx[m]) * set.capacity, set.t,
                    next.prefixes.begin() + static_cast<std::size_t>(m) * set.capacity);
        std::copy_n(set.lineage.begin() + static_cast<std::size_t>(idx[m]) * set.capacity, set.t,
                    next.lineage.begin() + static_cast<std::size_t>(m) * set.capacity);
        // Mark the resampling ancestry at the current step.
        next.lineage[static_cast<std::size_t>(m) * set.capacity + (set.t - 1)] = idx[m];
    }
    set = std::move(next);
}

void inference_step(HypothesisSet& set, double x_new, const InferenceConfig& config,
                    const WorldModelParams& p, Rng& rng) {
    switch (config.method) {
        case Method::EviTrack: evitrack_step(set, x_new, config, p, rng); break;
        case Method::SIS: sis_step(set, x_new, p, rng); break;
        case Method::BPF: bpf_step(set, x_new, config, p, rng); break;
    }
}

namespace {

// Chi-square 99% quantile, Wilson-Hilferty approximation. Accurate to well
// under a percent for dof >= 10, which merged bins guarantee here.
double chi2_quantile_99(int dof) {
    constexpr double z99 = 2.3263478740408408;  // Phi^-1(0.99)
    double k = static_cast<double>(dof);
    double c = 1.0 - 2.0 / (9.0 * k) + z99 * std::sqrt(2.0 / (9.0 * k));
    return k * c * c * c;
}

}  // namespace

DensityCheckResult selected_child_density_check(const WorldModelParams& p, double z_parent,
                                                const ScoreKind& kind, int C, int n_samples,
                                                Rng& rng) {
    if (n_samples < 10000) throw std::invalid_argument("density check needs n_samples >= 10^4");
    const double mu = drift_mean(z_parent, p);
    const double x_new = emission_mean(mu, p);

    // Reference density on a fine grid over mu +- 8 sigma_z.
    const int n_fine = 8001;
    const double lo = mu - 8.0 * p.sigma_z, hi = mu + 8.0 * p.sigma_z;
    const double dz = (hi - lo) / (n_fine - 1);
    std::vector<double> zs(n_fine), pw(n_fine), score(n_fine);
    double psum = 0.0;
    for (int i = 0; i < n_fine; ++i) {
        zs[i] = lo + i * dz;
        double r = (zs[i] - mu) / p.sigma_z;
        pw[i] = std::exp(-0.5 * r * r);
        psum += pw[i];
        score[i] = score_increment(kind, z_parent, zs[i], x_new, p);
    }
    for (double& v : pw) v /= psum;

    // F(s) = P(S(Z) <= s) under the transition, via the score-sorted grid.
    std::vector<int> by_score(n_fine);
    std::iota(by_score.begin(), by_score.end(), 0);
    std::sort(by_score.begin(), by_score.end(),
              [&](int a, int b) { return score[a] < score[b]; });
    std::vector<double> F(n_fine);
    double acc = 0.0;
    for (int r = 0; r < n_fine; ++r) {
        acc += pw[by_score[r]];
        F[by_score[r]] = acc;
    }
    std::vector<double> ref(n_fine);
    double rsum = 0.0;
    for (int i = 0; i < n_fine; ++i) {
        ref[i] = C * pw[i] * std::pow(std::min(F[i], 1.0), C - 1);
        rsum += ref[i];
    }
    for (double& v : ref) v /= rsum;

    // Histogram bins over mu +- 5 sigma_z, tails folded into edge bins.
    DensityCheckResult res;
    const int n_bins = 64;
    const double blo = mu - 5.0 * p.sigma_z, bhi = mu + 5.0 * p.sigma_z;
    res.bin_width = (bhi - blo) / n_bins;
    res.bin_edges.resize(n_bins + 1);
    for (int b = 0; b <= n_bins; ++b) res.bin_edges[b] = blo + b * res.bin_width;
    res.observed.assign(n_bins, 0);
    res.expected.assign(n_bins, 0.0);

    auto bin_of = [&](double z) {
        int b = static_cast<int>(std::floor((z - blo) / res.bin_width));
        return std::clamp(b, 0, n_bins - 1);
    };
    for (int i = 0; i < n_fine; ++i) res.expected[bin_of(zs[i])] += ref[i] * n_samples;

    for (int s = 0; s < n_samples; ++s) {
        double best_z = 0.0;
        double best_s = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < C; ++j) {
            double z = transition_sample(z_parent, p, rng);
            double sc = score_increment(kind, z_parent, z, x_new, p);
            if (sc > best_s) {
                best_s = sc;
                best_z = z;
            }
        }
        ++res.observed[bin_of(best_z)];
    }

    // Merge neighbouring bins until every expected count reaches 5.
    std::vector<double> me;
    std::vector<std::int64_t> mo;
    double ce = 0.0;
    std::int64_t co = 0;
    for (int b = 0; b < n_bins; ++b) {
        ce += res.expected[b];
        co += res.observed[b];
        if (ce >= 5.0) {
            me.push_back(ce);
            mo.push_back(co);
            ce = 0.0;
            co = 0;
        }
    }
    if (ce > 0.0 && !me.empty()) {  // fold the remainder into the last bin
        me.back() += ce;
        mo.back() += co;
    }
    res.chi_square = 0.0;
    for (std::size_t b = 0; b < me.size(); ++b) {
        double diff = static_cast<double>(mo[b]) - me[b];
        res.chi_square += diff * diff / me[b];
    }
    res.dof = static_cast<int>(me.size()) - 1;
    res.threshold_99 = chi2_quantile_99(res.dof);
    res.pass = res.chi_square < res.threshold_99;

    int mode_bin = 0;
    for (int b = 1; b < n_bins; ++b)
        if (res.observed[b] > res.observed[mode_bin]) mode_bin = b;
    res.empirical_mode = blo + (mode_bin + 0.5) * res.bin_width;
    int map_i = 0;
    for (int i = 1; i < n_fine; ++i)
        if (score[i] > score[map_i]) map_i = i;
    res.map_mode = zs[map_i];
    return res;
}

}  // namespace evitrack
