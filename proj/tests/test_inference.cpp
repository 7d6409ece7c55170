#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "evitrack/metrics.hpp"

using namespace evitrack;

namespace {

WorldModelParams bench_params() {
    WorldModelParams p;
    p.a = 3.0;
    p.v0 = 0.06;
    p.dt = 0.03;
    p.sigma_z = 0.02;
    p.d = 2.0;
    p.sigma_x = 0.10;
    p.mu0 = 0.0;
    p.sigma0 = 1.0;
    p.T = 200;
    return p;
}

struct NullSink : StepSink {
    int calls = 0;
    void on_step(const HypothesisSet&, const std::vector<double>&, const Trajectory&,
                 int) override {
        ++calls;
    }
};

HypothesisSet make_set(const std::vector<double>& endpoints, const std::vector<double>& scores) {
    HypothesisSet s;
    s.t = 1;
    s.capacity = 8;
    s.count = static_cast<int>(endpoints.size());
    s.prefixes.assign(static_cast<std::size_t>(s.count) * s.capacity, 0.0);
    s.lineage.assign(static_cast<std::size_t>(s.count) * s.capacity, -1);
    s.scores = scores;
    for (int i = 0; i < s.count; ++i) s.prefixes[static_cast<std::size_t>(i) * s.capacity] = endpoints[i];
    return s;
}

}  // namespace

TEST_CASE("init_hypotheses") {
    WorldModelParams p = bench_params();
    InferenceConfig cfg;
    cfg.K = 32;
    SUBCASE("K prefixes of length one") {
        Rng rng(1);
        HypothesisSet set = init_hypotheses(cfg, p, 0.3, p.T, rng);
        CHECK(set.count == 32);
        CHECK(set.t == 1);
    }
    SUBCASE("degenerate prior gives identical hypotheses") {
        WorldModelParams q = p;
        q.sigma0 = 0.0;
        InferenceConfig ecfg = cfg;
        ecfg.kind = ScoreKind::evidence();  // the point-mass prior has no density
        Rng rng(1);
        HypothesisSet set = init_hypotheses(ecfg, q, 0.3, q.T, rng);
        for (int i = 1; i < set.count; ++i) {
            CHECK(set.state(i, 1) == set.state(0, 1));
            CHECK(set.scores[i] == set.scores[0]);
        }
    }
    SUBCASE("identical rng state reproduces the set") {
        Rng a(7), b(7);
        HypothesisSet s1 = init_hypotheses(cfg, p, 0.3, p.T, a);
        HypothesisSet s2 = init_hypotheses(cfg, p, 0.3, p.T, b);
        CHECK(s1.prefixes == s2.prefixes);
        CHECK(s1.scores == s2.scores);
    }
}

TEST_CASE("evitrack_step keeps the argmax child (replay oracle)") {
    WorldModelParams p = bench_params();
    InferenceConfig cfg;
    cfg.K = 6;
    cfg.C = 3;
    cfg.kind = ScoreKind::joint();
    Rng init_rng(4);
    HypothesisSet set = init_hypotheses(cfg, p, 0.2, p.T, init_rng);
    HypothesisSet before = set;

    Rng step_rng(55);
    Rng replay_rng(55);  // same stream, replayed manually
    double x_new = 0.9;
    evitrack_step(set, x_new, cfg, p, step_rng);

    for (int i = 0; i < cfg.K; ++i) {
        double zp = before.endpoint(i);
        double best_z = 0.0, best_inc = -1e300;
        for (int j = 0; j < cfg.C; ++j) {
            double z = transition_sample(zp, p, replay_rng);
            double inc = score_increment(cfg.kind, zp, z, x_new, p);
            if (inc > best_inc) {
                best_inc = inc;
                best_z = z;
            }
        }
        CHECK(set.state(i, 2) == best_z);
        CHECK(set.scores[i] == before.scores[i] + best_inc);
    }
    CHECK(set.t == 2);
    CHECK(set.count == cfg.K);
}

TEST_CASE("global_prune") {
    SUBCASE("identity at full count") {
        HypothesisSet s = make_set({1.0, 2.0, 3.0}, {3.0, 1.0, 2.0});
        HypothesisSet copy = s;
        global_prune(s, 3);
        CHECK(s.prefixes == copy.prefixes);
        CHECK(s.scores == copy.scores);
    }
    SUBCASE("scores {3,1,2}, keep 2: indices 0 and 2 survive in order") {
        HypothesisSet s = make_set({10.0, 11.0, 12.0}, {3.0, 1.0, 2.0});
        global_prune(s, 2);
        CHECK(s.count == 2);
        CHECK(s.state(0, 1) == 10.0);
        CHECK(s.state(1, 1) == 12.0);
    }
    SUBCASE("all-equal scores keep the lowest index") {
        HypothesisSet s = make_set({10.0, 11.0, 12.0}, {5.0, 5.0, 5.0});
        global_prune(s, 1);
        CHECK(s.count == 1);
        CHECK(s.state(0, 1) == 10.0);
    }
}

TEST_CASE("sis reduction: evitrack-E with C=1 is bit-identical") {
    WorldModelParams p = bench_params();
    p.T = 120;
    Trajectory traj = simulate(p, 31);
    InferenceConfig sis;
    sis.method = Method::SIS;
    sis.kind = ScoreKind::evidence();
    sis.K = 64;
    sis.C = 1;
    InferenceConfig ev = sis;
    ev.method = Method::EviTrack;
    NullSink sink;
    HypothesisSet a = run_inference(traj, sis, p, 1234, sink);
    HypothesisSet b = run_inference(traj, ev, p, 1234, sink);
    CHECK(a.prefixes == b.prefixes);
    CHECK(a.scores == b.scores);
    CHECK(a.count == 64);
}

TEST_CASE("sis weights are the softmax of accumulated emission log-likelihoods") {
    WorldModelParams p = bench_params();
    p.T = 40;
    Trajectory traj = simulate(p, 3);
    InferenceConfig sis;
    sis.method = Method::SIS;
    sis.kind = ScoreKind::evidence();
    sis.K = 16;
    sis.C = 1;
    NullSink sink;
    HypothesisSet set = run_inference(traj, sis, p, 99, sink);
    // Recompute the accumulated emission log-likelihood per particle.
    std::vector<double> acc(set.count);
    for (int i = 0; i < set.count; ++i) {
        double s = 0.0;
        for (int t = 1; t <= set.t; ++t) s += emission_logpdf(traj.obs[t - 1], set.state(i, t), p);
        acc[i] = s;
    }
    double mx = *std::max_element(acc.begin(), acc.end());
    double sum = 0.0;
    for (double v : acc) sum += std::exp(v - mx);
    std::vector<double> w = mixture_weights(set);
    for (int i = 0; i < set.count; ++i)
        CHECK(w[i] == doctest::Approx(std::exp(acc[i] - mx) / sum).epsilon(1e-9));
}

TEST_CASE("bpf resampling") {
    WorldModelParams p = bench_params();
    InferenceConfig cfg;
    cfg.method = Method::BPF;
    cfg.kind = ScoreKind::evidence();
    cfg.K = 64;
    cfg.C = 1;
    SUBCASE("uniform weights: ESS = N, no resample at threshold 0.5") {
        WorldModelParams q = p;
        q.sigma0 = 0.0;   // identical particles
        q.sigma_z = 0.0;  // stay identical after propagation
        Rng rng(1);
        HypothesisSet set = init_hypotheses(cfg, q, 0.1, q.T, rng);
        bpf_step(set, 0.2, cfg, q, rng);
        std::vector<double> w = mixture_weights(set);
        CHECK(ess(w) == doctest::Approx(64.0));
        // No reset happened: scores carry the emission increments.
        CHECK(set.scores[0] != 0.0);
    }
    SUBCASE("one-hot weights: resample fires, all descend from the survivor") {
        Rng rng(5);
        HypothesisSet set = init_hypotheses(cfg, p, 0.1, p.T, rng);
        for (int i = 0; i < set.count; ++i) set.scores[i] = (i == 17) ? 0.0 : -1e9;
        double z17 = set.endpoint(17);
        bpf_step(set, 0.2, cfg, p, rng);
        CHECK(set.count == 64);
        for (int i = 0; i < set.count; ++i) {
            CHECK(set.state(i, 1) == z17);
            CHECK(set.scores[i] == 0.0);  // reset to a common constant
        }
        std::vector<double> w = mixture_weights(set);
        for (double v : w) CHECK(v == doctest::Approx(1.0 / 64).epsilon(1e-12));
    }
    SUBCASE("resampling only duplicates existing prefixes") {
        Rng rng(6);
        HypothesisSet set = init_hypotheses(cfg, p, 0.1, p.T, rng);
        HypothesisSet before = set;
        // Force degeneracy with a spread of scores.
        for (int i = 0; i < set.count; ++i) set.scores[i] = -0.5 * i * i;
        bpf_step(set, 0.2, cfg, p, rng);
        CHECK(set.count == before.count);
        for (int i = 0; i < set.count; ++i) {
            bool found = false;
            for (int j = 0; j < before.count && !found; ++j)
                found = set.state(i, 1) == before.state(j, 1);
            CHECK(found);
        }
    }
}

TEST_CASE("mixture weights") {
    SUBCASE("two equal scores") {
        HypothesisSet s = make_set({0.0, 1.0}, {0.0, 0.0});
        auto w = mixture_weights(s);
        CHECK(w[0] == 0.5);
        CHECK(w[1] == 0.5);
    }
    SUBCASE("guarded -inf saturates") {
        HypothesisSet s = make_set({0.0, 1.0}, {0.0, -1e9});
        auto w = mixture_weights(s);
        CHECK(w[0] == doctest::Approx(1.0));
        CHECK(w[1] == doctest::Approx(0.0));
    }
    SUBCASE("shift invariance") {
        HypothesisSet s = make_set({0.0, 1.0, 2.0}, {1.0, -2.0, 0.5});
        auto w1 = mixture_weights(s);
        for (double& v : s.scores) v += 123.456;
        auto w2 = mixture_weights(s);
        for (int i = 0; i < 3; ++i) CHECK(std::abs(w1[i] - w2[i]) < 1e-12);
    }
}

TEST_CASE("selected-child density") {
    WorldModelParams p = bench_params();
    SUBCASE("C=1 reference reduces to the transition density") {
        Rng rng(8);
        DensityCheckResult r =
            selected_child_density_check(p, 0.5, ScoreKind::evidence(), 1, 10000, rng);
        // Expected counts should match Gaussian bin masses.
        double mu = drift_mean(0.5, p);
        for (std::size_t b = 0; b < r.expected.size(); ++b) {
            double lo = (r.bin_edges[b] - mu) / p.sigma_z;
            double hi = (r.bin_edges[b + 1] - mu) / p.sigma_z;
            if (b == 0) lo = -1e9;
            if (b + 1 == r.expected.size()) hi = 1e9;
            double mass = 0.5 * (std::erf(hi / std::sqrt(2.0)) - std::erf(lo / std::sqrt(2.0)));
            CHECK(r.expected[b] / 10000.0 == doctest::Approx(mass).epsilon(1e-3));
        }
        CHECK(r.pass);
    }
    SUBCASE("C=2 evidence scoring passes the chi-square test") {
        Rng rng(9);
        DensityCheckResult r =
            selected_child_density_check(p, p.a / 2, ScoreKind::evidence(), 2, 100000, rng);
        CHECK(r.pass);
    }
    SUBCASE("C=64 concentrates near the score argmax") {
        Rng rng(10);
        DensityCheckResult r =
            selected_child_density_check(p, p.a / 2, ScoreKind::evidence(), 64, 100000, rng);
        CHECK(std::abs(r.empirical_mode - r.map_mode) <= r.bin_width);
    }
}

TEST_CASE("run_inference loop") {
    WorldModelParams p = bench_params();
    p.T = 3;
    Trajectory traj = simulate(p, 2);
    InferenceConfig sis;
    sis.method = Method::SIS;
    sis.kind = ScoreKind::evidence();
    sis.K = 8;
    sis.C = 1;
    NullSink sink;
    run_inference(traj, sis, p, 4, sink);
    CHECK(sink.calls == 2);  // steps at t = 2 and t = 3
}

TEST_CASE("score additivity end to end") {
    WorldModelParams p = bench_params();
    p.T = 100;
    Trajectory traj = simulate(p, 44);
    for (ScoreKind kind : {ScoreKind::joint(), ScoreKind::evidence(), ScoreKind::tbd(1.0)}) {
        InferenceConfig cfg;
        cfg.method = Method::EviTrack;
        cfg.kind = kind;
        cfg.K = 8;
        cfg.C = 2;
        NullSink sink;
        HypothesisSet set = run_inference(traj, cfg, p, 7, sink);
        for (int i = 0; i < set.count; ++i) {
            double s = initial_score(kind, set.state(i, 1), traj.obs[0], p);
            for (int t = 2; t <= set.t; ++t)
                s += score_increment(kind, set.state(i, t - 1), set.state(i, t), traj.obs[t - 1], p);
            CHECK(std::abs(s - set.scores[i]) < 1e-9);
        }
    }
}

TEST_CASE("keep_children > 1 grows the pool and global pruning truncates") {
    WorldModelParams p = bench_params();
    InferenceConfig cfg;
    cfg.method = Method::EviTrack;
    cfg.K = 4;
    cfg.C = 3;
    cfg.keep_children = 2;
    cfg.G = 2;  // prune back to K at even steps
    Rng rng(12);
    HypothesisSet set = init_hypotheses(cfg, p, 0.1, p.T, rng);
    evitrack_step(set, 0.15, cfg, p, rng);  // t=2: 8 kept, then pruned to 4
    CHECK(set.t == 2);
    CHECK(set.count == 4);
    evitrack_step(set, 0.2, cfg, p, rng);  // t=3: pool of 8 stays (no prune)
    CHECK(set.count == 8);
    evitrack_step(set, 0.25, cfg, p, rng);  // t=4: pruned back to 4
    CHECK(set.count == 4);
}
