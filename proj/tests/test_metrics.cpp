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
    p.sigma_x = 0.12;
    p.mu0 = 0.0;
    p.sigma0 = 1.0;
    p.T = 200;
    return p;
}

HypothesisSet make_set(const std::vector<double>& endpoints) {
    HypothesisSet s;
    s.t = 1;
    s.capacity = 4;
    s.count = static_cast<int>(endpoints.size());
    s.prefixes.assign(static_cast<std::size_t>(s.count) * s.capacity, 0.0);
    s.lineage.assign(static_cast<std::size_t>(s.count) * s.capacity, -1);
    s.scores.assign(s.count, 0.0);
    for (int i = 0; i < s.count; ++i) s.prefixes[static_cast<std::size_t>(i) * s.capacity] = endpoints[i];
    return s;
}

}  // namespace

TEST_CASE("pll at the deterministic mode") {
    WorldModelParams p = bench_params();
    p.sigma_z = 0.0;  // rollouts land exactly on the drift mean
    HypothesisSet s = make_set({0.9});
    std::vector<double> w{1.0};
    double x_future = emission_mean(drift_mean(0.9, p), p);
    ClampStats clamps;
    Rng rng(1);
    double pll = forecast_pll(s, w, x_future, 1, 1, p, rng, clamps);
    CHECK(pll == doctest::Approx(1.2013250).epsilon(1e-6));
    CHECK(clamps.clamps == 0);
}

TEST_CASE("duplication invariance with proportional weight split") {
    WorldModelParams p = bench_params();
    p.sigma_z = 0.0;  // deterministic rollouts so duplicates see equal continuations
    HypothesisSet s1 = make_set({0.4, -1.2});
    std::vector<double> w1{0.3, 0.7};
    HypothesisSet s2 = make_set({0.4, -1.2, 0.4, -1.2});
    std::vector<double> w2{0.15, 0.35, 0.15, 0.35};
    ClampStats c;
    Rng r1(2), r2(2), r3(2), r4(2), r5(2), r6(2);
    CHECK(std::abs(forecast_pll(s1, w1, 0.8, 2, 3, p, r1, c) -
                   forecast_pll(s2, w2, 0.8, 2, 3, p, r2, c)) < 1e-9);
    CHECK(std::abs(forecast_mse(s1, w1, 0.8, 2, 3, p, r3) -
                   forecast_mse(s2, w2, 0.8, 2, 3, p, r4)) < 1e-9);
    CHECK(std::abs(forecast_ba(s1, w1, 1.0, 2, 3, p, r5) -
                   forecast_ba(s2, w2, 1.0, 2, 3, p, r6)) < 1e-9);
}

TEST_CASE("forecast mse") {
    WorldModelParams p = bench_params();
    SUBCASE("zero-noise single hypothesis at the well predicts h(a) = a") {
        p.sigma_z = 0.0;
        HypothesisSet s = make_set({p.a});
        std::vector<double> w{1.0};
        Rng rng(3);
        // drift_mean(a) = a, so the H-step rollout stays at the well.
        CHECK(forecast_mse(s, w, p.a, 3, 5, p, rng) == doctest::Approx(0.0));
        Rng rng2(3);
        CHECK(forecast_mse(s, w, p.a + 0.5, 3, 5, p, rng2) == doctest::Approx(0.25));
    }
}

TEST_CASE("forecast ba") {
    WorldModelParams p = bench_params();
    p.sigma_z = 0.0;
    SUBCASE("all rollouts in the correct basin") {
        HypothesisSet s = make_set({2.5});
        std::vector<double> w{1.0};
        Rng rng(4);
        CHECK(forecast_ba(s, w, 2.8, 2, 4, p, rng) == 1.0);
    }
    SUBCASE("half right, half wrong at equal weights") {
        HypothesisSet s = make_set({2.5, -2.5});
        std::vector<double> w{0.5, 0.5};
        Rng rng(4);
        CHECK(forecast_ba(s, w, 2.8, 2, 4, p, rng) == 0.5);
    }
    SUBCASE("rollout at exactly zero counts as positive") {
        WorldModelParams q = bench_params();
        q.sigma_z = 0.0;
        HypothesisSet s = make_set({0.0});  // drift keeps 0 at 0
        std::vector<double> w{1.0};
        Rng rng(4);
        CHECK(forecast_ba(s, w, 0.7, 1, 4, q, rng) == 1.0);
    }
}

TEST_CASE("filtering stats") {
    WorldModelParams p = bench_params();
    SUBCASE("single hypothesis at the truth") {
        HypothesisSet s = make_set({1.3});
        std::vector<double> w{1.0};
        FilteringStats f = filtering_stats(s, w, 1.3);
        CHECK(f.bias == 0.0);
        CHECK(f.variance == 0.0);
        CHECK(f.mse == 0.0);
        CHECK(f.ba_filt == 1.0);
    }
    SUBCASE("two hypotheses at +-1, truth at 1") {
        HypothesisSet s = make_set({1.0, -1.0});
        std::vector<double> w{0.5, 0.5};
        FilteringStats f = filtering_stats(s, w, 1.0);
        CHECK(f.z_hat == 0.0);
        CHECK(f.bias == -1.0);
        CHECK(f.variance == 1.0);
        CHECK(f.mse == 2.0);
        CHECK(f.ba_filt == 0.5);
    }
    SUBCASE("decomposition holds on random sets") {
        Rng rng(5);
        for (int rep = 0; rep < 50; ++rep) {
            int k = 2 + static_cast<int>(rng.uniform() * 6);
            std::vector<double> ends(k), w(k);
            double sum = 0.0;
            for (int i = 0; i < k; ++i) {
                ends[i] = 4.0 * rng.gauss();
                w[i] = rng.uniform() + 1e-3;
                sum += w[i];
            }
            for (double& v : w) v /= sum;
            HypothesisSet s = make_set(ends);
            FilteringStats f = filtering_stats(s, w, rng.gauss());
            CHECK(std::abs(f.mse - (f.bias * f.bias + f.variance)) < 1e-9);
        }
    }
}

TEST_CASE("ess values") {
    std::vector<double> uniform(32, 1.0 / 32);
    CHECK(ess(uniform) == doctest::Approx(32.0).epsilon(1e-12));
    std::vector<double> onehot{1.0, 0.0, 0.0};
    CHECK(ess(onehot) == doctest::Approx(1.0));
    std::vector<double> half{0.5, 0.5};
    CHECK(ess(half) == doctest::Approx(2.0));
}

TEST_CASE("weight entropy") {
    std::vector<double> uniform(8, 1.0 / 8);
    CHECK(weight_entropy(uniform, false) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
    CHECK(weight_entropy(uniform, true) == doctest::Approx(1.0).epsilon(1e-12));
    std::vector<double> onehot{1.0, 0.0};
    CHECK(weight_entropy(onehot, false) == 0.0);
    std::vector<double> mixed{0.5, 0.5, 0.0, 0.0};
    CHECK(weight_entropy(mixed, false) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(weight_entropy(mixed, true) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ess and entropy are permutation-invariant") {
    std::vector<double> w{0.4, 0.3, 0.2, 0.1};
    std::vector<double> perm{0.1, 0.4, 0.2, 0.3};
    CHECK(ess(w) == doctest::Approx(ess(perm)).epsilon(1e-14));
    CHECK(weight_entropy(w, true) == doctest::Approx(weight_entropy(perm, true)).epsilon(1e-14));
}

TEST_CASE("individual forecast ops share rollouts with the bundle") {
    WorldModelParams p = bench_params();
    HypothesisSet s = make_set({0.5, -0.7, 1.9});
    std::vector<double> w{0.2, 0.3, 0.5};
    ClampStats c;
    Rng r0(77), r1(77), r2(77), r3(77);
    ForecastValues fv = forecast_bundle(s, w, 1.1, 0.9, 5, 8, p, r0, c);
    CHECK(fv.pll == forecast_pll(s, w, 1.1, 5, 8, p, r1, c));
    CHECK(fv.mse == forecast_mse(s, w, 1.1, 5, 8, p, r2));
    CHECK(fv.ba == forecast_ba(s, w, 0.9, 5, 8, p, r3));
}

TEST_CASE("pll is stable when doubling rollout count") {
    WorldModelParams p = bench_params();
    p.T = 60;
    InferenceConfig cfg;
    cfg.method = Method::SIS;
    cfg.kind = ScoreKind::evidence();
    cfg.K = 16;
    cfg.C = 1;
    double delta_sum = 0.0;
    int n = 0;
    for (int j = 0; j < 20; ++j) {
        Trajectory traj = simulate(p, derive_seed(500, "mconv", j));

        struct PllSink : StepSink {
            const WorldModelParams* p;
            double sum20 = 0.0, sum40 = 0.0;
            int count = 0;
            void on_step(const HypothesisSet& set, const std::vector<double>& w,
                         const Trajectory& traj, int t) override {
                if (t + 1 > static_cast<int>(traj.obs.size())) return;
                ClampStats c;
                Rng r20(derive_seed(600, "m20", traj.id, t));
                Rng r40(derive_seed(600, "m40", traj.id, t));
                sum20 += forecast_pll(set, w, traj.obs[t], 1, 20, *p, r20, c);
                sum40 += forecast_pll(set, w, traj.obs[t], 1, 40, *p, r40, c);
                ++count;
            }
        } sink;
        sink.p = &p;
        traj.id = j;
        run_inference(traj, cfg, p, derive_seed(700, "mconv.run", j), sink);
        delta_sum += (sink.sum40 - sink.sum20) / sink.count;
        ++n;
    }
    CHECK(std::abs(delta_sum / n) < 0.1);
}

TEST_CASE("evaluate_step emits one record per metric and horizon") {
    WorldModelParams p = bench_params();
    p.T = 12;
    Trajectory traj = simulate(p, 9);
    traj.id = 0;
    InferenceConfig cfg;
    cfg.method = Method::SIS;
    cfg.kind = ScoreKind::evidence();
    cfg.K = 4;
    cfg.C = 1;
    EvalSettings eval;
    eval.horizons = {1, 5, 10};
    eval.m_rollouts = 4;
    MetricCollector collector(eval, p, 42);
    run_inference(traj, cfg, p, 42, collector);
    // t runs 2..12. Filtering: 6 records per step. Forecasts per t:
    // H=1 while t <= 11, H=5 while t <= 7, H=10 while t <= 2.
    int filtering = 11 * 6;
    int forecasts = 3 * (10 + 6 + 1);
    CHECK(static_cast<int>(collector.records.size()) == filtering + forecasts);
}
