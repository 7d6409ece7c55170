#include "evitrack/verify.hpp"

#include <cmath>
#include <sstream>

#include "evitrack/dataset.hpp"
#include "evitrack/exact_filter.hpp"
#include "evitrack/harness.hpp"
#include "evitrack/metrics.hpp"

namespace evitrack {

KalmanResult kalman_oracle(std::span<const double> obs, const WorldModelParams& p) {
    KalmanResult out;
    out.mean.reserve(obs.size());
    out.var.reserve(obs.size());
    double r = p.sigma_x * p.sigma_x;
    // t = 1: prior N(mu0, sigma0^2), identity emission.
    double pred_m = p.mu0, pred_v = p.sigma0 * p.sigma0;
    for (double x : obs) {
        double gain = pred_v / (pred_v + r);
        double m = pred_m + gain * (x - pred_m);
        double v = (1.0 - gain) * pred_v;
        out.mean.push_back(m);
        out.var.push_back(v);
        pred_m = m;
        pred_v = v + p.sigma_z * p.sigma_z;
    }
    return out;
}

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

CheckResult check_kalman() {
    CheckResult res{"kalman", true, ""};
    WorldModelParams p;
    p.a = 3.0;
    p.v0 = 0.0;  // linear drift
    p.d = 0.0;   // identity emission
    p.sigma_z = 0.3;
    p.sigma_x = 0.5;
    p.mu0 = 0.3;
    p.sigma0 = 1.2;
    p.T = 100;
    QuadratureGrid grid = make_grid(-14.0, 14.0, 2801);
    TransitionKernel kernel = TransitionKernel::build(grid, p);
    double worst = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Trajectory traj = simulate(p, derive_seed(9000, "verify.kalman", seed));
        KalmanResult kf = kalman_oracle(traj.obs, p);
        PosteriorGrid post = filter_posterior(traj.obs, p, grid, kernel);
        for (int t = 0; t < post.T; ++t) {
            auto row = post.row(t);
            double m = 0.0, v = 0.0;
            for (int j = 0; j < grid.n_points; ++j) m += row[j] * grid.nodes[j];
            for (int j = 0; j < grid.n_points; ++j)
                v += row[j] * (grid.nodes[j] - m) * (grid.nodes[j] - m);
            worst = std::max({worst, std::abs(m - kf.mean[t]), std::abs(v - kf.var[t])});
        }
    }
    res.pass = worst < 1e-3;
    std::ostringstream ss;
    ss << "max |grid - kalman| over mean and variance, 20 seeds: " << worst;
    res.detail = ss.str();
    return res;
}

CheckResult check_order_stats() {
    CheckResult res{"order-stats", true, ""};
    WorldModelParams p = bench_params();
    std::ostringstream ss;
    for (int C : {2, 8, 64}) {
        for (double zp : {0.0, p.a / 2.0, p.a}) {
            Rng rng(derive_seed(9100, "verify.orderstats", C, static_cast<int>(zp * 2)));
            DensityCheckResult r =
                selected_child_density_check(p, zp, ScoreKind::evidence(), C, 100000, rng);
            if (!r.pass) res.pass = false;
            ss << "C=" << C << " z=" << zp << " chi2=" << r.chi_square << "/" << r.threshold_99
               << (r.pass ? " ok" : " FAIL") << "; ";
            if (C == 64 && std::abs(r.empirical_mode - r.map_mode) > r.bin_width) {
                res.pass = false;
                ss << "MAP-limit FAIL (mode " << r.empirical_mode << " vs " << r.map_mode << "); ";
            }
        }
    }
    res.detail = ss.str();
    return res;
}

CheckResult check_additivity() {
    CheckResult res{"additivity", true, ""};
    WorldModelParams p = bench_params();
    double worst = 0.0;
    for (int run = 0; run < 50; ++run) {
        ScoreKind kind = run % 3 == 0   ? ScoreKind::joint()
                         : run % 3 == 1 ? ScoreKind::evidence()
                                        : ScoreKind::tbd(1.0);
        InferenceConfig cfg;
        cfg.method = Method::EviTrack;
        cfg.kind = kind;
        cfg.K = 4 + run % 5;
        cfg.C = 1 + run % 3;
        if (run % 4 == 0) cfg.G = 5;
        Trajectory traj = simulate(p, derive_seed(9200, "verify.additivity", run));
        struct NullSink : StepSink {
            void on_step(const HypothesisSet&, const std::vector<double>&, const Trajectory&,
                         int) override {}
        } sink;
        HypothesisSet set = run_inference(traj, cfg, p, derive_seed(9201, "verify.add.seed", run),
                                          sink);
        for (int i = 0; i < set.count; ++i) {
            double s = initial_score(kind, set.state(i, 1), traj.obs[0], p);
            for (int t = 2; t <= set.t; ++t)
                s += score_increment(kind, set.state(i, t - 1), set.state(i, t), traj.obs[t - 1], p);
            worst = std::max(worst, std::abs(s - set.scores[i]));
        }
    }
    res.pass = worst < 1e-9;
    std::ostringstream ss;
    ss << "max |accumulated - recomputed| over 50 runs x 3 kinds: " << worst;
    res.detail = ss.str();
    return res;
}

CheckResult check_metric_identity() {
    CheckResult res{"metric-identity", true, ""};
    WorldModelParams p = bench_params();
    QuadratureGrid grid = make_grid(-6.0, 6.0, 1801);
    DDBins bins;
    Dataset ds = generate_dataset(p, grid, bins, 2, 424242, 0.8);
    InferenceConfig defaults;
    HarnessSettings settings;
    settings.seeds = {0};
    double worst = 0.0;
    std::uint64_t n_records = 0;
    for (const MethodSpec& spec : main_methods(defaults)) {
        for (const Trajectory& traj : ds.trajectories) {
            std::uint64_t seed = derive_seed(9300, "verify.identity:" + spec.descriptor, traj.id);
            MetricCollector collector(settings.eval, p, seed);
            run_inference(traj, spec.config, p, seed, collector);
            // Group z_mse / z_bias / z_var per t and check the decomposition.
            std::vector<double> mse(p.T + 1), bias(p.T + 1), var(p.T + 1);
            for (const StepRecord& r : collector.records) {
                if (r.id == MetricId::ZMse) mse[r.t] = r.value;
                if (r.id == MetricId::ZBias) bias[r.t] = r.value;
                if (r.id == MetricId::ZVar) var[r.t] = r.value;
            }
            for (int t = 2; t <= p.T; ++t) {
                worst = std::max(worst, std::abs(mse[t] - (bias[t] * bias[t] + var[t])));
                ++n_records;
            }
        }
    }
    res.pass = worst < 1e-9;
    std::ostringstream ss;
    ss << "max |mse - (bias^2 + var)| over " << n_records << " filtering records: " << worst;
    res.detail = ss.str();
    return res;
}

CheckResult check_sis_equivalence() {
    CheckResult res{"sis-equivalence", true, ""};
    WorldModelParams p = bench_params();
    struct NullSink : StepSink {
        void on_step(const HypothesisSet&, const std::vector<double>&, const Trajectory&,
                     int) override {}
    } sink;
    bool identical = true;
    for (int j = 0; j < 10 && identical; ++j) {
        Trajectory traj = simulate(p, derive_seed(9400, "verify.sis", j));
        InferenceConfig sis;
        sis.method = Method::SIS;
        sis.kind = ScoreKind::evidence();
        sis.K = 64;
        sis.C = 1;
        InferenceConfig ev;
        ev.method = Method::EviTrack;
        ev.kind = ScoreKind::evidence();
        ev.K = 64;
        ev.C = 1;
        ev.G = std::nullopt;
        std::uint64_t seed = derive_seed(9401, "verify.sis.seed", j);
        HypothesisSet a = run_inference(traj, sis, p, seed, sink);
        HypothesisSet b = run_inference(traj, ev, p, seed, sink);
        identical = a.count == b.count && a.t == b.t && a.prefixes == b.prefixes &&
                    a.scores == b.scores;
    }
    res.pass = identical;
    res.detail = identical ? "SIS and EviTrack-E(C=1) bit-identical on 10 trajectories"
                           : "prefix or score mismatch";
    return res;
}

}  // namespace

std::vector<CheckResult> run_verification(const std::string& filter) {
    std::vector<CheckResult> out;
    auto want = [&](const char* name) {
        return filter.empty() || std::string(name).find(filter) != std::string::npos;
    };
    if (want("kalman")) out.push_back(check_kalman());
    if (want("order-stats")) out.push_back(check_order_stats());
    if (want("additivity")) out.push_back(check_additivity());
    if (want("metric-identity")) out.push_back(check_metric_identity());
    if (want("sis-equivalence")) out.push_back(check_sis_equivalence());
    return out;
}

}  // namespace evitrack
