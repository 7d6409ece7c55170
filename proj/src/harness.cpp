#include "evitrack/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "evitrack/version.hpp"

namespace evitrack {

namespace {

std::vector<MetricKey> metric_keys(const EvalSettings& eval) {
    std::vector<MetricKey> keys;
    for (MetricId id : {MetricId::PLL, MetricId::MSE, MetricId::BA})
        for (int H : eval.horizons) keys.push_back({id, H});
    for (MetricId id : {MetricId::ZMse, MetricId::ZBias, MetricId::ZVar, MetricId::BAFilt,
                        MetricId::ESS, MetricId::EntropyNorm})
        keys.push_back({id, 0});
    return keys;
}

const char* bin_name(DDBinLabel b) {
    switch (b) {
        case DDBinLabel::Early: return "early";
        case DDBinLabel::Mid: return "mid";
        case DDBinLabel::Late: return "late";
    }
    return "?";
}

// Accumulator over trajectories: per (method, key, bin, seed, offset).
struct Acc {
    std::vector<double> sum;
    std::vector<std::int64_t> cnt;
};

struct AggregationGrid {
    int n_methods, n_keys, n_seeds, n_offsets;
    static constexpr int n_bins = 4;  // early, mid, late, all
    std::vector<double> sum;
    std::vector<std::int64_t> cnt;

    AggregationGrid(int nm, int nk, int ns, int no)
        : n_methods(nm), n_keys(nk), n_seeds(ns), n_offsets(no),
          sum(static_cast<std::size_t>(nm) * nk * n_bins * ns * no, 0.0),
          cnt(static_cast<std::size_t>(nm) * nk * n_bins * ns * no, 0) {}

    std::size_t at(int m, int k, int b, int s, int o) const {
        return ((((static_cast<std::size_t>(m) * n_keys + k) * n_bins + b) * n_seeds + s) *
                n_offsets) + o;
    }
};

ItemCurves curves_from_records(const std::vector<StepRecord>& records,
                               const std::vector<MetricKey>& keys, const Trajectory& traj,
                               int window) {
    const int n_offsets = 2 * window + 1;
    ItemCurves c;
    c.traj_id = traj.id;
    c.value.assign(keys.size() * n_offsets, 0.0);
    c.has.assign(keys.size() * n_offsets, 0);
    const int t_dd = *traj.dd_time;
    for (const StepRecord& r : records) {
        int off = r.t - t_dd;
        if (off < -window || off > window) continue;
        MetricKey key{r.id, r.H};
        auto it = std::lower_bound(keys.begin(), keys.end(), key);
        if (it == keys.end() || !(*it == key)) continue;
        std::size_t slot = (it - keys.begin()) * n_offsets + (off + window);
        c.value[slot] = r.value;
        c.has[slot] = 1;
    }
    return c;
}

ExperimentResult reduce_curves(
    const Dataset& ds, const std::vector<MethodSpec>& methods,
    const std::vector<MetricKey>& keys, const HarnessSettings& settings,
    const std::vector<std::vector<ItemCurves>>& curves /* [method*seed][traj] */) {
    const int window = settings.window;
    const int n_offsets = 2 * window + 1;
    const int n_seeds = static_cast<int>(settings.seeds.size());
    const int n_methods = static_cast<int>(methods.size());
    const int n_keys = static_cast<int>(keys.size());

    for (DDBinLabel b : {DDBinLabel::Early, DDBinLabel::Mid, DDBinLabel::Late}) {
        bool any = false;
        for (const Trajectory& t : ds.trajectories) any |= (t.dd_bin == b);
        if (!any) throw EmptyBinError(std::string("no trajectories in bin ") + bin_name(b));
    }

    AggregationGrid grid(n_methods, n_keys, n_seeds, n_offsets);
    for (int m = 0; m < n_methods; ++m) {
        for (int s = 0; s < n_seeds; ++s) {
            const auto& items = curves[static_cast<std::size_t>(m) * n_seeds + s];
            for (const ItemCurves& item : items) {
                const Trajectory& traj = ds.trajectories[item.traj_id];
                int b = static_cast<int>(*traj.dd_bin);
                for (int k = 0; k < n_keys; ++k) {
                    for (int o = 0; o < n_offsets; ++o) {
                        std::size_t slot = static_cast<std::size_t>(k) * n_offsets + o;
                        if (!item.has[slot]) continue;
                        double v = item.value[slot];
                        grid.sum[grid.at(m, k, b, s, o)] += v;
                        grid.cnt[grid.at(m, k, b, s, o)] += 1;
                        grid.sum[grid.at(m, k, 3, s, o)] += v;  // pooled "all"
                        grid.cnt[grid.at(m, k, 3, s, o)] += 1;
                    }
                }
            }
        }
    }

    static const char* bin_names[4] = {"early", "mid", "late", "all"};
    ExperimentResult result;
    for (int m = 0; m < n_methods; ++m) {
        for (int k = 0; k < n_keys; ++k) {
            for (int b = 0; b < 4; ++b) {
                AlignedSeries series;
                series.key = keys[k];
                series.method = methods[m].descriptor;
                series.bin = bin_names[b];
                series.n_seeds = n_seeds;
                series.offsets.resize(n_offsets);
                series.mean.assign(n_offsets, 0.0);
                series.stdev.assign(n_offsets, 0.0);
                series.n.assign(n_offsets, 0);

                // Per-seed pre/post scalars for the summary.
                std::vector<double> pre_seed(n_seeds, 0.0), post_seed(n_seeds, 0.0);
                std::vector<int> pre_n(n_seeds, 0), post_n(n_seeds, 0);

                for (int o = 0; o < n_offsets; ++o) {
                    series.offsets[o] = o - window;
                    std::vector<double> per_seed;
                    per_seed.reserve(n_seeds);
                    for (int s = 0; s < n_seeds; ++s) {
                        std::int64_t c = grid.cnt[grid.at(m, k, b, s, o)];
                        if (c == 0) continue;
                        double mean_s = grid.sum[grid.at(m, k, b, s, o)] / c;
                        per_seed.push_back(mean_s);
                        if (series.offsets[o] < 0) {
                            pre_seed[s] += mean_s;
                            pre_n[s] += 1;
                        } else {
                            post_seed[s] += mean_s;
                            post_n[s] += 1;
                        }
                    }
                    series.n[o] = grid.cnt[grid.at(m, k, b, 0, o)];
                    if (per_seed.empty()) continue;
                    double mu = 0.0;
                    for (double v : per_seed) mu += v;
                    mu /= per_seed.size();
                    series.mean[o] = mu;
                    if (per_seed.size() > 1) {
                        double ss = 0.0;
                        for (double v : per_seed) ss += (v - mu) * (v - mu);
                        series.stdev[o] = std::sqrt(ss / (per_seed.size() - 1));
                    }
                }

                PrePostSummary summary;
                summary.method = series.method;
                summary.bin = series.bin;
                summary.key = series.key;
                std::vector<double> pre_vals, post_vals;
                for (int s = 0; s < n_seeds; ++s) {
                    if (pre_n[s] > 0) pre_vals.push_back(pre_seed[s] / pre_n[s]);
                    if (post_n[s] > 0) post_vals.push_back(post_seed[s] / post_n[s]);
                }
                auto mean_std = [](const std::vector<double>& v, double& mean, double& stdev) {
                    mean = 0.0;
                    stdev = 0.0;
                    if (v.empty()) return;
                    for (double x : v) mean += x;
                    mean /= v.size();
                    if (v.size() > 1) {
                        double ss = 0.0;
                        for (double x : v) ss += (x - mean) * (x - mean);
                        stdev = std::sqrt(ss / (v.size() - 1));
                    }
                };
                mean_std(pre_vals, summary.pre_mean, summary.pre_std);
                mean_std(post_vals, summary.post_mean, summary.post_std);

                result.series.push_back(std::move(series));
                result.summaries.push_back(summary);
            }
        }
    }
    return result;
}

void write_record_file(const std::filesystem::path& path, const std::string& descriptor,
                       std::uint64_t seed, int traj_id, const std::vector<StepRecord>& records,
                       bool append) {
    std::ofstream f(path, append ? std::ios::app : std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    if (!append) {
        f << "# method=" << descriptor << " seed=" << seed << "\n";
        f << "traj\tt\tH\tmetric\tvalue\n";
    }
    f.precision(17);
    for (const StepRecord& r : records)
        f << traj_id << '\t' << r.t << '\t' << r.H << '\t' << metric_name(r.id) << '\t' << r.value
          << '\n';
}

}  // namespace

std::string metric_key_name(const MetricKey& k) {
    std::string n = metric_name(k.id);
    if (k.H > 0) n += "_h" + std::to_string(k.H);
    return n;
}

ExperimentResult run_experiment(const Dataset& ds, const std::vector<MethodSpec>& methods,
                                const WorldModelParams& p, const HarnessSettings& settings,
                                std::uint64_t root_seed, const std::filesystem::path& records_dir) {
    const std::vector<MetricKey> keys = metric_keys(settings.eval);
    const int n_seeds = static_cast<int>(settings.seeds.size());
    const int n_methods = static_cast<int>(methods.size());
    const int n_traj = static_cast<int>(ds.trajectories.size());

    struct WorkItem {
        int m, s, j;
    };
    std::vector<WorkItem> items;
    items.reserve(static_cast<std::size_t>(n_methods) * n_seeds * n_traj);
    for (int m = 0; m < n_methods; ++m)
        for (int s = 0; s < n_seeds; ++s)
            for (int j = 0; j < n_traj; ++j) items.push_back({m, s, j});

    std::vector<std::vector<ItemCurves>> curves(static_cast<std::size_t>(n_methods) * n_seeds);
    for (auto& v : curves) v.resize(n_traj);
    std::vector<std::vector<std::vector<StepRecord>>> kept_records;
    const bool keep = !records_dir.empty();
    if (keep) {
        kept_records.assign(static_cast<std::size_t>(n_methods) * n_seeds, {});
        for (auto& v : kept_records) v.resize(n_traj);
    }
    std::vector<std::uint64_t> clamp_counts(items.size(), 0);

#pragma omp parallel for schedule(dynamic)
    for (std::size_t w = 0; w < items.size(); ++w) {
        const WorkItem& item = items[w];
        const MethodSpec& spec = methods[item.m];
        const Trajectory& traj = ds.trajectories[item.j];
        std::uint64_t method_seed =
            derive_seed(root_seed, "inference:" + spec.descriptor, settings.seeds[item.s], traj.id);
        MetricCollector collector(settings.eval, p, method_seed);
        run_inference(traj, spec.config, p, method_seed, collector);
        curves[static_cast<std::size_t>(item.m) * n_seeds + item.s][item.j] =
            curves_from_records(collector.records, keys, traj, settings.window);
        clamp_counts[w] = collector.clamps.clamps;
        if (keep)
            kept_records[static_cast<std::size_t>(item.m) * n_seeds + item.s][item.j] =
                std::move(collector.records);
    }

    if (keep) {
        std::filesystem::create_directories(records_dir);
        for (int m = 0; m < n_methods; ++m) {
            for (int s = 0; s < n_seeds; ++s) {
                auto path = records_dir / ("records_" + methods[m].descriptor + "_seed" +
                                           std::to_string(settings.seeds[s]) + ".tsv");
                for (int j = 0; j < n_traj; ++j)
                    write_record_file(path, methods[m].descriptor, settings.seeds[s], j,
                                      kept_records[static_cast<std::size_t>(m) * n_seeds + s][j],
                                      j != 0);
            }
        }
    }

    ExperimentResult result = reduce_curves(ds, methods, keys, settings, curves);
    for (std::uint64_t c : clamp_counts) result.clamps.clamps += c;
    return result;
}

ExperimentResult aggregate_records(const Dataset& ds, const std::filesystem::path& records_dir,
                                   const HarnessSettings& settings) {
    const std::vector<MetricKey> keys = metric_keys(settings.eval);
    // Discover record files; group by (method, seed).
    struct FileInfo {
        std::string method;
        std::uint64_t seed;
        std::filesystem::path path;
    };
    std::vector<FileInfo> files;
    for (const auto& entry : std::filesystem::directory_iterator(records_dir)) {
        std::string name = entry.path().filename().string();
        if (name.rfind("records_", 0) != 0 || entry.path().extension() != ".tsv") continue;
        std::string stem = name.substr(8, name.size() - 8 - 4);
        auto pos = stem.rfind("_seed");
        if (pos == std::string::npos) continue;
        files.push_back({stem.substr(0, pos), std::stoull(stem.substr(pos + 5)), entry.path()});
    }
    if (files.empty()) throw std::runtime_error("no record files in " + records_dir.string());
    std::sort(files.begin(), files.end(), [](const FileInfo& a, const FileInfo& b) {
        return a.method != b.method ? a.method < b.method : a.seed < b.seed;
    });

    std::vector<MethodSpec> methods;
    std::vector<std::uint64_t> seeds;
    for (const FileInfo& f : files) {
        if (methods.empty() || methods.back().descriptor != f.method)
            methods.push_back({f.method, {}});
        if (std::find(seeds.begin(), seeds.end(), f.seed) == seeds.end()) seeds.push_back(f.seed);
    }
    std::sort(seeds.begin(), seeds.end());

    HarnessSettings s2 = settings;
    s2.seeds = seeds;
    const int n_seeds = static_cast<int>(seeds.size());
    std::vector<std::vector<ItemCurves>> curves(methods.size() * seeds.size());
    for (auto& v : curves) v.resize(ds.trajectories.size());

    auto name_to_id = [&](const std::string& n) -> std::optional<MetricId> {
        for (int i = 0; i < metric_id_count; ++i)
            if (n == metric_name(static_cast<MetricId>(i))) return static_cast<MetricId>(i);
        return std::nullopt;
    };

    for (const FileInfo& f : files) {
        int m = 0;
        while (methods[m].descriptor != f.method) ++m;
        int s = 0;
        while (seeds[s] != f.seed) ++s;
        std::ifstream in(f.path);
        std::string line;
        std::vector<std::vector<StepRecord>> per_traj(ds.trajectories.size());
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#' || line.rfind("traj\t", 0) == 0) continue;
            std::istringstream ss(line);
            int traj, t, H;
            std::string mname;
            double value;
            ss >> traj >> t >> H >> mname >> value;
            auto id = name_to_id(mname);
            if (!id || traj < 0 || traj >= static_cast<int>(per_traj.size())) continue;
            per_traj[traj].push_back({t, H, *id, value});
        }
        for (std::size_t j = 0; j < per_traj.size(); ++j)
            curves[static_cast<std::size_t>(m) * n_seeds + s][j] =
                curves_from_records(per_traj[j], keys, ds.trajectories[j], settings.window);
    }
    return reduce_curves(ds, methods, keys, s2, curves);
}

namespace {

InferenceConfig evitrack_config(const InferenceConfig& defaults, const ScoreKind& kind, int K,
                                int C, std::optional<int> G) {
    InferenceConfig c = defaults;
    c.method = Method::EviTrack;
    c.kind = kind;
    c.K = K;
    c.C = C;
    c.G = G;
    return c;
}

InferenceConfig baseline_config(const InferenceConfig& defaults, Method m, int N) {
    InferenceConfig c = defaults;
    c.method = m;
    c.kind = ScoreKind::evidence();
    c.K = N;
    c.C = 1;
    c.G = std::nullopt;
    return c;
}

}  // namespace

std::vector<MethodSpec> main_methods(const InferenceConfig& defaults) {
    ScoreKind joint = ScoreKind::joint();
    return {
        {"evitrack-J", evitrack_config(defaults, joint, 32, 2, std::nullopt)},
        {"sis", baseline_config(defaults, Method::SIS, 64)},
        {"bpf", baseline_config(defaults, Method::BPF, 64)},
    };
}

std::vector<MethodSpec> scoring_sweep(const InferenceConfig& defaults) {
    return {
        {"evitrack-J", evitrack_config(defaults, ScoreKind::joint(), 32, 2, std::nullopt)},
        {"evitrack-E", evitrack_config(defaults, ScoreKind::evidence(), 32, 2, std::nullopt)},
        {"evitrack-TBD",
         evitrack_config(defaults, ScoreKind::tbd(defaults.kind.sigma_bg), 32, 2, std::nullopt)},
    };
}

std::vector<MethodSpec> g_sweep(const InferenceConfig& defaults) {
    std::vector<MethodSpec> out;
    for (int g : {1, 5, 10, 20}) {
        out.push_back({"evitrack-J-G" + std::to_string(g),
                       evitrack_config(defaults, ScoreKind::joint(), 32, 2, g)});
    }
    out.push_back({"evitrack-J-Ginf",
                   evitrack_config(defaults, ScoreKind::joint(), 32, 2, std::nullopt)});
    return out;
}

std::vector<MethodSpec> c_sweep(const InferenceConfig& defaults) {
    std::vector<MethodSpec> out;
    for (int c : {2, 4, 8, 16, 32}) {
        int k = 64 / c;
        out.push_back({"evitrack-J-C" + std::to_string(c) + "-K" + std::to_string(k),
                       evitrack_config(defaults, ScoreKind::joint(), k, c, 1)});
    }
    return out;
}

std::vector<MethodSpec> k_sweep(const InferenceConfig& defaults) {
    std::vector<MethodSpec> out;
    for (int k : {2, 4, 8, 16, 32, 64}) {
        int n = 2 * k;  // matched budget N = K*C with C = 2
        out.push_back({"evitrack-J-K" + std::to_string(k),
                       evitrack_config(defaults, ScoreKind::joint(), k, 2, std::nullopt)});
        out.push_back({"sis-N" + std::to_string(n), baseline_config(defaults, Method::SIS, n)});
        out.push_back({"bpf-N" + std::to_string(n), baseline_config(defaults, Method::BPF, n)});
    }
    return out;
}

std::vector<MethodSpec> methods_for_experiment(const std::string& name,
                                               const InferenceConfig& defaults) {
    if (name == "main") return main_methods(defaults);
    if (name == "scoring") return scoring_sweep(defaults);
    if (name == "g-sweep") return g_sweep(defaults);
    if (name == "c-sweep") return c_sweep(defaults);
    if (name == "k-sweep") return k_sweep(defaults);
    if (name == "custom") {
        // Exactly the configured [inference] block, one arm.
        InferenceConfig c = defaults;
        if (c.method != Method::EviTrack) {
            c.kind = ScoreKind::evidence();
            c.C = 1;
        }
        return {{method_descriptor(c), c}};
    }
    throw std::invalid_argument("unknown experiment: " + name);
}

void write_experiment_outputs(const std::filesystem::path& dir, const ExperimentResult& result) {
    std::filesystem::create_directories(dir);
    // One aligned file per metric key.
    std::map<std::string, std::ofstream> files;
    for (const AlignedSeries& s : result.series) {
        std::string key = metric_key_name(s.key);
        auto it = files.find(key);
        if (it == files.end()) {
            auto path = dir / ("aligned_" + key + ".tsv");
            it = files.emplace(key, std::ofstream(path)).first;
            if (!it->second) throw std::runtime_error("cannot write " + path.string());
            it->second << "method\tbin\toffset\tmean\tstd\tn\n";
            it->second.precision(17);
        }
        for (std::size_t o = 0; o < s.offsets.size(); ++o) {
            it->second << s.method << '\t' << s.bin << '\t' << s.offsets[o] << '\t' << s.mean[o]
                       << '\t' << s.stdev[o] << '\t' << s.n[o] << '\n';
        }
    }
    std::ofstream sf(dir / "summary.tsv");
    if (!sf) throw std::runtime_error("cannot write summary.tsv");
    sf << "method\tbin\tmetric\tpre_mean\tpre_std\tpost_mean\tpost_std\n";
    sf.precision(17);
    for (const PrePostSummary& s : result.summaries) {
        sf << s.method << '\t' << s.bin << '\t' << metric_key_name(s.key) << '\t' << s.pre_mean
           << '\t' << s.pre_std << '\t' << s.post_mean << '\t' << s.post_std << '\n';
    }
}

void write_run_manifest(const std::filesystem::path& dir, const std::string& resolved_config,
                        const std::vector<MethodSpec>& methods, const HarnessSettings& settings,
                        std::uint64_t root_seed, const ClampStats& clamps) {
    std::filesystem::create_directories(dir);
    std::ofstream f(dir / "run_manifest.txt");
    if (!f) throw std::runtime_error("cannot write run_manifest.txt");
    f << "# evitrack " << version_string << "\n";
    f << "root_seed = " << root_seed << "\n";
    f << "seeds =";
    for (auto s : settings.seeds) f << ' ' << s;
    f << "\n";
    f << "window = " << settings.window << "\n";
    f << "m_rollouts = " << settings.eval.m_rollouts << "\n";
    f << "horizons =";
    for (int h : settings.eval.horizons) f << ' ' << h;
    f << "\n";
    f << "log_clamps = " << clamps.clamps << "\n";
    f << "methods:\n";
    for (const MethodSpec& m : methods) {
        const InferenceConfig& c = m.config;
        f << "  " << m.descriptor << ": method=" << to_string(c.method)
          << " kind=" << to_string(c.kind) << " K=" << c.K << " C=" << c.C << " G="
          << (c.G ? std::to_string(*c.G) : std::string("inf")) << " keep_children="
          << c.keep_children << " ess_threshold_fraction=" << c.ess_threshold_fraction;
        if (c.kind.tag == ScoreKind::Tag::TBD) f << " sigma_bg=" << c.kind.sigma_bg;
        f << "\n";
    }
    f << "resolved_config:\n" << resolved_config;
}

}  // namespace evitrack
