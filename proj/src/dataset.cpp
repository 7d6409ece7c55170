#include "evitrack/dataset.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

namespace evitrack {

namespace {

struct Candidate {
    Trajectory traj;
    std::optional<int> t_dd;
};

DDBinLabel bin_from_string(const std::string& s) {
    if (s == "early") return DDBinLabel::Early;
    if (s == "mid") return DDBinLabel::Mid;
    if (s == "late") return DDBinLabel::Late;
    throw std::runtime_error("unknown bin label: " + s);
}

}  // namespace

Dataset generate_dataset(const WorldModelParams& p, const QuadratureGrid& grid, const DDBins& bins,
                         int per_bin, std::uint64_t root_seed, double tau,
                         std::uint64_t attempt_cap) {
    if (per_bin < 1) throw std::invalid_argument("per_bin must be >= 1");
    TransitionKernel kernel = TransitionKernel::build(grid, p);

    Dataset ds;
    int n_early = 0, n_mid = 0, n_late = 0;
    auto full = [&] { return n_early >= per_bin && n_mid >= per_bin && n_late >= per_bin; };

    constexpr int block = 32;
    std::uint64_t next_candidate = 0;
    std::vector<Candidate> cands(block);
    while (!full()) {
        if (next_candidate >= attempt_cap)
            throw ExhaustedAttemptsError(
                "dataset generation exhausted " + std::to_string(attempt_cap) +
                " attempts (early " + std::to_string(n_early) + ", mid " + std::to_string(n_mid) +
                ", late " + std::to_string(n_late) + " of " + std::to_string(per_bin) + ")");
        int this_block =
            static_cast<int>(std::min<std::uint64_t>(block, attempt_cap - next_candidate));
#pragma omp parallel for schedule(dynamic)
        for (int b = 0; b < this_block; ++b) {
            std::uint64_t seed = derive_seed(root_seed, "dataset.sim", next_candidate + b);
            Candidate& c = cands[b];
            c.traj = simulate(p, seed);
            c.traj.true_basin = sign_of(c.traj.latent.back()) > 0 ? 1 : -1;
            c.t_dd = filter_dd_time(c.traj.obs, p, grid, kernel, c.traj.true_basin, tau);
        }
        for (int b = 0; b < this_block; ++b) {
            Candidate& c = cands[b];
            ds.stats.attempts++;
            if (!c.t_dd) {
                ds.stats.rejected_none++;
                continue;
            }
            int t_dd = *c.t_dd;
            if (t_dd < bins.reject_below) {
                ds.stats.rejected_below++;
                continue;
            }
            if (t_dd > bins.reject_above) {
                ds.stats.rejected_above++;
                continue;
            }
            DDBinLabel label = *bins.classify(t_dd);
            int& n = label == DDBinLabel::Early ? n_early : (label == DDBinLabel::Mid ? n_mid : n_late);
            if (n >= per_bin) {
                ds.stats.rejected_full++;
                continue;
            }
            ++n;
            c.traj.dd_time = t_dd;
            c.traj.dd_bin = label;
            c.traj.id = static_cast<int>(ds.trajectories.size());
            ds.stats.accepted++;
            ds.trajectories.push_back(std::move(c.traj));
            if (full()) break;
        }
        next_candidate += this_block;
    }
    return ds;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& ds) {
    std::filesystem::create_directories(dir);
    char buf[64];
    for (const Trajectory& traj : ds.trajectories) {
        std::snprintf(buf, sizeof(buf), "traj_%05d.tsv", traj.id);
        std::ofstream f(dir / buf);
        if (!f) throw std::runtime_error("cannot write " + (dir / buf).string());
        f << "# seed=" << traj.seed << " t_dd=" << (traj.dd_time ? *traj.dd_time : -1)
          << " bin=" << (traj.dd_bin ? to_string(*traj.dd_bin) : "none")
          << " true_basin=" << traj.true_basin << "\n";
        f << "t\tz_true\tx\n";
        f.precision(17);
        for (std::size_t t = 0; t < traj.latent.size(); ++t)
            f << (t + 1) << '\t' << traj.latent[t] << '\t' << traj.obs[t] << '\n';
    }
    std::ofstream m(dir / "manifest.tsv");
    if (!m) throw std::runtime_error("cannot write manifest in " + dir.string());
    m << "# attempts=" << ds.stats.attempts << " accepted=" << ds.stats.accepted
      << " rejected_below=" << ds.stats.rejected_below
      << " rejected_above=" << ds.stats.rejected_above
      << " rejected_none=" << ds.stats.rejected_none
      << " rejected_full=" << ds.stats.rejected_full << " rejection_fraction=";
    m.precision(6);
    m << ds.stats.rejection_fraction() << "\n";
    m << "file\tseed\tt_dd\tbin\ttrue_basin\n";
    for (const Trajectory& traj : ds.trajectories) {
        std::snprintf(buf, sizeof(buf), "traj_%05d.tsv", traj.id);
        m << buf << '\t' << traj.seed << '\t' << (traj.dd_time ? *traj.dd_time : -1) << '\t'
          << (traj.dd_bin ? to_string(*traj.dd_bin) : "none") << '\t' << traj.true_basin << '\n';
    }
}

Dataset read_dataset(const std::filesystem::path& dir) {
    std::ifstream m(dir / "manifest.tsv");
    if (!m) throw std::runtime_error("no manifest.tsv in " + dir.string());
    Dataset ds;
    std::string line;
    while (std::getline(m, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            // Recover the generation stats from the comment header.
            std::istringstream ss(line.substr(1));
            std::string tok;
            while (ss >> tok) {
                auto eq = tok.find('=');
                if (eq == std::string::npos) continue;
                std::string key = tok.substr(0, eq);
                std::uint64_t val = 0;
                std::from_chars(tok.data() + eq + 1, tok.data() + tok.size(), val);
                if (key == "attempts") ds.stats.attempts = val;
                else if (key == "accepted") ds.stats.accepted = val;
                else if (key == "rejected_below") ds.stats.rejected_below = val;
                else if (key == "rejected_above") ds.stats.rejected_above = val;
                else if (key == "rejected_none") ds.stats.rejected_none = val;
                else if (key == "rejected_full") ds.stats.rejected_full = val;
            }
            continue;
        }
        if (line.rfind("file\t", 0) == 0) continue;  // column header
        std::istringstream ss(line);
        std::string file, bin;
        std::uint64_t seed;
        int t_dd, basin;
        ss >> file >> seed >> t_dd >> bin >> basin;
        std::ifstream f(dir / file);
        if (!f) throw std::runtime_error("missing trajectory file " + (dir / file).string());
        Trajectory traj;
        traj.seed = seed;
        if (t_dd > 0) traj.dd_time = t_dd;
        if (bin != "none") traj.dd_bin = bin_from_string(bin);
        traj.true_basin = basin;
        traj.id = static_cast<int>(ds.trajectories.size());
        std::string row;
        while (std::getline(f, row)) {
            if (row.empty() || row[0] == '#' || row[0] == 't') continue;
            std::istringstream rs(row);
            int t;
            double z, x;
            rs >> t >> z >> x;
            traj.latent.push_back(z);
            traj.obs.push_back(x);
        }
        ds.trajectories.push_back(std::move(traj));
    }
    return ds;
}

}  // namespace evitrack
