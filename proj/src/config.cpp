#include "evitrack/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace evitrack {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

double parse_double(const std::string& section, const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad numeric value for " + section + "." + key + ": '" + v + "'");
    }
}

std::int64_t parse_int(const std::string& section, const std::string& key, const std::string& v) {
    std::int64_t x = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ConfigError("bad integer value for " + section + "." + key + ": '" + v + "'");
    return x;
}

std::vector<std::string> split_csv(const std::string& v) {
    std::vector<std::string> out;
    std::istringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(trim(tok));
    return out;
}

}  // namespace

RunConfig parse_config(const std::string& text, std::vector<std::string>* warnings) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section != "world" && section != "grid" && section != "dataset" &&
                section != "inference" && section != "evaluation" && section != "output")
                throw ConfigError("unknown section [" + section + "]");
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError("key '" + key + "' outside any section");

        auto unknown = [&] {
            throw ConfigError("unknown key " + section + "." + key);
        };
        if (section == "world") {
            if (key == "a") cfg.world.a = parse_double(section, key, value);
            else if (key == "v0") cfg.world.v0 = parse_double(section, key, value);
            else if (key == "dt") cfg.world.dt = parse_double(section, key, value);
            else if (key == "sigma_z") cfg.world.sigma_z = parse_double(section, key, value);
            else if (key == "d") cfg.world.d = parse_double(section, key, value);
            else if (key == "sigma_x") cfg.world.sigma_x = parse_double(section, key, value);
            else if (key == "mu0") cfg.world.mu0 = parse_double(section, key, value);
            else if (key == "sigma0") cfg.world.sigma0 = parse_double(section, key, value);
            else if (key == "T") cfg.world.T = static_cast<int>(parse_int(section, key, value));
            else unknown();
        } else if (section == "grid") {
            if (key == "z_min") cfg.grid.z_min = parse_double(section, key, value);
            else if (key == "z_max") cfg.grid.z_max = parse_double(section, key, value);
            else if (key == "n_points") cfg.grid.n_points = static_cast<int>(parse_int(section, key, value));
            else unknown();
        } else if (section == "dataset") {
            if (key == "per_bin") cfg.dataset.per_bin = static_cast<int>(parse_int(section, key, value));
            else if (key == "tau") cfg.dataset.tau = parse_double(section, key, value);
            else if (key == "root_seed") cfg.dataset.root_seed = static_cast<std::uint64_t>(parse_int(section, key, value));
            else if (key == "attempt_cap") cfg.dataset.attempt_cap = static_cast<std::uint64_t>(parse_int(section, key, value));
            else if (key == "bin_early_lo") cfg.dataset.bins.reject_below = static_cast<int>(parse_int(section, key, value));
            else if (key == "bin_early_hi") cfg.dataset.bins.early_hi = static_cast<int>(parse_int(section, key, value));
            else if (key == "bin_mid_hi") cfg.dataset.bins.mid_hi = static_cast<int>(parse_int(section, key, value));
            else if (key == "bin_late_hi") cfg.dataset.bins.reject_above = static_cast<int>(parse_int(section, key, value));
            else unknown();
        } else if (section == "inference") {
            if (key == "sigma_bg") cfg.inference_defaults.kind.sigma_bg = parse_double(section, key, value);
            else if (key == "ess_threshold_fraction") cfg.inference_defaults.ess_threshold_fraction = parse_double(section, key, value);
            else if (key == "keep_children") cfg.inference_defaults.keep_children = static_cast<int>(parse_int(section, key, value));
            else if (key == "method") {
                if (value == "evitrack") cfg.inference_defaults.method = Method::EviTrack;
                else if (value == "sis") cfg.inference_defaults.method = Method::SIS;
                else if (value == "bpf") cfg.inference_defaults.method = Method::BPF;
                else throw ConfigError("inference.method must be evitrack, sis or bpf");
            } else if (key == "score_kind") {
                double bg = cfg.inference_defaults.kind.sigma_bg;
                try {
                    cfg.inference_defaults.kind = score_kind_from_string(value, bg > 0 ? bg : 1.0);
                } catch (const std::invalid_argument& e) {
                    throw ConfigError(e.what());
                }
            } else if (key == "K") {
                cfg.inference_defaults.K = static_cast<int>(parse_int(section, key, value));
            } else if (key == "C") {
                cfg.inference_defaults.C = static_cast<int>(parse_int(section, key, value));
            } else if (key == "G") {
                if (value == "inf") cfg.inference_defaults.G = std::nullopt;
                else cfg.inference_defaults.G = static_cast<int>(parse_int(section, key, value));
            } else {
                unknown();
            }
        } else if (section == "evaluation") {
            if (key == "horizons") {
                cfg.harness.eval.horizons.clear();
                for (const auto& tok : split_csv(value))
                    cfg.harness.eval.horizons.push_back(static_cast<int>(parse_int(section, key, tok)));
            } else if (key == "m_rollouts") {
                cfg.harness.eval.m_rollouts = static_cast<int>(parse_int(section, key, value));
            } else if (key == "seeds") {
                cfg.harness.seeds.clear();
                for (const auto& tok : split_csv(value))
                    cfg.harness.seeds.push_back(static_cast<std::uint64_t>(parse_int(section, key, tok)));
            } else if (key == "window") {
                cfg.harness.window = static_cast<int>(parse_int(section, key, value));
            } else {
                unknown();
            }
        } else if (section == "output") {
            if (key == "dir") cfg.output_dir = value;
            else unknown();
        }
    }

    if (const char* env = std::getenv("EVITRACK_SEED")) {
        std::uint64_t s = 0;
        auto [p, ec] = std::from_chars(env, env + std::string(env).size(), s);
        if (ec != std::errc() || *p != '\0')
            throw ConfigError("EVITRACK_SEED is not a valid integer: '" + std::string(env) + "'");
        cfg.dataset.root_seed = s;
    }

    // Validation: hard failures become ConfigError, advisory ones are returned.
    try {
        std::vector<std::string> w = validate(cfg.world);
        if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
        QuadratureGrid grid = cfg.make_quadrature_grid();
        check_grid_coverage(grid, cfg.world);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (!(cfg.dataset.tau > 0.5 && cfg.dataset.tau < 1.0))
        throw ConfigError("dataset.tau must be in (0.5, 1)");
    if (cfg.dataset.per_bin < 1) throw ConfigError("dataset.per_bin must be >= 1");
    if (!(cfg.inference_defaults.kind.sigma_bg > 0.0))
        throw ConfigError("inference.sigma_bg must be > 0");
    if (cfg.inference_defaults.K < 1) throw ConfigError("inference.K must be >= 1");
    if (cfg.inference_defaults.C < 1) throw ConfigError("inference.C must be >= 1");
    if (cfg.inference_defaults.G && *cfg.inference_defaults.G < 1)
        throw ConfigError("inference.G must be >= 1 or inf");
    if (!(cfg.inference_defaults.ess_threshold_fraction > 0.0 &&
          cfg.inference_defaults.ess_threshold_fraction <= 1.0))
        throw ConfigError("inference.ess_threshold_fraction must be in (0, 1]");
    if (cfg.inference_defaults.keep_children < 1)
        throw ConfigError("inference.keep_children must be >= 1");
    if (cfg.harness.seeds.empty()) throw ConfigError("evaluation.seeds must not be empty");
    if (cfg.harness.eval.horizons.empty()) throw ConfigError("evaluation.horizons must not be empty");
    for (int h : cfg.harness.eval.horizons)
        if (h < 1 || h >= cfg.world.T) throw ConfigError("evaluation.horizons entries must be in [1, T)");
    if (cfg.harness.eval.m_rollouts < 1) throw ConfigError("evaluation.m_rollouts must be >= 1");
    if (cfg.harness.window < 1) throw ConfigError("evaluation.window must be >= 1");
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), warnings);
}

std::string default_config_text() {
    return R"(# Double-well delayed-disambiguation benchmark defaults.
[world]
a = 3.0
v0 = 0.06
dt = 0.03
sigma_z = 0.02
d = 2.0
sigma_x = 0.10
mu0 = 0.0
sigma0 = 1.0
T = 200

[grid]
z_min = -6.0
z_max = 6.0
n_points = 1801

[dataset]
per_bin = 100
tau = 0.8
root_seed = 0
attempt_cap = 1000000
bin_early_lo = 30
bin_early_hi = 80
bin_mid_hi = 140
bin_late_hi = 170

[inference]
sigma_bg = 1.0
ess_threshold_fraction = 0.5
keep_children = 1

[evaluation]
horizons = 1,5,10
m_rollouts = 20
seeds = 0,1,2
window = 20

[output]
dir = out
)";
}

std::string serialize_config(const RunConfig& cfg) {
    std::ostringstream f;
    f.precision(17);
    f << "[world]\n";
    f << "a = " << cfg.world.a << "\nv0 = " << cfg.world.v0 << "\ndt = " << cfg.world.dt
      << "\nsigma_z = " << cfg.world.sigma_z << "\nd = " << cfg.world.d
      << "\nsigma_x = " << cfg.world.sigma_x << "\nmu0 = " << cfg.world.mu0
      << "\nsigma0 = " << cfg.world.sigma0 << "\nT = " << cfg.world.T << "\n";
    f << "[grid]\nz_min = " << cfg.grid.z_min << "\nz_max = " << cfg.grid.z_max
      << "\nn_points = " << cfg.grid.n_points << "\n";
    f << "[dataset]\nper_bin = " << cfg.dataset.per_bin << "\ntau = " << cfg.dataset.tau
      << "\nroot_seed = " << cfg.dataset.root_seed << "\nattempt_cap = " << cfg.dataset.attempt_cap
      << "\nbin_early_lo = " << cfg.dataset.bins.reject_below
      << "\nbin_early_hi = " << cfg.dataset.bins.early_hi
      << "\nbin_mid_hi = " << cfg.dataset.bins.mid_hi
      << "\nbin_late_hi = " << cfg.dataset.bins.reject_above << "\n";
    f << "[inference]\nmethod = " << to_string(cfg.inference_defaults.method)
      << "\nscore_kind = " << to_string(cfg.inference_defaults.kind)
      << "\nK = " << cfg.inference_defaults.K << "\nC = " << cfg.inference_defaults.C << "\nG = "
      << (cfg.inference_defaults.G ? std::to_string(*cfg.inference_defaults.G) : std::string("inf"))
      << "\nsigma_bg = " << cfg.inference_defaults.kind.sigma_bg
      << "\ness_threshold_fraction = " << cfg.inference_defaults.ess_threshold_fraction
      << "\nkeep_children = " << cfg.inference_defaults.keep_children << "\n";
    f << "[evaluation]\nhorizons = ";
    for (std::size_t i = 0; i < cfg.harness.eval.horizons.size(); ++i)
        f << (i ? "," : "") << cfg.harness.eval.horizons[i];
    f << "\nm_rollouts = " << cfg.harness.eval.m_rollouts << "\nseeds = ";
    for (std::size_t i = 0; i < cfg.harness.seeds.size(); ++i)
        f << (i ? "," : "") << cfg.harness.seeds[i];
    f << "\nwindow = " << cfg.harness.window << "\n";
    f << "[output]\ndir = " << cfg.output_dir.string() << "\n";
    return f.str();
}

}  // namespace evitrack
