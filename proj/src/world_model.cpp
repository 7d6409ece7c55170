#include "evitrack/world_model.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace evitrack {

namespace {
constexpr double half_log_2pi = 0.91893853320467274178;  // 0.5*log(2*pi)
}

std::vector<std::string> validate(const WorldModelParams& p) {
    if (!(p.sigma_z > 0.0)) throw std::invalid_argument("sigma_z must be > 0");
    if (!(p.sigma_x > 0.0)) throw std::invalid_argument("sigma_x must be > 0");
    if (!(p.sigma0 > 0.0)) throw std::invalid_argument("sigma0 must be > 0");
    if (p.T < 2) throw std::invalid_argument("T must be >= 2");
    if (!(p.a > p.d && p.d > 0.0))
        throw std::invalid_argument("delayed-disambiguation condition a > d > 0 violated");

    std::vector<std::string> warnings;
    // Linearized map slope at z = +-a is 1 - dt*v0*2a^2; flag configurations
    // where the discrete update is too coarse around the wells.
    double stability = p.dt * p.v0 * (3.0 * p.a * p.a - p.a * p.a);
    if (!(stability < 1.0)) {
        warnings.push_back("stability check failed: dt*v0*(3a^2 - a^2) = " +
                           std::to_string(stability) + " >= 1");
    }
    return warnings;
}

std::string to_string(DDBinLabel b) {
    switch (b) {
        case DDBinLabel::Early: return "early";
        case DDBinLabel::Mid: return "mid";
        case DDBinLabel::Late: return "late";
    }
    return "?";
}

double drift_mean(double z, const WorldModelParams& p) {
    return z - p.dt * p.v0 * z * (z * z - p.a * p.a);
}

double emission_mean(double z, const WorldModelParams& p) {
    return std::abs(z) <= p.d ? z * z : z;
}

double transition_logpdf(double z_next, double z_prev, const WorldModelParams& p) {
    double r = (z_next - drift_mean(z_prev, p)) / p.sigma_z;
    return -std::log(p.sigma_z) - half_log_2pi - 0.5 * r * r;
}

double emission_logpdf(double x, double z, const WorldModelParams& p) {
    double r = (x - emission_mean(z, p)) / p.sigma_x;
    return -std::log(p.sigma_x) - half_log_2pi - 0.5 * r * r;
}

double transition_sample(double z_prev, const WorldModelParams& p, Rng& rng) {
    return drift_mean(z_prev, p) + p.sigma_z * rng.gauss();
}

Trajectory simulate(const WorldModelParams& p, std::uint64_t seed) {
    Trajectory traj;
    traj.seed = seed;
    traj.latent.resize(p.T);
    traj.obs.resize(p.T);
    Rng rng(seed);
    traj.latent[0] = p.mu0 + p.sigma0 * rng.gauss();
    for (int t = 1; t < p.T; ++t)
        traj.latent[t] = transition_sample(traj.latent[t - 1], p, rng);
    for (int t = 0; t < p.T; ++t)
        traj.obs[t] = emission_mean(traj.latent[t], p) + p.sigma_x * rng.gauss();
    return traj;
}

}  // namespace evitrack
