#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "evitrack/rng.hpp"

namespace evitrack {

// Constants of the double-well latent / piecewise emission system.
struct WorldModelParams {
    double a = 3.0;        // well minima at +-a
    double v0 = 0.06;      // potential scale
    double dt = 1.0;       // drift time step
    double sigma_z = 0.05; // transition noise std
    double d = 2.0;        // emission boundary: h(z)=z^2 inside |z|<=d, z outside
    double sigma_x = 0.12; // emission noise std
    double mu0 = 0.0;      // initial latent mean
    double sigma0 = 1.0;   // initial latent std
    int T = 200;           // trajectory length
};

// Throws std::invalid_argument on hard violations (non-positive noise scales,
// T < 2, a > d > 0 broken). Returns advisory warnings, currently only the
// linearized-stability check dt*v0*(3a^2 - a^2) < 1 around the well minima.
std::vector<std::string> validate(const WorldModelParams& p);

enum class DDBinLabel { Early, Mid, Late };

std::string to_string(DDBinLabel b);

// One simulated path: ground-truth latents plus observations, and the
// delayed-disambiguation label once the exact filter has assigned it.
struct Trajectory {
    std::vector<double> latent;       // z*_1..z*_T
    std::vector<double> obs;          // x_1..x_T
    std::optional<int> dd_time;       // t_DD, 1-based
    std::optional<DDBinLabel> dd_bin;
    int true_basin = 0;               // sign(z*_T); +1 or -1 once labeled
    std::uint64_t seed = 0;
    int id = -1;                      // dataset index
};

// mu(z) = z - dt*v0*z*(z^2 - a^2)
double drift_mean(double z, const WorldModelParams& p);

// h(z) = z^2 for |z| <= d, z otherwise
double emission_mean(double z, const WorldModelParams& p);

// log N(z_next; mu(z_prev), sigma_z^2)
double transition_logpdf(double z_next, double z_prev, const WorldModelParams& p);

// log N(x; h(z), sigma_x^2)
double emission_logpdf(double x, double z, const WorldModelParams& p);

// Draw from N(mu(z_prev), sigma_z^2).
double transition_sample(double z_prev, const WorldModelParams& p, Rng& rng);

// z_1 ~ N(mu0, sigma0^2), z_t via the transition, x_t = h(z_t) + sigma_x*eps.
// Pure function of (p, seed); dd fields left unset.
Trajectory simulate(const WorldModelParams& p, std::uint64_t seed);

// sign with the sign(0) := +1 convention used throughout.
inline double sign_of(double z) { return z >= 0.0 ? 1.0 : -1.0; }

}  // namespace evitrack
