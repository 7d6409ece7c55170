#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>

namespace evitrack {

// 64-bit FNV-1a. Stable across platforms and runs; used only for seed
// derivation, never for hashing untrusted input.
constexpr std::uint64_t fnv1a_init = 0xcbf29ce484222325ull;
constexpr std::uint64_t fnv1a_prime = 0x100000001b3ull;

constexpr std::uint64_t fnv1a(std::string_view s, std::uint64_t h = fnv1a_init) {
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= fnv1a_prime;
    }
    return h;
}

constexpr std::uint64_t fnv1a(std::uint64_t v, std::uint64_t h) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xffu;
        h *= fnv1a_prime;
    }
    return h;
}

// Stream splitting rule: stream seed = root ^ FNV-1a(tag, indices...).
// Every consumer of randomness (per-trajectory simulation, per-method
// inference run, per-(t,H) rollout bundle) derives its own stream from the
// root seed this way, so runs are reproducible and streams are independent
// of evaluation order.
template <class... Ix>
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view tag, Ix... idx) {
    std::uint64_t h = fnv1a(tag);
    ((h = fnv1a(static_cast<std::uint64_t>(idx), h)), ...);
    return root ^ h;
}

// mt19937_64 wrapper with stateless draws: gauss() consumes exactly two
// engine words per call (Box-Muller, cosine branch only), so the stream
// state is the engine state alone and two calls from identical states
// return identical values.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1), 53-bit resolution.
    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal draw.
    double gauss() {
        // u1 in (0, 1] so the log is finite.
        double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    std::mt19937_64& engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
};

}  // namespace evitrack
