#include "evitrack/scoring.hpp"

#include <cmath>
#include <stdexcept>

namespace evitrack {

namespace {
constexpr double half_log_2pi = 0.91893853320467274178;

double gaussian_logpdf(double v, double mean, double sigma) {
    double r = (v - mean) / sigma;
    return -std::log(sigma) - half_log_2pi - 0.5 * r * r;
}
}  // namespace

std::string to_string(const ScoreKind& kind) {
    switch (kind.tag) {
        case ScoreKind::Tag::Joint: return "J";
        case ScoreKind::Tag::Evidence: return "E";
        case ScoreKind::Tag::TBD: return "TBD";
    }
    return "?";
}

ScoreKind score_kind_from_string(const std::string& s, double sigma_bg) {
    if (s == "J" || s == "joint") return ScoreKind::joint();
    if (s == "E" || s == "evidence") return ScoreKind::evidence();
    if (s == "TBD" || s == "tbd") {
        if (!(sigma_bg > 0.0)) throw std::invalid_argument("sigma_bg must be > 0 for TBD scoring");
        return ScoreKind::tbd(sigma_bg);
    }
    throw std::invalid_argument("unknown score kind: " + s);
}

double initial_score(const ScoreKind& kind, double z1, double x1, const WorldModelParams& p) {
    double evidence = emission_logpdf(x1, z1, p);
    if (kind.tag == ScoreKind::Tag::Evidence) return evidence;
    double joint = gaussian_logpdf(z1, p.mu0, p.sigma0) + evidence;
    if (kind.tag == ScoreKind::Tag::Joint) return joint;
    return joint - gaussian_logpdf(z1, 0.0, kind.sigma_bg);
}

double score_increment(const ScoreKind& kind, double z_parent, double z_child, double x_new,
                       const WorldModelParams& p) {
    double evidence = emission_logpdf(x_new, z_child, p);
    if (kind.tag == ScoreKind::Tag::Evidence) return evidence;
    double joint = transition_logpdf(z_child, z_parent, p) + evidence;
    if (kind.tag == ScoreKind::Tag::Joint) return joint;
    return joint - gaussian_logpdf(z_child, z_parent, kind.sigma_bg);
}

}  // namespace evitrack
