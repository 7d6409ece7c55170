#pragma once

#include <string>

#include "evitrack/world_model.hpp"

namespace evitrack {

// Trajectory score rule. All three accumulate additively: a trajectory's
// score is initial_score at t=1 plus one score_increment per later step.
//   Joint:    log p(x_{1:t}, z_{1:t})
//   Evidence: log p(x_{1:t} | z_{1:t})
//   TBD:      Joint minus the log-density of a Gaussian random-walk
//             background prior with scale sigma_bg
struct ScoreKind {
    enum class Tag { Joint, Evidence, TBD };
    Tag tag = Tag::Joint;
    double sigma_bg = 1.0;  // used by TBD only; must be > 0

    static ScoreKind joint() { return {Tag::Joint, 1.0}; }
    static ScoreKind evidence() { return {Tag::Evidence, 1.0}; }
    static ScoreKind tbd(double sigma_bg) { return {Tag::TBD, sigma_bg}; }
};

// "J" / "E" / "TBD" as used in method descriptors.
std::string to_string(const ScoreKind& kind);
ScoreKind score_kind_from_string(const std::string& s, double sigma_bg);

// Score of a length-1 trajectory (z1) given the first observation.
double initial_score(const ScoreKind& kind, double z1, double x1, const WorldModelParams& p);

// Additive per-step increment when extending z_parent by z_child against
// the new observation.
double score_increment(const ScoreKind& kind, double z_parent, double z_child, double x_new,
                       const WorldModelParams& p);

}  // namespace evitrack
