#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "evitrack/dataset.hpp"

using namespace evitrack;
namespace fs = std::filesystem;

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

}  // namespace

TEST_CASE("bin classification edges") {
    DDBins bins;
    CHECK(!bins.classify(29).has_value());
    CHECK(bins.classify(30) == DDBinLabel::Early);
    CHECK(bins.classify(79) == DDBinLabel::Early);
    CHECK(bins.classify(80) == DDBinLabel::Mid);
    CHECK(bins.classify(139) == DDBinLabel::Mid);
    CHECK(bins.classify(140) == DDBinLabel::Late);
    CHECK(bins.classify(170) == DDBinLabel::Late);
    CHECK(!bins.classify(171).has_value());
}

TEST_CASE("generation is deterministic and labels are consistent") {
    WorldModelParams p = bench_params();
    QuadratureGrid grid = make_grid(-6.0, 6.0, 1801);
    DDBins bins;
    Dataset a = generate_dataset(p, grid, bins, 1, 7, 0.8);
    Dataset b = generate_dataset(p, grid, bins, 1, 7, 0.8);
    REQUIRE(a.trajectories.size() == 3);
    REQUIRE(b.trajectories.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(a.trajectories[i].seed == b.trajectories[i].seed);
        CHECK(a.trajectories[i].dd_time == b.trajectories[i].dd_time);
        CHECK(a.trajectories[i].latent == b.trajectories[i].latent);
    }
    CHECK(a.stats.rejection_fraction() > 0.0);
    int early = 0, mid = 0, late = 0;
    for (const Trajectory& t : a.trajectories) {
        REQUIRE(t.dd_time.has_value());
        CHECK(*t.dd_time >= bins.reject_below);
        CHECK(*t.dd_time <= bins.reject_above);
        CHECK(t.true_basin == (t.latent.back() >= 0 ? 1 : -1));
        if (t.dd_bin == DDBinLabel::Early) ++early;
        if (t.dd_bin == DDBinLabel::Mid) ++mid;
        if (t.dd_bin == DDBinLabel::Late) ++late;
    }
    CHECK(early == 1);
    CHECK(mid == 1);
    CHECK(late == 1);
}

TEST_CASE("exhausted attempts raises") {
    WorldModelParams p = bench_params();
    QuadratureGrid grid = make_grid(-6.0, 6.0, 1801);
    DDBins bins;
    CHECK_THROWS_AS(generate_dataset(p, grid, bins, 100, 7, 0.8, 5), ExhaustedAttemptsError);
}

TEST_CASE("dataset round-trips through disk") {
    WorldModelParams p = bench_params();
    QuadratureGrid grid = make_grid(-6.0, 6.0, 1801);
    DDBins bins;
    Dataset ds = generate_dataset(p, grid, bins, 1, 7, 0.8);
    fs::path dir = fs::temp_directory_path() / "evitrack_test_dataset";
    fs::remove_all(dir);
    write_dataset(dir, ds);
    Dataset back = read_dataset(dir);
    REQUIRE(back.trajectories.size() == ds.trajectories.size());
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
        const Trajectory& x = ds.trajectories[i];
        const Trajectory& y = back.trajectories[i];
        CHECK(x.latent == y.latent);  // 17 significant digits round-trip exactly
        CHECK(x.obs == y.obs);
        CHECK(x.seed == y.seed);
        CHECK(x.dd_time == y.dd_time);
        CHECK(x.dd_bin == y.dd_bin);
        CHECK(x.true_basin == y.true_basin);
    }
    CHECK(back.stats.attempts == ds.stats.attempts);
    CHECK(back.stats.accepted == ds.stats.accepted);
    fs::remove_all(dir);
}
