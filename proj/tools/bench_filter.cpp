// Compares the serial dense-kernel filter against the banded OpenMP filter:
// agreement first, then throughput at 1..max threads.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <vector>

#include "evitrack/config.hpp"
#include "evitrack/exact_filter.hpp"

using namespace evitrack;
using clock_type = std::chrono::steady_clock;

namespace {

double seconds_since(clock_type::time_point t0) {
    return std::chrono::duration<double>(clock_type::now() - t0).count();
}

}  // namespace

int main(int argc, char** argv) {
    int n_traj = argc > 1 ? std::atoi(argv[1]) : 4;
    RunConfig cfg = parse_config(default_config_text());
    const WorldModelParams& p = cfg.world;
    QuadratureGrid grid = cfg.make_quadrature_grid();

    std::vector<Trajectory> trajs;
    for (int i = 0; i < n_traj; ++i) trajs.push_back(simulate(p, derive_seed(7, "bench", i)));

    std::printf("grid n=%d, T=%d, %d trajectories\n", grid.n_points, p.T, n_traj);

    auto t0 = clock_type::now();
    DenseTransitionKernel dense = DenseTransitionKernel::build(grid, p);
    std::printf("dense kernel build: %.3f s\n", seconds_since(t0));
    t0 = clock_type::now();
    TransitionKernel banded = TransitionKernel::build(grid, p);
    std::printf("banded kernel build: %.3f s\n", seconds_since(t0));

    // Agreement between the two paths.
    double max_diff = 0.0;
    {
        PosteriorGrid a = filter_posterior_serial(trajs[0].obs, p, grid, dense);
        PosteriorGrid b = filter_posterior(trajs[0].obs, p, grid, banded);
        for (std::size_t i = 0; i < a.rows.size(); ++i)
            max_diff = std::max(max_diff, std::abs(a.rows[i] - b.rows[i]));
    }
    std::printf("max |dense - banded| posterior mass: %.3e\n", max_diff);

    t0 = clock_type::now();
    for (const Trajectory& tr : trajs) filter_posterior_serial(tr.obs, p, grid, dense);
    double dense_s = seconds_since(t0);
    std::printf("serial dense:   %8.3f s  (%.1f traj/s)\n", dense_s, n_traj / dense_s);

    int max_threads = omp_get_max_threads();
    for (int threads = 1; threads <= max_threads; threads *= 2) {
        omp_set_num_threads(threads);
        t0 = clock_type::now();
        for (const Trajectory& tr : trajs) filter_posterior(tr.obs, p, grid, banded);
        double s = seconds_since(t0);
        std::printf("banded %2d thr:  %8.3f s  (%.1f traj/s, %.1fx vs dense)\n", threads, s,
                    n_traj / s, dense_s / s);
    }
    return 0;
}
