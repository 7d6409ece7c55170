#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "evitrack/world_model.hpp"

namespace evitrack {

// Uniform quadrature grid on [z_min, z_max].
struct QuadratureGrid {
    double z_min = -6.0;
    double z_max = 6.0;
    int n_points = 1201;
    std::vector<double> nodes;
    double cell_width = 0.0;
};

QuadratureGrid make_grid(double z_min, double z_max, int n_points);

// Grid must cover the initial prior (mu0 +- 5 sigma0) and the wells plus
// transition-noise excursions (+-(a + 5 sigma_z)). Throws std::invalid_argument.
void check_grid_coverage(const QuadratureGrid& grid, const WorldModelParams& p);

// Filtering posterior p(z_t | x_{1:t}) as probability mass per node,
// row-normalized; T x n row-major.
struct PosteriorGrid {
    int T = 0;
    int n = 0;
    std::vector<double> rows;

    std::span<const double> row(int t) const {  // t is 0-based here
        return {rows.data() + static_cast<std::size_t>(t) * n, static_cast<std::size_t>(n)};
    }
};

// A posterior row underflowed to all-zeros before normalization; the grid
// does not cover the state region the observations demand.
struct AllMassLostError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Discretized transition kernel: row i holds p(z_j | z_i) over the grid,
// normalized per row in log-space. The banded form drops entries beyond
// cut_sigmas * sigma_z from the row mean (relative mass < 1e-15 at the
// default cut) and renormalizes; apply() contracts against the transposed
// band so each output node is one sequential dot product, making results
// independent of thread count.
class TransitionKernel {
  public:
    static TransitionKernel build(const QuadratureGrid& grid, const WorldModelParams& p,
                                  double cut_sigmas = 8.5);

    // out[j] = sum_i in[i] * K[i][j]
    void apply(std::span<const double> in, std::span<double> out) const;

    int size() const { return n_; }

  private:
    int n_ = 0;
    // CSR of the transposed kernel: for each destination node j, the
    // contiguous source range [src_first_[j], src_first_[j] + width) with
    // weights in values_ starting at offset_[j].
    std::vector<int> src_first_;
    std::vector<int> src_count_;
    std::vector<std::size_t> offset_;
    std::vector<double> values_;
};

// Dense n x n reference kernel, serial apply. Kept as the correctness
// oracle for the banded OpenMP kernel; see bench_filter for the comparison.
class DenseTransitionKernel {
  public:
    static DenseTransitionKernel build(const QuadratureGrid& grid, const WorldModelParams& p);
    void apply(std::span<const double> in, std::span<double> out) const;
    int size() const { return n_; }

  private:
    int n_ = 0;
    std::vector<double> rows_;  // row-major, row i = p(. | z_i)
};

// Forward filtering over the whole observation sequence.
PosteriorGrid filter_posterior(std::span<const double> obs, const WorldModelParams& p,
                               const QuadratureGrid& grid, const TransitionKernel& kernel);

// Serial reference path using the dense kernel.
PosteriorGrid filter_posterior_serial(std::span<const double> obs, const WorldModelParams& p,
                                      const QuadratureGrid& grid,
                                      const DenseTransitionKernel& kernel);

// Mass on the given side of z = 0; a node at exactly 0 contributes half to
// each side. row must be normalized.
double basin_mass(std::span<const double> row, int sign, const QuadratureGrid& grid);

// Smallest t (1-based) with basin_mass(row_t, true_basin) > tau.
std::optional<int> detect_dd(const PosteriorGrid& posterior, int true_basin, double tau,
                             const QuadratureGrid& grid);

// Streaming equivalent of filter_posterior + detect_dd: runs the recursion
// row by row, returns at the first threshold crossing. O(n) memory.
std::optional<int> filter_dd_time(std::span<const double> obs, const WorldModelParams& p,
                                  const QuadratureGrid& grid, const TransitionKernel& kernel,
                                  int true_basin, double tau);

}  // namespace evitrack
