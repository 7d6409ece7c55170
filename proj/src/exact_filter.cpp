#include "evitrack/exact_filter.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

namespace evitrack {

QuadratureGrid make_grid(double z_min, double z_max, int n_points) {
    if (!(z_max > z_min)) throw std::invalid_argument("grid: z_max must exceed z_min");
    if (n_points < 2) throw std::invalid_argument("grid: n_points must be >= 2");
    QuadratureGrid g;
    g.z_min = z_min;
    g.z_max = z_max;
    g.n_points = n_points;
    g.cell_width = (z_max - z_min) / (n_points - 1);
    g.nodes.resize(n_points);
    for (int i = 0; i < n_points; ++i) g.nodes[i] = z_min + i * g.cell_width;
    g.nodes.back() = z_max;
    return g;
}

void check_grid_coverage(const QuadratureGrid& grid, const WorldModelParams& p) {
    double lo = std::min(p.mu0 - 5.0 * p.sigma0, -(p.a + 5.0 * p.sigma_z));
    double hi = std::max(p.mu0 + 5.0 * p.sigma0, p.a + 5.0 * p.sigma_z);
    if (grid.z_min > lo || grid.z_max < hi)
        throw std::invalid_argument("grid does not cover the state region [" + std::to_string(lo) +
                                    ", " + std::to_string(hi) + "]");
    if (grid.cell_width > 0.5 * p.sigma_z)
        throw std::invalid_argument(
            "grid spacing " + std::to_string(grid.cell_width) +
            " too coarse for sigma_z = " + std::to_string(p.sigma_z) +
            " (need spacing <= sigma_z/2)");
}

namespace {

// Row of the transition kernel in log space, normalized by max-subtraction
// then sum. Returns the [first, last) column range actually stored.
struct KernelRow {
    int first;
    std::vector<double> w;
};

KernelRow build_row(const QuadratureGrid& grid, const WorldModelParams& p, int i,
                    double cut_sigmas) {
    const int n = grid.n_points;
    double mu = drift_mean(grid.nodes[i], p);
    int first = 0;
    int last = n;
    if (cut_sigmas > 0) {
        double lo = mu - cut_sigmas * p.sigma_z;
        double hi = mu + cut_sigmas * p.sigma_z;
        first = std::clamp(static_cast<int>(std::floor((lo - grid.z_min) / grid.cell_width)), 0, n - 1);
        last = std::clamp(static_cast<int>(std::ceil((hi - grid.z_min) / grid.cell_width)) + 1, first + 1, n);
    }
    KernelRow row{first, std::vector<double>(last - first)};
    double mx = -std::numeric_limits<double>::infinity();
    for (int j = first; j < last; ++j) {
        double r = (grid.nodes[j] - mu) / p.sigma_z;
        double lp = -0.5 * r * r;
        row.w[j - first] = lp;
        mx = std::max(mx, lp);
    }
    double sum = 0.0;
    for (double& v : row.w) {
        v = std::exp(v - mx);
        sum += v;
    }
    for (double& v : row.w) v /= sum;
    return row;
}

}  // namespace

TransitionKernel TransitionKernel::build(const QuadratureGrid& grid, const WorldModelParams& p,
                                         double cut_sigmas) {
    const int n = grid.n_points;
    std::vector<KernelRow> rows(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) rows[i] = build_row(grid, p, i, cut_sigmas);

    // Transpose the band: destination j receives from sources i whose row
    // range contains j. Row ranges are contiguous in i for each j because
    // row bounds move monotonically with the (clamped) drift mean; guard
    // against non-monotone drift by taking the full min/max span.
    TransitionKernel k;
    k.n_ = n;
    k.src_first_.assign(n, n);
    std::vector<int> src_last(n, 0);
    for (int i = 0; i < n; ++i) {
        int first = rows[i].first;
        int last = first + static_cast<int>(rows[i].w.size());
        for (int j = first; j < last; ++j) {
            k.src_first_[j] = std::min(k.src_first_[j], i);
            src_last[j] = std::max(src_last[j], i + 1);
        }
    }
    k.src_count_.resize(n);
    k.offset_.resize(n + 1);
    k.offset_[0] = 0;
    for (int j = 0; j < n; ++j) {
        if (k.src_first_[j] >= src_last[j]) {  // unreachable node
            k.src_first_[j] = 0;
            k.src_count_[j] = 0;
        } else {
            k.src_count_[j] = src_last[j] - k.src_first_[j];
        }
        k.offset_[j + 1] = k.offset_[j] + k.src_count_[j];
    }
    k.values_.assign(k.offset_[n], 0.0);
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n; ++j) {
        for (int s = 0; s < k.src_count_[j]; ++s) {
            int i = k.src_first_[j] + s;
            int first = rows[i].first;
            int last = first + static_cast<int>(rows[i].w.size());
            double v = (j >= first && j < last) ? rows[i].w[j - first] : 0.0;
            k.values_[k.offset_[j] + s] = v;
        }
    }
    return k;
}

void TransitionKernel::apply(std::span<const double> in, std::span<double> out) const {
#pragma omp parallel for schedule(static)
    for (int j = 0; j < n_; ++j) {
        const double* v = values_.data() + offset_[j];
        const double* pin = in.data() + src_first_[j];
        double acc = 0.0;
        for (int s = 0; s < src_count_[j]; ++s) acc += pin[s] * v[s];
        out[j] = acc;
    }
}

DenseTransitionKernel DenseTransitionKernel::build(const QuadratureGrid& grid,
                                                   const WorldModelParams& p) {
    const int n = grid.n_points;
    DenseTransitionKernel k;
    k.n_ = n;
    k.rows_.resize(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i) {
        KernelRow row = build_row(grid, p, i, 0.0);  // full row
        std::copy(row.w.begin(), row.w.end(), k.rows_.begin() + static_cast<std::size_t>(i) * n);
    }
    return k;
}

void DenseTransitionKernel::apply(std::span<const double> in, std::span<double> out) const {
    std::fill(out.begin(), out.end(), 0.0);
    for (int i = 0; i < n_; ++i) {
        double pi = in[i];
        if (pi == 0.0) continue;
        const double* row = rows_.data() + static_cast<std::size_t>(i) * n_;
        for (int j = 0; j < n_; ++j) out[j] += pi * row[j];
    }
}

namespace {

// log prior + log emission at every node, then normalize to probability
// mass. Throws AllMassLostError when nothing survives.
void normalize_row(std::vector<double>& logp, std::span<double> out, int t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logp) mx = std::max(mx, v);
    if (!std::isfinite(mx))
        throw AllMassLostError("posterior row " + std::to_string(t) +
                               " lost all mass; grid too narrow for the observations");
    double sum = 0.0;
    for (std::size_t j = 0; j < logp.size(); ++j) {
        double v = std::exp(logp[j] - mx);
        out[j] = v;
        sum += v;
    }
    for (std::size_t j = 0; j < logp.size(); ++j) out[j] /= sum;
}

template <class Kernel>
void filter_rows(std::span<const double> obs, const WorldModelParams& p,
                 const QuadratureGrid& grid, const Kernel& kernel,
                 const std::function<bool(int, std::span<const double>)>& on_row) {
    const int n = grid.n_points;
    std::vector<double> logp(n), cur(n), pred(n);
    for (int j = 0; j < n; ++j) {
        double r0 = (grid.nodes[j] - p.mu0) / p.sigma0;
        logp[j] = -0.5 * r0 * r0 + emission_logpdf(obs[0], grid.nodes[j], p);
    }
    normalize_row(logp, cur, 1);
    if (on_row(0, cur)) return;
    for (std::size_t t = 1; t < obs.size(); ++t) {
        kernel.apply(cur, pred);
        for (int j = 0; j < n; ++j)
            logp[j] = (pred[j] > 0.0 ? std::log(pred[j]) : -std::numeric_limits<double>::infinity()) +
                      emission_logpdf(obs[t], grid.nodes[j], p);
        normalize_row(logp, cur, static_cast<int>(t) + 1);
        if (on_row(static_cast<int>(t), cur)) return;
    }
}

}  // namespace

PosteriorGrid filter_posterior(std::span<const double> obs, const WorldModelParams& p,
                               const QuadratureGrid& grid, const TransitionKernel& kernel) {
    PosteriorGrid out;
    out.T = static_cast<int>(obs.size());
    out.n = grid.n_points;
    out.rows.resize(static_cast<std::size_t>(out.T) * out.n);
    filter_rows(obs, p, grid, kernel, [&](int t, std::span<const double> row) {
        std::copy(row.begin(), row.end(), out.rows.begin() + static_cast<std::size_t>(t) * out.n);
        return false;
    });
    return out;
}

PosteriorGrid filter_posterior_serial(std::span<const double> obs, const WorldModelParams& p,
                                      const QuadratureGrid& grid,
                                      const DenseTransitionKernel& kernel) {
    PosteriorGrid out;
    out.T = static_cast<int>(obs.size());
    out.n = grid.n_points;
    out.rows.resize(static_cast<std::size_t>(out.T) * out.n);
    filter_rows(obs, p, grid, kernel, [&](int t, std::span<const double> row) {
        std::copy(row.begin(), row.end(), out.rows.begin() + static_cast<std::size_t>(t) * out.n);
        return false;
    });
    return out;
}

double basin_mass(std::span<const double> row, int sign, const QuadratureGrid& grid) {
    double m = 0.0;
    for (int j = 0; j < grid.n_points; ++j) {
        double z = grid.nodes[j];
        if (z == 0.0)
            m += 0.5 * row[j];
        else if ((z > 0.0) == (sign > 0))
            m += row[j];
    }
    return m;
}

std::optional<int> detect_dd(const PosteriorGrid& posterior, int true_basin, double tau,
                             const QuadratureGrid& grid) {
    for (int t = 0; t < posterior.T; ++t) {
        if (basin_mass(posterior.row(t), true_basin, grid) > tau) return t + 1;
    }
    return std::nullopt;
}

std::optional<int> filter_dd_time(std::span<const double> obs, const WorldModelParams& p,
                                  const QuadratureGrid& grid, const TransitionKernel& kernel,
                                  int true_basin, double tau) {
    std::optional<int> dd;
    filter_rows(obs, p, grid, kernel, [&](int t, std::span<const double> row) {
        if (basin_mass(row, true_basin, grid) > tau) {
            dd = t + 1;
            return true;
        }
        return false;
    });
    return dd;
}

}  // namespace evitrack
