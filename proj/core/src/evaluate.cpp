#include "rfr/evaluate.hpp"

#include <algorithm>
#include <cmath>

#include "rfr/dynamics.hpp"
#include "rfr/errors.hpp"
#include "rfr/parallel.hpp"
#include "rfr/rng.hpp"

namespace rfr::evaluate {

namespace {

double quantile(std::vector<double> sorted_copy, double q) {
    if (sorted_copy.empty()) return 0.0;
    std::sort(sorted_copy.begin(), sorted_copy.end());
    const double pos = q * static_cast<double>(sorted_copy.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted_copy.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted_copy[lo] * (1.0 - frac) + sorted_copy[hi] * frac;
}

// Density histogram (sums to 1) over [lo, hi]; top edge inclusive.
void histogram(const double* data, long n, double lo, double hi, int bins,
               Eigen::VectorXd& centers, Eigen::VectorXd& density) {
    centers.resize(bins);
    density = Eigen::VectorXd::Zero(bins);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (int b = 0; b < bins; ++b) centers[b] = lo + (b + 0.5) * width;
    if (n == 0) return;
    if (!(width > 0.0)) {  // degenerate range: everything in one bin
        density[0] = 1.0;
        return;
    }
    for (long i = 0; i < n; ++i) {
        int b = static_cast<int>((data[i] - lo) / width);
        b = std::clamp(b, 0, bins - 1);
        density[b] += 1.0;
    }
    density /= static_cast<double>(n);
}

} // namespace

DelayErrorReport delay_structure_error(const Eigen::MatrixXd& traj, long lag,
                                       int pair_step, int bins) {
    const long n = traj.rows();
    const int D = static_cast<int>(traj.cols());
    if (lag < 1) throw ValidationError("delay_structure_error: lag must be >= 1");
    if (pair_step < 1 || pair_step >= D)
        throw ValidationError("delay_structure_error: pair step must be in [1, D)");
    if (n <= lag)
        throw InsufficientLength("delay_structure_error: trajectory shorter than one delay");
    if (bins < 1) throw ValidationError("delay_structure_error: bins must be >= 1");

    DelayErrorReport report;
    const long m = n - lag;
    report.per_time.resize(m);
    Eigen::VectorXd first_pair(m);
    for (long t = 0; t < m; ++t) {
        double e = 0.0;
        for (int i = 0; i + pair_step < D; ++i)
            e = std::max(e, std::abs(traj(t, i) - traj(t + lag, i + pair_step)));
        report.per_time[t] = e;
        first_pair[t] = traj(t, 0) - traj(t + lag, pair_step);
    }
    std::vector<double> errs(report.per_time.data(), report.per_time.data() + m);
    report.median = quantile(errs, 0.5);
    report.p95 = quantile(errs, 0.95);
    report.max = report.per_time.maxCoeff();

    const double amax = first_pair.array().abs().maxCoeff();
    const double span = amax > 0.0 ? amax : 1.0;
    histogram(first_pair.data(), m, -span, span, bins, report.hist_centers,
              report.hist_density);
    return report;
}

DensityComparison density_compare(const Eigen::VectorXd& model_x1,
                                  const Eigen::VectorXd& actual_x1, int bins) {
    if (bins < 1) throw ValidationError("density_compare: bins must be >= 1");
    if (model_x1.size() == 0 || actual_x1.size() == 0)
        throw ValidationError("density_compare: empty series");

    const double lo = std::min(model_x1.minCoeff(), actual_x1.minCoeff());
    const double hi = std::max(model_x1.maxCoeff(), actual_x1.maxCoeff());

    DensityComparison cmp;
    cmp.edges.resize(bins + 1);
    const double width = (hi - lo) / static_cast<double>(bins);
    for (int b = 0; b <= bins; ++b) cmp.edges[b] = lo + b * width;

    Eigen::VectorXd centers;
    histogram(model_x1.data(), model_x1.size(), lo, hi, bins, centers, cmp.model_density);
    histogram(actual_x1.data(), actual_x1.size(), lo, hi, bins, centers, cmp.actual_density);
    cmp.overlap = cmp.model_density.cwiseMin(cmp.actual_density).sum();
    return cmp;
}

ForecastResult forecast_suite(const RfrModel& model, const observe::EmbeddedSeries& actual,
                              int n_init, double horizon, std::uint64_t seed) {
    if (n_init < 1) throw ValidationError("forecast_suite: n_init must be >= 1");
    if (horizon <= 0.0) throw ValidationError("forecast_suite: horizon must be positive");
    if (actual.D != model.D())
        throw ValidationError("forecast_suite: model and actual dimensions differ");

    const double dt = model.dt();
    const long steps = std::max<long>(1, std::llround(horizon / dt));
    const long n = actual.size();
    const long window = steps + 1;
    const long block = n / n_init;
    if (block < window)
        throw InsufficientLength("forecast_suite: actual series cannot host " +
                                 std::to_string(n_init) + " disjoint windows of " +
                                 std::to_string(window) + " samples");

    ForecastResult result;
    result.times.resize(window);
    for (long k = 0; k < window; ++k) result.times[k] = dt * static_cast<double>(k);

    {
        const Eigen::ArrayXd x1 = actual.samples.col(0).array();
        const double mean = x1.mean();
        const double var = (x1 - mean).square().sum() / static_cast<double>(n);
        result.err_threshold = 0.5 * std::sqrt(var);
    }

    // Window starts are drawn sequentially so worker count cannot reorder
    // RNG consumption; one start per disjoint block.
    RngStream rng(seed, "forecast-starts");
    result.start_rows.resize(static_cast<std::size_t>(n_init));
    for (int i = 0; i < n_init; ++i) {
        const long slack = block - window;
        const long jitter =
            slack > 0 ? static_cast<long>(rng.integer(static_cast<std::uint64_t>(slack + 1))) : 0;
        result.start_rows[static_cast<std::size_t>(i)] = static_cast<long>(i) * block + jitter;
    }

    const double nan = std::numeric_limits<double>::quiet_NaN();
    result.abs_err = Eigen::MatrixXd::Constant(window, n_init, nan);
    result.valid_time = Eigen::VectorXd::Constant(n_init, horizon);

    parallel_for_units(static_cast<std::size_t>(n_init), [&](std::size_t i) {
        const long start = result.start_rows[i];
        ModelOde ode(model);
        dynamics::Rk4Workspace ws;
        ws.resize(model.D());
        Eigen::VectorXd x = actual.samples.row(start);
        bool crossed = false;
        for (long k = 0; k < window; ++k) {
            if (k > 0) {
                dynamics::rk4_step(ode, x, dt, ws);
                if (!x.allFinite()) {
                    // blow-up counts as crossing at the first bad sample
                    if (!crossed) result.valid_time[static_cast<long>(i)] = dt * static_cast<double>(k);
                    break;
                }
            }
            const double err = std::abs(x[0] - actual.samples(start + k, 0));
            result.abs_err(k, static_cast<long>(i)) = err;
            if (!crossed && err > result.err_threshold) {
                result.valid_time[static_cast<long>(i)] = dt * static_cast<double>(k);
                crossed = true;
            }
        }
    });

    result.rmse.resize(window);
    for (long k = 0; k < window; ++k) {
        double acc = 0.0;
        long cnt = 0;
        for (int i = 0; i < n_init; ++i) {
            const double e = result.abs_err(k, i);
            if (std::isfinite(e)) {
                acc += e * e;
                ++cnt;
            }
        }
        result.rmse[k] = cnt > 0 ? std::sqrt(acc / static_cast<double>(cnt)) : nan;
    }
    return result;
}

LaminarStats laminar_lasting_times(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                   double C, double dt, double tail_min, int bins) {
    if (x1.size() != x2.size()) throw ValidationError("laminar_lasting_times: length mismatch");
    if (x1.size() == 0) throw ValidationError("laminar_lasting_times: empty series");
    if (!(C > 0.0)) throw ValidationError("laminar_lasting_times: C must be positive");
    if (dt <= 0.0) throw ValidationError("laminar_lasting_times: dt must be positive");
    if (bins < 2) throw ValidationError("laminar_lasting_times: bins must be >= 2");

    LaminarStats stats;
    stats.threshold = C;
    stats.dt = dt;

    const long n = x1.size();
    long run = 0;
    for (long t = 0; t < n; ++t) {
        const bool laminar = std::abs(x1[t] - x2[t]) < C;
        if (laminar) {
            ++run;
        } else {
            stats.burst_total += dt;
            if (run > 0) {
                stats.durations.push_back(dt * static_cast<double>(run));
                run = 0;
            }
        }
    }
    if (run > 0) stats.durations.push_back(dt * static_cast<double>(run));
    stats.episodes = static_cast<long>(stats.durations.size());
    for (double d : stats.durations) stats.laminar_total += d;

    if (stats.episodes > 0) {
        const double dmax = *std::max_element(stats.durations.begin(), stats.durations.end());
        histogram(stats.durations.data(), stats.episodes, 0.0, dmax, bins,
                  stats.hist_centers, stats.hist_density);

        // Least squares of log10(density) on duration over populated tail bins.
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        long m = 0;
        for (int b = 0; b < bins; ++b) {
            if (stats.hist_centers[b] < tail_min || stats.hist_density[b] <= 0.0) continue;
            const double x = stats.hist_centers[b];
            const double y = std::log10(stats.hist_density[b]);
            sx += x; sy += y; sxx += x * x; sxy += x * y;
            ++m;
        }
        stats.tail_bins = m;
        const double det = static_cast<double>(m) * sxx - sx * sx;
        if (m >= 2 && det > 0.0) stats.tail_slope = (static_cast<double>(m) * sxy - sx * sy) / det;
    }
    return stats;
}

} // namespace rfr::evaluate
