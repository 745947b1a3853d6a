#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "rfr/model.hpp"
#include "rfr/observe.hpp"

namespace rfr::evaluate {

// Delay-structure consistency of a trajectory in model coordinates:
//   E(t) = max_i |X_i(t) - X_{i+s}(t + tau)|
// where s = 1 for the scalar layout and s = observables for the interleaved
// one, so every pair compares an observable with its own next delay level.
struct DelayErrorReport {
    Eigen::VectorXd per_time;  // E(t), length n - lag
    double median = 0.0;
    double p95 = 0.0;
    double max = 0.0;
    Eigen::VectorXd hist_centers;  // signed first-pair discrepancy histogram
    Eigen::VectorXd hist_density;  // sums to 1
};

DelayErrorReport delay_structure_error(const Eigen::MatrixXd& traj, long lag,
                                       int pair_step, int bins = 101);

struct DensityComparison {
    Eigen::VectorXd edges;  // bins + 1, shared by both histograms
    Eigen::VectorXd model_density, actual_density;
    double overlap = 0.0;  // sum of min(p, q), in [0, 1]
};

// Histogram intersection of two samples over pooled-range bins.
DensityComparison density_compare(const Eigen::VectorXd& model_x1,
                                  const Eigen::VectorXd& actual_x1, int bins = 100);

struct ForecastResult {
    Eigen::VectorXd times;       // 0..horizon at the model dt
    Eigen::MatrixXd abs_err;     // times x n_init, |X1 model - actual|; NaN after blow-up
    Eigen::VectorXd rmse;        // across initial conditions, finite entries only
    Eigen::VectorXd valid_time;  // first t with error > threshold (horizon if never)
    std::vector<long> start_rows;
    double err_threshold = 0.0;  // 0.5 x std of the actual X1
};

// Forecasts from n_init starts drawn from disjoint windows of held-out actual
// data; each run is compared against the actual continuation.
ForecastResult forecast_suite(const RfrModel& model, const observe::EmbeddedSeries& actual,
                              int n_init, double horizon, std::uint64_t seed);

// Episodes where |x1 - x2| < C.
struct LaminarStats {
    double threshold = 0.0;
    double dt = 0.0;
    std::vector<double> durations;  // time units, temporal order
    long episodes = 0;
    double laminar_total = 0.0;
    double burst_total = 0.0;
    Eigen::VectorXd hist_centers;
    Eigen::VectorXd hist_density;  // sums to 1 (when episodes exist)
    // least-squares slope of log10(density) vs duration over the tail window
    double tail_slope = std::numeric_limits<double>::quiet_NaN();
    long tail_bins = 0;
};

LaminarStats laminar_lasting_times(const Eigen::VectorXd& x1, const Eigen::VectorXd& x2,
                                   double C, double dt, double tail_min = 100.0,
                                   int bins = 60);

} // namespace rfr::evaluate
