#pragma once

#include <cstdint>

#include <Eigen/Dense>

#include "rfr/time_series.hpp"

namespace rfr::observe {

enum class Layout { scalar, interleaved };

// Delay-coordinate samples X(t). Scalar layout:
//   X(t) = (w1(t), w1(t-tau), ..., w1(t-(D-1)tau)).
// Interleaved layout for I observables (I must divide D):
//   X(t) = (w1(t), ..., wI(t), w1(t-tau), ..., wI(t-tau), ...).
struct EmbeddedSeries {
    int D = 0;
    double tau = 0.0;
    double dt = 0.0;
    Layout layout = Layout::scalar;
    int observables = 1;
    long lag = 0;             // tau / dt in samples
    long first_index = 0;     // index into the source series of samples row 0
    Eigen::MatrixXd samples;  // n x D
    Eigen::VectorXd times;

    long size() const { return samples.rows(); }
    // delay levels: D for scalar, D / observables for interleaved
    int levels() const { return layout == Layout::scalar ? D : D / observables; }
};

// Affine map to zero mean, unit variance per observable (population moments).
// Throws DegenerateSeries when a component is constant.
std::pair<TimeSeries, Standardization> standardize(const TimeSeries& series);

// Biased (divide-by-N) sample autocorrelation of a scalar series for lags
// 0..round(max_lag/dt). Entry s is the correlation of w(t) with w(t - s dt).
Eigen::VectorXd autocorrelation(const TimeSeries& series, double max_lag);

struct TauSelection {
    double tau = 0.0;
    long lag = 0;
    double achieved = 0.0;  // acf value at the returned lag
    bool no_crossing = false;
    bool warning = false;   // no crossing, or crossing already at the first lag
};

// Smallest lag where the acf first reaches `target`, located by linear
// interpolation between samples and snapped to the sample grid. When the acf
// never reaches the target the maximum available lag is returned with
// no_crossing set; the choice of tau is ultimately the caller's.
TauSelection select_tau(const Eigen::VectorXd& acf, double dt, double target = 0.5);

EmbeddedSeries embed(const TimeSeries& series, int D, double tau,
                     Layout layout = Layout::scalar);

// Adds i.i.d. Gaussian noise with sigma = std_ratio x population std of each
// component. Observation noise only; the source trajectory is untouched.
TimeSeries add_observation_noise(const TimeSeries& series, double std_ratio,
                                 std::uint64_t seed);

} // namespace rfr::observe
