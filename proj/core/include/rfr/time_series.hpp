#pragma once

#include <Eigen/Dense>

namespace rfr {

// Uniformly sampled multivariate series. Column i holds observable w_{i+1}.
struct TimeSeries {
    double t0 = 0.0;
    double dt = 0.0;
    Eigen::MatrixXd values;  // N x I

    long size() const { return values.rows(); }
    int observables() const { return static_cast<int>(values.cols()); }
    double time_at(long k) const { return t0 + dt * static_cast<double>(k); }
};

// Per-observable affine map to zero mean, unit variance.
struct Standardization {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;

    Eigen::MatrixXd apply(const Eigen::MatrixXd& raw) const {
        return (raw.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array();
    }
    Eigen::MatrixXd invert(const Eigen::MatrixXd& standardized) const {
        return (standardized.array().rowwise() * std.transpose().array()).rowwise() + mean.transpose().array();
    }
};

} // namespace rfr
