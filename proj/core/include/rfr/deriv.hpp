#pragma once

#include <vector>

#include <Eigen/Dense>

namespace rfr::deriv {

struct DerivativeConfig {
    int order = 6;  // 2 or 6
    int l = 1;      // stencil stride in samples
    double dt = 0.0;
};

struct DerivativeEstimate {
    Eigen::MatrixXd values;  // m x D, dX/dt at interior sample points
    long first = 0;          // input index of the first interior point

    long count() const { return values.rows(); }
};

// Central finite differences with stride l on every component.
//   order 2: [X(t+l dt) - X(t-l dt)] / (2 l dt)
//   order 6: [X(t+3l dt) - 9 X(t+2l dt) + 45 X(t+l dt)
//             - 45 X(t-l dt) + 9 X(t-2l dt) - X(t-3l dt)] / (60 l dt)
// Points whose stencil sticks out of the series are dropped.
DerivativeEstimate estimate_derivative(const Eigen::MatrixXd& series,
                                       const DerivativeConfig& cfg);

struct StridePoint {
    int l = 0;
    double error_std = 0.0;
};

// Standard deviation of (estimated - true) derivative for each stride in
// [l_min, l_max]. `truth` holds the exact derivative at every input sample.
std::vector<StridePoint> scan_stride(const Eigen::MatrixXd& noisy_series,
                                     const Eigen::MatrixXd& truth_derivative,
                                     double dt, int order, int l_min, int l_max);

// Stride with the smallest error in a scan.
int argmin_stride(const std::vector<StridePoint>& scan);

} // namespace rfr::deriv
