#include "rfr/deriv.hpp"

#include <cmath>

#include "rfr/errors.hpp"

namespace rfr::deriv {

DerivativeEstimate estimate_derivative(const Eigen::MatrixXd& series,
                                       const DerivativeConfig& cfg) {
    if (cfg.order != 2 && cfg.order != 6)
        throw ValidationError("estimate_derivative: order must be 2 or 6");
    if (cfg.l < 1) throw ValidationError("estimate_derivative: l must be >= 1");
    if (cfg.dt <= 0.0) throw ValidationError("estimate_derivative: dt must be positive");

    const long l = cfg.l;
    const long half = (cfg.order / 2) * l;
    const long m = series.rows() - 2 * half;
    if (m < 1)
        throw SeriesTooShort("estimate_derivative: " + std::to_string(series.rows()) +
                             " samples cannot host an order-" + std::to_string(cfg.order) +
                             " stencil with l=" + std::to_string(cfg.l));

    DerivativeEstimate est;
    est.first = half;
    auto block = [&](long offset) { return series.middleRows(half + offset, m); };
    if (cfg.order == 2) {
        est.values = (block(l) - block(-l)) / (2.0 * static_cast<double>(l) * cfg.dt);
    } else {
        est.values = (block(3 * l) - 9.0 * block(2 * l) + 45.0 * block(l) -
                      45.0 * block(-l) + 9.0 * block(-2 * l) - block(-3 * l)) /
                     (60.0 * static_cast<double>(l) * cfg.dt);
    }
    return est;
}

std::vector<StridePoint> scan_stride(const Eigen::MatrixXd& noisy_series,
                                     const Eigen::MatrixXd& truth_derivative,
                                     double dt, int order, int l_min, int l_max) {
    if (noisy_series.rows() != truth_derivative.rows() ||
        noisy_series.cols() != truth_derivative.cols())
        throw ValidationError("scan_stride: series and truth shapes differ");
    if (l_min < 1 || l_max < l_min)
        throw ValidationError("scan_stride: need 1 <= l_min <= l_max");

    std::vector<StridePoint> scan;
    scan.reserve(static_cast<std::size_t>(l_max - l_min + 1));
    for (int l = l_min; l <= l_max; ++l) {
        DerivativeEstimate est = estimate_derivative(noisy_series, {order, l, dt});
        Eigen::ArrayXXd err =
            (est.values - truth_derivative.middleRows(est.first, est.count())).array();
        const double n = static_cast<double>(err.size());
        const double mean = err.sum() / n;
        const double var = (err - mean).square().sum() / n;
        scan.push_back({l, std::sqrt(var)});
    }
    return scan;
}

int argmin_stride(const std::vector<StridePoint>& scan) {
    if (scan.empty()) throw ValidationError("argmin_stride: empty scan");
    int best = scan.front().l;
    double best_err = scan.front().error_std;
    for (const auto& point : scan)
        if (point.error_std < best_err) {
            best = point.l;
            best_err = point.error_std;
        }
    return best;
}

} // namespace rfr::deriv
