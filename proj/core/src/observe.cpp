#include "rfr/observe.hpp"

#include <cmath>

#include "rfr/errors.hpp"
#include "rfr/rng.hpp"

namespace rfr::observe {

std::pair<TimeSeries, Standardization> standardize(const TimeSeries& series) {
    const long n = series.size();
    if (n < 2) throw DegenerateSeries("standardize: need at least 2 samples");

    Standardization st;
    st.mean = series.values.colwise().mean();
    Eigen::MatrixXd centered = series.values.rowwise() - st.mean.transpose();
    st.std = (centered.array().square().colwise().sum() / static_cast<double>(n))
                 .sqrt()
                 .matrix()
                 .transpose();
    for (int c = 0; c < series.observables(); ++c)
        if (!(st.std[c] > 0.0) || !std::isfinite(st.std[c]))
            throw DegenerateSeries("standardize: component " + std::to_string(c + 1) +
                                   " has no variance");

    TimeSeries out = series;
    out.values = centered.array().rowwise() / st.std.transpose().array();
    return {std::move(out), std::move(st)};
}

Eigen::VectorXd autocorrelation(const TimeSeries& series, double max_lag) {
    if (series.observables() != 1)
        throw ValidationError("autocorrelation: expects a scalar series");
    if (series.dt <= 0.0) throw ValidationError("autocorrelation: dt must be positive");
    const long n = series.size();
    const double duration = series.dt * static_cast<double>(n);
    if (!(max_lag >= 0.0) || max_lag >= duration / 2.0)
        throw ValidationError("autocorrelation: max_lag must lie in [0, T/2)");

    const long max_s = std::llround(max_lag / series.dt);
    const Eigen::ArrayXd w = series.values.col(0).array() - series.values.col(0).mean();
    const double var = w.square().sum() / static_cast<double>(n);
    if (!(var > 0.0)) throw DegenerateSeries("autocorrelation: constant series");

    Eigen::VectorXd acf(max_s + 1);
    for (long s = 0; s <= max_s; ++s) {
        const double cov =
            (w.segment(s, n - s) * w.segment(0, n - s)).sum() / static_cast<double>(n);
        acf[s] = cov / var;
    }
    return acf;
}

TauSelection select_tau(const Eigen::VectorXd& acf, double dt, double target) {
    if (acf.size() < 2) throw ValidationError("select_tau: acf needs at least 2 lags");
    if (dt <= 0.0) throw ValidationError("select_tau: dt must be positive");

    TauSelection sel;
    for (long s = 1; s < acf.size(); ++s) {
        if (acf[s] <= target) {
            const double drop = acf[s - 1] - acf[s];
            const double frac = drop > 0.0 ? (acf[s - 1] - target) / drop : 1.0;
            const long lag = std::max<long>(1, std::llround(static_cast<double>(s - 1) + frac));
            sel.lag = lag;
            sel.tau = dt * static_cast<double>(lag);
            sel.achieved = acf[std::min<long>(lag, acf.size() - 1)];
            sel.warning = (lag == 1);
            return sel;
        }
    }
    sel.no_crossing = true;
    sel.warning = true;
    sel.lag = acf.size() - 1;
    sel.tau = dt * static_cast<double>(sel.lag);
    sel.achieved = acf[sel.lag];
    return sel;
}

EmbeddedSeries embed(const TimeSeries& series, int D, double tau, Layout layout) {
    const int n_obs = series.observables();
    if (D < 1) throw ValidationError("embed: D must be >= 1");
    if (series.dt <= 0.0) throw ValidationError("embed: series dt must be positive");
    if (layout == Layout::scalar && n_obs != 1)
        throw ValidationError("embed: scalar layout requires a single observable");
    if (layout == Layout::interleaved && D % n_obs != 0)
        throw ValidationError("embed: interleaved layout requires observables to divide D");

    const int levels = layout == Layout::scalar ? D : D / n_obs;
    long lag = 0;
    if (levels > 1) {
        lag = std::llround(tau / series.dt);
        if (lag < 1 || std::abs(static_cast<double>(lag) * series.dt - tau) >
                           1e-9 * std::max(series.dt, std::abs(tau)))
            throw ValidationError("embed: tau must be a positive integer multiple of dt");
    }

    const long n = series.size() - static_cast<long>(levels - 1) * lag;
    if (n < 1)
        throw InsufficientLength("embed: series length " + std::to_string(series.size()) +
                                 " cannot cover " + std::to_string(levels - 1) +
                                 " delays of " + std::to_string(lag) + " samples");

    EmbeddedSeries out;
    out.D = D;
    out.tau = tau;
    out.dt = series.dt;
    out.layout = layout;
    out.observables = n_obs;
    out.lag = lag;
    out.first_index = static_cast<long>(levels - 1) * lag;
    out.samples.resize(n, D);
    out.times.resize(n);
    for (long r = 0; r < n; ++r) {
        const long a = r + out.first_index;
        out.times[r] = series.time_at(a);
        for (int j = 0; j < D; ++j) {
            const int obs = layout == Layout::scalar ? 0 : j % n_obs;
            const int level = layout == Layout::scalar ? j : j / n_obs;
            out.samples(r, j) = series.values(a - static_cast<long>(level) * lag, obs);
        }
    }
    return out;
}

TimeSeries add_observation_noise(const TimeSeries& series, double std_ratio,
                                 std::uint64_t seed) {
    if (std_ratio < 0.0) throw ValidationError("add_observation_noise: std_ratio must be >= 0");
    TimeSeries out = series;
    if (std_ratio == 0.0 || series.size() == 0) return out;

    const long n = series.size();
    Eigen::VectorXd mean = series.values.colwise().mean();
    Eigen::MatrixXd centered = series.values.rowwise() - mean.transpose();
    Eigen::VectorXd sigma =
        (centered.array().square().colwise().sum() / static_cast<double>(n))
            .sqrt()
            .matrix()
            .transpose() *
        std_ratio;

    RngStream rng(seed, "obs-noise");
    for (long r = 0; r < n; ++r)
        for (int c = 0; c < series.observables(); ++c)
            out.values(r, c) += sigma[c] * rng.normal();
    return out;
}

} // namespace rfr::observe
