#include "rfr/dynamics.hpp"

#include <cmath>

#include "rfr/errors.hpp"
#include "rfr/rng.hpp"

namespace rfr::dynamics {

void rk4_step(const OdeSystem& system, Eigen::VectorXd& x, double dt, Rk4Workspace& ws) {
    system.rhs(x, ws.k1);
    ws.stage = x + (0.5 * dt) * ws.k1;
    system.rhs(ws.stage, ws.k2);
    ws.stage = x + (0.5 * dt) * ws.k2;
    system.rhs(ws.stage, ws.k3);
    ws.stage = x + dt * ws.k3;
    system.rhs(ws.stage, ws.k4);
    x += (dt / 6.0) * (ws.k1 + 2.0 * ws.k2 + 2.0 * ws.k3 + ws.k4);
}

Eigen::MatrixXd integrate(const OdeSystem& system, const Eigen::VectorXd& initial,
                          double dt_int, long steps) {
    if (dt_int <= 0.0) throw ValidationError("integrate: dt_int must be positive");
    if (steps < 1) throw ValidationError("integrate: steps must be >= 1");
    if (initial.size() != system.dimension())
        throw ValidationError("integrate: initial state has wrong dimension");
    if (!initial.allFinite()) throw ValidationError("integrate: initial state not finite");

    Eigen::MatrixXd trajectory(steps + 1, system.dimension());
    trajectory.row(0) = initial;
    Eigen::VectorXd x = initial;
    Rk4Workspace ws;
    ws.resize(system.dimension());
    for (long s = 1; s <= steps; ++s) {
        rk4_step(system, x, dt_int, ws);
        if (!x.allFinite())
            throw NonFiniteState(system.name() + ": state left IEEE range at step " +
                                 std::to_string(s));
        trajectory.row(s) = x;
    }
    return trajectory;
}

io::MetaMap KsGalerkin::params() const {
    return {{"nu", io::format_double(nu_)}, {"modes", std::to_string(kModes)}};
}

void KsGalerkin::ks_rhs(const Eigen::VectorXd& a, double nu, Eigen::VectorXd& out) {
    // Quadratic term: (k/2) sum_m a_m a_{k-m} over m in [k-32, 32] with the
    // antisymmetric extension a_{-q} = -a_q and a_0 = 0. The m < 0 and m > k
    // pieces are each -sum_{q=1}^{32-k} a_q a_{q+k} after substitution, so
    // the whole sum collapses to conv - 2 corr. Dropping the extension's
    // sign (+2 corr) makes the truncation blow up from small states.
    const double* p = a.data();
    for (int k = 1; k <= kModes; ++k) {
        double corr = 0.0;
        for (int q = 1; q <= kModes - k; ++q) corr += p[q - 1] * p[q + k - 1];
        double conv = 0.0;
        for (int m = 1; m <= k - 1; ++m) conv += p[m - 1] * p[k - m - 1];
        const double k2 = static_cast<double>(k) * k;
        out[k - 1] = (k2 - nu * k2 * k2) * p[k - 1] + 0.5 * k * (conv - 2.0 * corr);
    }
}

void CoupledRossler::rhs(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    const double x1 = x[0], y1 = x[1], z1 = x[2];
    const double x2 = x[3], y2 = x[4], z2 = x[5];
    out[0] = -y1 - z1 + epsilon_ * (x2 - x1);
    out[1] = x1 + a_ * y1;
    out[2] = f_ + x1 * z1 - c_ * z1;
    out[3] = -y2 - z2 + epsilon_ * (x1 - x2);
    out[4] = x2 + a_ * y2;
    out[5] = f_ + x2 * z2 - c_ * z2;
}

io::MetaMap CoupledRossler::params() const {
    return {{"a", io::format_double(a_)},
            {"c", io::format_double(c_)},
            {"f", io::format_double(f_)},
            {"epsilon", io::format_double(epsilon_)}};
}

ShellModel::ShellModel(ShellParams params) : params_(std::move(params)) {
    if (params_.shells < 3) throw ValidationError("ShellModel: needs at least 3 shells");
    if (params_.wavenumbers.size() == 0) {
        params_.wavenumbers.resize(params_.shells);
        for (int j = 1; j <= params_.shells; ++j)
            params_.wavenumbers[j - 1] = std::pow(2.0, j);
    }
    if (params_.wavenumbers.size() != params_.shells)
        throw ValidationError("ShellModel: wavenumber count != shells");
    if ((params_.wavenumbers.array() <= 0.0).any())
        throw ValidationError("ShellModel: wavenumbers must be positive");
    u_.resize(params_.shells);
    du_.resize(params_.shells);
}

double ShellModel::coupling(const ShellParams& params, int j, int i) {
    const int n = params.shells;
    auto kw = [&](int s) { return params.wavenumbers[s - 1]; };
    switch (i) {
        case 1: return (j + 2 <= n) ? kw(j) : 0.0;
        case 2: return (j - 1 >= 1 && j + 1 <= n) ? -params.delta * kw(j - 1) : 0.0;
        case 3: return (j - 2 >= 1) ? (params.delta - 1.0) * kw(j - 2) : 0.0;
        default: throw ValidationError("ShellModel::coupling: i must be 1, 2 or 3");
    }
}

void ShellModel::shell_rhs(const Eigen::VectorXcd& u, const ShellParams& params,
                           Eigen::VectorXcd& out) {
    const int n = params.shells;
    const std::complex<double> imag_unit(0.0, 1.0);
    auto at = [&](int j) -> std::complex<double> {
        return (j >= 1 && j <= n) ? u[j - 1] : std::complex<double>(0.0, 0.0);
    };
    for (int j = 1; j <= n; ++j) {
        const double c1 = coupling(params, j, 1);
        const double c2 = coupling(params, j, 2);
        const double c3 = coupling(params, j, 3);
        const std::complex<double> quad =
            c1 * std::conj(at(j + 1) * at(j + 2)) +
            c2 * std::conj(at(j - 1) * at(j + 1)) +
            c3 * std::conj(at(j - 1) * at(j - 2));
        const double kj = params.wavenumbers[j - 1];
        out[j - 1] = -params.nu * kj * kj * u[j - 1] + imag_unit * quad;
        if (j == 1) out[j - 1] += params.forcing;
    }
}

void ShellModel::rhs(const Eigen::VectorXd& x, Eigen::VectorXd& out) const {
    const int n = params_.shells;
    for (int j = 0; j < n; ++j) u_[j] = {x[2 * j], x[2 * j + 1]};
    shell_rhs(u_, params_, du_);
    for (int j = 0; j < n; ++j) {
        out[2 * j] = du_[j].real();
        out[2 * j + 1] = du_[j].imag();
    }
}

io::MetaMap ShellModel::params() const {
    io::MetaMap m{{"shells", std::to_string(params_.shells)},
                  {"nu", io::format_double(params_.nu)},
                  {"forcing_re", io::format_double(params_.forcing.real())},
                  {"forcing_im", io::format_double(params_.forcing.imag())},
                  {"delta", io::format_double(params_.delta)}};
    std::string ks;
    for (int j = 0; j < params_.shells; ++j) {
        if (j) ks += ',';
        ks += io::format_double(params_.wavenumbers[j]);
    }
    m["wavenumbers"] = ks;
    return m;
}

MackeyGlass::MackeyGlass(MackeyGlassParams params, double dt_int,
                         const std::function<double(double)>& history)
    : params_(params), dt_(dt_int) {
    if (params_.delay <= 0.0) throw ValidationError("MackeyGlass: delay must be positive");
    if (dt_ <= 0.0) throw ValidationError("MackeyGlass: dt_int must be positive");
    if (dt_ > params_.delay / 4.0)
        throw InsufficientHistory("MackeyGlass: dt_int must be <= delay/4 so the buffer "
                                  "resolves the delayed value");
    // One extra node of lookback keeps every interpolation stencil interior.
    lag_ = static_cast<long>(std::ceil(params_.delay / dt_)) + 1;
    buf_.resize(lag_ + 1);
    for (long k = 0; k <= lag_; ++k) {
        const double s = dt_ * static_cast<double>(k - lag_);
        buf_[k] = history(std::max(s, -params_.delay));
    }
}

double MackeyGlass::rhs(double x, double x_delayed) const {
    return 2.0 * x_delayed / (1.0 + std::pow(x_delayed, params_.exponent)) - x;
}

double MackeyGlass::interpolate(double t) const {
    // Buffer index space: buf_[k] holds x((k - lag_) dt).
    const double u = t / dt_ + static_cast<double>(lag_);
    const long last = static_cast<long>(buf_.size()) - 1;
    if (u < -0.5 || u > static_cast<double>(last) + 0.5)
        throw InsufficientHistory("MackeyGlass: query outside stored history");

    const double rounded = std::round(u);
    if (std::abs(u - rounded) < 1e-9) {
        const long k = std::min(std::max<long>(0, static_cast<long>(rounded)), last);
        return buf_[k];
    }
    long i = static_cast<long>(std::floor(u));
    i = std::min(std::max<long>(1, i), last - 2);
    const double s = u - static_cast<double>(i);
    const double w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    const double w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    const double w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    const double w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
    return w0 * buf_[i - 1] + w1 * buf_[i] + w2 * buf_[i + 1] + w3 * buf_[i + 2];
}

double MackeyGlass::delayed(double t) const { return interpolate(t - params_.delay); }

void MackeyGlass::step() {
    const double t = time();
    const double x0 = buf_.back();
    const double d = params_.delay;
    const double k1 = rhs(x0, interpolate(t - d));
    const double mid = interpolate(t + 0.5 * dt_ - d);
    const double k2 = rhs(x0 + 0.5 * dt_ * k1, mid);
    const double k3 = rhs(x0 + 0.5 * dt_ * k2, mid);
    const double k4 = rhs(x0 + dt_ * k3, interpolate(t + dt_ - d));
    const double x1 = x0 + dt_ / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (!std::isfinite(x1))
        throw NonFiniteState("mg: state left IEEE range at t=" + std::to_string(t + dt_));
    buf_.push_back(x1);
}

int observable_count(const std::string& system) {
    if (system == "ks" || system == "mg" || system == "sm") return 1;
    if (system == "cr") return 2;
    throw ValidationError("unknown system '" + system + "' (expected ks|mg|sm|cr)");
}

namespace {

double default_dt_int(const std::string& system) {
    // Chosen so fixed-step RK4 sits inside its stability region for the
    // stiffest linear mode of each system with margin to spare.
    if (system == "ks") return 1e-4;
    if (system == "mg") return 0.01;
    if (system == "sm") return 0.004;
    return 0.02;  // cr
}

} // namespace

SimulateResult simulate(const SimulateSpec& spec) {
    const int n_obs = observable_count(spec.system);
    if (spec.T <= 0.0) throw ValidationError("simulate: T must be positive");
    if (spec.dt <= 0.0) throw ValidationError("simulate: dt must be positive");
    if (spec.transient < 0.0) throw ValidationError("simulate: transient must be >= 0");

    const long n_samples = std::llround(spec.T / spec.dt);
    if (n_samples < 1) throw ValidationError("simulate: T/dt yields no samples");

    double target = spec.dt_int > 0.0 ? spec.dt_int : default_dt_int(spec.system);
    const long stride = std::max<long>(1, static_cast<long>(std::ceil(spec.dt / target - 1e-9)));
    const double dt_int = spec.dt / static_cast<double>(stride);
    const long trans_steps = std::llround(spec.transient / dt_int);

    SimulateResult result;
    result.series.t0 = 0.0;
    result.series.dt = spec.dt;
    result.series.values.resize(n_samples, n_obs);
    if (spec.truth_derivative) result.truth_deriv.resize(n_samples, n_obs);

    RngStream rng(spec.seed, "init:" + spec.system);

    auto run_ode = [&](const OdeSystem& sys, Eigen::VectorXd x, auto&& observe_sample) {
        Rk4Workspace ws;
        ws.resize(sys.dimension());
        for (long s = 0; s < trans_steps; ++s) rk4_step(sys, x, dt_int, ws);
        if (!x.allFinite())
            throw NonFiniteState(sys.name() + ": state left IEEE range during transient");
        Eigen::VectorXd dx(sys.dimension());
        for (long k = 0; k < n_samples; ++k) {
            if (k > 0)
                for (long s = 0; s < stride; ++s) rk4_step(sys, x, dt_int, ws);
            if (!x.allFinite())
                throw NonFiniteState(sys.name() + ": state left IEEE range at sample " +
                                     std::to_string(k));
            if (spec.truth_derivative) sys.rhs(x, dx);
            observe_sample(k, x, dx);
        }
        for (const auto& [key, value] : sys.params()) result.meta["sys." + key] = value;
    };

    if (spec.system == "ks") {
        KsGalerkin sys(spec.ks_nu);
        Eigen::VectorXd a(KsGalerkin::kModes);
        for (int k = 1; k <= KsGalerkin::kModes; ++k)
            a[k - 1] = 0.05 * rng.normal() / static_cast<double>(k);
        run_ode(sys, a, [&](long k, const Eigen::VectorXd& x, const Eigen::VectorXd& dx) {
            result.series.values(k, 0) = x[0];
            if (spec.truth_derivative) result.truth_deriv(k, 0) = dx[0];
        });
    } else if (spec.system == "sm") {
        ShellModel sys(spec.shell);
        const int n = sys.shell_params().shells;
        Eigen::VectorXd x(2 * n);
        for (int j = 0; j < n; ++j) {
            const double scale = 0.01 * std::pow(2.0, -0.5 * (j + 1));
            x[2 * j] = scale * rng.normal();
            x[2 * j + 1] = scale * rng.normal();
        }
        run_ode(sys, x, [&](long k, const Eigen::VectorXd& s, const Eigen::VectorXd& ds) {
            const double re = s[4], im = s[5];  // u_3
            const double w = std::hypot(re, im);
            result.series.values(k, 0) = w;
            if (spec.truth_derivative)
                result.truth_deriv(k, 0) = w > 0.0 ? (re * ds[4] + im * ds[5]) / w : 0.0;
        });
    } else if (spec.system == "cr") {
        CoupledRossler sys(spec.cr_a, spec.cr_c, spec.cr_f, spec.cr_epsilon);
        Eigen::VectorXd x(6);
        x << 0.0 + 0.2 * rng.normal(), -6.0 + 0.2 * rng.normal(), 0.03,
             0.05 + 0.2 * rng.normal(), -6.2 + 0.2 * rng.normal(), 0.02;
        run_ode(sys, x, [&](long k, const Eigen::VectorXd& s, const Eigen::VectorXd& ds) {
            result.series.values(k, 0) = s[0];
            result.series.values(k, 1) = s[3];
            if (spec.truth_derivative) {
                result.truth_deriv(k, 0) = ds[0];
                result.truth_deriv(k, 1) = ds[3];
            }
        });
    } else {  // mg
        const double offset = 0.02 * (rng.uniform01() - 0.5);
        const double delay = spec.mg.delay;
        auto history = [offset, delay](double s) {
            return 0.5 + 0.1 * std::sin(M_PI * s / delay) + offset;
        };
        MackeyGlass mg(spec.mg, dt_int, history);
        for (long s = 0; s < trans_steps; ++s) mg.step();
        for (long k = 0; k < n_samples; ++k) {
            if (k > 0)
                for (long s = 0; s < stride; ++s) mg.step();
            const double x = mg.state();
            result.series.values(k, 0) = x;
            if (spec.truth_derivative)
                result.truth_deriv(k, 0) = mg.rhs(x, mg.delayed(mg.time()));
        }
        result.meta["sys.delay"] = io::format_double(spec.mg.delay);
        result.meta["sys.exponent"] = io::format_double(spec.mg.exponent);
        result.meta["sys.history"] = "0.5 + 0.1 sin(pi s / delay) + offset";
        result.meta["sys.history_offset"] = io::format_double(offset);
    }

    result.meta["system"] = spec.system;
    result.meta["T"] = io::format_double(spec.T);
    result.meta["dt"] = io::format_double(spec.dt);
    result.meta["dt_int"] = io::format_double(dt_int);
    result.meta["stride"] = std::to_string(stride);
    result.meta["transient"] = io::format_double(spec.transient);
    result.meta["seed"] = std::to_string(spec.seed);
    result.meta["samples"] = std::to_string(n_samples);
    result.meta["observables"] = std::to_string(n_obs);
    return result;
}

} // namespace rfr::dynamics
