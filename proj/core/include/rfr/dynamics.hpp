#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

#include "rfr/io.hpp"
#include "rfr/time_series.hpp"

namespace rfr::dynamics {

class OdeSystem {
public:
    virtual ~OdeSystem() = default;
    virtual int dimension() const = 0;
    virtual void rhs(const Eigen::VectorXd& x, Eigen::VectorXd& dxdt) const = 0;
    virtual std::string name() const = 0;
    virtual io::MetaMap params() const = 0;

    Eigen::VectorXd rhs(const Eigen::VectorXd& x) const {
        Eigen::VectorXd out(dimension());
        rhs(x, out);
        return out;
    }
};

struct Rk4Workspace {
    Eigen::VectorXd k1, k2, k3, k4, stage;
    void resize(long n) {
        k1.resize(n); k2.resize(n); k3.resize(n); k4.resize(n); stage.resize(n);
    }
};

// One classical 4th-order Runge-Kutta step, in place.
void rk4_step(const OdeSystem& system, Eigen::VectorXd& x, double dt, Rk4Workspace& ws);

// Fixed-step RK4: returns (steps+1) x dim, row 0 = initial.
// Throws NonFiniteState at the first step whose result leaves IEEE range.
Eigen::MatrixXd integrate(const OdeSystem& system, const Eigen::VectorXd& initial,
                          double dt_int, long steps);

// 32-mode Fourier-Galerkin reduction of the Kuramoto-Sivashinsky equation.
class KsGalerkin final : public OdeSystem {
public:
    static constexpr int kModes = 32;

    explicit KsGalerkin(double nu = 0.02150) : nu_(nu) {}

    int dimension() const override { return kModes; }
    void rhs(const Eigen::VectorXd& a, Eigen::VectorXd& out) const override {
        ks_rhs(a, nu_, out);
    }
    std::string name() const override { return "ks"; }
    io::MetaMap params() const override;
    double nu() const { return nu_; }

    // da_k/dt = (k^2 - nu k^4) a_k + (k/2) sum_{m=k-32}^{32} a_m a_{k-m}
    // for k = 1..32, where a_0 = 0 and a_{-q} = -a_q (antisymmetric modes);
    // equivalently + (k/2)(sum_{m=1}^{k-1} a_m a_{k-m} - 2 sum_{q=1}^{32-k} a_q a_{q+k}).
    static void ks_rhs(const Eigen::VectorXd& a, double nu, Eigen::VectorXd& out);

private:
    double nu_;
};

class CoupledRossler final : public OdeSystem {
public:
    CoupledRossler(double a = 0.15, double c = 10.0, double f = 0.2, double epsilon = 0.06)
        : a_(a), c_(c), f_(f), epsilon_(epsilon) {}

    int dimension() const override { return 6; }
    void rhs(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override;
    std::string name() const override { return "cr"; }
    io::MetaMap params() const override;

    double a() const { return a_; }
    double c() const { return c_; }
    double f() const { return f_; }
    double epsilon() const { return epsilon_; }

private:
    double a_, c_, f_, epsilon_;
};

struct ShellParams {
    int shells = 9;
    double nu = 0.00251;
    std::complex<double> forcing{0.005, 0.005};
    double delta = 0.5;
    // k_j; empty selects the geometric default k_j = 2^j.
    Eigen::VectorXd wavenumbers;
};

// Shell model of fluid turbulence over complex shell amplitudes u_1..u_9,
// exposed as a real ODE over (Re u_1, Im u_1, ..., Re u_9, Im u_9).
class ShellModel final : public OdeSystem {
public:
    explicit ShellModel(ShellParams params = {});

    int dimension() const override { return 2 * params_.shells; }
    void rhs(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override;
    std::string name() const override { return "sm"; }
    io::MetaMap params() const override;

    const ShellParams& shell_params() const { return params_; }

    // du_j/dt = -nu k_j^2 u_j
    //         + i (c_j1 u*_{j+1} u*_{j+2} + c_j2 u*_{j-1} u*_{j+1} + c_j3 u*_{j-1} u*_{j-2})
    //         + f delta_{j,1}
    // with c_j1 = k_j, c_j2 = -delta k_{j-1}, c_j3 = (delta-1) k_{j-2} and
    // every coupling that would reference a shell outside 1..shells set to 0.
    static void shell_rhs(const Eigen::VectorXcd& u, const ShellParams& params,
                          Eigen::VectorXcd& out);

    // Coupling coefficient of shell j (1-based) for term i in 1..3; zero at
    // the boundaries listed above. Exposed so tests can check the table.
    static double coupling(const ShellParams& params, int j, int i);

private:
    ShellParams params_;
    mutable Eigen::VectorXcd u_, du_;  // rhs scratch; a ShellModel instance is not thread-safe
};

struct MackeyGlassParams {
    double delay = 2.0;
    double exponent = 9.65;
};

// Method-of-steps integrator for dx/dt = 2 x(t-delay) / (1 + x(t-delay)^exponent) - x(t).
// The full past trajectory is kept at dt_int resolution; the delayed value is
// read back by cubic interpolation (exact at buffer nodes).
class MackeyGlass {
public:
    // history(s) is sampled on s in [-delay, 0]; history(0) is the initial state.
    MackeyGlass(MackeyGlassParams params, double dt_int,
                const std::function<double(double)>& history);

    double state() const { return buf_.back(); }
    double time() const { return dt_ * static_cast<double>(static_cast<long>(buf_.size()) - 1 - lag_); }
    const MackeyGlassParams& params() const { return params_; }

    void step();                       // one RK4 step of dt_int
    double delayed(double t) const;    // x(t - delay) via the buffer
    double rhs(double x, double x_delayed) const;

private:
    double interpolate(double t) const;

    MackeyGlassParams params_;
    double dt_;
    long lag_;  // floor(delay / dt_), used only to size the initial buffer
    std::vector<double> buf_;
};

// Observation frontend: integrate one reference system past a transient and
// record its observable(s) at the sampling step dt.
//   ks: w1 = a_1          mg: w1 = x          sm: w1 = |u_3|
//   cr: (w1, w2) = (x_1, x_2)
struct SimulateSpec {
    std::string system = "ks";  // ks | mg | sm | cr
    double T = 1000.0;          // observed duration; N = round(T/dt) samples
    double dt = 0.01;           // observation step
    double dt_int = 0.0;        // 0 selects a per-system default; snapped to dt/stride
    double transient = 1000.0;
    std::uint64_t seed = 0;
    bool truth_derivative = false;  // also record d(w)/dt from the true rhs

    double ks_nu = 0.02150;
    MackeyGlassParams mg;
    ShellParams shell;
    double cr_a = 0.15, cr_c = 10.0, cr_f = 0.2, cr_epsilon = 0.06;
};

struct SimulateResult {
    TimeSeries series;            // noise-free observations, t0 = 0
    Eigen::MatrixXd truth_deriv;  // N x I when requested, else 0 x 0
    io::MetaMap meta;
};

SimulateResult simulate(const SimulateSpec& spec);

// Number of observables the named system emits (cr: 2, others: 1).
int observable_count(const std::string& system);

} // namespace rfr::dynamics
