#pragma once

#include <filesystem>

#include <Eigen/Dense>

#include "rfr/basis.hpp"
#include "rfr/dynamics.hpp"
#include "rfr/io.hpp"
#include "rfr/observe.hpp"
#include "rfr/time_series.hpp"

namespace rfr {

// The learned ODE dX/dt = F(X) in standardized delay coordinates:
//   F_k(x) = beta_0^k + sum_d beta_d^k x_d + sum_j beta_{D+j}^k phi_j(x).
class RfrModel {
public:
    RfrModel(basis::CenterSet centers, Eigen::MatrixXd beta, Standardization standardization,
             double tau, double dt, observe::Layout layout, int observables,
             io::MetaMap provenance = {}, double lambda = 0.0, long training_n = 0,
             Eigen::VectorXd residual_mse = {});

    int D() const { return centers_.D; }
    long J() const { return centers_.count(); }
    long columns() const { return centers_.columns(); }

    const basis::CenterSet& centers() const { return centers_; }
    const Eigen::MatrixXd& beta() const { return beta_; }
    const Standardization& standardization() const { return standardization_; }
    double tau() const { return tau_; }
    double dt() const { return dt_; }
    observe::Layout layout() const { return layout_; }
    int observables() const { return observables_; }
    long lag() const;  // tau / dt in samples
    const io::MetaMap& provenance() const { return provenance_; }
    double lambda() const { return lambda_; }
    long training_n() const { return training_n_; }
    const Eigen::VectorXd& residual_mse() const { return residual_mse_; }

    struct EvalWorkspace {
        Eigen::VectorXd d2, row;
    };

    // Thread-safe against a shared model; each worker owns a workspace.
    void eval_F(const Eigen::VectorXd& x, Eigen::VectorXd& out, EvalWorkspace& ws) const;
    Eigen::VectorXd eval_F(const Eigen::VectorXd& x) const;

private:
    basis::CenterSet centers_;
    Eigen::MatrixXd beta_;  // (1+D+J) x D
    Standardization standardization_;
    double tau_ = 0.0;
    double dt_ = 0.0;
    observe::Layout layout_ = observe::Layout::scalar;
    int observables_ = 1;
    io::MetaMap provenance_;
    double lambda_ = 0.0;
    long training_n_ = 0;
    Eigen::VectorXd residual_mse_;
    Eigen::VectorXd csq_;  // center squared norms, cached for eval_F
};

// OdeSystem view of a model, so model trajectories run through the same
// integrator as the reference systems. One adapter per worker (its rhs
// scratch is not shared).
class ModelOde final : public dynamics::OdeSystem {
public:
    explicit ModelOde(const RfrModel& model) : model_(model) {}

    int dimension() const override { return model_.D(); }
    void rhs(const Eigen::VectorXd& x, Eigen::VectorXd& out) const override {
        model_.eval_F(x, out, ws_);
    }
    std::string name() const override { return "model"; }
    io::MetaMap params() const override { return {}; }

private:
    const RfrModel& model_;
    mutable RfrModel::EvalWorkspace ws_;
};

// Fixed-step RK4 of the model field; no step-size adaptation. Both predict()
// and the trajectory generator in `saddle` drive integration through here so
// their state sequences agree bitwise.
Eigen::MatrixXd integrate_model(const RfrModel& model, const Eigen::VectorXd& x0,
                                double dt_int, long steps);

// Like integrate_model, but a blow-up truncates instead of throwing: the
// result holds only the finite prefix (possibly just x0).
Eigen::MatrixXd integrate_model_partial(const RfrModel& model, const Eigen::VectorXd& x0,
                                        double dt_int, long steps);

struct Prediction {
    Eigen::MatrixXd states;    // (steps+1) x D, standardized coordinates
    Eigen::VectorXd times;
    Eigen::VectorXd x1_destd;  // first observable mapped back to raw units
    double dt = 0.0;           // step size that completed
    int halvings = 0;
};

// Integrates from x0 for `horizon`; on NonFiniteState retries with the step
// halved, up to 3 times, then rethrows. dt_int <= 0 selects the model's dt.
Prediction predict(const RfrModel& model, const Eigen::VectorXd& x0, double horizon,
                   double dt_int = 0.0);

// Single-file binary container, magic "RFR1", little-endian, CRC-32 trailer.
void save(const RfrModel& model, const std::filesystem::path& path);
RfrModel load(const std::filesystem::path& path);

} // namespace rfr
