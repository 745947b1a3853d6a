#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rfr/basis.hpp"
#include "rfr/deriv.hpp"
#include "rfr/observe.hpp"

namespace rfr::regress {

// Uniform sample of n distinct indices from [0, population), sorted
// ascending; deterministic under seed. n == population returns 0..n-1.
std::vector<long> sample_indices(long population, long n, std::uint64_t seed);

// States and targets for the regression: row r of X is the embedded sample
// at a drawn index, row r of Y the matching estimated derivative.
struct RegressionSample {
    Eigen::MatrixXd X;        // n x D
    Eigen::MatrixXd Y;        // n x D standardized derivative targets
    std::vector<long> rows;   // drawn indices into the derivative estimate
};

RegressionSample sample_rows(const observe::EmbeddedSeries& embedded,
                             const deriv::DerivativeEstimate& derivs,
                             long n, std::uint64_t seed);

// Accumulates A^T A, A^T Y and diag(Y^T Y) over row blocks without ever
// materializing A. add_rows processes fixed-width column strips in parallel;
// call order of blocks is the caller's and fixed block sizes keep results
// byte-identical for any worker count.
class GramBuilder {
public:
    GramBuilder(long columns, int targets);

    void add_rows(const Eigen::MatrixXd& rows, const Eigen::MatrixXd& targets);

    long rows_seen() const { return n_; }
    const Eigen::MatrixXd& gram();        // symmetrized A^T A
    const Eigen::MatrixXd& aty() const { return aty_; }
    const Eigen::VectorXd& yty() const { return yty_; }

private:
    void finalize();

    Eigen::MatrixXd gram_, aty_;
    Eigen::VectorXd yty_;
    long n_ = 0;
    bool finalized_ = false;
};

// Normal-equation form of the ridge problem.
struct Problem {
    Eigen::MatrixXd gram;  // A^T A
    Eigen::MatrixXd aty;   // A^T Y, one column per model component
    Eigen::VectorXd yty;   // squared norm of each target column
    long n = 0;
    double lambda = 0.0;
};

struct Coefficients {
    Eigen::MatrixXd beta;          // (1+D+J) x D
    Eigen::VectorXd residual_mse;  // per component: ||y - A b||^2 / n
    double lambda = 0.0;
    long n = 0;
};

// Minimizer of L(b) = 1/(2n) ||y_k - A b||^2 + lambda/2 ||b||^2 for every
// component k: solves (A^T A + n lambda I) b = A^T y_k with one Cholesky
// factorization shared across components. All coefficients are penalized
// uniformly, including the constant column.
Coefficients fit_all(const Problem& problem);

// Direct single-target form used for small systems and tests.
Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double lambda);

struct LadderPoint {
    double lambda = 0.0;
    double coef_norm = 0.0;     // ||beta|| over all components
    double residual_mse = 0.0;  // mean over components
};

// Refits the same normal equations across a lambda ladder; reported so the
// user can judge the regularization level (no automatic selection).
std::vector<LadderPoint> lambda_ladder(const Problem& problem,
                                       const std::vector<double>& lambdas);

// Convenience wrapper over GramBuilder + fit_all for in-memory X, Y.
Coefficients fit_design(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                        const basis::CenterSet& centers, double lambda);

} // namespace rfr::regress
