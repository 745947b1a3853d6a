#include "rfr/regress.hpp"

#include <cmath>
#include <numeric>

#include <Eigen/Cholesky>

#include "rfr/errors.hpp"
#include "rfr/parallel.hpp"
#include "rfr/rng.hpp"

namespace rfr::regress {

std::vector<long> sample_indices(long population, long n, std::uint64_t seed) {
    if (population < 0 || n < 0) throw ValidationError("sample_indices: negative size");
    if (n > population)
        throw NotEnoughSamples("sample_indices: requested " + std::to_string(n) +
                               " of " + std::to_string(population));
    std::vector<long> pool(static_cast<std::size_t>(population));
    std::iota(pool.begin(), pool.end(), 0L);
    RngStream rng(seed, "sample-rows");
    // Partial Fisher-Yates: the first n slots end up a uniform draw.
    for (long i = 0; i < n; ++i) {
        const long j = i + static_cast<long>(rng.integer(static_cast<std::uint64_t>(population - i)));
        std::swap(pool[static_cast<std::size_t>(i)], pool[static_cast<std::size_t>(j)]);
    }
    pool.resize(static_cast<std::size_t>(n));
    std::sort(pool.begin(), pool.end());
    return pool;
}

RegressionSample sample_rows(const observe::EmbeddedSeries& embedded,
                             const deriv::DerivativeEstimate& derivs,
                             long n, std::uint64_t seed) {
    const long population = derivs.count();
    if (derivs.first + population > embedded.size())
        throw ValidationError("sample_rows: derivative estimate does not fit the series");
    if (derivs.values.cols() != embedded.D)
        throw ValidationError("sample_rows: derivative/embedding dimension mismatch");
    if (n < 1) throw ValidationError("sample_rows: n must be >= 1");

    RegressionSample sample;
    sample.rows = sample_indices(population, n, seed);
    sample.X.resize(n, embedded.D);
    sample.Y.resize(n, embedded.D);
    for (long r = 0; r < n; ++r) {
        const long i = sample.rows[static_cast<std::size_t>(r)];
        sample.X.row(r) = embedded.samples.row(derivs.first + i);
        sample.Y.row(r) = derivs.values.row(i);
    }
    return sample;
}

GramBuilder::GramBuilder(long columns, int targets) {
    if (columns < 1 || targets < 1) throw ValidationError("GramBuilder: empty shape");
    gram_ = Eigen::MatrixXd::Zero(columns, columns);
    aty_ = Eigen::MatrixXd::Zero(columns, targets);
    yty_ = Eigen::VectorXd::Zero(targets);
}

void GramBuilder::add_rows(const Eigen::MatrixXd& rows, const Eigen::MatrixXd& targets) {
    if (rows.cols() != gram_.rows() || targets.cols() != aty_.cols() ||
        rows.rows() != targets.rows())
        throw ValidationError("GramBuilder: block shape mismatch");
    if (finalized_) throw ValidationError("GramBuilder: add_rows after gram()");

    const long cols = gram_.rows();
    const long strip = 512;
    const std::size_t units = static_cast<std::size_t>((cols + strip - 1) / strip);
    // Lower triangle only; strip u owns columns [u*strip, u*strip + w).
    parallel_for_units(units, [&](std::size_t u) {
        const long j0 = static_cast<long>(u) * strip;
        const long w = std::min(strip, cols - j0);
        gram_.block(j0, j0, cols - j0, w).noalias() +=
            rows.rightCols(cols - j0).transpose() * rows.middleCols(j0, w);
    });
    aty_.noalias() += rows.transpose() * targets;
    yty_ += targets.array().square().colwise().sum().matrix();
    n_ += rows.rows();
}

void GramBuilder::finalize() {
    if (finalized_) return;
    gram_.triangularView<Eigen::StrictlyUpper>() =
        gram_.triangularView<Eigen::StrictlyLower>().transpose();
    finalized_ = true;
}

const Eigen::MatrixXd& GramBuilder::gram() {
    finalize();
    return gram_;
}

namespace {

Eigen::LLT<Eigen::MatrixXd> factorize(const Eigen::MatrixXd& gram, long n, double lambda) {
    if (lambda < 0.0) throw ValidationError("ridge: lambda must be >= 0");
    if (n < 1) throw ValidationError("ridge: n must be >= 1");
    if (!gram.allFinite()) throw NonFiniteState("ridge: gram matrix not finite");
    Eigen::MatrixXd regularized = gram;
    regularized.diagonal().array() += static_cast<double>(n) * lambda;
    Eigen::LLT<Eigen::MatrixXd> llt(regularized);
    if (llt.info() != Eigen::Success)
        throw SingularSystem("ridge: A^T A + n lambda I is not positive definite "
                             "(lambda too small for a rank-deficient design)");
    return llt;
}

} // namespace

Coefficients fit_all(const Problem& problem) {
    if (problem.gram.rows() != problem.gram.cols() ||
        problem.gram.rows() != problem.aty.rows())
        throw ValidationError("fit_all: inconsistent normal-equation shapes");
    if (problem.yty.size() != problem.aty.cols())
        throw ValidationError("fit_all: yty size mismatch");

    const auto llt = factorize(problem.gram, problem.n, problem.lambda);
    Coefficients out;
    out.lambda = problem.lambda;
    out.n = problem.n;
    out.beta = llt.solve(problem.aty);
    if (!out.beta.allFinite()) throw NonFiniteState("fit_all: coefficients not finite");

    // ||y - A b||^2 = y^T y - 2 b^T (A^T y) + b^T (A^T A) b, clamped against
    // cancellation when the fit is nearly exact.
    const int targets = static_cast<int>(problem.aty.cols());
    out.residual_mse.resize(targets);
    for (int k = 0; k < targets; ++k) {
        const auto b = out.beta.col(k);
        const double quad = b.dot(problem.gram * b);
        const double cross = b.dot(problem.aty.col(k));
        const double ss = std::max(0.0, problem.yty[k] - 2.0 * cross + quad);
        out.residual_mse[k] = ss / static_cast<double>(problem.n);
    }
    return out;
}

Eigen::VectorXd ridge_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& y, double lambda) {
    if (A.rows() != y.size()) throw ValidationError("ridge_solve: A and y row mismatch");
    Problem problem;
    problem.gram = A.transpose() * A;
    problem.aty = A.transpose() * y;
    problem.yty = Eigen::VectorXd::Constant(1, y.squaredNorm());
    problem.n = A.rows();
    problem.lambda = lambda;
    return fit_all(problem).beta.col(0);
}

std::vector<LadderPoint> lambda_ladder(const Problem& problem,
                                       const std::vector<double>& lambdas) {
    std::vector<LadderPoint> ladder;
    ladder.reserve(lambdas.size());
    for (double lambda : lambdas) {
        Problem p = problem;
        p.lambda = lambda;
        const Coefficients fit = fit_all(p);
        ladder.push_back({lambda, fit.beta.norm(), fit.residual_mse.mean()});
    }
    return ladder;
}

Coefficients fit_design(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y,
                        const basis::CenterSet& centers, double lambda) {
    if (X.rows() != Y.rows()) throw ValidationError("fit_design: X and Y row mismatch");
    if (X.cols() != centers.D) throw ValidationError("fit_design: dimension mismatch");

    GramBuilder builder(centers.columns(), static_cast<int>(Y.cols()));
    const long block = 1024;  // fixed so accumulation order never varies
    Eigen::MatrixXd rows;
    for (long r0 = 0; r0 < X.rows(); r0 += block) {
        const long b = std::min(block, X.rows() - r0);
        basis::eval_rows(X.middleRows(r0, b), centers, rows);
        builder.add_rows(rows, Y.middleRows(r0, b));
    }

    Problem problem;
    problem.gram = builder.gram();
    problem.aty = builder.aty();
    problem.yty = builder.yty();
    problem.n = builder.rows_seen();
    problem.lambda = lambda;
    return fit_all(problem);
}

} // namespace rfr::regress
