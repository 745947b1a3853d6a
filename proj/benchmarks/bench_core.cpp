// Hot paths: reference rhs evaluation, design-row evaluation, Gram
// accumulation, model integration steps and derivative stencils.

#include <benchmark/benchmark.h>

#include <Eigen/Dense>

#include "rfr/basis.hpp"
#include "rfr/deriv.hpp"
#include "rfr/dynamics.hpp"
#include "rfr/model.hpp"
#include "rfr/regress.hpp"
#include "rfr/rng.hpp"
#include "rfr/saddle.hpp"

using namespace rfr;

namespace {

Eigen::MatrixXd random_matrix(long rows, long cols, std::uint64_t seed) {
    RngStream rng(seed, "bench");
    Eigen::MatrixXd m(rows, cols);
    for (long i = 0; i < rows; ++i)
        for (long j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

struct BasisFixture {
    basis::CenterSet centers;
    Eigen::MatrixXd block;  // 512 query states

    // low-dimensional samples keep the lattice at a few hundred centers,
    // comparable to a thin attractor manifold
    BasisFixture() {
        const Eigen::MatrixXd samples = random_matrix(2000, 3, 11);
        basis::GridSpec grid;
        grid.delta_grid = 1.0;
        centers = basis::select_centers(samples, grid);
        block = random_matrix(512, 3, 12);
    }
};

const BasisFixture& basis_fixture() {
    static const BasisFixture f;
    return f;
}

RfrModel bench_model() {
    const auto& f = basis_fixture();
    Standardization st;
    st.mean = Eigen::VectorXd::Zero(1);
    st.std = Eigen::VectorXd::Ones(1);
    Eigen::MatrixXd beta = 0.01 * random_matrix(f.centers.columns(), 3, 13);
    return RfrModel(f.centers, std::move(beta), st, 0.12, 0.01,
                    observe::Layout::scalar, 1);
}

} // namespace

static void BM_KsRhs(benchmark::State& state) {
    const dynamics::KsGalerkin ks;
    Eigen::VectorXd a = 0.3 * random_matrix(32, 1, 21).col(0);
    Eigen::VectorXd out(32);
    for (auto _ : state) {
        ks.rhs(a, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_KsRhs);

static void BM_ShellRhs(benchmark::State& state) {
    const dynamics::ShellModel sm;
    Eigen::VectorXd x = 0.1 * random_matrix(sm.dimension(), 1, 22).col(0);
    Eigen::VectorXd out(sm.dimension());
    for (auto _ : state) {
        sm.rhs(x, out);
        benchmark::DoNotOptimize(out.data());
    }
}
BENCHMARK(BM_ShellRhs);

static void BM_EvalRows(benchmark::State& state) {
    const auto& f = basis_fixture();
    Eigen::MatrixXd rows;
    for (auto _ : state) {
        basis::eval_rows(f.block, f.centers, rows);
        benchmark::DoNotOptimize(rows.data());
    }
    state.SetItemsProcessed(state.iterations() * f.block.rows());
}
BENCHMARK(BM_EvalRows);

static void BM_GramAccumulate(benchmark::State& state) {
    const auto& f = basis_fixture();
    Eigen::MatrixXd rows;
    basis::eval_rows(f.block, f.centers, rows);
    const Eigen::MatrixXd targets = random_matrix(f.block.rows(), 3, 14);
    for (auto _ : state) {
        regress::GramBuilder builder(f.centers.columns(), 3);
        builder.add_rows(rows, targets);
        benchmark::DoNotOptimize(builder.rows_seen());
    }
    state.SetItemsProcessed(state.iterations() * f.block.rows());
}
BENCHMARK(BM_GramAccumulate);

static void BM_ModelStep(benchmark::State& state) {
    const RfrModel model = bench_model();
    ModelOde ode(model);
    dynamics::Rk4Workspace ws;
    ws.resize(model.D());
    Eigen::VectorXd x = 0.5 * random_matrix(model.D(), 1, 15).col(0);
    for (auto _ : state) {
        dynamics::rk4_step(ode, x, 1e-4, ws);
        benchmark::DoNotOptimize(x.data());
    }
}
BENCHMARK(BM_ModelStep);

static void BM_Derivative6(benchmark::State& state) {
    const Eigen::MatrixXd series = random_matrix(100'000, 1, 16);
    for (auto _ : state) {
        const auto est = deriv::estimate_derivative(series, {6, 3, 0.01});
        benchmark::DoNotOptimize(est.values.data());
    }
    state.SetItemsProcessed(state.iterations() * series.rows());
}
BENCHMARK(BM_Derivative6);

static void BM_SegmentScore(benchmark::State& state) {
    const Eigen::MatrixXd segment = random_matrix(5001, 5, 17);
    for (auto _ : state) {
        benchmark::DoNotOptimize(saddle::segment_score(segment, 12, 1));
    }
}
BENCHMARK(BM_SegmentScore);

BENCHMARK_MAIN();
