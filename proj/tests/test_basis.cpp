#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "rfr/basis.hpp"
#include "rfr/errors.hpp"
#include "rfr/rng.hpp"

using namespace rfr;
using namespace rfr::basis;

namespace {

// Independent center selection: enumerate the whole lattice box around the
// data and keep every point with a sample inside the retention radius.
// Tractable only for small D; used to cross-check the pruned implementation.
std::vector<std::vector<std::int32_t>> brute_centers(const Eigen::MatrixXd& samples,
                                                     const GridSpec& grid) {
    const int D = static_cast<int>(samples.cols());
    const double radius = (grid.m - 1) * grid.delta_grid;
    std::vector<std::int32_t> lo(D), hi(D);
    for (int d = 0; d < D; ++d) {
        const double mn = (samples.col(d).minCoeff() - grid.anchor) / grid.delta_grid;
        const double mx = (samples.col(d).maxCoeff() - grid.anchor) / grid.delta_grid;
        lo[d] = static_cast<std::int32_t>(std::floor(mn)) - grid.m;
        hi[d] = static_cast<std::int32_t>(std::ceil(mx)) + grid.m;
    }
    std::vector<std::vector<std::int32_t>> kept;
    std::vector<std::int32_t> cell(D, 0);
    auto dist_ok = [&](long row) {
        double acc = 0.0;
        for (int d = 0; d < D; ++d) {
            const double diff =
                samples(row, d) - (cell[d] * grid.delta_grid + grid.anchor);
            if (grid.norm == Norm::l2) acc += diff * diff;
            else acc = std::max(acc, std::abs(diff));
        }
        return grid.norm == Norm::l2 ? acc <= radius * radius : acc <= radius;
    };
    auto walk = [&](auto&& self, int axis) -> void {
        if (axis == D) {
            for (long i = 0; i < samples.rows(); ++i)
                if (dist_ok(i)) {
                    kept.push_back(cell);
                    break;
                }
            return;
        }
        for (std::int32_t v = lo[axis]; v <= hi[axis]; ++v) {
            cell[axis] = v;
            self(self, axis + 1);
        }
    };
    walk(walk, 0);
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<std::vector<std::int32_t>> lattice_rows(const CenterSet& cs) {
    std::vector<std::vector<std::int32_t>> rows;
    for (long j = 0; j < cs.count(); ++j) {
        std::vector<std::int32_t> r(cs.D);
        for (int d = 0; d < cs.D; ++d) r[static_cast<std::size_t>(d)] = cs.lattice(j, d);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace

TEST_CASE("sigma2 matches its closed form") {
    CHECK(sigma2(3, 0.1, 1.0) == doctest::Approx(1.7372).epsilon(1e-4));
    CHECK(sigma2(3, 0.1, 1.0) == doctest::Approx(4.0 / std::log(10.0)).epsilon(1e-12));
    CHECK(sigma2(2, std::exp(-1.0), 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(sigma2(3, 0.1, 0.5) == doctest::Approx(0.4343).epsilon(1e-3));
}

TEST_CASE("sigma2 rejects degenerate parameters") {
    CHECK_THROWS_AS(sigma2(1, 0.1, 1.0), InvalidParams);
    CHECK_THROWS_AS(sigma2(3, 0.0, 1.0), InvalidParams);
    CHECK_THROWS_AS(sigma2(3, 1.0, 1.0), InvalidParams);
    CHECK_THROWS_AS(sigma2(3, 0.1, 0.0), InvalidParams);
}

TEST_CASE("a single 1-D sample keeps the lattice points within reach") {
    Eigen::MatrixXd samples(1, 1);
    samples << 0.0;
    GridSpec grid;
    grid.delta_grid = 0.5;
    const auto cs = select_centers(samples, grid);
    REQUIRE(cs.count() == 5);
    Eigen::VectorXd expect(5);
    expect << -1.0, -0.5, 0.0, 0.5, 1.0;
    CHECK((cs.centers.col(0) - expect).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(cs.columns() == 1 + 1 + 5);
}

TEST_CASE("a single 2-D sample keeps the 13-point euclidean disc") {
    Eigen::MatrixXd samples(1, 2);
    samples << 0.0, 0.0;
    GridSpec grid;
    grid.delta_grid = 0.5;
    const auto cs = select_centers(samples, grid);
    CHECK(cs.count() == 13);
}

TEST_CASE("the sup norm keeps the full square instead of the disc") {
    Eigen::MatrixXd samples(1, 2);
    samples << 0.0, 0.0;
    GridSpec grid;
    grid.delta_grid = 0.5;
    grid.norm = Norm::linf;
    const auto cs = select_centers(samples, grid);
    CHECK(cs.count() == 25);
}

TEST_CASE("no samples produce no centers") {
    const auto cs = select_centers(Eigen::MatrixXd(0, 3), GridSpec{});
    CHECK(cs.count() == 0);
    CHECK(cs.columns() == 1 + 3);
}

TEST_CASE("the anchor shifts the lattice rigidly") {
    Eigen::MatrixXd samples(1, 1);
    samples << 7.25;
    GridSpec grid;
    grid.delta_grid = 0.5;
    grid.anchor = 7.25;
    const auto cs = select_centers(samples, grid);
    REQUIRE(cs.count() == 5);
    CHECK(cs.centers(2, 0) == doctest::Approx(7.25).epsilon(1e-15));
}

TEST_CASE("pruned selection agrees with the brute-force box scan") {
    RngStream rng(21);
    for (int D : {1, 2, 3}) {
        for (Norm norm : {Norm::l2, Norm::linf}) {
            Eigen::MatrixXd samples(40, D);
            for (long i = 0; i < samples.size(); ++i)
                samples.data()[i] = rng.uniform(-1.5, 1.5);
            GridSpec grid;
            grid.delta_grid = 0.5;
            grid.norm = norm;
            const auto cs = select_centers(samples, grid);
            const auto expect = brute_centers(samples, grid);
            REQUIRE(cs.count() == static_cast<long>(expect.size()));
            CHECK(lattice_rows(cs) == expect);
        }
    }
}

TEST_CASE("the lattice comes out sorted and duplicate-free") {
    RngStream rng(22);
    Eigen::MatrixXd samples(200, 2);
    for (long i = 0; i < samples.size(); ++i) samples.data()[i] = rng.normal();
    GridSpec grid;
    const auto rows = lattice_rows(select_centers(samples, grid));
    for (std::size_t j = 1; j < rows.size(); ++j) CHECK(rows[j - 1] < rows[j]);
}

TEST_CASE("coarser grids keep fewer centers") {
    RngStream rng(23);
    Eigen::MatrixXd samples(500, 2);
    for (long i = 0; i < samples.size(); ++i) samples.data()[i] = rng.normal();
    long prev = -1;
    for (double delta : {0.25, 0.5, 1.0}) {
        GridSpec grid;
        grid.delta_grid = delta;
        const long count = select_centers(samples, grid).count();
        if (prev >= 0) CHECK(count < prev);
        prev = count;
    }
}

TEST_CASE("the center cap aborts runaway grids") {
    Eigen::MatrixXd samples(1, 2);
    samples << 0.0, 0.0;
    GridSpec grid;
    grid.delta_grid = 0.5;
    grid.center_cap = 12;
    CHECK_THROWS_AS(select_centers(samples, grid), TooManyCenters);
    grid.center_cap = 13;
    CHECK_NOTHROW(select_centers(samples, grid));
}

TEST_CASE("non-finite samples are rejected") {
    Eigen::MatrixXd samples(2, 1);
    samples << 0.0, std::nan("");
    CHECK_THROWS_AS(select_centers(samples, GridSpec{}), ValidationError);
}

TEST_CASE("a basis row is 1 at its own center and p at the retention radius") {
    Eigen::MatrixXd samples(1, 2);
    samples << 0.0, 0.0;
    GridSpec grid;
    grid.delta_grid = 0.5;
    const auto cs = select_centers(samples, grid);
    // locate the center at the origin
    long origin = -1;
    for (long j = 0; j < cs.count(); ++j)
        if (cs.lattice(j, 0) == 0 && cs.lattice(j, 1) == 0) origin = j;
    REQUIRE(origin >= 0);

    Eigen::VectorXd row;
    eval_row(Eigen::Vector2d(0.0, 0.0), cs, row);
    REQUIRE(row.size() == cs.columns());
    CHECK(row[0] == 1.0);
    CHECK(row[1] == 0.0);
    CHECK(row[2] == 0.0);
    CHECK(row[3 + origin] == doctest::Approx(1.0).epsilon(1e-12));

    const double radius = (grid.m - 1) * grid.delta_grid;
    eval_row(Eigen::Vector2d(radius, 0.0), cs, row);
    CHECK(row[3 + origin] == doctest::Approx(grid.p).epsilon(1e-12));
}

TEST_CASE("a far state leaves every radial column negligible") {
    Eigen::MatrixXd samples(1, 2);
    samples << 0.0, 0.0;
    GridSpec grid;
    grid.delta_grid = 0.5;
    const auto cs = select_centers(samples, grid);
    Eigen::VectorXd row;
    eval_row(Eigen::Vector2d(10.0, -10.0), cs, row);
    CHECK(row.segment(3, cs.count()).cwiseAbs().maxCoeff() < 1e-10);
    // the affine part is untouched
    CHECK(row[1] == 10.0);
    CHECK(row[2] == -10.0);
}

TEST_CASE("eval_rows matches eval_row element-wise") {
    RngStream rng(24);
    Eigen::MatrixXd samples(300, 3);
    for (long i = 0; i < samples.size(); ++i) samples.data()[i] = rng.normal();
    GridSpec grid;
    const auto cs = select_centers(samples, grid);
    REQUIRE(cs.count() > 0);

    Eigen::MatrixXd X(17, 3);
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-2.0, 2.0);
    Eigen::MatrixXd rows;
    eval_rows(X, cs, rows);
    REQUIRE(rows.rows() == 17);
    REQUIRE(rows.cols() == cs.columns());
    Eigen::VectorXd one;
    for (long i = 0; i < X.rows(); ++i) {
        eval_row(X.row(i).transpose(), cs, one);
        CHECK((rows.row(i).transpose() - one).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("eval_row validates the state dimension") {
    Eigen::MatrixXd samples(1, 2);
    samples << 0.0, 0.0;
    const auto cs = select_centers(samples, GridSpec{});
    Eigen::VectorXd row;
    CHECK_THROWS_AS(eval_row(Eigen::Vector3d::Zero(), cs, row), ValidationError);
    Eigen::MatrixXd out;
    CHECK_THROWS_AS(eval_rows(Eigen::MatrixXd::Zero(4, 3), cs, out), ValidationError);
}
