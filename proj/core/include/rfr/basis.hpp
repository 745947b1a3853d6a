#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace rfr::basis {

// Norm used for the center-retention neighborhood test. The radial functions
// themselves always use the Euclidean norm.
enum class Norm { l2, linf };

struct GridSpec {
    double delta_grid = 0.5;
    int m = 3;
    double p = 0.1;
    Norm norm = Norm::l2;
    double anchor = 0.0;          // lattice offset per axis in standardized units
    long center_cap = 1'000'000;  // J above this throws TooManyCenters
};

// sigma^2 = ((m-1) delta_grid)^2 / (-ln p); the width that makes a radial
// function decay to exactly p at the retention radius (m-1) delta_grid.
double sigma2(int m, double p, double delta_grid);

// Gaussian radial basis on lattice centers. Design-matrix column order is
// [1, X_1..X_D, phi_1..phi_J].
struct CenterSet {
    Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic> lattice;  // J x D
    Eigen::MatrixXd centers;  // J x D, = lattice * delta_grid + anchor
    double sigma2 = 0.0;
    GridSpec grid;
    int D = 0;

    long count() const { return centers.rows(); }  // J
    long columns() const { return 1 + D + count(); }
};

// All lattice points with at least one sample within distance
// (m-1) delta_grid, found by expanding the occupied cells of the samples
// (the full lattice is never enumerated). Centers come out sorted
// lexicographically by lattice coordinate.
CenterSet select_centers(const Eigen::MatrixXd& samples, const GridSpec& grid);

// row = [1, x, exp(-||x - c_1||^2 / sigma^2), ..., exp(-||x - c_J||^2 / sigma^2)]
void eval_row(const Eigen::VectorXd& x, const CenterSet& centers, Eigen::VectorXd& row);

// Block evaluation: rows_out(i, :) = eval_row(X.row(i)). The hot loop of
// both fitting and model integration; parallelized over fixed-width center
// strips so results are identical for any worker count.
void eval_rows(const Eigen::MatrixXd& X, const CenterSet& centers, Eigen::MatrixXd& rows_out);

} // namespace rfr::basis
