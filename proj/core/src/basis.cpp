#include "rfr/basis.hpp"

#include <cmath>
#include <map>
#include <vector>

#include "rfr/errors.hpp"
#include "rfr/parallel.hpp"

namespace rfr::basis {

double sigma2(int m, double p, double delta_grid) {
    if (m < 2) throw InvalidParams("sigma2: m must be >= 2");
    if (!(p > 0.0 && p < 1.0)) throw InvalidParams("sigma2: p must lie in (0, 1)");
    if (!(delta_grid > 0.0)) throw InvalidParams("sigma2: delta_grid must be positive");
    const double reach = static_cast<double>(m - 1) * delta_grid;
    return reach * reach / (-std::log(p));
}

namespace {

using Cell = std::vector<std::int32_t>;

// Offsets o for which the cell at g+o can contain a point within the
// retention radius of lattice point g (equivalently: lattice point g+o can be
// within radius of a point in cell g). lower_bound is the minimum possible
// distance, used to stop scans early; the list is sorted by it.
struct Offset {
    Cell o;
    double lower_bound;
};

double offset_lower_bound(const Cell& o, const GridSpec& grid) {
    double acc = 0.0;
    for (std::int32_t v : o) {
        const double reduced = std::max(0.0, std::abs(static_cast<double>(v)) - 0.5);
        if (grid.norm == Norm::l2) acc += reduced * reduced;
        else acc = std::max(acc, reduced);
    }
    return grid.delta_grid * (grid.norm == Norm::l2 ? std::sqrt(acc) : acc);
}

std::vector<Offset> reachable_offsets(int D, const GridSpec& grid, double radius) {
    std::vector<Offset> offsets;
    Cell current(D, 0);
    // Depth-first over {-(m-1)..m-1}^D, pruning prefixes that already exceed
    // the radius, so the box is never fully enumerated in high D.
    auto walk = [&](auto&& self, int axis) -> void {
        if (axis == D) {
            const double lb = offset_lower_bound(current, grid);
            if (lb <= radius) offsets.push_back({current, lb});
            return;
        }
        for (std::int32_t v = -(grid.m - 1); v <= grid.m - 1; ++v) {
            current[axis] = v;
            Cell prefix(current.begin(), current.begin() + axis + 1);
            if (offset_lower_bound(prefix, grid) <= radius) self(self, axis + 1);
        }
        current[axis] = 0;
    };
    walk(walk, 0);
    std::sort(offsets.begin(), offsets.end(), [](const Offset& a, const Offset& b) {
        if (a.lower_bound != b.lower_bound) return a.lower_bound < b.lower_bound;
        return a.o < b.o;
    });
    return offsets;
}

} // namespace

CenterSet select_centers(const Eigen::MatrixXd& samples, const GridSpec& grid) {
    CenterSet cs;
    cs.grid = grid;
    cs.sigma2 = sigma2(grid.m, grid.p, grid.delta_grid);
    cs.D = static_cast<int>(samples.cols());

    const long n = samples.rows();
    const int D = cs.D;
    cs.lattice.resize(0, D);
    cs.centers.resize(0, D);
    if (n == 0) return cs;
    if (!samples.allFinite()) throw ValidationError("select_centers: samples not finite");

    const double radius = static_cast<double>(grid.m - 1) * grid.delta_grid;

    // Bucket samples by their nearest lattice point.
    std::map<Cell, std::vector<long>> occupied;
    Cell cell(D);
    for (long i = 0; i < n; ++i) {
        for (int d = 0; d < D; ++d) {
            const double scaled = (samples(i, d) - grid.anchor) / grid.delta_grid;
            if (std::abs(scaled) > 2e9)
                throw ValidationError("select_centers: sample coordinate too large for the grid");
            cell[d] = static_cast<std::int32_t>(std::llround(scaled));
        }
        occupied[cell].push_back(i);
    }

    const std::vector<Offset> offsets = reachable_offsets(D, grid, radius);

    // Candidate centers: occupied cells shifted by every reachable offset.
    std::map<Cell, char> candidates;
    Cell shifted(D);
    for (const auto& [base, rows] : occupied) {
        (void)rows;
        for (const auto& off : offsets) {
            for (int d = 0; d < D; ++d) shifted[d] = base[d] + off.o[d];
            candidates.emplace(shifted, 0);
        }
    }

    auto distance_ok = [&](long row, const Cell& center) {
        double acc = 0.0;
        for (int d = 0; d < D; ++d) {
            const double diff = samples(row, d) -
                                (static_cast<double>(center[d]) * grid.delta_grid + grid.anchor);
            if (grid.norm == Norm::l2) acc += diff * diff;
            else acc = std::max(acc, std::abs(diff));
        }
        return grid.norm == Norm::l2 ? acc <= radius * radius : acc <= radius;
    };

    std::vector<Cell> kept;
    for (const auto& [center, mark] : candidates) {
        (void)mark;
        bool hit = false;
        for (const auto& off : offsets) {
            if (off.lower_bound > radius) break;
            for (int d = 0; d < D; ++d) shifted[d] = center[d] + off.o[d];
            auto bucket = occupied.find(shifted);
            if (bucket == occupied.end()) continue;
            for (long row : bucket->second)
                if (distance_ok(row, center)) {
                    hit = true;
                    break;
                }
            if (hit) break;
        }
        if (hit) {
            kept.push_back(center);
            if (static_cast<long>(kept.size()) > grid.center_cap)
                throw TooManyCenters("select_centers: more than " +
                                     std::to_string(grid.center_cap) +
                                     " centers; increase delta_grid or the cap");
        }
    }

    cs.lattice.resize(static_cast<long>(kept.size()), D);
    for (long j = 0; j < cs.lattice.rows(); ++j)
        for (int d = 0; d < D; ++d) cs.lattice(j, d) = kept[static_cast<std::size_t>(j)][d];
    cs.centers = cs.lattice.cast<double>() * grid.delta_grid;
    cs.centers.array() += grid.anchor;
    return cs;
}

namespace {

// Shared scratch: squared norms of the centers, computed once per CenterSet
// by callers via center_sq_norms before concurrent use.
Eigen::VectorXd center_sq_norms(const CenterSet& cs) {
    return cs.centers.rowwise().squaredNorm();
}

} // namespace

void eval_row(const Eigen::VectorXd& x, const CenterSet& cs, Eigen::VectorXd& row) {
    if (x.size() != cs.D) throw ValidationError("eval_row: state dimension mismatch");
    const long J = cs.count();
    row.resize(cs.columns());
    row[0] = 1.0;
    row.segment(1, cs.D) = x;
    if (J == 0) return;

    Eigen::VectorXd d2 = center_sq_norms(cs);
    d2.noalias() -= 2.0 * (cs.centers * x);
    d2.array() += x.squaredNorm();
    row.segment(1 + cs.D, J) = (-(d2.array().max(0.0)) / cs.sigma2).exp();
}

void eval_rows(const Eigen::MatrixXd& X, const CenterSet& cs, Eigen::MatrixXd& rows_out) {
    if (X.cols() != cs.D) throw ValidationError("eval_rows: state dimension mismatch");
    const long n = X.rows();
    const long J = cs.count();
    rows_out.resize(n, cs.columns());
    rows_out.col(0).setOnes();
    rows_out.middleCols(1, cs.D) = X;
    if (J == 0 || n == 0) return;

    const Eigen::VectorXd xsq = X.rowwise().squaredNorm();
    const Eigen::VectorXd csq = center_sq_norms(cs);

    const long strip = 512;  // fixed width keeps results worker-count independent
    const std::size_t units = static_cast<std::size_t>((J + strip - 1) / strip);
    parallel_for_units(units, [&](std::size_t u) {
        const long j0 = static_cast<long>(u) * strip;
        const long w = std::min(strip, J - j0);
        Eigen::MatrixXd g = X * cs.centers.middleRows(j0, w).transpose();  // n x w
        for (long j = 0; j < w; ++j) {
            rows_out.col(1 + cs.D + j0 + j) =
                (-((xsq.array() + csq[j0 + j] - 2.0 * g.col(j).array()).max(0.0)) / cs.sigma2)
                    .exp();
        }
    });
}

} // namespace rfr::basis
