#include <doctest.h>

#include <cmath>

#include "rfr/deriv.hpp"
#include "rfr/dynamics.hpp"
#include "rfr/errors.hpp"
#include "rfr/rng.hpp"

using namespace rfr;
using namespace rfr::deriv;

namespace {

// p(t) = sum_k coef[k] t^k and its analytic derivative, via Horner.
double poly(const Eigen::VectorXd& coef, double t) {
    double v = 0.0;
    for (long k = coef.size() - 1; k >= 0; --k) v = v * t + coef[k];
    return v;
}

double dpoly(const Eigen::VectorXd& coef, double t) {
    double v = 0.0;
    for (long k = coef.size() - 1; k >= 1; --k) v = v * t + coef[k] * static_cast<double>(k);
    return v;
}

Eigen::MatrixXd sample_poly(const Eigen::VectorXd& coef, long n, double dt) {
    Eigen::MatrixXd out(n, 1);
    for (long i = 0; i < n; ++i) out(i, 0) = poly(coef, dt * static_cast<double>(i));
    return out;
}

} // namespace

TEST_CASE("derivative of a constant series is exactly zero") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Constant(40, 2, 3.25);
    for (int order : {2, 6}) {
        const auto est = estimate_derivative(s, {order, 2, 0.1});
        CHECK(est.values.cwiseAbs().maxCoeff() == 0.0);
        CHECK(est.first == (order / 2) * 2);
        CHECK(est.count() == 40 - 2 * est.first);
    }
}

TEST_CASE("derivative of an integer ramp is exactly one") {
    Eigen::MatrixXd s(30, 1);
    for (long i = 0; i < 30; ++i) s(i, 0) = static_cast<double>(i);
    for (int order : {2, 6})
        for (int l : {1, 2, 3}) {
            const auto est = estimate_derivative(s, {order, l, 1.0});
            for (long i = 0; i < est.count(); ++i) CHECK(est.values(i, 0) == 1.0);
        }
}

TEST_CASE("order-6 stencil differentiates degree-6 polynomials to 1e-9 relative") {
    RngStream rng(11);
    for (int rep = 0; rep < 8; ++rep) {
        Eigen::VectorXd coef(7);
        for (int k = 0; k < 7; ++k) coef[k] = rng.uniform(-2.0, 2.0);
        const double dt = 0.01;
        const long n = 400;
        const auto est = estimate_derivative(sample_poly(coef, n, dt), {6, 3, dt});
        for (long i = 0; i < est.count(); i += 7) {
            const double t = dt * static_cast<double>(i + est.first);
            const double truth = dpoly(coef, t);
            const double scale = std::max(1.0, std::abs(truth));
            CHECK(std::abs(est.values(i, 0) - truth) / scale < 1e-9);
        }
    }
}

TEST_CASE("order-2 stencil differentiates quadratics to round-off") {
    Eigen::VectorXd coef(3);
    coef << 0.7, -1.3, 0.4;
    const double dt = 0.05;
    const auto est = estimate_derivative(sample_poly(coef, 200, dt), {2, 4, dt});
    for (long i = 0; i < est.count(); ++i) {
        const double t = dt * static_cast<double>(i + est.first);
        CHECK(est.values(i, 0) == doctest::Approx(dpoly(coef, t)).epsilon(1e-11));
    }
}

TEST_CASE("the stencil is linear in its input") {
    RngStream rng(12);
    Eigen::MatrixXd x(60, 1), y(60, 1);
    for (long i = 0; i < 60; ++i) {
        x(i, 0) = rng.normal();
        y(i, 0) = rng.normal();
    }
    const double a = 2.5, b = -0.75;
    const DerivativeConfig cfg{6, 2, 0.1};
    const auto ex = estimate_derivative(x, cfg);
    const auto ey = estimate_derivative(y, cfg);
    const auto exy = estimate_derivative(a * x + b * y, cfg);
    const Eigen::MatrixXd combo = a * ex.values + b * ey.values;
    CHECK((exy.values - combo).cwiseAbs().maxCoeff() <
          1e-12 * std::max(1.0, combo.cwiseAbs().maxCoeff()));
}

TEST_CASE("truncation error scales with the stencil order") {
    // error_std against the analytic derivative of sin(t); doubling the
    // stride h = l dt multiplies the error by ~2^order
    const double dt = 0.05;
    const long n = 2000;
    Eigen::MatrixXd s(n, 1), truth(n, 1);
    for (long i = 0; i < n; ++i) {
        const double t = dt * static_cast<double>(i);
        s(i, 0) = std::sin(t);
        truth(i, 0) = std::cos(t);
    }
    for (int order : {2, 6}) {
        const auto scan = scan_stride(s, truth, dt, order, 1, 2);
        REQUIRE(scan.size() == 2);
        const double slope = std::log2(scan[1].error_std / scan[0].error_std);
        CHECK(slope == doctest::Approx(static_cast<double>(order)).epsilon(0.3 / order));
    }
}

TEST_CASE("noise-free smooth data prefers the smallest stride") {
    dynamics::SimulateSpec spec;
    spec.system = "ks";
    spec.T = 5.0;
    spec.dt = 0.01;
    spec.transient = 20.0;
    spec.seed = 7;
    spec.truth_derivative = true;
    const auto sim = dynamics::simulate(spec);
    const auto scan = scan_stride(sim.series.values, sim.truth_deriv, spec.dt, 6, 1, 6);
    CHECK(argmin_stride(scan) == 1);
    for (std::size_t i = 1; i < scan.size(); ++i)
        CHECK(scan[i].error_std >= scan[i - 1].error_std);
}

TEST_CASE("noisy data prefers a wider stride than noise-free data") {
    // order-2 on a sine plus iid noise; the optimum moves away from l=1
    RngStream rng(13);
    const double dt = 0.01;
    const long n = 20000;
    Eigen::MatrixXd clean(n, 1), truth(n, 1);
    for (long i = 0; i < n; ++i) {
        const double t = dt * static_cast<double>(i);
        clean(i, 0) = std::sin(t);
        truth(i, 0) = std::cos(t);
    }
    Eigen::MatrixXd noisy = clean;
    for (long i = 0; i < n; ++i) noisy(i, 0) += 0.01 * rng.normal();
    const int best = argmin_stride(scan_stride(noisy, truth, dt, 2, 1, 40));
    CHECK(best > 1);
}

TEST_CASE("estimate_derivative validates its configuration") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(50, 1);
    CHECK_THROWS_AS(estimate_derivative(s, {4, 1, 0.1}), ValidationError);
    CHECK_THROWS_AS(estimate_derivative(s, {2, 0, 0.1}), ValidationError);
    CHECK_THROWS_AS(estimate_derivative(s, {2, 1, 0.0}), ValidationError);
}

TEST_CASE("a series shorter than the stencil is rejected") {
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(6, 1);
    CHECK_THROWS_AS(estimate_derivative(s, {6, 1, 0.1}), SeriesTooShort);
    CHECK_NOTHROW(estimate_derivative(Eigen::MatrixXd::Zero(7, 1), {6, 1, 0.1}));
}

TEST_CASE("scan_stride rejects mismatched shapes and bad ranges") {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(50, 1);
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(49, 1);
    CHECK_THROWS_AS(scan_stride(a, b, 0.1, 2, 1, 3), ValidationError);
    CHECK_THROWS_AS(scan_stride(a, a, 0.1, 2, 3, 1), ValidationError);
    CHECK_THROWS_AS(argmin_stride({}), ValidationError);
}
