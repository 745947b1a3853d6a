#include <doctest.h>

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "rfr/basis.hpp"
#include "rfr/errors.hpp"
#include "rfr/io.hpp"
#include "rfr/model.hpp"
#include "rfr/regress.hpp"
#include "rfr/rng.hpp"

using namespace rfr;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("rfr-model-test-" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

Standardization identity_stdz(int observables) {
    Standardization st;
    st.mean = Eigen::VectorXd::Zero(observables);
    st.std = Eigen::VectorXd::Ones(observables);
    return st;
}

// J = 0 basis: only the constant and linear columns.
basis::CenterSet affine_basis(int D) {
    auto cs = basis::select_centers(Eigen::MatrixXd(0, D), basis::GridSpec{});
    REQUIRE(cs.count() == 0);
    return cs;
}

RfrModel linear_model(const Eigen::MatrixXd& gain, double dt = 0.01) {
    const int D = static_cast<int>(gain.rows());
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(1 + D, D);
    beta.middleRows(1, D) = gain.transpose();  // beta column k holds F_k
    return RfrModel(affine_basis(D), beta, identity_stdz(1), 0.0, dt,
                    observe::Layout::scalar, 1);
}

RfrModel random_model(RngStream& rng, int D, double anchor = 0.0) {
    Eigen::MatrixXd samples(40, D);
    for (long i = 0; i < samples.size(); ++i) samples.data()[i] = rng.uniform(-1.0, 1.0);
    basis::GridSpec grid;
    grid.delta_grid = 0.5;
    grid.anchor = anchor;
    auto cs = basis::select_centers(samples, grid);
    Eigen::MatrixXd beta(cs.columns(), D);
    for (long i = 0; i < beta.size(); ++i) beta.data()[i] = rng.normal();
    Standardization st = identity_stdz(1);
    st.mean[0] = 1.5;
    st.std[0] = 2.0;
    io::MetaMap prov{{"source", "unit-test"}, {"note", "π ≈ 3.14159"}, {"empty", ""}};
    Eigen::VectorXd mse(D);
    for (int k = 0; k < D; ++k) mse[k] = rng.uniform(0.0, 0.1);
    return RfrModel(std::move(cs), std::move(beta), std::move(st), 0.5, 0.1,
                    observe::Layout::scalar, 1, std::move(prov), 1e-7, 1234,
                    std::move(mse));
}

} // namespace

TEST_CASE("an all-zero model has a zero field") {
    RngStream rng(51);
    Eigen::MatrixXd samples(10, 3);
    for (long i = 0; i < samples.size(); ++i) samples.data()[i] = rng.normal();
    auto cs = basis::select_centers(samples, basis::GridSpec{});
    Eigen::MatrixXd beta = Eigen::MatrixXd::Zero(cs.columns(), 3);
    RfrModel model(cs, beta, identity_stdz(1), 0.0, 0.1, observe::Layout::scalar, 1);
    const Eigen::VectorXd f = model.eval_F(Eigen::Vector3d(0.3, -0.2, 0.9));
    CHECK(f.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("a pure identity linear part returns x") {
    RfrModel model = linear_model(Eigen::MatrixXd::Identity(3, 3));
    const Eigen::Vector3d x(0.7, -1.2, 0.05);
    const Eigen::VectorXd f = model.eval_F(x);
    CHECK((f - x).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("eval_F matches a term-by-term summation oracle") {
    RngStream rng(52);
    RfrModel model = random_model(rng, 3);
    const auto& cs = model.centers();
    const auto& beta = model.beta();
    RfrModel::EvalWorkspace ws;
    Eigen::VectorXd out(3);
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd x(3);
        for (int d = 0; d < 3; ++d) x[d] = rng.uniform(-1.5, 1.5);
        model.eval_F(x, out, ws);
        for (int k = 0; k < 3; ++k) {
            double acc = beta(0, k);
            for (int d = 0; d < 3; ++d) acc += beta(1 + d, k) * x[d];
            for (long j = 0; j < cs.count(); ++j) {
                double d2 = 0.0;
                for (int d = 0; d < 3; ++d) {
                    const double diff = x[d] - cs.centers(j, d);
                    d2 += diff * diff;
                }
                acc += beta(1 + 3 + j, k) * std::exp(-d2 / cs.sigma2);
            }
            CHECK(std::abs(out[k] - acc) <= 1e-12 * std::max(1.0, std::abs(acc)));
        }
        // the convenience overload agrees bit for bit
        const Eigen::VectorXd other = model.eval_F(x);
        CHECK((other - out).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("eval_F is locally Lipschitz on attractor-like samples") {
    RngStream rng(53);
    RfrModel model = random_model(rng, 2);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Eigen::VectorXd x(2), dx(2);
        for (int d = 0; d < 2; ++d) {
            x[d] = rng.uniform(-1.0, 1.0);
            dx[d] = rng.normal();
        }
        dx *= 1e-6 / dx.norm();
        const double ratio =
            (model.eval_F(x + dx) - model.eval_F(x)).norm() / dx.norm();
        worst = std::max(worst, ratio);
    }
    CHECK(std::isfinite(worst));
    // crude bound: |grad F| <= |beta| (1 + |x| + sup|grad phi|)
    const double coef = model.beta().cwiseAbs().sum();
    CHECK(worst <= coef * 10.0);
}

TEST_CASE("model validation rejects inconsistent shapes") {
    auto cs = affine_basis(2);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Zero(5, 2);
    CHECK_THROWS_AS(RfrModel(cs, bad, identity_stdz(1), 0.0, 0.1,
                             observe::Layout::scalar, 1),
                    ValidationError);
    Eigen::MatrixXd nan_beta = Eigen::MatrixXd::Zero(3, 2);
    nan_beta(0, 0) = std::nan("");
    CHECK_THROWS_AS(RfrModel(cs, nan_beta, identity_stdz(1), 0.0, 0.1,
                             observe::Layout::scalar, 1),
                    ValidationError);
    Eigen::MatrixXd ok = Eigen::MatrixXd::Zero(3, 2);
    CHECK_THROWS_AS(RfrModel(cs, ok, identity_stdz(2), 0.0, 0.1,
                             observe::Layout::scalar, 1),
                    ValidationError);
    CHECK_THROWS_AS(RfrModel(cs, ok, identity_stdz(1), 0.0, 0.0,
                             observe::Layout::scalar, 1),
                    ValidationError);
}

TEST_CASE("a zero model predicts a constant trajectory") {
    RfrModel model = linear_model(Eigen::MatrixXd::Zero(2, 2));
    const Eigen::Vector2d x0(0.4, -0.9);
    const auto pred = predict(model, x0, 1.0, 0.1);
    REQUIRE(pred.states.rows() == 11);
    CHECK(pred.halvings == 0);
    for (long r = 0; r < pred.states.rows(); ++r) {
        CHECK(pred.states(r, 0) == 0.4);
        CHECK(pred.states(r, 1) == -0.9);
    }
    CHECK(pred.x1_destd[10] == 0.4);  // identity standardization
}

TEST_CASE("a linear decay model tracks the analytic exponential") {
    RfrModel model = linear_model(-Eigen::MatrixXd::Identity(2, 2), 0.01);
    const Eigen::Vector2d x0(1.0, -2.0);
    const auto pred = predict(model, x0, 1.0);  // dt from the model
    REQUIRE(pred.states.rows() == 101);
    CHECK(pred.dt == 0.01);
    for (long r = 0; r <= 100; r += 10) {
        const double decay = std::exp(-pred.times[r]);
        CHECK(pred.states(r, 0) == doctest::Approx(1.0 * decay).epsilon(1e-6));
        CHECK(pred.states(r, 1) == doctest::Approx(-2.0 * decay).epsilon(1e-6));
    }
}

TEST_CASE("prediction halves the step when the integration overflows") {
    // unstable at dt = 3 (RK4 growth factor 1.375), stable at 1.5
    RfrModel model = linear_model(-Eigen::MatrixXd::Identity(1, 1), 3.0);
    const auto pred = predict(model, Eigen::VectorXd::Ones(1), 9000.0);
    CHECK(pred.halvings >= 1);
    CHECK(pred.dt < 3.0);
    CHECK(pred.states.allFinite());
    CHECK(std::abs(pred.states(pred.states.rows() - 1, 0)) < 1.0);
}

TEST_CASE("prediction rethrows after three halvings") {
    RfrModel model = linear_model(10.0 * Eigen::MatrixXd::Identity(1, 1), 0.1);
    CHECK_THROWS_AS(predict(model, Eigen::VectorXd::Ones(1), 100.0), NonFiniteState);
    CHECK_THROWS_AS(predict(model, Eigen::VectorXd::Ones(1), 0.0), ValidationError);
}

TEST_CASE("partial integration keeps the finite prefix of a blow-up") {
    RfrModel model = linear_model(10.0 * Eigen::MatrixXd::Identity(1, 1), 0.1);
    const Eigen::VectorXd x0 = Eigen::VectorXd::Ones(1);
    CHECK_THROWS_AS(integrate_model(model, x0, 0.1, 1000), NonFiniteState);
    const Eigen::MatrixXd rows = integrate_model_partial(model, x0, 0.1, 1000);
    CHECK(rows.rows() >= 1);
    CHECK(rows.rows() < 1001);
    CHECK(rows.allFinite());
    CHECK(rows(0, 0) == 1.0);

    // when nothing blows up the two integrators agree bitwise
    RfrModel stable = linear_model(-Eigen::MatrixXd::Identity(1, 1), 0.1);
    const Eigen::MatrixXd a = integrate_model(stable, x0, 0.1, 50);
    const Eigen::MatrixXd b = integrate_model_partial(stable, x0, 0.1, 50);
    REQUIRE(a.rows() == b.rows());
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("the destandardized observable applies mean and std") {
    RngStream rng(54);
    RfrModel model = random_model(rng, 2);  // mean 1.5, std 2.0
    Eigen::Vector2d x0(0.1, -0.3);
    const auto pred = predict(model, x0, 0.05, 0.01);
    for (long r = 0; r < pred.states.rows(); ++r)
        CHECK(pred.x1_destd[r] ==
              doctest::Approx(2.0 * pred.states(r, 0) + 1.5).epsilon(1e-15));
}

TEST_CASE("lag is tau over dt") {
    RngStream rng(55);
    RfrModel model = random_model(rng, 2);  // tau 0.5, dt 0.1
    CHECK(model.lag() == 5);
}

TEST_CASE("save and load round-trip a model bit-exactly") {
    TempDir tmp;
    RngStream rng(56);
    RfrModel model = random_model(rng, 3, 0.25);
    const auto file = tmp.path / "model.rfr";
    save(model, file);
    const RfrModel back = load(file);

    CHECK(back.D() == model.D());
    CHECK(back.J() == model.J());
    CHECK((back.beta() - model.beta()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.centers().lattice - model.centers().lattice).cwiseAbs().maxCoeff() == 0);
    CHECK((back.centers().centers - model.centers().centers).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.centers().sigma2 == model.centers().sigma2);
    CHECK(back.centers().grid.delta_grid == model.centers().grid.delta_grid);
    CHECK(back.centers().grid.m == model.centers().grid.m);
    CHECK(back.centers().grid.p == model.centers().grid.p);
    CHECK(back.centers().grid.anchor == model.centers().grid.anchor);
    CHECK(back.tau() == model.tau());
    CHECK(back.dt() == model.dt());
    CHECK(back.layout() == model.layout());
    CHECK(back.observables() == model.observables());
    CHECK(back.lambda() == model.lambda());
    CHECK(back.training_n() == model.training_n());
    CHECK((back.residual_mse() - model.residual_mse()).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.standardization().mean - model.standardization().mean)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK((back.standardization().std - model.standardization().std)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    CHECK(back.provenance() == model.provenance());

    // saving the loaded model reproduces the file byte for byte
    const auto file2 = tmp.path / "model2.rfr";
    save(back, file2);
    std::ifstream f1(file, std::ios::binary), f2(file2, std::ios::binary);
    const std::string b1((std::istreambuf_iterator<char>(f1)), {});
    const std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
    CHECK(!b1.empty());
}

TEST_CASE("a truncated model file is rejected") {
    TempDir tmp;
    RngStream rng(57);
    RfrModel model = random_model(rng, 2);
    const auto file = tmp.path / "model.rfr";
    save(model, file);

    std::ifstream in(file, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    REQUIRE(bytes.size() > 100);

    const auto cut = tmp.path / "cut.rfr";
    std::ofstream(cut, std::ios::binary).write(bytes.data(),
                                               static_cast<long>(bytes.size() - 9));
    CHECK_THROWS_AS(load(cut), CorruptFile);

    // one flipped payload byte breaks the checksum
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x40;
    const auto bad = tmp.path / "bad.rfr";
    std::ofstream(bad, std::ios::binary).write(flipped.data(),
                                               static_cast<long>(flipped.size()));
    CHECK_THROWS_AS(load(bad), CorruptFile);

    const auto text = tmp.path / "text.rfr";
    std::ofstream(text) << "this is not a model";
    CHECK_THROWS_AS(load(text), CorruptFile);

    CHECK_THROWS_AS(load(tmp.path / "missing.rfr"), IoError);
}

TEST_CASE("a future format version is refused with both versions named") {
    TempDir tmp;
    RngStream rng(58);
    RfrModel model = random_model(rng, 2);
    const auto file = tmp.path / "model.rfr";
    save(model, file);

    std::ifstream in(file, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    in.close();
    bytes[4] = 2;  // little-endian u32 version right after the magic
    const std::uint32_t crc = io::crc32(bytes.data(), bytes.size() - 4);
    std::memcpy(bytes.data() + bytes.size() - 4, &crc, 4);
    const auto bumped = tmp.path / "bumped.rfr";
    std::ofstream(bumped, std::ios::binary)
        .write(bytes.data(), static_cast<long>(bytes.size()));

    try {
        load(bumped);
        FAIL("expected FormatVersionMismatch");
    } catch (const FormatVersionMismatch& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2") != std::string::npos);
        CHECK(msg.find("1") != std::string::npos);
    }
}

TEST_CASE("the model field reproduces its training targets within the fit residual") {
    RngStream rng(59);
    Eigen::MatrixXd X(400, 2);
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.uniform(-1.2, 1.2);
    Eigen::MatrixXd Y(400, 2);
    for (long i = 0; i < 400; ++i) {
        Y(i, 0) = std::sin(2.0 * X(i, 0)) * std::cos(X(i, 1));
        Y(i, 1) = X(i, 1) - 0.3 * X(i, 0) * X(i, 0);
    }
    basis::GridSpec grid;
    grid.delta_grid = 0.5;
    const auto cs = basis::select_centers(X, grid);
    const auto fit = regress::fit_design(X, Y, cs, 1e-8);
    RfrModel model(cs, fit.beta, identity_stdz(1), 0.0, 0.1, observe::Layout::scalar, 1,
                   {}, fit.lambda, 400, fit.residual_mse);

    Eigen::VectorXd acc = Eigen::VectorXd::Zero(2);
    RfrModel::EvalWorkspace ws;
    Eigen::VectorXd f(2);
    for (long i = 0; i < 400; ++i) {
        model.eval_F(X.row(i).transpose(), f, ws);
        acc += (f - Y.row(i).transpose()).array().square().matrix();
    }
    acc /= 400.0;
    for (int k = 0; k < 2; ++k) {
        CHECK(acc[k] <= fit.residual_mse[k] * (1.0 + 1e-6) + 1e-12);
        CHECK(acc[k] == doctest::Approx(fit.residual_mse[k]).epsilon(1e-6));
    }
}

TEST_CASE("identical fits serialize to identical bytes") {
    TempDir tmp;
    RngStream rng(60);
    Eigen::MatrixXd X(150, 2);
    for (long i = 0; i < X.size(); ++i) X.data()[i] = rng.normal();
    Eigen::MatrixXd Y = X * Eigen::Matrix2d{{0.0, -1.0}, {1.0, 0.0}};
    basis::GridSpec grid;
    grid.delta_grid = 1.0;
    const auto cs = basis::select_centers(X, grid);

    auto build = [&](const std::filesystem::path& p) {
        const auto fit = regress::fit_design(X, Y, cs, 1e-6);
        RfrModel m(cs, fit.beta, identity_stdz(1), 0.2, 0.1, observe::Layout::scalar, 1,
                   {{"source", "determinism-check"}}, fit.lambda, 150, fit.residual_mse);
        save(m, p);
    };
    build(tmp.path / "a.rfr");
    build(tmp.path / "b.rfr");
    std::ifstream fa(tmp.path / "a.rfr", std::ios::binary);
    std::ifstream fb(tmp.path / "b.rfr", std::ios::binary);
    const std::string ba((std::istreambuf_iterator<char>(fa)), {});
    const std::string bb((std::istreambuf_iterator<char>(fb)), {});
    CHECK(ba == bb);
    CHECK(!ba.empty());
}
