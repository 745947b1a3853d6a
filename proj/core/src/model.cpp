#include "rfr/model.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "rfr/errors.hpp"

static_assert(std::endian::native == std::endian::little,
              "model file i/o assumes a little-endian host");

namespace rfr {

RfrModel::RfrModel(basis::CenterSet centers, Eigen::MatrixXd beta,
                   Standardization standardization, double tau, double dt,
                   observe::Layout layout, int observables, io::MetaMap provenance,
                   double lambda, long training_n, Eigen::VectorXd residual_mse)
    : centers_(std::move(centers)),
      beta_(std::move(beta)),
      standardization_(std::move(standardization)),
      tau_(tau),
      dt_(dt),
      layout_(layout),
      observables_(observables),
      provenance_(std::move(provenance)),
      lambda_(lambda),
      training_n_(training_n),
      residual_mse_(std::move(residual_mse)) {
    if (beta_.rows() != centers_.columns() || beta_.cols() != centers_.D)
        throw ValidationError("RfrModel: coefficient shape does not match the basis");
    if (!beta_.allFinite()) throw ValidationError("RfrModel: coefficients not finite");
    if (observables_ < 1) throw ValidationError("RfrModel: observables must be >= 1");
    if (standardization_.mean.size() != observables_ ||
        standardization_.std.size() != observables_)
        throw ValidationError("RfrModel: standardization size != observables");
    if (dt_ <= 0.0) throw ValidationError("RfrModel: dt must be positive");
    if (layout_ == observe::Layout::interleaved && centers_.D % observables_ != 0)
        throw ValidationError("RfrModel: interleaved layout requires observables | D");
    csq_ = centers_.centers.rowwise().squaredNorm();
}

long RfrModel::lag() const {
    return tau_ > 0.0 ? std::llround(tau_ / dt_) : 0;
}

void RfrModel::eval_F(const Eigen::VectorXd& x, Eigen::VectorXd& out,
                      EvalWorkspace& ws) const {
    const long J = this->J();
    const int D = this->D();
    ws.row.resize(columns());
    ws.row[0] = 1.0;
    ws.row.segment(1, D) = x;
    if (J > 0) {
        ws.d2 = csq_;
        ws.d2.noalias() -= 2.0 * (centers_.centers * x);
        ws.d2.array() += x.squaredNorm();
        ws.row.segment(1 + D, J) = (-(ws.d2.array().max(0.0)) / centers_.sigma2).exp();
    }
    out.noalias() = beta_.transpose() * ws.row;
}

Eigen::VectorXd RfrModel::eval_F(const Eigen::VectorXd& x) const {
    EvalWorkspace ws;
    Eigen::VectorXd out(D());
    eval_F(x, out, ws);
    return out;
}

Eigen::MatrixXd integrate_model(const RfrModel& model, const Eigen::VectorXd& x0,
                                double dt_int, long steps) {
    ModelOde ode(model);
    return dynamics::integrate(ode, x0, dt_int, steps);
}

Eigen::MatrixXd integrate_model_partial(const RfrModel& model, const Eigen::VectorXd& x0,
                                        double dt_int, long steps) {
    if (steps < 0) throw ValidationError("integrate_model_partial: steps must be >= 0");
    if (x0.size() != model.D())
        throw ValidationError("integrate_model_partial: state dimension mismatch");
    ModelOde ode(model);
    dynamics::Rk4Workspace ws;
    ws.resize(model.D());
    Eigen::MatrixXd rows(steps + 1, model.D());
    Eigen::VectorXd x = x0;
    if (!x.allFinite()) return Eigen::MatrixXd(0, model.D());
    rows.row(0) = x;
    long done = 0;
    for (long s = 1; s <= steps; ++s) {
        dynamics::rk4_step(ode, x, dt_int, ws);
        if (!x.allFinite()) break;
        rows.row(s) = x;
        done = s;
    }
    rows.conservativeResize(done + 1, model.D());
    return rows;
}

Prediction predict(const RfrModel& model, const Eigen::VectorXd& x0, double horizon,
                   double dt_int) {
    if (horizon <= 0.0) throw ValidationError("predict: horizon must be positive");
    double dt = dt_int > 0.0 ? dt_int : model.dt();

    Prediction out;
    for (int halvings = 0;; ++halvings) {
        const long steps = std::max<long>(1, static_cast<long>(std::ceil(horizon / dt - 1e-9)));
        try {
            out.states = integrate_model(model, x0, dt, steps);
            out.dt = dt;
            out.halvings = halvings;
            break;
        } catch (const NonFiniteState&) {
            if (halvings >= 3) throw;
            dt *= 0.5;
        }
    }

    const long rows = out.states.rows();
    out.times.resize(rows);
    for (long r = 0; r < rows; ++r) out.times[r] = out.dt * static_cast<double>(r);
    out.x1_destd = out.states.col(0) * model.standardization().std[0];
    out.x1_destd.array() += model.standardization().mean[0];
    return out;
}

namespace {

constexpr std::uint32_t kFormatVersion = 1;

struct Writer {
    std::string buf;

    void bytes(const void* p, std::size_t size) {
        buf.append(static_cast<const char*>(p), size);
    }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void u64(std::uint64_t v) { bytes(&v, 8); }
    void f64(double v) { bytes(&v, 8); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void text(const std::string& s) {
        u64(s.size());
        bytes(s.data(), s.size());
    }
};

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void bytes(void* p, std::size_t size) {
        if (pos + size > buf.size()) throw CorruptFile("model file: truncated section");
        std::memcpy(p, buf.data() + pos, size);
        pos += size;
    }
    std::uint32_t u32() { std::uint32_t v; bytes(&v, 4); return v; }
    std::uint64_t u64() { std::uint64_t v; bytes(&v, 8); return v; }
    double f64() { double v; bytes(&v, 8); return v; }
    std::int32_t i32() { std::int32_t v; bytes(&v, 4); return v; }
    std::string text() {
        const std::uint64_t len = u64();
        if (len > buf.size() - pos) throw CorruptFile("model file: bad string length");
        std::string s(buf.data() + pos, len);
        pos += len;
        return s;
    }
};

} // namespace

void save(const RfrModel& model, const std::filesystem::path& path) {
    Writer w;
    w.bytes("RFR1", 4);
    w.u32(kFormatVersion);

    const auto& grid = model.centers().grid;
    w.u32(static_cast<std::uint32_t>(model.D()));
    w.u32(static_cast<std::uint32_t>(model.observables()));
    w.u32(model.layout() == observe::Layout::interleaved ? 1 : 0);
    w.u32(static_cast<std::uint32_t>(grid.m));
    w.u32(grid.norm == basis::Norm::linf ? 1 : 0);
    w.u64(static_cast<std::uint64_t>(model.J()));
    w.f64(model.tau());
    w.f64(model.dt());
    w.f64(grid.delta_grid);
    w.f64(grid.p);
    w.f64(grid.anchor);
    w.f64(model.centers().sigma2);
    w.f64(model.lambda());
    w.u64(static_cast<std::uint64_t>(model.training_n()));

    for (int c = 0; c < model.observables(); ++c) w.f64(model.standardization().mean[c]);
    for (int c = 0; c < model.observables(); ++c) w.f64(model.standardization().std[c]);

    const auto& lattice = model.centers().lattice;
    for (long j = 0; j < lattice.rows(); ++j)
        for (int d = 0; d < model.D(); ++d) w.i32(lattice(j, d));

    const auto& beta = model.beta();
    for (int k = 0; k < beta.cols(); ++k)
        for (long r = 0; r < beta.rows(); ++r) w.f64(beta(r, k));

    w.u32(static_cast<std::uint32_t>(model.residual_mse().size()));
    for (long k = 0; k < model.residual_mse().size(); ++k) w.f64(model.residual_mse()[k]);

    w.u64(model.provenance().size());
    for (const auto& [key, value] : model.provenance()) {
        w.text(key);
        w.text(value);
    }

    w.u32(io::crc32(w.buf.data(), w.buf.size()));

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path.string());
    out.write(w.buf.data(), static_cast<std::streamsize>(w.buf.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

RfrModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 12 || buf.compare(0, 4, "RFR1") != 0)
        throw CorruptFile(path.string() + ": not a model file (missing RFR1 magic)");

    std::uint32_t stored_crc = 0;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    const std::uint32_t actual_crc = io::crc32(buf.data(), buf.size() - 4);
    if (stored_crc != actual_crc)
        throw CorruptFile(path.string() + ": checksum mismatch (file damaged or truncated)");

    Reader r{buf, 4};
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
        throw FormatVersionMismatch(path.string() + ": file format version " +
                                    std::to_string(version) + ", this build reads " +
                                    std::to_string(kFormatVersion));

    const int D = static_cast<int>(r.u32());
    const int observables = static_cast<int>(r.u32());
    const observe::Layout layout =
        r.u32() == 1 ? observe::Layout::interleaved : observe::Layout::scalar;
    basis::GridSpec grid;
    grid.m = static_cast<int>(r.u32());
    grid.norm = r.u32() == 1 ? basis::Norm::linf : basis::Norm::l2;
    const long J = static_cast<long>(r.u64());
    if (D < 1 || observables < 1 || J < 0 || D > 4096)
        throw CorruptFile(path.string() + ": implausible header");

    const double tau = r.f64();
    const double dt = r.f64();
    grid.delta_grid = r.f64();
    grid.p = r.f64();
    grid.anchor = r.f64();
    const double sigma2 = r.f64();
    const double lambda = r.f64();
    const long training_n = static_cast<long>(r.u64());

    Standardization st;
    st.mean.resize(observables);
    st.std.resize(observables);
    for (int c = 0; c < observables; ++c) st.mean[c] = r.f64();
    for (int c = 0; c < observables; ++c) st.std[c] = r.f64();

    basis::CenterSet cs;
    cs.grid = grid;
    cs.D = D;
    cs.sigma2 = sigma2;
    cs.lattice.resize(J, D);
    for (long j = 0; j < J; ++j)
        for (int d = 0; d < D; ++d) cs.lattice(j, d) = r.i32();
    cs.centers = cs.lattice.cast<double>() * grid.delta_grid;
    cs.centers.array() += grid.anchor;

    Eigen::MatrixXd beta(1 + D + J, D);
    for (int k = 0; k < D; ++k)
        for (long row = 0; row < beta.rows(); ++row) beta(row, k) = r.f64();

    const long mse_count = static_cast<long>(r.u32());
    Eigen::VectorXd residual_mse(mse_count);
    for (long k = 0; k < mse_count; ++k) residual_mse[k] = r.f64();

    io::MetaMap provenance;
    const std::uint64_t entries = r.u64();
    for (std::uint64_t e = 0; e < entries; ++e) {
        std::string key = r.text();
        provenance[std::move(key)] = r.text();
    }

    if (r.pos != buf.size() - 4)
        throw CorruptFile(path.string() + ": trailing bytes before checksum");

    return RfrModel(std::move(cs), std::move(beta), std::move(st), tau, dt, layout,
                    observables, std::move(provenance), lambda, training_n,
                    std::move(residual_mse));
}

} // namespace rfr
