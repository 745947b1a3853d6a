// Command line frontend: simulate reference systems, embed observations,
// fit radial-function models, and drive prediction / evaluation / saddle
// trajectory generation. Exit codes: 0 ok, 2 validation, 3 numeric, 4 io.
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rfr/deriv.hpp"
#include "rfr/dynamics.hpp"
#include "rfr/errors.hpp"
#include "rfr/evaluate.hpp"
#include "rfr/io.hpp"
#include "rfr/model.hpp"
#include "rfr/observe.hpp"
#include "rfr/pipeline.hpp"
#include "rfr/regress.hpp"
#include "rfr/saddle.hpp"

namespace {

namespace fs = std::filesystem;
using namespace rfr;

fs::path sidecar_path(const fs::path& p) {
    fs::path meta = p;
    meta.replace_extension(".meta.json");
    return meta;
}

std::vector<std::string> numbered(const std::string& prefix, int count) {
    std::vector<std::string> cols;
    for (int i = 1; i <= count; ++i) cols.push_back(prefix + std::to_string(i));
    return cols;
}

Eigen::MatrixXd with_time(const Eigen::VectorXd& t, const Eigen::MatrixXd& v) {
    Eigen::MatrixXd out(v.rows(), v.cols() + 1);
    out.col(0) = t;
    out.rightCols(v.cols()) = v;
    return out;
}

// Embedded states from a t,X1..XD table; tau/dt/layout metadata comes from
// the model that will consume them.
observe::EmbeddedSeries embedded_from_csv(const fs::path& path, const RfrModel& model) {
    const io::Table t = io::read_csv(path);
    if (t.columns.size() < 2 || t.columns[0] != "t")
        throw ValidationError(path.string() + ": expected columns t,X1..XD");
    observe::EmbeddedSeries e;
    e.D = static_cast<int>(t.columns.size()) - 1;
    if (e.D != model.D())
        throw ValidationError(path.string() + ": has D=" + std::to_string(e.D) +
                              " but the model expects D=" + std::to_string(model.D()));
    e.tau = model.tau();
    e.dt = model.dt();
    e.lag = model.lag();
    e.layout = model.layout();
    e.observables = model.observables();
    e.times = t.data.col(0);
    e.samples = t.data.rightCols(e.D);
    return e;
}

Eigen::VectorXd init_state(const observe::EmbeddedSeries& e, long row) {
    if (row < 0 || row >= e.size())
        throw ValidationError("--init-row " + std::to_string(row) + " out of range (" +
                              std::to_string(e.size()) + " rows)");
    return e.samples.row(row);
}

int run_main(int argc, char** argv) {
    CLI::App app{"Reconstructs ODE models from scalar chaotic time series using "
                 "radial-function regression, and generates trajectories on the "
                 "resulting model attractors and saddles."};
    app.set_version_flag("--version", pipeline::kToolVersion);
    app.require_subcommand(1);

    // ---- simulate ----------------------------------------------------------
    struct {
        std::string system = "ks";
        double T = 1000.0, dt = 0.01, dt_int = 0.0, transient = 1000.0, noise = 0.0;
        std::uint64_t seed = 1;
        bool truth = false;
        std::string out;
    } sim;
    auto* c_sim = app.add_subcommand("simulate", "Integrate a reference system and record observables");
    c_sim->add_option("--system", sim.system, "ks | mg | sm | cr")->capture_default_str();
    c_sim->add_option("--T", sim.T, "observed duration")->capture_default_str();
    c_sim->add_option("--dt", sim.dt, "observation step")->capture_default_str();
    c_sim->add_option("--dt-int", sim.dt_int, "integrator step, 0 = per-system default")->capture_default_str();
    c_sim->add_option("--transient", sim.transient, "discarded lead-in time")->capture_default_str();
    c_sim->add_option("--noise-std-ratio", sim.noise, "observation noise std / signal std")->capture_default_str();
    c_sim->add_option("--seed", sim.seed)->capture_default_str();
    c_sim->add_flag("--truth-deriv", sim.truth, "also record the true observable derivative");
    c_sim->add_option("--out", sim.out, "output CSV (t,w1[,w2])")->required();
    c_sim->callback([&] {
        dynamics::SimulateSpec spec;
        spec.system = sim.system;
        spec.T = sim.T;
        spec.dt = sim.dt;
        spec.dt_int = sim.dt_int;
        spec.transient = sim.transient;
        spec.seed = sim.seed;
        spec.truth_derivative = sim.truth;
        auto result = dynamics::simulate(spec);
        TimeSeries series = observe::add_observation_noise(result.series, sim.noise, sim.seed);

        Eigen::VectorXd t(series.size());
        for (long k = 0; k < series.size(); ++k) t[k] = series.time_at(k);
        auto cols = numbered("w", series.observables());
        Eigen::MatrixXd data = series.values;
        if (sim.truth) {
            auto dcols = numbered("dw", series.observables());
            cols.insert(cols.end(), dcols.begin(), dcols.end());
            Eigen::MatrixXd both(data.rows(), data.cols() + result.truth_deriv.cols());
            both << data, result.truth_deriv;
            data = std::move(both);
        }
        cols.insert(cols.begin(), "t");
        io::write_csv(sim.out, cols, with_time(t, data));
        result.meta["noise_std_ratio"] = io::format_double(sim.noise);
        io::write_meta(sidecar_path(sim.out), result.meta);
        std::cout << "wrote " << sim.out << " (" << series.size() << " samples)\n";
    });

    // ---- embed -------------------------------------------------------------
    struct {
        std::string in, out, layout = "scalar";
        int D = 5;
        double tau = 0.12;
    } emb;
    auto* c_emb = app.add_subcommand("embed", "Standardize observations and build delay coordinates");
    c_emb->add_option("--in", emb.in, "observation CSV (t,w1[,w2])")->required();
    c_emb->add_option("--dim", emb.D, "embedding dimension D")->required();
    c_emb->add_option("--tau", emb.tau, "delay time")->required();
    c_emb->add_option("--layout", emb.layout, "scalar | interleaved")->capture_default_str();
    c_emb->add_option("--out", emb.out, "embedded CSV (t,X1..XD)")->required();
    c_emb->callback([&] {
        const io::Table t = io::read_csv(emb.in);
        if (t.columns.size() < 2 || t.columns[0] != "t")
            throw ValidationError(emb.in + ": expected columns t,w1[,w2]");
        if (t.data.rows() < 2) throw ValidationError(emb.in + ": need at least 2 samples");
        observe::Layout layout;
        if (emb.layout == "scalar") layout = observe::Layout::scalar;
        else if (emb.layout == "interleaved") layout = observe::Layout::interleaved;
        else throw ValidationError("--layout must be scalar or interleaved");

        // observable columns only; a truth-derivative block is ignored
        int n_obs = 0;
        while (n_obs + 1 < static_cast<int>(t.columns.size()) &&
               t.columns[static_cast<std::size_t>(n_obs) + 1] == "w" + std::to_string(n_obs + 1))
            ++n_obs;
        if (n_obs == 0) throw ValidationError(emb.in + ": no w1 column");

        TimeSeries series;
        series.t0 = t.data(0, 0);
        series.dt = (t.data(t.data.rows() - 1, 0) - t.data(0, 0)) /
                    static_cast<double>(t.data.rows() - 1);
        series.values = t.data.middleCols(1, n_obs);
        auto [standardized, stdz] = observe::standardize(series);
        const auto embedded = observe::embed(standardized, emb.D, emb.tau, layout);

        auto cols = numbered("X", emb.D);
        cols.insert(cols.begin(), "t");
        io::write_csv(emb.out, cols, with_time(embedded.times, embedded.samples));

        io::MetaMap meta;
        meta["D"] = std::to_string(embedded.D);
        meta["tau"] = io::format_double(embedded.tau);
        meta["dt"] = io::format_double(embedded.dt);
        meta["lag"] = std::to_string(embedded.lag);
        meta["first_index"] = std::to_string(embedded.first_index);
        meta["layout"] = emb.layout;
        meta["observables"] = std::to_string(embedded.observables);
        for (int c = 0; c < standardized.observables(); ++c) {
            meta["mean.w" + std::to_string(c + 1)] = io::format_double(stdz.mean[c]);
            meta["std.w" + std::to_string(c + 1)] = io::format_double(stdz.std[c]);
        }
        io::write_meta(sidecar_path(emb.out), meta);
        std::cout << "wrote " << emb.out << " (" << embedded.size() << " rows, lag "
                  << embedded.lag << ")\n";
    });

    // ---- fit ---------------------------------------------------------------
    struct {
        std::string in, out;
        double lambda = 1e-7, grid = 0.5, p = 0.1, tau = 0.0, dt = 0.0;
        int m = 3, order = 6, l = 1;
        long n = 50'000, cap = 1'000'000;
        std::uint64_t seed = 1;
        std::vector<double> ladder;
    } fit;
    auto* c_fit = app.add_subcommand("fit", "Ridge-fit the radial-function model to embedded data");
    c_fit->add_option("--in", fit.in, "embedded CSV from `embed`")->required();
    c_fit->add_option("--lambda", fit.lambda)->capture_default_str();
    c_fit->add_option("--n-samples", fit.n, "regression sample count")->capture_default_str();
    c_fit->add_option("--grid", fit.grid, "lattice spacing delta_grid")->capture_default_str();
    c_fit->add_option("--m", fit.m, "retention reach in cells")->capture_default_str();
    c_fit->add_option("--p", fit.p, "radial value at the retention radius")->capture_default_str();
    c_fit->add_option("--deriv-order", fit.order, "2 or 6")->capture_default_str();
    c_fit->add_option("--deriv-stride", fit.l, "stencil stride l")->capture_default_str();
    c_fit->add_option("--center-cap", fit.cap)->capture_default_str();
    c_fit->add_option("--tau", fit.tau, "delay time (default: embed sidecar)");
    c_fit->add_option("--dt", fit.dt, "sample step (default: embed sidecar)");
    c_fit->add_option("--seed", fit.seed)->capture_default_str();
    c_fit->add_option("--ladder", fit.ladder, "extra lambdas to report refits for");
    c_fit->add_option("--out", fit.out, "model file")->required();
    c_fit->callback([&] {
        const io::Table t = io::read_csv(fit.in);
        if (t.columns.size() < 2 || t.columns[0] != "t")
            throw ValidationError(fit.in + ": expected columns t,X1..XD");
        const int D = static_cast<int>(t.columns.size()) - 1;

        io::MetaMap meta;
        if (fs::exists(sidecar_path(fit.in))) meta = io::read_meta(sidecar_path(fit.in));
        double tau = fit.tau, dt = fit.dt;
        if (tau <= 0.0 && meta.count("tau")) tau = io::parse_double(meta.at("tau"));
        if (dt <= 0.0 && meta.count("dt")) dt = io::parse_double(meta.at("dt"));
        if (tau <= 0.0 || dt <= 0.0)
            throw ValidationError("fit: provide --tau and --dt (no embed sidecar found)");
        const auto layout = meta.count("layout") && meta.at("layout") == "interleaved"
                                ? observe::Layout::interleaved
                                : observe::Layout::scalar;
        const int n_obs = meta.count("observables")
                              ? static_cast<int>(io::parse_double(meta.at("observables")))
                              : 1;
        Standardization stdz;
        stdz.mean = Eigen::VectorXd::Zero(n_obs);
        stdz.std = Eigen::VectorXd::Ones(n_obs);
        for (int c = 0; c < n_obs; ++c) {
            const std::string k = "w" + std::to_string(c + 1);
            if (meta.count("mean." + k)) stdz.mean[c] = io::parse_double(meta.at("mean." + k));
            if (meta.count("std." + k)) stdz.std[c] = io::parse_double(meta.at("std." + k));
        }

        observe::EmbeddedSeries embedded;
        embedded.D = D;
        embedded.tau = tau;
        embedded.dt = dt;
        embedded.lag = std::llround(tau / dt);
        embedded.layout = layout;
        embedded.observables = n_obs;
        embedded.times = t.data.col(0);
        embedded.samples = t.data.rightCols(D);

        const auto est =
            deriv::estimate_derivative(embedded.samples, {fit.order, fit.l, dt});
        const auto sample = regress::sample_rows(embedded, est, fit.n, fit.seed);

        basis::GridSpec grid;
        grid.delta_grid = fit.grid;
        grid.m = fit.m;
        grid.p = fit.p;
        grid.center_cap = fit.cap;
        const auto centers = basis::select_centers(sample.X, grid);
        std::cout << "J = " << centers.count() << " centers ("
                  << centers.columns() << " columns)\n";

        const auto coeffs = regress::fit_design(sample.X, sample.Y, centers, fit.lambda);
        io::MetaMap provenance;
        provenance["source"] = fit.in;
        provenance["tool_version"] = pipeline::kToolVersion;
        RfrModel model(centers, coeffs.beta, stdz, tau, dt, layout, n_obs, provenance,
                       fit.lambda, sample.X.rows(), coeffs.residual_mse);
        save(model, fit.out);
        std::cout << "wrote " << fit.out << " (residual mse";
        for (int k = 0; k < coeffs.residual_mse.size(); ++k)
            std::cout << ' ' << coeffs.residual_mse[k];
        std::cout << ")\n";

        if (!fit.ladder.empty()) {
            regress::GramBuilder gram(centers.columns(), D);
            Eigen::MatrixXd rows;
            for (long r0 = 0; r0 < sample.X.rows(); r0 += 1024) {
                const long count = std::min<long>(1024, sample.X.rows() - r0);
                basis::eval_rows(sample.X.middleRows(r0, count), centers, rows);
                gram.add_rows(rows, sample.Y.middleRows(r0, count));
            }
            regress::Problem problem{gram.gram(), gram.aty(), gram.yty(),
                                     gram.rows_seen(), fit.lambda};
            std::cout << "lambda ladder (lambda, |beta|, mean residual mse):\n";
            for (const auto& pt : regress::lambda_ladder(problem, fit.ladder))
                std::cout << "  " << pt.lambda << ", " << pt.coef_norm << ", "
                          << pt.residual_mse << "\n";
        }
    });

    // ---- predict -----------------------------------------------------------
    struct {
        std::string model, init, out;
        double horizon = 10.0, dt_int = 0.0;
        long row = 0;
    } pred;
    auto* c_pred = app.add_subcommand("predict", "Integrate the model from an embedded state");
    c_pred->add_option("--model", pred.model)->required();
    c_pred->add_option("--init-from", pred.init, "embedded CSV holding start states")->required();
    c_pred->add_option("--init-row", pred.row)->capture_default_str();
    c_pred->add_option("--horizon", pred.horizon)->capture_default_str();
    c_pred->add_option("--dt-int", pred.dt_int, "0 = model sample step")->capture_default_str();
    c_pred->add_option("--out", pred.out, "CSV t,X1..XD,X1_destd")->required();
    c_pred->callback([&] {
        const RfrModel model = load(pred.model);
        const auto embedded = embedded_from_csv(pred.init, model);
        const auto result = predict(model, init_state(embedded, pred.row), pred.horizon,
                                    pred.dt_int);
        auto cols = numbered("X", model.D());
        cols.insert(cols.begin(), "t");
        cols.push_back("X1_destd");
        Eigen::MatrixXd data(result.states.rows(), model.D() + 2);
        data.col(0) = result.times;
        data.middleCols(1, model.D()) = result.states;
        data.col(model.D() + 1) = result.x1_destd;
        io::write_csv(pred.out, cols, data);
        std::cout << "wrote " << pred.out << " (" << result.states.rows() << " rows, dt "
                  << result.dt << ", " << result.halvings << " halvings)\n";
    });

    // ---- evaluate ----------------------------------------------------------
    struct {
        std::string model, actual, report;
        double traj_length = 1000.0, horizon = 10.0;
        int inits = 10, bins = 100;
        std::uint64_t seed = 1;
    } ev;
    auto* c_ev = app.add_subcommand("evaluate", "Model-vs-actual metric suite");
    c_ev->add_option("--model", ev.model)->required();
    c_ev->add_option("--actual", ev.actual, "embedded CSV of actual data")->required();
    c_ev->add_option("--report", ev.report, "output directory")->required();
    c_ev->add_option("--traj-length", ev.traj_length)->capture_default_str();
    c_ev->add_option("--forecast-inits", ev.inits)->capture_default_str();
    c_ev->add_option("--forecast-horizon", ev.horizon)->capture_default_str();
    c_ev->add_option("--bins", ev.bins)->capture_default_str();
    c_ev->add_option("--seed", ev.seed)->capture_default_str();
    c_ev->callback([&] {
        const RfrModel model = load(ev.model);
        const auto embedded = embedded_from_csv(ev.actual, model);
        pipeline::EvalOptions opts;
        opts.traj_length = ev.traj_length;
        opts.forecast_inits = ev.inits;
        opts.forecast_horizon = ev.horizon;
        opts.bins = ev.bins;
        opts.seed = ev.seed;
        pipeline::StageInfo stage;
        const auto summary = pipeline::evaluate_artifacts(model, embedded, opts,
                                                          ev.report, stage);
        std::cout << "model trajectory rows: " << summary.traj_rows << " / "
                  << summary.traj_rows_requested << "\n";
        if (summary.delay_median >= 0.0)
            std::cout << "delay error median " << summary.delay_median << ", p95 "
                      << summary.delay_p95 << ", max " << summary.delay_max << "\n";
        if (summary.overlap >= 0.0)
            std::cout << "density overlap " << summary.overlap << "\n";
        std::cout << "forecast valid for " << summary.forecast_positive << " of "
                  << ev.inits << " starts\n";
    });

    // ---- saddle ------------------------------------------------------------
    struct {
        std::string model, init, out, log, threshold = "auto";
        double length = 1000.0, segment = 50.0, keep = 25.0;
        double exp_min = 1.0, exp_max = 8.0;
        int trials = 100;
        long row = 0;
        bool no_refine = false;
        std::uint64_t seed = 1;
    } sad;
    auto* c_sad = app.add_subcommand("saddle", "Stagger-and-step trajectory on the model saddle");
    c_sad->add_option("--model", sad.model)->required();
    c_sad->add_option("--init-from", sad.init, "embedded CSV holding start states")->required();
    c_sad->add_option("--init-row", sad.row)->capture_default_str();
    c_sad->add_option("--length", sad.length, "target trajectory length")->capture_default_str();
    c_sad->add_option("--threshold", sad.threshold, "delay-error bound, or 'auto'")->capture_default_str();
    c_sad->add_option("--segment", sad.segment)->capture_default_str();
    c_sad->add_option("--keep", sad.keep)->capture_default_str();
    c_sad->add_option("--trials", sad.trials)->capture_default_str();
    c_sad->add_option("--exp-min", sad.exp_min, "smallest noise exponent")->capture_default_str();
    c_sad->add_option("--exp-max", sad.exp_max, "largest noise exponent")->capture_default_str();
    c_sad->add_flag("--no-refine", sad.no_refine, "disable local noise search");
    c_sad->add_option("--seed", sad.seed)->capture_default_str();
    c_sad->add_option("--out", sad.out, "trajectory CSV")->required();
    c_sad->add_option("--log", sad.log, "per-segment CSV (default: <out>_segments.csv)");
    c_sad->callback([&] {
        const RfrModel model = load(sad.model);
        const auto embedded = embedded_from_csv(sad.init, model);
        const Eigen::VectorXd x0 = init_state(embedded, sad.row);

        double threshold;
        if (sad.threshold == "auto") {
            threshold = pipeline::auto_threshold(model, x0);
            std::cout << "auto threshold = " << threshold << "\n";
        } else {
            try {
                threshold = io::parse_double(sad.threshold);
            } catch (const Error&) {
                throw ValidationError("--threshold must be a real, 'inf', or 'auto'");
            }
        }

        saddle::SaddleConfig cfg;
        cfg.segment_length = sad.segment;
        cfg.keep_length = sad.keep;
        cfg.trials_max = sad.trials;
        cfg.threshold = threshold;
        cfg.total_length = sad.length;
        cfg.seed = sad.seed;
        cfg.refine = !sad.no_refine;
        cfg.exp_min = sad.exp_min;
        cfg.exp_max = sad.exp_max;
        const auto run = saddle::stagger_step(model, x0, cfg);

        auto cols = numbered("X", model.D());
        cols.insert(cols.begin(), "t");
        io::write_csv(sad.out, cols, with_time(run.times, run.trajectory));

        const std::string log = sad.log.empty()
            ? (fs::path(sad.out).parent_path() /
               (fs::path(sad.out).stem().string() + "_segments.csv")).string()
            : sad.log;
        Eigen::MatrixXd seg(static_cast<long>(run.segments.size()), 4);
        for (std::size_t s = 0; s < run.segments.size(); ++s) {
            seg(static_cast<long>(s), 0) = static_cast<double>(run.segments[s].segment);
            seg(static_cast<long>(s), 1) = run.segments[s].trials + run.segments[s].refine_trials;
            seg(static_cast<long>(s), 2) = run.segments[s].e;
            seg(static_cast<long>(s), 3) = run.segments[s].noise_mag;
        }
        io::write_csv(log, {"segment", "trials", "E", "noise_mag"}, seg);

        std::cout << "kept " << run.kept_length << " time units, valid "
                  << run.valid_length << ", " << run.segments.size() << " segments\n";
        if (run.escaped)
            throw SaddleEscape("trajectory left the saddle; partial run written to " +
                               sad.out);
        if (!run.success)
            std::cout << "warning: some segments exceeded the threshold\n";
    });

    // ---- run ----------------------------------------------------------------
    struct {
        std::string config, system = "ks", preset = "desk", out;
        std::vector<std::string> sets;
        std::uint64_t seed = 0;
    } run;
    auto* c_run = app.add_subcommand("run", "Full pipeline: simulate through evaluate (and saddle)");
    c_run->add_option("--config", run.config, "key=value config file");
    c_run->add_option("--system", run.system, "ks | mg | sm | cr | n-ks (when no --config)")->capture_default_str();
    c_run->add_option("--preset", run.preset, "desk | paper")->capture_default_str();
    c_run->add_option("--set", run.sets, "override, e.g. --set fit.lambda=1e-5");
    auto* seed_opt = c_run->add_option("--seed", run.seed);
    c_run->add_option("--out", run.out, "output directory");
    c_run->callback([&] {
        pipeline::ExperimentConfig cfg = run.config.empty()
            ? pipeline::table1_defaults(run.system)
            : pipeline::load_config(run.config);
        if (run.preset == "desk") pipeline::apply_desk_preset(cfg);
        else if (run.preset != "paper") throw ValidationError("--preset must be desk or paper");
        for (const auto& kv : run.sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos)
                throw ValidationError("--set expects key=value, got '" + kv + "'");
            pipeline::set_key(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (seed_opt->count() > 0) pipeline::set_key(cfg, "seed", std::to_string(run.seed));
        if (!run.out.empty()) pipeline::set_key(cfg, "out", run.out);

        const auto manifest = pipeline::run_pipeline(cfg);
        for (const auto& stage : manifest.stages)
            std::cout << stage.name << ": " << stage.seconds << " s\n";
        std::cout << "manifest: " << (fs::path(cfg.out) / "manifest.json").string() << "\n";
        if (manifest.saddle_escaped)
            throw SaddleEscape("saddle stage escaped; artifacts in " + cfg.out);
    });

    // ---- deriv-scan ---------------------------------------------------------
    struct {
        std::string system = "ks", out;
        double T = 100.0, dt = 0.01, noise = 0.1, transient = 1000.0;
        int order = 6, l_min = 1, l_max = 15;
        std::uint64_t seed = 1;
    } scan;
    auto* c_scan = app.add_subcommand("deriv-scan", "Derivative error vs stencil stride on noisy observations");
    c_scan->add_option("--system", scan.system, "ks | mg | sm | cr")->capture_default_str();
    c_scan->add_option("--T", scan.T)->capture_default_str();
    c_scan->add_option("--dt", scan.dt)->capture_default_str();
    c_scan->add_option("--noise-std-ratio", scan.noise)->capture_default_str();
    c_scan->add_option("--transient", scan.transient)->capture_default_str();
    c_scan->add_option("--order", scan.order, "2 or 6")->capture_default_str();
    c_scan->add_option("--l-min", scan.l_min)->capture_default_str();
    c_scan->add_option("--l-max", scan.l_max)->capture_default_str();
    c_scan->add_option("--seed", scan.seed)->capture_default_str();
    c_scan->add_option("--out", scan.out, "CSV l,error_std")->required();
    c_scan->callback([&] {
        dynamics::SimulateSpec spec;
        spec.system = scan.system;
        spec.T = scan.T;
        spec.dt = scan.dt;
        spec.transient = scan.transient;
        spec.seed = scan.seed;
        spec.truth_derivative = true;
        const auto result = dynamics::simulate(spec);
        const TimeSeries noisy =
            observe::add_observation_noise(result.series, scan.noise, scan.seed);
        const auto points = deriv::scan_stride(noisy.values, result.truth_deriv, scan.dt,
                                               scan.order, scan.l_min, scan.l_max);
        Eigen::MatrixXd data(static_cast<long>(points.size()), 2);
        for (std::size_t i = 0; i < points.size(); ++i) {
            data(static_cast<long>(i), 0) = points[i].l;
            data(static_cast<long>(i), 1) = points[i].error_std;
        }
        io::write_csv(scan.out, {"l", "error_std"}, data);
        const int best = deriv::argmin_stride(points);
        std::cout << "wrote " << scan.out << "; minimum at l = " << best << "\n";
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run_main(argc, argv);
    } catch (const rfr::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.kind()) {
            case rfr::ErrorKind::validation: return 2;
            case rfr::ErrorKind::numeric: return 3;
            case rfr::ErrorKind::io: return 4;
        }
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
