#include "rfr/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rfr/deriv.hpp"
#include "rfr/dynamics.hpp"
#include "rfr/errors.hpp"
#include "rfr/evaluate.hpp"
#include "rfr/io.hpp"
#include "rfr/observe.hpp"
#include "rfr/regress.hpp"
#include "rfr/saddle.hpp"

namespace rfr::pipeline {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

template <typename T>
T parse_integer(const std::string& key, const std::string& value) {
    T v{};
    const std::string t = trim(value);
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw ValidationError("config: '" + key + "' expects an integer, got '" + value + "'");
    return v;
}

double parse_real(const std::string& key, const std::string& value) {
    double v = 0.0;
    const std::string t = trim(value);
    auto res = std::from_chars(t.data(), t.data() + t.size(), v);
    if (res.ec != std::errc{} || res.ptr != t.data() + t.size())
        throw ValidationError("config: '" + key + "' expects a number, got '" + value + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
    const std::string t = trim(value);
    if (t == "1" || t == "true") return true;
    if (t == "0" || t == "false") return false;
    throw ValidationError("config: '" + key + "' expects 0 or 1, got '" + value + "'");
}

struct KeyDesc {
    const char* key;
    std::function<std::string(const ExperimentConfig&)> get;
    std::function<void(ExperimentConfig&, const std::string&)> set;
};

const std::vector<KeyDesc>& key_table() {
    using C = ExperimentConfig;
    auto real_key = [](const char* k, double C::* f) {
        return KeyDesc{k, [f](const C& c) { return io::format_double(c.*f); },
                       [k, f](C& c, const std::string& v) { c.*f = parse_real(k, v); }};
    };
    auto int_key = [](const char* k, int C::* f) {
        return KeyDesc{k, [f](const C& c) { return std::to_string(c.*f); },
                       [k, f](C& c, const std::string& v) { c.*f = parse_integer<int>(k, v); }};
    };
    auto long_key = [](const char* k, long C::* f) {
        return KeyDesc{k, [f](const C& c) { return std::to_string(c.*f); },
                       [k, f](C& c, const std::string& v) { c.*f = parse_integer<long>(k, v); }};
    };
    auto bool_key = [](const char* k, bool C::* f) {
        return KeyDesc{k, [f](const C& c) { return std::string(c.*f ? "1" : "0"); },
                       [k, f](C& c, const std::string& v) { c.*f = parse_bool(k, v); }};
    };
    static const std::vector<KeyDesc> table = {
        {"system.name", [](const C& c) { return c.system; },
         [](C& c, const std::string& v) { c.system = trim(v); }},
        long_key("system.n_t", &C::n_t),
        real_key("system.dt", &C::dt),
        real_key("system.dt_int", &C::dt_int),
        real_key("system.transient", &C::transient),
        real_key("system.noise", &C::noise),
        int_key("embed.D", &C::D),
        real_key("embed.tau", &C::tau),
        int_key("embed.I", &C::interleave),
        int_key("deriv.order", &C::deriv_order),
        int_key("deriv.l", &C::l),
        int_key("fit.m", &C::m),
        real_key("fit.p", &C::p),
        real_key("fit.delta_grid", &C::delta_grid),
        real_key("fit.lambda", &C::lambda),
        long_key("fit.n", &C::n),
        long_key("fit.center_cap", &C::center_cap),
        real_key("eval.traj_length", &C::eval_traj_length),
        int_key("eval.forecast_inits", &C::forecast_inits),
        real_key("eval.forecast_horizon", &C::forecast_horizon),
        int_key("eval.bins", &C::bins),
        bool_key("saddle.enabled", &C::saddle_enabled),
        real_key("saddle.total_length", &C::saddle_total_length),
        real_key("saddle.segment_length", &C::saddle_segment_length),
        real_key("saddle.keep_length", &C::saddle_keep_length),
        int_key("saddle.trials_max", &C::saddle_trials_max),
        {"saddle.threshold", [](const C& c) { return c.saddle_threshold; },
         [](C& c, const std::string& v) { c.saddle_threshold = trim(v); }},
        bool_key("saddle.refine", &C::saddle_refine),
        {"seed", [](const C& c) { return std::to_string(c.seed); },
         [](C& c, const std::string& v) { c.seed = parse_integer<std::uint64_t>("seed", v); }},
        {"out", [](const C& c) { return c.out; },
         [](C& c, const std::string& v) { c.out = trim(v); }},
    };
    return table;
}

const KeyDesc& find_key(const std::string& key) {
    for (const auto& d : key_table())
        if (key == d.key) return d;
    throw ValidationError("config: unknown key '" + key + "'");
}

std::string crc_hex(std::uint32_t crc) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", crc);
    return buf;
}

void add_file(StageInfo& stage, const std::filesystem::path& dir, const std::string& name) {
    stage.files.emplace_back(name, crc_hex(io::crc32_file(dir / name)));
}

void write_table(const std::filesystem::path& dir, const std::string& name,
                 const std::vector<std::string>& columns, const Eigen::MatrixXd& data,
                 StageInfo& stage) {
    io::write_csv(dir / name, columns, data);
    add_file(stage, dir, name);
}

Eigen::MatrixXd with_time(const Eigen::VectorXd& times, const Eigen::MatrixXd& values) {
    Eigen::MatrixXd out(values.rows(), values.cols() + 1);
    out.col(0) = times;
    out.rightCols(values.cols()) = values;
    return out;
}

std::vector<std::string> numbered_columns(const std::string& prefix, int count) {
    std::vector<std::string> cols;
    cols.reserve(static_cast<std::size_t>(count));
    for (int i = 1; i <= count; ++i) cols.push_back(prefix + std::to_string(i));
    return cols;
}

} // namespace

ExperimentConfig table1_defaults(const std::string& system) {
    ExperimentConfig c;
    c.system = system;
    c.out = "run-" + system;
    if (system == "ks" || system == "n-ks") {
        c.D = 5; c.tau = 0.12; c.delta_grid = 0.50; c.dt = 0.01; c.interleave = 1;
        if (system == "n-ks") {
            c.l = 9; c.lambda = 1e-4; c.noise = 0.1;
        } else {
            c.l = 1; c.lambda = 1e-7;
        }
    } else if (system == "mg") {
        c.D = 7; c.tau = 0.5; c.delta_grid = 0.25; c.dt = 0.01;
        c.l = 1; c.lambda = 1e-7; c.interleave = 1;
    } else if (system == "sm") {
        c.D = 6; c.tau = 18.0; c.delta_grid = 0.25; c.dt = 1.0;
        c.l = 1; c.lambda = 1e-12; c.interleave = 1;
    } else if (system == "cr") {
        c.D = 6; c.tau = 0.4; c.delta_grid = 0.25; c.dt = 0.1;
        c.l = 1; c.lambda = 1e-7; c.interleave = 2;
    } else {
        throw ValidationError("unknown system tag '" + system +
                              "' (expected ks, mg, sm, cr or n-ks)");
    }
    // columns shared by every system
    c.n_t = 1'000'000;
    c.m = 3;
    c.p = 0.1;
    c.n = 50'000;
    return c;
}

void apply_desk_preset(ExperimentConfig& cfg) {
    set_key(cfg, "system.n_t", "100000");
    set_key(cfg, "fit.n", "10000");
    const double coarser = cfg.delta_grid >= 0.5 ? 1.0 : 0.5;
    set_key(cfg, "fit.delta_grid", io::format_double(coarser));
}

void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
    find_key(key).set(cfg, value);
    cfg.overrides.push_back(key + "=" + trim(value));
}

std::string get_key(const ExperimentConfig& cfg, const std::string& key) {
    return find_key(key).get(cfg);
}

std::vector<std::pair<std::string, std::string>> config_items(const ExperimentConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> items;
    for (const auto& d : key_table()) items.emplace_back(d.key, d.get(cfg));
    return items;
}

std::string serialize(const ExperimentConfig& cfg) {
    std::ostringstream out;
    for (const auto& [key, value] : config_items(cfg)) out << key << " = " << value << "\n";
    return out.str();
}

ExperimentConfig parse_config(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> pairs;
    std::istringstream in(text);
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected 'key = value'");
        pairs.emplace_back(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }

    std::string system = "ks";
    for (const auto& [key, value] : pairs)
        if (key == "system.name") system = value;

    ExperimentConfig cfg = table1_defaults(system);
    for (const auto& [key, value] : pairs) {
        if (get_key(cfg, key) == value) continue;  // default restated, not an override
        set_key(cfg, key, value);
    }
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read config: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

void validate_config(const ExperimentConfig& cfg) {
    table1_defaults(cfg.system);  // rejects unknown tags
    if (cfg.n_t < 2) throw ValidationError("config: system.n_t must be >= 2");
    if (cfg.dt <= 0.0) throw ValidationError("config: system.dt must be positive");
    if (cfg.dt_int < 0.0) throw ValidationError("config: system.dt_int must be >= 0");
    if (cfg.transient < 0.0) throw ValidationError("config: system.transient must be >= 0");
    if (cfg.noise < 0.0) throw ValidationError("config: system.noise must be >= 0");
    if (cfg.D < 1) throw ValidationError("config: embed.D must be >= 1");

    const long lag = std::llround(cfg.tau / cfg.dt);
    if (lag < 1 || std::abs(static_cast<double>(lag) * cfg.dt - cfg.tau) >
                       1e-9 * std::max(cfg.dt, std::abs(cfg.tau)))
        throw ValidationError("config: embed.tau must be a positive integer multiple of system.dt");

    const int n_obs = dynamics::observable_count(cfg.system == "n-ks" ? "ks" : cfg.system);
    if (cfg.interleave != n_obs)
        throw ValidationError("config: embed.I must equal the system observable count (" +
                              std::to_string(n_obs) + ")");
    if (cfg.D % cfg.interleave != 0)
        throw ValidationError("config: embed.I must divide embed.D");

    if (cfg.deriv_order != 2 && cfg.deriv_order != 6)
        throw ValidationError("config: deriv.order must be 2 or 6");
    if (cfg.l < 1) throw ValidationError("config: deriv.l must be >= 1");
    if (cfg.m < 2) throw ValidationError("config: fit.m must be >= 2");
    if (!(cfg.p > 0.0) || !(cfg.p < 1.0))
        throw ValidationError("config: fit.p must lie in (0, 1)");
    if (cfg.delta_grid <= 0.0) throw ValidationError("config: fit.delta_grid must be positive");
    if (cfg.lambda < 0.0) throw ValidationError("config: fit.lambda must be >= 0");
    if (cfg.n < 1) throw ValidationError("config: fit.n must be >= 1");
    if (cfg.center_cap < 1) throw ValidationError("config: fit.center_cap must be >= 1");
    if (cfg.eval_traj_length <= 0.0)
        throw ValidationError("config: eval.traj_length must be positive");
    if (cfg.forecast_inits < 1)
        throw ValidationError("config: eval.forecast_inits must be >= 1");
    if (cfg.forecast_horizon <= 0.0)
        throw ValidationError("config: eval.forecast_horizon must be positive");
    if (cfg.bins < 2) throw ValidationError("config: eval.bins must be >= 2");
    if (cfg.saddle_threshold != "auto") {
        const double t = parse_real("saddle.threshold", cfg.saddle_threshold);
        if (!(t > 0.0))
            throw ValidationError("config: saddle.threshold must be positive or 'auto'");
    }
    if (cfg.out.empty()) throw ValidationError("config: out must not be empty");
}

EvalSummary evaluate_artifacts(const RfrModel& model, const observe::EmbeddedSeries& actual,
                               const EvalOptions& opts, const std::filesystem::path& dir,
                               StageInfo& stage) {
    if (actual.size() < 2) throw ValidationError("evaluate: actual series too short");
    if (actual.samples.cols() != model.D())
        throw ValidationError("evaluate: actual dimension differs from the model");
    std::filesystem::create_directories(dir);

    EvalSummary summary;
    const double dt = model.dt();
    const long steps = std::max<long>(1, std::llround(opts.traj_length / dt));
    const Eigen::VectorXd x0 = actual.samples.row(0);
    const Eigen::MatrixXd traj = integrate_model_partial(model, x0, dt, steps);
    const long lag = model.lag();
    const int pair_step =
        model.layout() == observe::Layout::interleaved ? model.observables() : 1;
    summary.traj_rows = traj.rows();
    summary.traj_rows_requested = steps + 1;

    io::MetaMap metrics;
    metrics["model_traj.rows"] = std::to_string(traj.rows());
    metrics["model_traj.rows_requested"] = std::to_string(steps + 1);

    if (traj.rows() > lag + 1) {
        const auto report = evaluate::delay_structure_error(traj, lag, pair_step);
        summary.delay_median = report.median;
        summary.delay_p95 = report.p95;
        summary.delay_max = report.max;
        metrics["delay.median"] = io::format_double(report.median);
        metrics["delay.p95"] = io::format_double(report.p95);
        metrics["delay.max"] = io::format_double(report.max);

        Eigen::VectorXd times(report.per_time.size());
        for (long k = 0; k < times.size(); ++k) times[k] = dt * static_cast<double>(k);
        write_table(dir, "delay_e.csv", {"t", "E"}, with_time(times, report.per_time), stage);
        Eigen::MatrixXd hist(report.hist_centers.size(), 2);
        hist.col(0) = report.hist_centers;
        hist.col(1) = report.hist_density;
        write_table(dir, "delay_hist.csv", {"center", "density"}, hist, stage);
    }

    if (traj.rows() >= 2) {
        const auto cmp =
            evaluate::density_compare(traj.col(0), actual.samples.col(0), opts.bins);
        summary.overlap = cmp.overlap;
        metrics["density.overlap"] = io::format_double(cmp.overlap);
        Eigen::MatrixXd dens(opts.bins, 3);
        for (int b = 0; b < opts.bins; ++b)
            dens(b, 0) = 0.5 * (cmp.edges[b] + cmp.edges[b + 1]);
        dens.col(1) = cmp.model_density;
        dens.col(2) = cmp.actual_density;
        write_table(dir, "density.csv", {"center", "model", "actual"}, dens, stage);
    }

    const auto fc = evaluate::forecast_suite(model, actual, opts.forecast_inits,
                                             opts.forecast_horizon, opts.seed);
    summary.err_threshold = fc.err_threshold;
    metrics["forecast.err_threshold"] = io::format_double(fc.err_threshold);
    for (long i = 0; i < fc.valid_time.size(); ++i)
        if (fc.valid_time[i] > 0.0) ++summary.forecast_positive;
    metrics["forecast.positive"] = std::to_string(summary.forecast_positive);
    metrics["forecast.inits"] = std::to_string(opts.forecast_inits);

    write_table(dir, "rmse.csv", {"t", "rmse"}, with_time(fc.times, fc.rmse), stage);
    Eigen::MatrixXd per_init(opts.forecast_inits, 3);
    for (int i = 0; i < opts.forecast_inits; ++i) {
        per_init(i, 0) = i;
        per_init(i, 1) = static_cast<double>(fc.start_rows[static_cast<std::size_t>(i)]);
        per_init(i, 2) = fc.valid_time[i];
    }
    write_table(dir, "forecast.csv", {"init", "start_row", "valid_time"}, per_init, stage);

    io::write_meta(dir / "metrics.json", metrics);
    add_file(stage, dir, "metrics.json");
    return summary;
}

double auto_threshold(const RfrModel& model, const Eigen::VectorXd& x0,
                      double probe_length, double floor, double fallback) {
    const long steps = std::max<long>(1, std::llround(probe_length / model.dt()));
    const Eigen::MatrixXd probe = integrate_model_partial(model, x0, model.dt(), steps);
    const long lag = model.lag();
    if (probe.rows() <= lag + 1) return fallback;
    const int pair_step =
        model.layout() == observe::Layout::interleaved ? model.observables() : 1;
    const auto report = evaluate::delay_structure_error(probe, lag, pair_step);
    if (!std::isfinite(report.p95)) return fallback;
    return std::max(report.p95, floor);
}

RunManifest run_pipeline(const ExperimentConfig& cfg) {
    validate_config(cfg);

    RunManifest manifest;
    manifest.version = kToolVersion;
    manifest.out_dir = cfg.out;
    manifest.config_text = serialize(cfg);

    const std::filesystem::path dir(cfg.out);
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir / "config.txt", std::ios::binary);
        if (!out) throw IoError("cannot write: " + (dir / "config.txt").string());
        out << manifest.config_text;
    }

    const auto run_stage = [&](const char* name, auto&& body) {
        StageInfo stage;
        stage.name = name;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(stage);
        } catch (const Error& e) {
            stage.seconds = std::chrono::duration<double>(
                                std::chrono::steady_clock::now() - t0).count();
            manifest.stages.push_back(std::move(stage));
            write_manifest(manifest, dir / "manifest.json");
            throw Error(e.kind(), std::string("stage ") + name + ": " + e.what());
        }
        stage.seconds = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0).count();
        manifest.stages.push_back(std::move(stage));
    };

    // carried between stages
    TimeSeries series;
    TimeSeries standardized;
    Standardization stdz;
    observe::EmbeddedSeries embedded;
    deriv::DerivativeEstimate est;
    std::unique_ptr<RfrModel> model;
    double delay_p95 = -1.0;

    run_stage("simulate", [&](StageInfo& stage) {
        dynamics::SimulateSpec spec;
        spec.system = cfg.system == "n-ks" ? "ks" : cfg.system;
        spec.T = static_cast<double>(cfg.n_t) * cfg.dt;
        spec.dt = cfg.dt;
        spec.dt_int = cfg.dt_int;
        spec.transient = cfg.transient;
        spec.seed = cfg.seed;
        auto result = dynamics::simulate(spec);
        series = std::move(result.series);

        Eigen::VectorXd times(series.size());
        for (long k = 0; k < series.size(); ++k) times[k] = series.time_at(k);
        auto cols = numbered_columns("w", series.observables());
        cols.insert(cols.begin(), "t");
        write_table(dir, "series.csv", cols, with_time(times, series.values), stage);
        io::write_meta(dir / "simulate.meta.json", result.meta);
        add_file(stage, dir, "simulate.meta.json");
    });

    run_stage("observe", [&](StageInfo& stage) {
        const TimeSeries noisy = observe::add_observation_noise(series, cfg.noise, cfg.seed);
        auto [s, z] = observe::standardize(noisy);
        standardized = std::move(s);
        stdz = std::move(z);

        Eigen::VectorXd times(standardized.size());
        for (long k = 0; k < standardized.size(); ++k) times[k] = standardized.time_at(k);
        auto cols = numbered_columns("w", standardized.observables());
        cols.insert(cols.begin(), "t");
        write_table(dir, "observed.csv", cols, with_time(times, standardized.values), stage);

        io::MetaMap meta;
        meta["noise_ratio"] = io::format_double(cfg.noise);
        for (int c = 0; c < standardized.observables(); ++c) {
            meta["mean.w" + std::to_string(c + 1)] = io::format_double(stdz.mean[c]);
            meta["std.w" + std::to_string(c + 1)] = io::format_double(stdz.std[c]);
        }
        io::write_meta(dir / "observe.meta.json", meta);
        add_file(stage, dir, "observe.meta.json");
    });

    run_stage("embed", [&](StageInfo& stage) {
        const auto layout = cfg.interleave > 1 ? observe::Layout::interleaved
                                               : observe::Layout::scalar;
        embedded = observe::embed(standardized, cfg.D, cfg.tau, layout);

        auto cols = numbered_columns("X", cfg.D);
        cols.insert(cols.begin(), "t");
        write_table(dir, "embedded.csv", cols, with_time(embedded.times, embedded.samples),
                    stage);

        io::MetaMap meta;
        meta["D"] = std::to_string(embedded.D);
        meta["tau"] = io::format_double(embedded.tau);
        meta["lag"] = std::to_string(embedded.lag);
        meta["first_index"] = std::to_string(embedded.first_index);
        meta["layout"] = embedded.layout == observe::Layout::interleaved ? "interleaved" : "scalar";
        meta["observables"] = std::to_string(embedded.observables);
        io::write_meta(dir / "embed.meta.json", meta);
        add_file(stage, dir, "embed.meta.json");
    });

    run_stage("deriv", [&](StageInfo& stage) {
        est = deriv::estimate_derivative(embedded.samples,
                                         {cfg.deriv_order, cfg.l, cfg.dt});
        auto cols = numbered_columns("dX", cfg.D);
        cols.insert(cols.begin(), "t");
        write_table(dir, "deriv.csv", cols,
                    with_time(embedded.times.segment(est.first, est.count()), est.values),
                    stage);
    });

    run_stage("fit", [&](StageInfo& stage) {
        const auto sample = regress::sample_rows(embedded, est, cfg.n, cfg.seed);
        basis::GridSpec grid;
        grid.delta_grid = cfg.delta_grid;
        grid.m = cfg.m;
        grid.p = cfg.p;
        grid.center_cap = cfg.center_cap;
        const auto centers = basis::select_centers(sample.X, grid);
        const auto coeffs = regress::fit_design(sample.X, sample.Y, centers, cfg.lambda);

        io::MetaMap provenance;
        for (const auto& [key, value] : config_items(cfg)) provenance["config." + key] = value;
        for (std::size_t i = 0; i < cfg.overrides.size(); ++i)
            provenance["override." + std::to_string(i)] = cfg.overrides[i];
        provenance["tool_version"] = kToolVersion;

        model = std::make_unique<RfrModel>(
            centers, coeffs.beta, stdz, cfg.tau, cfg.dt,
            cfg.interleave > 1 ? observe::Layout::interleaved : observe::Layout::scalar,
            standardized.observables(), provenance, cfg.lambda, cfg.n,
            coeffs.residual_mse);
        save(*model, dir / "model.rfr");
        add_file(stage, dir, "model.rfr");

        io::MetaMap meta;
        meta["J"] = std::to_string(centers.count());
        meta["columns"] = std::to_string(centers.columns());
        meta["sigma2"] = io::format_double(centers.sigma2);
        meta["lambda"] = io::format_double(cfg.lambda);
        meta["n"] = std::to_string(cfg.n);
        for (int k = 0; k < coeffs.residual_mse.size(); ++k)
            meta["residual_mse.X" + std::to_string(k + 1)] =
                io::format_double(coeffs.residual_mse[k]);
        io::write_meta(dir / "fit.meta.json", meta);
        add_file(stage, dir, "fit.meta.json");
    });

    run_stage("evaluate", [&](StageInfo& stage) {
        EvalOptions opts;
        opts.traj_length = cfg.eval_traj_length;
        opts.forecast_inits = cfg.forecast_inits;
        opts.forecast_horizon = cfg.forecast_horizon;
        opts.bins = cfg.bins;
        opts.seed = cfg.seed;
        const auto summary = evaluate_artifacts(*model, embedded, opts, dir, stage);
        delay_p95 = summary.delay_p95;
    });

    if (cfg.saddle_enabled) {
        run_stage("saddle", [&](StageInfo& stage) {
            const Eigen::VectorXd x0 = embedded.samples.row(0);
            double threshold;
            if (cfg.saddle_threshold == "auto") {
                threshold = delay_p95 > 0.0 ? std::max(delay_p95, 1e-3)
                                            : auto_threshold(*model, x0);
            } else {
                threshold = parse_real("saddle.threshold", cfg.saddle_threshold);
            }

            saddle::SaddleConfig sc;
            sc.segment_length = cfg.saddle_segment_length;
            sc.keep_length = cfg.saddle_keep_length;
            sc.trials_max = cfg.saddle_trials_max;
            sc.threshold = threshold;
            sc.total_length = cfg.saddle_total_length;
            sc.seed = cfg.seed;
            sc.refine = cfg.saddle_refine;
            const auto run = saddle::stagger_step(*model, x0, sc);
            manifest.saddle_escaped = run.escaped;

            auto cols = numbered_columns("X", cfg.D);
            cols.insert(cols.begin(), "t");
            write_table(dir, "saddle_traj.csv", cols, with_time(run.times, run.trajectory),
                        stage);

            Eigen::MatrixXd seg(static_cast<long>(run.segments.size()), 4);
            for (std::size_t s = 0; s < run.segments.size(); ++s) {
                const auto& r = run.segments[s];
                seg(static_cast<long>(s), 0) = static_cast<double>(r.segment);
                seg(static_cast<long>(s), 1) = r.trials + r.refine_trials;
                seg(static_cast<long>(s), 2) = r.e;
                seg(static_cast<long>(s), 3) = r.noise_mag;
            }
            write_table(dir, "saddle_segments.csv",
                        {"segment", "trials", "E", "noise_mag"}, seg, stage);

            io::MetaMap meta;
            meta["threshold"] = io::format_double(threshold);
            meta["success"] = run.success ? "1" : "0";
            meta["escaped"] = run.escaped ? "1" : "0";
            meta["kept_length"] = io::format_double(run.kept_length);
            meta["valid_length"] = io::format_double(run.valid_length);
            io::write_meta(dir / "saddle.meta.json", meta);
            add_file(stage, dir, "saddle.meta.json");
        });
    }

    write_manifest(manifest, dir / "manifest.json");
    return manifest;
}

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["version"] = manifest.version;
    j["out"] = manifest.out_dir;
    j["config"] = manifest.config_text;
    j["saddle_escaped"] = manifest.saddle_escaped;
    const std::filesystem::path dir = path.parent_path();
    {
        nlohmann::ordered_json files = nlohmann::ordered_json::array();
        std::error_code ec;
        if (std::filesystem::exists(dir / "config.txt", ec))
            files.push_back({{"path", "config.txt"},
                             {"crc32", crc_hex(io::crc32_file(dir / "config.txt"))}});
        j["files"] = std::move(files);
    }
    nlohmann::ordered_json stages = nlohmann::ordered_json::array();
    for (const auto& stage : manifest.stages) {
        nlohmann::ordered_json s;
        s["name"] = stage.name;
        s["seconds"] = stage.seconds;
        nlohmann::ordered_json files = nlohmann::ordered_json::array();
        for (const auto& [name, crc] : stage.files)
            files.push_back({{"path", name}, {"crc32", crc}});
        s["files"] = std::move(files);
        stages.push_back(std::move(s));
    }
    j["stages"] = std::move(stages);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write: " + path.string());
    out << j.dump(2) << '\n';
}

} // namespace rfr::pipeline
