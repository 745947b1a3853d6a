#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "rfr/model.hpp"

namespace rfr::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

// One experiment, end to end. Field defaults are placeholders; real defaults
// come from table1_defaults(system).
struct ExperimentConfig {
    std::string system = "ks";  // ks | mg | sm | cr | n-ks
    long n_t = 1'000'000;       // observed sample count
    double dt = 0.01;           // observation step
    double dt_int = 0.0;        // integrator step, 0 = per-system default
    double transient = 1000.0;
    double noise = 0.0;         // observation noise std / signal std

    int D = 5;
    double tau = 0.12;
    int interleave = 1;         // observables interleaved per delay level

    int deriv_order = 6;
    int l = 1;

    int m = 3;
    double p = 0.1;
    double delta_grid = 0.5;
    double lambda = 1e-7;
    long n = 50'000;            // regression sample count
    long center_cap = 1'000'000;

    double eval_traj_length = 1000.0;
    int forecast_inits = 10;
    double forecast_horizon = 10.0;
    int bins = 100;

    bool saddle_enabled = false;
    double saddle_total_length = 1000.0;
    double saddle_segment_length = 50.0;
    double saddle_keep_length = 25.0;
    int saddle_trials_max = 100;
    std::string saddle_threshold = "auto";  // "auto" or a positive real
    bool saddle_refine = true;

    std::uint64_t seed = 1;
    std::string out = "run-ks";

    // keys changed after the defaults were laid down, as "key=value"
    std::vector<std::string> overrides;
};

// Per-system defaults for every modeling parameter.
ExperimentConfig table1_defaults(const std::string& system);

// Shrinks the run to workstation scale: n_t 10^5, n 10^4, and one grid notch
// up (ks/n-ks 1.0, others 0.5) to keep the center count around 10^3..10^4.
void apply_desk_preset(ExperimentConfig& cfg);

// Flat key=value access; unknown keys and unparsable values throw
// ValidationError. set_key records the change in cfg.overrides.
void set_key(ExperimentConfig& cfg, const std::string& key, const std::string& value);
std::string get_key(const ExperimentConfig& cfg, const std::string& key);

// All keys with current values, in the fixed serialization order.
std::vector<std::pair<std::string, std::string>> config_items(const ExperimentConfig& cfg);

std::string serialize(const ExperimentConfig& cfg);

// Parses "key = value" lines ('#' comments allowed), starting from the
// table1 defaults of the file's system. Only values that differ from those
// defaults land in overrides, so serialize/parse round-trips losslessly.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& path);

void validate_config(const ExperimentConfig& cfg);

struct StageInfo {
    std::string name;
    double seconds = 0.0;
    std::vector<std::pair<std::string, std::string>> files;  // path, crc32 hex
};

struct RunManifest {
    std::string version;
    std::string out_dir;
    std::string config_text;  // merged effective config
    std::vector<StageInfo> stages;
    bool saddle_escaped = false;
};

struct EvalOptions {
    double traj_length = 1000.0;
    int forecast_inits = 10;
    double forecast_horizon = 10.0;
    int bins = 100;
    std::uint64_t seed = 1;
};

struct EvalSummary {
    long traj_rows = 0;
    long traj_rows_requested = 0;
    double delay_median = -1.0;  // -1: trajectory died before one delay window
    double delay_p95 = -1.0;
    double delay_max = -1.0;
    double overlap = -1.0;
    double err_threshold = 0.0;
    int forecast_positive = 0;
};

// Model-vs-actual metric suite. Writes metrics.json, delay_e.csv,
// delay_hist.csv, density.csv, rmse.csv and forecast.csv under dir,
// recording each in `stage`.
EvalSummary evaluate_artifacts(const RfrModel& model, const observe::EmbeddedSeries& actual,
                               const EvalOptions& opts, const std::filesystem::path& dir,
                               StageInfo& stage);

// simulate -> observe -> embed -> deriv -> fit -> evaluate (-> saddle).
// Writes every artifact under cfg.out; a stage failure writes the partial
// manifest and rethrows with the stage name prefixed.
RunManifest run_pipeline(const ExperimentConfig& cfg);

void write_manifest(const RunManifest& manifest, const std::filesystem::path& path);

// Threshold for "delay structure as good as this model can hold": the 95th
// percentile of the delay error over a probe trajectory from x0, floored at
// `floor`. Returns `fallback` when the probe dies before one delay window.
double auto_threshold(const RfrModel& model, const Eigen::VectorXd& x0,
                      double probe_length = 200.0, double floor = 1e-3,
                      double fallback = 0.5);

} // namespace rfr::pipeline
