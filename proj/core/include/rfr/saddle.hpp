#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "rfr/model.hpp"
#include "rfr/rng.hpp"

namespace rfr::saddle {

struct SaddleConfig {
    double segment_length = 50.0;
    double keep_length = 25.0;
    int trials_max = 100;
    double threshold = 0.0;       // E acceptance level; +inf disables perturbation
    double total_length = 0.0;
    std::uint64_t seed = 0;
    bool refine = true;
    double exp_min = 1.0;         // noise magnitude 10^-u, u uniform on [exp_min, exp_max]
    double exp_max = 8.0;
    double refine_shrink = 0.1;
    double hard_fail_factor = 10.0;
    int hard_fail_consecutive = 3;
    int pair_step = 0;            // 0: derive from the model layout
};

struct SegmentRecord {
    long segment = 0;
    int trials = 0;               // stagger integrations, probe excluded
    int refine_trials = 0;
    double e = 0.0;               // accepted segment's delay error
    double noise_mag = 0.0;       // seam jump, 0 when the probe was kept
};

struct SaddleRun {
    Eigen::MatrixXd trajectory;   // standardized embedded states, one row per sample
    Eigen::VectorXd times;
    std::vector<SegmentRecord> segments;
    bool success = false;
    bool escaped = false;
    double kept_length = 0.0;
    double valid_length = 0.0;    // kept time before the first above-threshold segment
};

// Candidate start for one segment: perturbation, integrated rows, score.
struct Trial {
    Eigen::MatrixXd rows;
    Eigen::VectorXd noise;
    double e = 0.0;
    long index = -1;              // -1 marks the unperturbed probe
};

// Max over t and delay pairs (i, i+pair_step) of |X_i(t) - X_{i+pair_step}(t+lag)|.
// Any non-finite entry scores +inf.
double segment_score(const Eigen::MatrixXd& segment, long lag, int pair_step);

Eigen::VectorXd stagger_noise(Eigen::Index dim, double exp_min, double exp_max,
                              RngStream& stream);

Eigen::VectorXd draw_stagger(const Eigen::VectorXd& current, double exp_min,
                             double exp_max, RngStream& stream);

// Local search around best.noise with radius refine_shrink * |best.noise|;
// accepts only score improvements, stops early below threshold. Returns the
// number of integrations spent (at most budget).
long refine_noise(const RfrModel& model, const Eigen::VectorXd& current, Trial& best,
                  long budget, double shrink, double threshold, long steps_seg,
                  long lag, int pair_step, RngStream& stream);

SaddleRun stagger_step(const RfrModel& model, const Eigen::VectorXd& x0,
                       const SaddleConfig& cfg);

} // namespace rfr::saddle
