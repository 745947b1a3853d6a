#include "rfr/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rfr/dynamics.hpp"
#include "rfr/errors.hpp"
#include "rfr/parallel.hpp"

namespace rfr::saddle {

namespace {

constexpr int kTrialBlock = 8;  // fixed so worker count cannot change selections

// Model samples from `start`, one row per dt step. Integration stops at the
// first non-finite state; the remaining rows stay NaN so scoring sees them.
Eigen::MatrixXd integrate_partial(const RfrModel& model, const Eigen::VectorXd& start,
                                  long steps) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    Eigen::MatrixXd rows = Eigen::MatrixXd::Constant(steps + 1, model.D(), nan);
    if (!start.allFinite()) return rows;
    ModelOde ode(model);
    dynamics::Rk4Workspace ws;
    ws.resize(model.D());
    Eigen::VectorXd x = start;
    rows.row(0) = x;
    for (long s = 1; s <= steps; ++s) {
        dynamics::rk4_step(ode, x, model.dt(), ws);
        if (!x.allFinite()) break;
        rows.row(s) = x;
    }
    return rows;
}

long round_steps(double length, double dt, const char* what) {
    const long steps = std::llround(length / dt);
    if (steps < 1 || std::abs(static_cast<double>(steps) * dt - length) >
                         1e-6 * std::max(1.0, std::abs(length)))
        throw ValidationError(std::string("stagger_step: ") + what +
                              " must be a positive multiple of the model step");
    return steps;
}

} // namespace

double segment_score(const Eigen::MatrixXd& segment, long lag, int pair_step) {
    const long n = segment.rows();
    const int D = static_cast<int>(segment.cols());
    if (lag < 1) throw ValidationError("segment_score: lag must be >= 1");
    if (pair_step < 1 || pair_step >= D)
        throw ValidationError("segment_score: pair step must be in [1, D)");
    if (n <= lag) throw InsufficientLength("segment_score: segment shorter than one delay");
    if (!segment.allFinite()) return std::numeric_limits<double>::infinity();
    double e = 0.0;
    for (long t = 0; t + lag < n; ++t)
        for (int i = 0; i + pair_step < D; ++i)
            e = std::max(e, std::abs(segment(t, i) - segment(t + lag, i + pair_step)));
    return e;
}

Eigen::VectorXd stagger_noise(Eigen::Index dim, double exp_min, double exp_max,
                              RngStream& stream) {
    if (dim < 1) throw ValidationError("stagger_noise: dimension must be >= 1");
    if (exp_min > exp_max)
        throw ValidationError("stagger_noise: exponent bounds out of order");
    const double u = stream.uniform(exp_min, exp_max);
    return std::pow(10.0, -u) * stream.sphere_dir(static_cast<int>(dim));
}

Eigen::VectorXd draw_stagger(const Eigen::VectorXd& current, double exp_min,
                             double exp_max, RngStream& stream) {
    return current + stagger_noise(current.size(), exp_min, exp_max, stream);
}

long refine_noise(const RfrModel& model, const Eigen::VectorXd& current, Trial& best,
                  long budget, double shrink, double threshold, long steps_seg,
                  long lag, int pair_step, RngStream& stream) {
    if (budget <= 0 || best.index < 0) return 0;
    if (!(shrink > 0.0) || !(shrink < 1.0))
        throw ValidationError("refine_noise: shrink factor must be in (0, 1)");
    if (!(best.noise.norm() > 0.0)) return 0;
    long used = 0;
    while (used < budget) {
        const Eigen::VectorXd cand =
            best.noise + shrink * best.noise.norm() * stream.sphere_dir(static_cast<int>(current.size()));
        Eigen::MatrixXd rows = integrate_partial(model, current + cand, steps_seg);
        const double e = segment_score(rows, lag, pair_step);
        ++used;
        if (e < best.e) {
            best.e = e;
            best.noise = cand;
            best.rows = std::move(rows);
        }
        if (best.e < threshold) break;
    }
    return used;
}

SaddleRun stagger_step(const RfrModel& model, const Eigen::VectorXd& x0,
                       const SaddleConfig& cfg) {
    const int D = model.D();
    if (x0.size() != D)
        throw ValidationError("stagger_step: initial state dimension mismatch");
    const int pair_step =
        cfg.pair_step > 0
            ? cfg.pair_step
            : (model.layout() == observe::Layout::interleaved ? model.observables() : 1);
    if (pair_step < 1 || pair_step >= D)
        throw ValidationError("stagger_step: pair step must be in [1, D)");
    if (!(cfg.threshold > 0.0))
        throw ValidationError("stagger_step: threshold must be positive");
    if (cfg.trials_max < 0)
        throw ValidationError("stagger_step: trials_max must be >= 0");
    if (cfg.exp_min > cfg.exp_max)
        throw ValidationError("stagger_step: noise exponent bounds out of order");
    if (!(cfg.hard_fail_factor >= 1.0) || cfg.hard_fail_consecutive < 1)
        throw ValidationError("stagger_step: bad hard-fail settings");
    if (cfg.keep_length > cfg.segment_length / 2.0 + 1e-12)
        throw ValidationError("stagger_step: keep_length must be <= segment_length / 2");

    const double dt = model.dt();
    const long steps_seg = round_steps(cfg.segment_length, dt, "segment_length");
    const long steps_keep = round_steps(cfg.keep_length, dt, "keep_length");
    const long total_steps = round_steps(cfg.total_length, dt, "total_length");
    const long lag = model.lag();
    if (steps_seg <= lag)
        throw ValidationError("stagger_step: segment shorter than one delay");

    const long n_segments = (total_steps + steps_keep - 1) / steps_keep;
    SaddleRun run;
    run.trajectory.resize(n_segments * steps_keep + 1, D);
    run.segments.reserve(static_cast<std::size_t>(n_segments));

    const RngStream root(cfg.seed, "saddle");
    Eigen::VectorXd current = x0;
    long consecutive_hard = 0;
    bool any_over = false;
    double valid_until = -1.0;
    long done = 0;

    for (long s = 0; s < n_segments; ++s) {
        const RngStream seg_root = root.substream(static_cast<std::uint64_t>(s));

        Trial best;
        best.rows = integrate_partial(model, current, steps_seg);
        best.noise = Eigen::VectorXd::Zero(D);
        best.e = segment_score(best.rows, lag, pair_step);
        best.index = -1;

        SegmentRecord rec;
        rec.segment = s;

        if (!(best.e < cfg.threshold) && cfg.trials_max > 0) {
            RngStream refine_rng = seg_root.substream(0);
            long refine_budget = cfg.refine ? cfg.trials_max / 4 : 0;
            bool found = false;
            for (int k0 = 0; k0 < cfg.trials_max && !found; k0 += kTrialBlock) {
                const int count = std::min(kTrialBlock, cfg.trials_max - k0);
                std::vector<Trial> block(static_cast<std::size_t>(count));
                parallel_for_units(static_cast<std::size_t>(count), [&](std::size_t j) {
                    const int k = k0 + static_cast<int>(j);
                    RngStream trial_rng = seg_root.substream(static_cast<std::uint64_t>(k) + 1);
                    Trial& t = block[j];
                    t.noise = stagger_noise(D, cfg.exp_min, cfg.exp_max, trial_rng);
                    t.index = k;
                    t.rows = integrate_partial(model, current + t.noise, steps_seg);
                    t.e = segment_score(t.rows, lag, pair_step);
                });
                rec.trials += count;
                bool improved = false;
                for (auto& t : block) {
                    if (t.e < cfg.threshold) {  // earliest passing index wins
                        best = std::move(t);
                        found = true;
                        break;
                    }
                    if (t.e < best.e) {
                        best = std::move(t);
                        improved = true;
                    }
                }
                if (!found && improved && refine_budget > 0) {
                    const long used = refine_noise(
                        model, current, best, std::min<long>(kTrialBlock, refine_budget),
                        cfg.refine_shrink, cfg.threshold, steps_seg, lag, pair_step,
                        refine_rng);
                    refine_budget -= used;
                    rec.refine_trials += static_cast<int>(used);
                    if (best.e < cfg.threshold) found = true;
                }
            }
            if (!found && refine_budget > 0) {
                const long used =
                    refine_noise(model, current, best, refine_budget, cfg.refine_shrink,
                                 cfg.threshold, steps_seg, lag, pair_step, refine_rng);
                rec.refine_trials += static_cast<int>(used);
            }
        }

        rec.e = best.e;
        rec.noise_mag = best.noise.norm();
        run.segments.push_back(rec);

        run.trajectory.block(s * steps_keep, 0, steps_keep, D) =
            best.rows.topRows(steps_keep);
        current = best.rows.row(steps_keep).transpose();
        done = s + 1;

        const bool bad = !(rec.e <= cfg.threshold) || !std::isfinite(rec.e);
        if (bad) {
            any_over = true;
            if (valid_until < 0.0)
                valid_until = static_cast<double>(s * steps_keep) * dt;
        }
        if (rec.e > cfg.hard_fail_factor * cfg.threshold)
            ++consecutive_hard;
        else
            consecutive_hard = 0;
        if (consecutive_hard >= cfg.hard_fail_consecutive) {
            run.escaped = true;
            break;
        }
    }

    run.trajectory.row(done * steps_keep) = current.transpose();
    const long rows_final = run.escaped ? done * steps_keep + 1 : total_steps + 1;
    run.trajectory.conservativeResize(rows_final, D);
    run.times.resize(rows_final);
    for (long k = 0; k < rows_final; ++k) run.times[k] = dt * static_cast<double>(k);
    run.kept_length = dt * static_cast<double>(rows_final - 1);
    run.valid_length = valid_until < 0.0 ? run.kept_length : std::min(valid_until, run.kept_length);
    run.success = !run.escaped && !any_over;
    return run;
}

} // namespace rfr::saddle
