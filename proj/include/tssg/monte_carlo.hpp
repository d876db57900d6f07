#pragma once

// Monte Carlo evaluation: runs execute concurrently, each with its own
// tracker instance and derived noise seed; results are reduced in run order
// so aggregates do not depend on scheduling.

#include "tssg/association.hpp"
#include "tssg/errors.hpp"
#include "tssg/metrics.hpp"
#include "tssg/pipeline.hpp"
#include "tssg/seeds.hpp"
#include "tssg/sim.hpp"
#include "tssg/trackers.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace tssg {

struct ExperimentSpec {
    ScenarioConfig scenario;
    TrackerSpec tracker;
    PipelineOptions pipeline;
    /// Measurement noise variance assumed by the trackers (defaults to the
    /// simulated one; must be positive).
    std::optional<double> model_noise_var;
    /// Worker threads; 0 uses the hardware concurrency.
    int threads = 0;

    [[nodiscard]] double tracker_noise_var() const {
        return model_noise_var.value_or(scenario.noise_var);
    }
};

struct RunMetrics {
    int run = 0;
    bool ok = false;
    std::string error;
    /// Squared position error per target and step (index k-1); NaN where
    /// the target is absent.
    std::vector<std::vector<double>> sq_err;
    /// L1 Wasserstein distance per step; NaN when no target is present.
    std::vector<double> wd;
    /// Mean squared error over all present (target, step) pairs.
    double mse = std::numeric_limits<double>::quiet_NaN();
    /// Time-averaged Wasserstein distance.
    double wd_mean = std::numeric_limits<double>::quiet_NaN();
    std::vector<TrackEvent> events;
    std::vector<Track> tracks;

    [[nodiscard]] double rmse() const { return std::sqrt(mse); }
};

struct Stat {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    int n = 0;
};

struct MonteCarloSummary {
    int runs = 0;
    int succeeded = 0;
    std::vector<std::pair<int, std::string>> failures;
    /// Root of the across-run mean squared error, per target and step.
    std::vector<std::vector<Stat>> rmse_series;
    std::vector<Stat> wd_series;
    /// Root of the across-run mean of per-run MSE.
    Stat rmse;
    Stat wd;
    std::vector<RunMetrics> per_run;
};

namespace detail {

inline Stat mean_stat(const std::vector<double>& v) {
    Stat s;
    double sum = 0.0;
    for (double x : v) {
        if (!std::isnan(x)) {
            sum += x;
            ++s.n;
        }
    }
    if (s.n == 0) {
        return s;
    }
    s.mean = sum / s.n;
    double ss = 0.0;
    for (double x : v) {
        if (!std::isnan(x)) {
            ss += (x - s.mean) * (x - s.mean);
        }
    }
    s.std_error = s.n > 1 ? std::sqrt(ss / (s.n - 1) / s.n) : 0.0;
    return s;
}

// Root of a mean of squares, with the standard error carried through the
// square root to first order.
inline Stat root_stat(const std::vector<double>& squares) {
    Stat s = mean_stat(squares);
    if (s.n == 0) {
        return s;
    }
    const double root = std::sqrt(s.mean);
    s.std_error = root > 0.0 ? s.std_error / (2.0 * root) : 0.0;
    s.mean = root;
    return s;
}

}  // namespace detail

/// Squared error of every present target against the estimates of one step.
/// Targets and estimates are paired by a minimum-distance assignment; a
/// target left without a partner is scored against the nearest estimate,
/// and with no estimates at all against the region center.
inline std::vector<double> step_errors(const std::vector<Vec2>& truth,
                                       const std::vector<Vec2>& estimates, const Vec2& fallback) {
    std::vector<double> out(truth.size(), 0.0);
    if (truth.empty()) {
        return out;
    }
    const std::vector<Vec2> est = estimates.empty() ? std::vector<Vec2>{fallback} : estimates;
    const std::size_t n = std::max(truth.size(), est.size());
    MatrixXd d = MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < truth.size(); ++i) {
        for (std::size_t j = 0; j < est.size(); ++j) {
            d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = (truth[i] - est[j]).norm();
        }
    }
    const Assignment a = assign(d);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto j = static_cast<std::size_t>(a.row_to_col[i]);
        if (j < est.size()) {
            out[i] = (truth[i] - est[j]).squaredNorm();
            continue;
        }
        double best = std::numeric_limits<double>::infinity();
        for (const auto& e : est) {
            best = std::min(best, (truth[i] - e).squaredNorm());
        }
        out[i] = best;
    }
    return out;
}

inline RunMetrics evaluate_run(const Truth& truth, const PipelineResult& res, const Grid& grid) {
    RunMetrics m;
    const Vec2 center(grid.region_width / 2.0, grid.region_height / 2.0);
    const auto K = static_cast<std::size_t>(truth.duration);
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    m.sq_err.assign(truth.targets.size(), std::vector<double>(K, nan));
    m.wd.assign(K, nan);
    double sq_sum = 0.0;
    int sq_count = 0;
    double wd_sum = 0.0;
    int wd_count = 0;
    for (const StepRecord& rec : res.steps) {
        const std::vector<int> ids = truth.alive_ids(rec.k);
        if (ids.empty()) {
            continue;
        }
        const std::vector<Vec2> present = truth.alive_positions(rec.k);
        const std::vector<double> e = step_errors(present, rec.positions, center);
        for (std::size_t i = 0; i < ids.size(); ++i) {
            m.sq_err[static_cast<std::size_t>(ids[i])][static_cast<std::size_t>(rec.k - 1)] = e[i];
            sq_sum += e[i];
            ++sq_count;
        }
        const double w = wasserstein(present, rec.positions.empty() ? std::vector<Vec2>{center}
                                                                    : rec.positions,
                                     1.0);
        m.wd[static_cast<std::size_t>(rec.k - 1)] = w;
        wd_sum += w;
        ++wd_count;
    }
    if (sq_count > 0) {
        m.mse = sq_sum / sq_count;
    }
    if (wd_count > 0) {
        m.wd_mean = wd_sum / wd_count;
    }
    m.events = res.events;
    m.tracks = res.tracks;
    return m;
}

inline std::uint64_t cluster_seed(const ScenarioConfig& cfg, int run) {
    return derive_seed(cfg.master_seed, "clustering", static_cast<std::uint64_t>(run));
}

/// Builds everything one run needs and executes the pipeline.
inline PipelineResult simulate_and_track(const ExperimentSpec& spec, const GridModel& model,
                                         const Truth& truth, int run) {
    const auto y = synthesize_measurements(truth, model.sensors, model.propagation,
                                           spec.scenario.noise_var, noise_seed(spec.scenario, run));
    auto tracker = make_tracker(spec.tracker, model, spec.scenario.process_noise,
                                spec.tracker_noise_var());
    const Truth* count_source = spec.pipeline.count_mode == CountMode::Known ? &truth : nullptr;
    return run_pipeline(model, *tracker, y, count_source, spec.pipeline,
                        cluster_seed(spec.scenario, run));
}

inline MonteCarloSummary run_monte_carlo(const ExperimentSpec& spec, int runs) {
    if (runs < 1) {
        throw InvalidArgument("monte carlo: runs must be at least 1");
    }
    spec.scenario.validate();
    spec.tracker.validate();
    spec.pipeline.validate();
    if (!(spec.tracker_noise_var() > 0.0)) {
        throw InvalidArgument("monte carlo: tracker noise variance must be positive");
    }
    const GridModel model = build_model(spec.scenario);
    std::optional<Truth> fixed_truth;
    if (spec.scenario.mc_mode == MonteCarloMode::NoiseOnly) {
        fixed_truth = generate_truth(spec.scenario, model.grid, truth_seed(spec.scenario, 0));
    }

    MonteCarloSummary out;
    out.runs = runs;
    out.per_run.resize(static_cast<std::size_t>(runs));
    std::atomic<int> next{0};
    const auto worker = [&]() {
        for (int r = next++; r < runs; r = next++) {
            RunMetrics& slot = out.per_run[static_cast<std::size_t>(r)];
            try {
                const Truth truth = fixed_truth
                                        ? *fixed_truth
                                        : generate_truth(spec.scenario, model.grid,
                                                         truth_seed(spec.scenario, r));
                const PipelineResult res = simulate_and_track(spec, model, truth, r);
                slot = evaluate_run(truth, res, model.grid);
                slot.ok = true;
            } catch (const std::exception& e) {
                slot = RunMetrics{};
                slot.error = e.what();
            }
            slot.run = r;
        }
    };
    int threads = spec.threads > 0 ? spec.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
    threads = std::clamp(threads, 1, runs);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<std::size_t>(threads));
        for (int t = 0; t < threads; ++t) {
            pool.emplace_back(worker);
        }
        for (auto& th : pool) {
            th.join();
        }
    }

    const std::size_t targets = spec.scenario.targets.size();
    const auto K = static_cast<std::size_t>(spec.scenario.duration);
    std::vector<double> mse;
    std::vector<double> wd_mean;
    std::vector<std::vector<std::vector<double>>> sq(targets,
                                                     std::vector<std::vector<double>>(K));
    std::vector<std::vector<double>> wd(K);
    for (const RunMetrics& m : out.per_run) {
        if (!m.ok) {
            out.failures.emplace_back(m.run, m.error);
            continue;
        }
        ++out.succeeded;
        mse.push_back(m.mse);
        wd_mean.push_back(m.wd_mean);
        for (std::size_t t = 0; t < targets && t < m.sq_err.size(); ++t) {
            for (std::size_t k = 0; k < K; ++k) {
                sq[t][k].push_back(m.sq_err[t][k]);
            }
        }
        for (std::size_t k = 0; k < K; ++k) {
            wd[k].push_back(m.wd[k]);
        }
    }
    out.rmse = detail::root_stat(mse);
    out.wd = detail::mean_stat(wd_mean);
    out.rmse_series.assign(targets, std::vector<Stat>(K));
    for (std::size_t t = 0; t < targets; ++t) {
        for (std::size_t k = 0; k < K; ++k) {
            out.rmse_series[t][k] = detail::root_stat(sq[t][k]);
        }
    }
    out.wd_series.resize(K);
    for (std::size_t k = 0; k < K; ++k) {
        out.wd_series[k] = detail::mean_stat(wd[k]);
    }
    return out;
}

}  // namespace tssg
