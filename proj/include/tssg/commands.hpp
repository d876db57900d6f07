#pragma once

// The three CLI commands as library calls: simulate, track and sweep. Each
// writes its tables plus manifest.json into the output directory and
// returns the written file names.

#include "tssg/config.hpp"
#include "tssg/errors.hpp"
#include "tssg/io.hpp"
#include "tssg/monte_carlo.hpp"
#include "tssg/pipeline.hpp"
#include "tssg/sim.hpp"

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace tssg {

struct CommandOptions {
    std::string config_path;
    std::filesystem::path out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> runs;
    std::optional<TrackerKind> tracker;
    OutputFormat format = OutputFormat::Csv;
};

struct CommandResult {
    std::string manifest;
    std::vector<std::string> files;
};

/// Loads the configuration and applies command-line overrides.
inline ExperimentSpec resolve_spec(const CommandOptions& opt) {
    ExperimentSpec spec = load_config(opt.config_path);
    if (opt.seed) {
        spec.scenario.master_seed = *opt.seed;
    }
    if (opt.runs) {
        if (*opt.runs < 1) {
            throw InvalidArgument("--runs must be at least 1");
        }
        spec.scenario.runs = *opt.runs;
    }
    if (opt.tracker) {
        spec.tracker.kind = *opt.tracker;
    }
    spec.scenario.validate();
    spec.tracker.validate();
    return spec;
}

namespace detail {

inline void prepare_out_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw InvalidArgument("cannot create output directory '" + dir.string() + "'");
    }
}

inline Json seeds_json(const ScenarioConfig& cfg) {
    return {{"master", cfg.master_seed},
            {"placement", derive_seed(cfg.master_seed, "placement", 0)},
            {"truth", truth_seed(cfg, 0)},
            {"noise_run0", noise_seed(cfg, 0)},
            {"clustering_run0", cluster_seed(cfg, 0)}};
}

inline void write_manifest(const std::filesystem::path& dir, const std::string& command,
                           const ExperimentSpec& spec, const std::string& hash, Json extra,
                           CommandResult& result) {
    Json m;
    m["manifest"] = hash;
    m["command"] = command;
    m["config"] = resolved_config(spec);
    m["seeds"] = seeds_json(spec.scenario);
    for (auto& item : extra.items()) {
        m[item.key()] = item.value();
    }
    m["files"] = result.files;
    write_text(dir / "manifest.json", m.dump(2) + "\n");
    result.files.push_back("manifest.json");
}

inline void emit(const std::filesystem::path& dir, const std::string& stem, const Table& t,
                 OutputFormat format, CommandResult& result) {
    for (auto& f : write_table(dir, stem, t, result.manifest, format)) {
        result.files.push_back(std::move(f));
    }
}

inline Table truth_table(const Truth& truth) {
    Table t{{"k", "target_id", "x_m", "y_m", "grid_index", "strength"}, {}};
    for (int k = 1; k <= truth.duration; ++k) {
        for (const auto& tg : truth.targets) {
            if (tg.alive(k)) {
                t.add({std::int64_t{k}, std::int64_t{tg.id}, tg.at(k).x(), tg.at(k).y(),
                       std::int64_t{tg.cells[static_cast<std::size_t>(k - tg.birth)]}, tg.strength});
            }
        }
    }
    return t;
}

inline Table tssg_table(const PipelineResult& res) {
    Table t{{"k", "grid_index", "value"}, {}};
    for (const auto& rec : res.steps) {
        for (Eigen::Index j = 0; j < rec.x.size(); ++j) {
            t.add({std::int64_t{rec.k}, std::int64_t{j}, rec.x(j)});
        }
    }
    return t;
}

inline Table positions_table(const PipelineResult& res) {
    Table t{{"k", "cluster_id", "x_m", "y_m", "strength"}, {}};
    for (const auto& rec : res.steps) {
        for (std::size_t m = 0; m < rec.positions.size(); ++m) {
            t.add({std::int64_t{rec.k}, static_cast<std::int64_t>(m), rec.positions[m].x(),
                   rec.positions[m].y(), rec.strengths[m]});
        }
    }
    return t;
}

/// One row per track and step it was updated ("born" on the first, then
/// "active"), plus a "dead" row at the step the track was terminated,
/// repeating its last position. Velocities are finite differences of
/// consecutive positions; the first row of a track has none (nan).
inline Table tracks_table(const PipelineResult& res, double Ts) {
    constexpr double nan = std::numeric_limits<double>::quiet_NaN();
    std::vector<std::tuple<int, int, Vec2, Vec2, std::string>> rows;
    for (const auto& tr : res.tracks) {
        Vec2 v(nan, nan);
        for (std::size_t i = 0; i < tr.positions.size(); ++i) {
            if (i > 0) {
                v = (tr.positions[i] - tr.positions[i - 1]) / ((tr.times[i] - tr.times[i - 1]) * Ts);
            }
            rows.emplace_back(tr.times[i], tr.id, tr.positions[i], v, i == 0 ? "born" : "active");
        }
        if (tr.status == TrackStatus::Dead) {
            rows.emplace_back(tr.died_at, tr.id, tr.positions.back(), v, "dead");
        }
    }
    std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
        return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
    });
    Table t{{"k", "track_id", "x_m", "y_m", "vx", "vy", "status"}, {}};
    for (const auto& [k, id, p, v, status] : rows) {
        t.add({std::int64_t{k}, std::int64_t{id}, p.x(), p.y(), v.x(), v.y(), status});
    }
    return t;
}

/// Per-step rows (k >= 1) for the WD and each target's RMSE, then k = 0
/// rows holding the time-averaged values.
inline Table metrics_table(const MonteCarloSummary& s) {
    Table t{{"k", "metric_name", "mean", "stderr", "runs"}, {}};
    for (std::size_t k = 0; k < s.wd_series.size(); ++k) {
        const Stat& w = s.wd_series[k];
        if (w.n > 0) {
            t.add({static_cast<std::int64_t>(k + 1), std::string("wd"), w.mean, w.std_error,
                   std::int64_t{w.n}});
        }
        for (std::size_t m = 0; m < s.rmse_series.size(); ++m) {
            const Stat& r = s.rmse_series[m][k];
            if (r.n > 0) {
                t.add({static_cast<std::int64_t>(k + 1), "rmse_target_" + std::to_string(m), r.mean,
                       r.std_error, std::int64_t{r.n}});
            }
        }
    }
    t.add({std::int64_t{0}, std::string("rmse"), s.rmse.mean, s.rmse.std_error, std::int64_t{s.rmse.n}});
    t.add({std::int64_t{0}, std::string("wd"), s.wd.mean, s.wd.std_error, std::int64_t{s.wd.n}});
    return t;
}

inline Table diagnostics_table(const PipelineResult& res, const MonteCarloSummary& s) {
    Table t{{"run", "k", "solver_iters", "converged", "error"}, {}};
    for (const auto& rec : res.steps) {
        t.add({std::int64_t{0}, std::int64_t{rec.k}, std::int64_t{rec.solver_iters},
               std::int64_t{rec.converged ? 1 : 0}, std::string()});
    }
    for (const auto& [run, error] : s.failures) {
        t.add({std::int64_t{run}, std::int64_t{0}, std::int64_t{0}, std::int64_t{0}, error});
    }
    return t;
}

}  // namespace detail

/// Ground truth and noisy measurements of run 0: truth.csv, sensors.csv,
/// measurements.csv.
inline CommandResult cmd_simulate(const CommandOptions& opt) {
    const ExperimentSpec spec = resolve_spec(opt);
    detail::prepare_out_dir(opt.out_dir);
    CommandResult result;
    result.manifest = manifest_hash(spec);
    const GridModel model = build_model(spec.scenario);
    const Truth truth = generate_truth(spec.scenario, model.grid, truth_seed(spec.scenario, 0));
    const auto y = synthesize_measurements(truth, model.sensors, model.propagation,
                                           spec.scenario.noise_var, noise_seed(spec.scenario, 0));
    Table sensors{{"sensor_id", "x_m", "y_m"}, {}};
    for (std::size_t n = 0; n < model.sensors.size(); ++n) {
        sensors.add({static_cast<std::int64_t>(n), model.sensors.positions[n].x(),
                     model.sensors.positions[n].y()});
    }
    Table meas{{"k", "sensor_id", "value"}, {}};
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (Eigen::Index n = 0; n < y[i].size(); ++n) {
            meas.add({static_cast<std::int64_t>(i + 1), std::int64_t{n}, y[i](n)});
        }
    }
    detail::emit(opt.out_dir, "truth", detail::truth_table(truth), opt.format, result);
    detail::emit(opt.out_dir, "sensors", sensors, opt.format, result);
    detail::emit(opt.out_dir, "measurements", meas, opt.format, result);
    detail::write_manifest(opt.out_dir, "simulate", spec, result.manifest, Json::object(), result);
    return result;
}

/// Full pipeline. tssg, positions, tracks and diagnostics describe run 0;
/// metrics aggregate all Monte Carlo runs (run 0 included).
inline CommandResult cmd_track(const CommandOptions& opt) {
    const ExperimentSpec spec = resolve_spec(opt);
    spec.pipeline.validate();
    detail::prepare_out_dir(opt.out_dir);
    CommandResult result;
    result.manifest = manifest_hash(spec);
    const GridModel model = build_model(spec.scenario);
    const Truth truth = generate_truth(spec.scenario, model.grid, truth_seed(spec.scenario, 0));
    const PipelineResult res = simulate_and_track(spec, model, truth, 0);
    const MonteCarloSummary summary = run_monte_carlo(spec, spec.scenario.runs);
    detail::emit(opt.out_dir, "tssg", detail::tssg_table(res), opt.format, result);
    detail::emit(opt.out_dir, "positions", detail::positions_table(res), opt.format, result);
    detail::emit(opt.out_dir, "tracks", detail::tracks_table(res, spec.scenario.sampling_time),
                 opt.format, result);
    detail::emit(opt.out_dir, "metrics", detail::metrics_table(summary), opt.format, result);
    detail::emit(opt.out_dir, "diagnostics", detail::diagnostics_table(res, summary), opt.format,
                 result);
    Json extra;
    extra["runs"] = summary.runs;
    extra["succeeded"] = summary.succeeded;
    detail::write_manifest(opt.out_dir, "track", spec, result.manifest, extra, result);
    return result;
}

enum class SweepParam { Alpha, SigmaK };

inline SweepParam sweep_param_from(std::string_view s) {
    if (s == "alpha") return SweepParam::Alpha;
    if (s == "sigma_k") return SweepParam::SigmaK;
    throw InvalidArgument("unknown sweep parameter '" + std::string(s) +
                          "' (expected alpha or sigma_k)");
}

/// Monte Carlo RMSE and WD per parameter value. alpha applies to the KF
/// trackers (0 selects the sparsity-agnostic one); sigma_k to the IEKF.
inline CommandResult cmd_sweep(const CommandOptions& opt, SweepParam param,
                               const std::vector<double>& values) {
    if (values.empty()) {
        throw InvalidArgument("sweep: the value list is empty");
    }
    const ExperimentSpec spec = resolve_spec(opt);
    spec.pipeline.validate();
    const TrackerKind kind = spec.tracker.kind;
    if (param == SweepParam::Alpha && kind != TrackerKind::SparseKF && kind != TrackerKind::Agnostic) {
        throw InvalidArgument("sweep: alpha applies to the agnostic and sparse_kf trackers");
    }
    if (param == SweepParam::SigmaK && kind != TrackerKind::IEKF) {
        throw InvalidArgument("sweep: sigma_k applies to the iekf tracker");
    }
    detail::prepare_out_dir(opt.out_dir);
    CommandResult result;
    Json sweep;
    sweep["parameter"] = param == SweepParam::Alpha ? "alpha" : "sigma_k";
    sweep["values"] = values;
    result.manifest = manifest_hash(spec, sweep.dump());
    Table t{{"parameter", "value", "tracker", "rmse_mean", "rmse_stderr", "wd_mean", "wd_stderr",
             "runs", "failures"},
            {}};
    for (double v : values) {
        ExperimentSpec s = spec;
        if (param == SweepParam::Alpha) {
            s.tracker.kind = v == 0.0 ? TrackerKind::Agnostic : TrackerKind::SparseKF;
            s.tracker.alpha = v;
        } else {
            s.tracker.sparsity.sigma = v;
        }
        const MonteCarloSummary m = run_monte_carlo(s, s.scenario.runs);
        t.add({std::string(param == SweepParam::Alpha ? "alpha" : "sigma_k"), v,
               std::string(to_string(s.tracker.kind)), m.rmse.mean, m.rmse.std_error, m.wd.mean,
               m.wd.std_error, std::int64_t{m.succeeded},
               static_cast<std::int64_t>(m.failures.size())});
    }
    detail::emit(opt.out_dir, "sweep", t, opt.format, result);
    Json extra;
    extra["sweep"] = sweep;
    detail::write_manifest(opt.out_dir, "sweep", spec, result.manifest, extra, result);
    return result;
}

}  // namespace tssg
