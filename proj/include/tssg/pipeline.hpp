#pragma once

// One scenario run end to end: tracker -> support thresholding ->
// clustering -> per-cluster strength and position -> track association.
// Association results are never fed back into the tracker.

#include "tssg/association.hpp"
#include "tssg/errors.hpp"
#include "tssg/estimation.hpp"
#include "tssg/grid_model.hpp"
#include "tssg/seeds.hpp"
#include "tssg/sim.hpp"
#include "tssg/trackers.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace tssg {

enum class CountMode { Known, Unknown };

struct PipelineOptions {
    /// Known: the number of present targets is given per step (k-means).
    /// Unknown: the number of clusters is picked by mean silhouette.
    CountMode count_mode = CountMode::Known;
    double eps_frac = 1e-3;
    int restarts = 10;
    int k_max = 6;
    /// Mahalanobis gate; also the dummy track/target cost.
    double gate = 9.21;
    /// Pairs whose cost exceeds the gate are removed before assignment.
    bool pregate = true;
    /// Track covariance jitter in units of (cell pitch)^2.
    double jitter = 1e-6;
    bool associate = true;
    /// Cluster with TSSG values as k-means weights; otherwise every retained
    /// grid point counts once (positions are strength-weighted either way).
    bool weighted_clustering = true;

    void validate() const {
        if (!(eps_frac > 0.0 && eps_frac < 1.0)) {
            throw InvalidArgument("pipeline: eps_frac must lie in (0, 1)");
        }
        if (restarts < 1) {
            throw InvalidArgument("pipeline: restarts must be at least 1");
        }
        if (k_max < 2) {
            throw InvalidArgument("pipeline: k_max must be at least 2");
        }
        if (!(gate > 0.0)) {
            throw InvalidArgument("pipeline: gate must be positive");
        }
        if (!(jitter >= 0.0)) {
            throw InvalidArgument("pipeline: jitter must be non-negative");
        }
    }
};

struct StepRecord {
    int k = 0;
    VectorXd x;
    std::vector<Vec2> positions;
    std::vector<double> strengths;
    std::vector<std::vector<int>> masks;
    /// Track id each position was attached to (-1 without association).
    std::vector<int> track_of;
    int solver_iters = 0;
    bool converged = true;
};

enum class TrackEventKind { Birth, Death };

inline std::string_view to_string(TrackEventKind e) {
    return e == TrackEventKind::Birth ? "birth" : "death";
}

struct TrackEvent {
    int k = 0;
    int track_id = 0;
    TrackEventKind kind = TrackEventKind::Birth;
};

struct PipelineResult {
    std::vector<StepRecord> steps;
    std::vector<Track> tracks;
    std::vector<TrackEvent> events;
};

namespace detail {

inline void estimate_step(StepRecord& rec, const TrackerStep& ts, const Grid& grid,
                          const PipelineOptions& opt, std::optional<int> known_count,
                          std::uint64_t seed) {
    WeightedPointSet pts = support_points(ts.x, grid, opt.eps_frac);
    if (!opt.weighted_clustering) {
        std::fill(pts.weights.begin(), pts.weights.end(), 1.0);
    }
    if (ts.position) {
        rec.positions.push_back(*ts.position);
        rec.strengths.push_back(ts.x.sum());
        rec.masks.push_back(pts.indices);
        return;
    }
    if (pts.empty()) {
        return;
    }
    Clustering c;
    if (opt.count_mode == CountMode::Known) {
        const int k = std::min(known_count.value_or(1), static_cast<int>(pts.size()));
        if (k < 1) {
            return;
        }
        c = weighted_kmeans(pts, k, opt.restarts, seed);
    } else {
        c = silhouette_select(pts, opt.k_max, opt.restarts, seed).clustering;
    }
    // Lloyd may leave a cluster empty when points coincide; drop it.
    Clustering kept;
    for (std::size_t m = 0; m < c.masks.size(); ++m) {
        if (!c.masks[m].empty()) {
            kept.masks.push_back(c.masks[m]);
        }
    }
    kept.k = static_cast<int>(kept.masks.size());
    rec.positions = estimate_positions(kept, ts.x, grid);
    rec.strengths = estimate_strengths(kept, ts.x);
    rec.masks = std::move(kept.masks);
}

}  // namespace detail

/// Associates the current step's position estimates with the active tracks,
/// given the previous step's TSSG estimate.
inline void associate_step(PipelineResult& out, StepRecord& rec, const VectorXd* x_prev,
                           const GridModel& model, const PipelineOptions& opt) {
    const auto birth = [&](std::size_t m) {
        Track t;
        t.id = static_cast<int>(out.tracks.size());
        t.born_at = rec.k;
        t.times.push_back(rec.k);
        t.positions.push_back(rec.positions[m]);
        t.mask = rec.masks[m];
        rec.track_of[m] = t.id;
        out.events.push_back({rec.k, t.id, TrackEventKind::Birth});
        out.tracks.push_back(std::move(t));
    };
    const auto death = [&](Track& t) {
        t.status = TrackStatus::Dead;
        t.died_at = rec.k;
        out.events.push_back({rec.k, t.id, TrackEventKind::Death});
    };
    rec.track_of.assign(rec.positions.size(), -1);

    std::vector<int> active;
    std::vector<TrackPrediction> preds;
    for (auto& t : out.tracks) {
        if (t.status != TrackStatus::Active) {
            continue;
        }
        std::optional<TrackPrediction> p;
        if (x_prev != nullptr && !t.mask.empty()) {
            p = predict_track(*x_prev, t.mask, model.F, model.grid);
        }
        if (!p) {
            death(t);
            continue;
        }
        active.push_back(t.id);
        preds.push_back(*p);
    }

    const double jitter = opt.jitter * model.grid.pitch_x() * model.grid.pitch_y();
    MatrixXd costs(static_cast<Eigen::Index>(active.size()),
                   static_cast<Eigen::Index>(rec.positions.size()));
    for (std::size_t t = 0; t < active.size(); ++t) {
        for (std::size_t m = 0; m < rec.positions.size(); ++m) {
            double c = mahalanobis(preds[t], rec.positions[m], jitter);
            if (opt.pregate && c > opt.gate) {
                c = kForbidden;
            }
            costs(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(m)) = c;
        }
    }
    const BirthDeath bd = assign_with_birth_death(costs, opt.gate);
    for (const auto& [t, m] : bd.matches) {
        Track& tr = out.tracks[static_cast<std::size_t>(active[static_cast<std::size_t>(t)])];
        tr.times.push_back(rec.k);
        tr.positions.push_back(rec.positions[static_cast<std::size_t>(m)]);
        tr.mask = rec.masks[static_cast<std::size_t>(m)];
        rec.track_of[static_cast<std::size_t>(m)] = tr.id;
    }
    for (int t : bd.deaths) {
        death(out.tracks[static_cast<std::size_t>(active[static_cast<std::size_t>(t)])]);
    }
    for (int m : bd.births) {
        birth(static_cast<std::size_t>(m));
    }
}

/// Runs the tracker over measurements[k-1], k = 1..K. `truth` supplies the
/// per-step target count in Known mode and may be null in Unknown mode.
inline PipelineResult run_pipeline(const GridModel& model, Tracker& tracker,
                                   const std::vector<VectorXd>& measurements, const Truth* truth,
                                   const PipelineOptions& opt, std::uint64_t cluster_seed) {
    opt.validate();
    if (opt.count_mode == CountMode::Known && truth == nullptr) {
        throw InvalidArgument("pipeline: known-count mode needs the true target count");
    }
    PipelineResult out;
    out.steps.reserve(measurements.size());
    for (std::size_t i = 0; i < measurements.size(); ++i) {
        const int k = static_cast<int>(i) + 1;
        const TrackerStep ts = tracker.step(measurements[i]);
        StepRecord rec;
        rec.k = k;
        rec.x = ts.x;
        rec.solver_iters = ts.solver_iters;
        rec.converged = ts.converged;
        std::optional<int> count;
        if (truth != nullptr) {
            count = static_cast<int>(truth->alive_ids(k).size());
        }
        detail::estimate_step(rec, ts, model.grid, opt, count,
                              derive_seed(cluster_seed, "step", static_cast<std::uint64_t>(k)));
        if (opt.associate) {
            associate_step(out, rec, out.steps.empty() ? nullptr : &out.steps.back().x, model, opt);
        } else {
            rec.track_of.assign(rec.positions.size(), -1);
        }
        out.steps.push_back(std::move(rec));
    }
    return out;
}

}  // namespace tssg
