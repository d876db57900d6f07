#pragma once

// Scenario description, ground-truth generation on the grid and synthetic
// received-signal-strength measurements.

#include "tssg/errors.hpp"
#include "tssg/grid_model.hpp"
#include "tssg/linalg.hpp"
#include "tssg/seeds.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tssg {

struct TargetSpec {
    Vec2 start = Vec2::Zero();
    double strength = 10.0;
    /// First time step at which the target is present (steps start at 1).
    int birth = 1;
    /// First time step at which the target is gone; none means it lives on.
    std::optional<int> death;
};

enum class MonteCarloMode { NoiseOnly, Full };

struct ScenarioConfig {
    double region_width = 300.0;
    double region_height = 300.0;
    int nx = 10;
    int ny = 10;
    int sensor_count = 20;
    /// Explicit sensor positions; when empty, sensor_count positions are
    /// drawn uniformly over the region from the placement stream.
    std::vector<Vec2> sensor_positions;
    /// Distance at which the propagation gain drops to 1/2.
    double d_half = 60.0;
    MovementKernel kernel = MovementKernel::north_east();
    std::vector<TargetSpec> targets;
    double noise_var = 1.0;
    /// Trackers use Q = process_noise * I.
    double process_noise = 1.0;
    int duration = 15;
    /// Seconds between steps (used for track velocities).
    double sampling_time = 1.0;
    int runs = 100;
    std::uint64_t master_seed = 1;
    MonteCarloMode mc_mode = MonteCarloMode::NoiseOnly;

    void validate() const {
        if (!(region_width > 0.0) || !(region_height > 0.0)) {
            throw InvalidArgument("scenario: region dimensions must be positive");
        }
        if (nx < 1 || ny < 1) {
            throw InvalidArgument("scenario: grid counts must be at least 1");
        }
        if (sensor_positions.empty() && sensor_count < 1) {
            throw InvalidArgument("scenario: at least one sensor is required");
        }
        if (!(d_half > 0.0)) {
            throw InvalidArgument("scenario: d_half must be positive");
        }
        kernel.validate();
        if (!(noise_var >= 0.0)) {
            throw InvalidArgument("scenario: noise variance must be non-negative");
        }
        if (!(process_noise > 0.0)) {
            throw InvalidArgument("scenario: process noise must be positive");
        }
        if (duration < 1) {
            throw InvalidArgument("scenario: duration must be at least 1");
        }
        if (!(sampling_time > 0.0)) {
            throw InvalidArgument("scenario: sampling time must be positive");
        }
        if (runs < 1) {
            throw InvalidArgument("scenario: runs must be at least 1");
        }
        if (targets.empty()) {
            throw InvalidArgument("scenario: at least one target is required");
        }
        for (const auto& t : targets) {
            if (!(t.strength > 0.0)) {
                throw InvalidArgument("scenario: target strength must be positive");
            }
            if (t.birth < 1) {
                throw InvalidArgument("scenario: target birth must be at least 1");
            }
            if (t.death && *t.death <= t.birth) {
                throw InvalidArgument("scenario: target death must come after its birth");
            }
        }
    }
};

struct TargetTruth {
    int id = 0;
    double strength = 0.0;
    int birth = 1;
    /// Position at steps birth, birth + 1, ...
    std::vector<Vec2> positions;
    std::vector<int> cells;
    /// The trajectory ended because a sampled move left the region.
    bool exited = false;

    /// One past the last step at which the target is present.
    [[nodiscard]] int end() const { return birth + static_cast<int>(positions.size()); }
    [[nodiscard]] bool alive(int k) const { return k >= birth && k < end(); }
    [[nodiscard]] const Vec2& at(int k) const {
        return positions[static_cast<std::size_t>(k - birth)];
    }
};

struct Truth {
    int duration = 0;
    std::vector<TargetTruth> targets;

    [[nodiscard]] std::vector<int> alive_ids(int k) const {
        std::vector<int> out;
        for (const auto& t : targets) {
            if (t.alive(k)) {
                out.push_back(t.id);
            }
        }
        return out;
    }
    [[nodiscard]] std::vector<Vec2> alive_positions(int k) const {
        std::vector<Vec2> out;
        for (const auto& t : targets) {
            if (t.alive(k)) {
                out.push_back(t.at(k));
            }
        }
        return out;
    }
};

inline SensorArray place_sensors(const ScenarioConfig& cfg) {
    SensorArray s;
    if (!cfg.sensor_positions.empty()) {
        for (const auto& p : cfg.sensor_positions) {
            if (p.x() < 0.0 || p.x() > cfg.region_width || p.y() < 0.0 || p.y() > cfg.region_height) {
                throw InvalidArgument("scenario: sensor position outside the region");
            }
        }
        s.positions = cfg.sensor_positions;
        return s;
    }
    std::mt19937_64 rng(derive_seed(cfg.master_seed, "placement", 0));
    std::uniform_real_distribution<double> ux(0.0, cfg.region_width);
    std::uniform_real_distribution<double> uy(0.0, cfg.region_height);
    s.positions.reserve(static_cast<std::size_t>(cfg.sensor_count));
    for (int n = 0; n < cfg.sensor_count; ++n) {
        const double x = ux(rng);
        const double y = uy(rng);
        s.positions.emplace_back(x, y);
    }
    return s;
}

inline GridModel build_model(const ScenarioConfig& cfg) {
    cfg.validate();
    Grid grid = build_grid(cfg.region_width, cfg.region_height, cfg.nx, cfg.ny);
    SensorArray sensors = place_sensors(cfg);
    return build_grid_model(std::move(grid), std::move(sensors),
                            PropagationModel{calibrate_c(cfg.d_half)}, cfg.kernel);
}

/// Seed of the truth realization used by Monte Carlo run `run`.
inline std::uint64_t truth_seed(const ScenarioConfig& cfg, int run) {
    if (cfg.mc_mode == MonteCarloMode::NoiseOnly) {
        return cfg.master_seed;
    }
    return derive_seed(cfg.master_seed, "truth-run", static_cast<std::uint64_t>(run));
}

/// Grid-quantized trajectories: each target starts at the center of the
/// cell containing its start position and moves by kernel draws until it
/// dies, leaves the region, or the scenario ends.
inline Truth generate_truth(const ScenarioConfig& cfg, const Grid& grid, std::uint64_t seed) {
    cfg.validate();
    Truth truth;
    truth.duration = cfg.duration;
    for (std::size_t m = 0; m < cfg.targets.size(); ++m) {
        const TargetSpec& spec = cfg.targets[m];
        if (spec.start.x() < 0.0 || spec.start.x() > cfg.region_width || spec.start.y() < 0.0 ||
            spec.start.y() > cfg.region_height) {
            throw InvalidArgument("scenario: target start outside the region");
        }
        std::mt19937_64 rng(derive_seed(seed, "trajectory", m));
        std::uniform_real_distribution<double> u01(0.0, 1.0);
        TargetTruth t;
        t.id = static_cast<int>(m);
        t.strength = spec.strength;
        t.birth = spec.birth;
        const int last = std::min(cfg.duration, spec.death ? *spec.death - 1 : cfg.duration);
        if (spec.birth > last) {
            truth.targets.push_back(std::move(t));
            continue;
        }
        int cell = grid.cell_of(spec.start);
        t.cells.push_back(cell);
        t.positions.push_back(grid.points[static_cast<std::size_t>(cell)]);
        for (int k = spec.birth + 1; k <= last; ++k) {
            const double draw = u01(rng);
            const KernelEntry* move = &cfg.kernel.entries.back();
            double acc = 0.0;
            for (const auto& e : cfg.kernel.entries) {
                acc += e.probability;
                if (draw < acc) {
                    move = &e;
                    break;
                }
            }
            const int row = grid.row_of(cell) + move->d_row;
            const int col = grid.col_of(cell) + move->d_col;
            if (!grid.on_grid(row, col)) {
                t.exited = true;
                break;
            }
            cell = grid.index(row, col);
            t.cells.push_back(cell);
            t.positions.push_back(grid.points[static_cast<std::size_t>(cell)]);
        }
        truth.targets.push_back(std::move(t));
    }
    return truth;
}

/// Noise-free received signal strengths at step k: sum over present targets
/// of h(|p - q_n|) * s.
inline VectorXd noiseless_measurement(const Truth& truth, int k, const SensorArray& sensors,
                                      const PropagationModel& prop) {
    VectorXd y = VectorXd::Zero(static_cast<Eigen::Index>(sensors.size()));
    for (const auto& t : truth.targets) {
        if (!t.alive(k)) {
            continue;
        }
        for (std::size_t n = 0; n < sensors.size(); ++n) {
            y(static_cast<Eigen::Index>(n)) +=
                t.strength * propagation_gain(prop, (t.at(k) - sensors.positions[n]).norm());
        }
    }
    return y;
}

/// Measurements for steps 1..duration (element k-1 holds step k) with
/// additive zero-mean Gaussian noise of variance noise_var.
inline std::vector<VectorXd> synthesize_measurements(const Truth& truth, const SensorArray& sensors,
                                                     const PropagationModel& prop,
                                                     double noise_var, std::uint64_t seed) {
    if (!(noise_var >= 0.0)) {
        throw InvalidArgument("noise variance must be non-negative");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);
    const double sd = std::sqrt(noise_var);
    std::vector<VectorXd> out;
    out.reserve(static_cast<std::size_t>(truth.duration));
    for (int k = 1; k <= truth.duration; ++k) {
        VectorXd y = noiseless_measurement(truth, k, sensors, prop);
        for (Eigen::Index n = 0; n < y.size(); ++n) {
            y(n) += sd * noise(rng);
        }
        out.push_back(std::move(y));
    }
    return out;
}

inline std::uint64_t noise_seed(const ScenarioConfig& cfg, int run) {
    return derive_seed(cfg.master_seed, "noise", static_cast<std::uint64_t>(run));
}

}  // namespace tssg
