#pragma once

#include "tssg/errors.hpp"
#include "tssg/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace tssg {

/// Rectangular grid of candidate target positions over a
/// region_width x region_height surveillance area. Points sit at cell
/// centers and are ordered row-major: index = row * nx + col, with rows
/// increasing along +y (north) and columns along +x (east).
struct Grid {
    double region_width = 0.0;
    double region_height = 0.0;
    int nx = 0;
    int ny = 0;
    std::vector<Vec2> points;

    [[nodiscard]] std::size_t size() const { return points.size(); }
    [[nodiscard]] double pitch_x() const { return region_width / nx; }
    [[nodiscard]] double pitch_y() const { return region_height / ny; }
    [[nodiscard]] int index(int row, int col) const { return row * nx + col; }
    [[nodiscard]] int row_of(int index) const { return index / nx; }
    [[nodiscard]] int col_of(int index) const { return index % nx; }
    [[nodiscard]] bool on_grid(int row, int col) const {
        return row >= 0 && row < ny && col >= 0 && col < nx;
    }
    [[nodiscard]] bool contains(const Vec2& p) const {
        return p.x() >= 0.0 && p.x() <= region_width && p.y() >= 0.0 && p.y() <= region_height;
    }
    /// Index of the cell containing p (p clamped to the region).
    [[nodiscard]] int cell_of(const Vec2& p) const {
        int col = static_cast<int>(std::floor(p.x() / pitch_x()));
        int row = static_cast<int>(std::floor(p.y() / pitch_y()));
        col = std::clamp(col, 0, nx - 1);
        row = std::clamp(row, 0, ny - 1);
        return index(row, col);
    }
};

struct SensorArray {
    std::vector<Vec2> positions;

    [[nodiscard]] std::size_t size() const { return positions.size(); }
};

/// Distance-dependent propagation gain h(d) = c / (c + d^2).
struct PropagationModel {
    double c = 3600.0;
};

/// One admissible per-step displacement of a target, in grid cells.
struct KernelEntry {
    int d_row = 0;
    int d_col = 0;
    double probability = 0.0;
};

/// Target movement kernel: displacement (d_row, d_col) -> probability.
/// Entry order is significant for sampling.
struct MovementKernel {
    std::vector<KernelEntry> entries;

    static MovementKernel identity() { return MovementKernel{{{0, 0, 1.0}}}; }

    /// Stay, north, east or north-east with probability 1/4 each.
    static MovementKernel north_east() {
        return MovementKernel{{{0, 0, 0.25}, {1, 0, 0.25}, {0, 1, 0.25}, {1, 1, 0.25}}};
    }

    void validate() const {
        if (entries.empty()) {
            throw InvalidArgument("movement kernel has no entries");
        }
        double total = 0.0;
        for (const auto& e : entries) {
            if (!(e.probability >= 0.0) || !std::isfinite(e.probability)) {
                throw InvalidArgument("movement kernel probability must be non-negative");
            }
            total += e.probability;
        }
        if (std::abs(total - 1.0) > 1e-9) {
            throw InvalidArgument("movement kernel probabilities must sum to 1");
        }
    }
};

/// Everything the trackers need about the geometry: grid, sensors,
/// propagation law, measurement matrix H (N x G) and transition F (G x G).
struct GridModel {
    Grid grid;
    SensorArray sensors;
    PropagationModel propagation;
    MovementKernel kernel;
    MatrixXd H;
    MatrixXd F;
};

inline Grid build_grid(double region_width, double region_height, int nx, int ny) {
    if (!(region_width > 0.0) || !(region_height > 0.0)) {
        throw InvalidArgument("grid region dimensions must be positive");
    }
    if (nx < 1 || ny < 1) {
        throw InvalidArgument("grid must have at least one row and one column");
    }
    Grid g;
    g.region_width = region_width;
    g.region_height = region_height;
    g.nx = nx;
    g.ny = ny;
    g.points.reserve(static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny));
    const double dx = region_width / nx;
    const double dy = region_height / ny;
    for (int r = 0; r < ny; ++r) {
        for (int c = 0; c < nx; ++c) {
            g.points.emplace_back((c + 0.5) * dx, (r + 0.5) * dy);
        }
    }
    return g;
}

inline double propagation_gain(const PropagationModel& model, double d) {
    if (!(d >= 0.0)) {
        throw InvalidArgument("propagation distance must be non-negative");
    }
    return model.c / (model.c + d * d);
}

/// c such that h(d_half) = 1/2.
inline double calibrate_c(double d_half) {
    if (!(d_half > 0.0)) {
        throw InvalidArgument("half-gain distance must be positive");
    }
    return d_half * d_half;
}

inline MatrixXd build_measurement_matrix(const Grid& grid, const SensorArray& sensors,
                                         const PropagationModel& prop) {
    if (grid.points.empty() || sensors.positions.empty()) {
        throw InvalidArgument("measurement matrix needs a non-empty grid and sensor set");
    }
    if (!(prop.c > 0.0)) {
        throw InvalidArgument("propagation parameter c must be positive");
    }
    const auto n = static_cast<Eigen::Index>(sensors.size());
    const auto g = static_cast<Eigen::Index>(grid.size());
    MatrixXd h(n, g);
    for (Eigen::Index s = 0; s < n; ++s) {
        for (Eigen::Index i = 0; i < g; ++i) {
            const double d = (sensors.positions[s] - grid.points[i]).norm();
            h(s, i) = propagation_gain(prop, d);
        }
    }
    return h;
}

/// F(j, i) = probability of moving from grid point i to grid point j.
/// Displacements leaving the grid are dropped, so boundary columns are
/// sub-stochastic.
inline MatrixXd build_transition(const Grid& grid, const MovementKernel& kernel) {
    kernel.validate();
    const auto g = static_cast<Eigen::Index>(grid.size());
    MatrixXd f = MatrixXd::Zero(g, g);
    for (int i = 0; i < static_cast<int>(g); ++i) {
        const int r = grid.row_of(i);
        const int c = grid.col_of(i);
        for (const auto& e : kernel.entries) {
            const int r2 = r + e.d_row;
            const int c2 = c + e.d_col;
            if (grid.on_grid(r2, c2)) {
                f(grid.index(r2, c2), i) += e.probability;
            }
        }
    }
    return f;
}

inline GridModel build_grid_model(Grid grid, SensorArray sensors, PropagationModel prop,
                                  MovementKernel kernel) {
    GridModel m;
    m.H = build_measurement_matrix(grid, sensors, prop);
    m.F = build_transition(grid, kernel);
    m.grid = std::move(grid);
    m.sensors = std::move(sensors);
    m.propagation = prop;
    m.kernel = std::move(kernel);
    return m;
}

}  // namespace tssg
