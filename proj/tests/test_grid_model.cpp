#include "test_util.hpp"

#include <gtest/gtest.h>

#include <map>

using namespace tssg;
using tssg::testing::uniform;

TEST(BuildGrid, SingleTargetScenario) {
    const Grid g = build_grid(300, 300, 10, 10);
    ASSERT_EQ(g.size(), 100u);
    EXPECT_DOUBLE_EQ(g.pitch_x(), 30.0);
    EXPECT_DOUBLE_EQ(g.pitch_y(), 30.0);
    EXPECT_EQ(g.points[0], Vec2(15, 15));
    // Row-major, rows toward +y.
    EXPECT_EQ(g.points[1], Vec2(45, 15));
    EXPECT_EQ(g.points[10], Vec2(15, 45));
}

TEST(BuildGrid, DegenerateAndFifteen) {
    const Grid one = build_grid(1, 1, 1, 1);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one.points[0], Vec2(0.5, 0.5));
    const Grid g = build_grid(300, 300, 15, 15);
    EXPECT_EQ(g.size(), 225u);
    EXPECT_DOUBLE_EQ(g.pitch_x(), 20.0);
}

TEST(BuildGrid, RejectsBadArguments) {
    EXPECT_THROW(build_grid(0, 300, 10, 10), InvalidArgument);
    EXPECT_THROW(build_grid(300, -1, 10, 10), InvalidArgument);
    EXPECT_THROW(build_grid(300, 300, 0, 10), InvalidArgument);
    EXPECT_THROW(build_grid(300, 300, 10, -2), InvalidArgument);
}

TEST(Propagation, Examples) {
    const PropagationModel m{3600.0};
    EXPECT_DOUBLE_EQ(propagation_gain(m, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(propagation_gain(m, 60.0), 0.5);
    EXPECT_DOUBLE_EQ(propagation_gain(m, 120.0), 0.2);
    EXPECT_THROW(propagation_gain(m, -1.0), InvalidArgument);
}

TEST(Propagation, StrictlyDecreasing) {
    const PropagationModel m{calibrate_c(60)};
    double prev = propagation_gain(m, 0.0);
    for (double d = 0.5; d < 500.0; d += 0.5) {
        const double h = propagation_gain(m, d);
        EXPECT_LT(h, prev);
        EXPECT_GT(h, 0.0);
        prev = h;
    }
}

TEST(CalibrateC, Examples) {
    EXPECT_DOUBLE_EQ(calibrate_c(60), 3600.0);
    EXPECT_DOUBLE_EQ(calibrate_c(1), 1.0);
    EXPECT_DOUBLE_EQ(calibrate_c(100), 10000.0);
    EXPECT_THROW(calibrate_c(0), InvalidArgument);
    EXPECT_THROW(calibrate_c(-5), InvalidArgument);
    EXPECT_DOUBLE_EQ(propagation_gain(PropagationModel{calibrate_c(37.0)}, 37.0), 0.5);
}

TEST(MeasurementMatrix, Examples) {
    const Grid g = build_grid(300, 300, 10, 10);
    SensorArray s;
    s.positions = {g.points[23], g.points[0] + Vec2(60, 0)};
    const MatrixXd H = build_measurement_matrix(g, s, PropagationModel{3600});
    ASSERT_EQ(H.rows(), 2);
    ASSERT_EQ(H.cols(), 100);
    EXPECT_DOUBLE_EQ(H(0, 23), 1.0);
    EXPECT_DOUBLE_EQ(H(1, 0), 0.5);
}

TEST(MeasurementMatrix, ShapeRangeAndMonotone) {
    std::mt19937_64 rng(7);
    const Grid g = build_grid(300, 300, 10, 10);
    SensorArray s;
    for (int n = 0; n < 20; ++n) {
        s.positions.emplace_back(uniform(rng, 0, 300), uniform(rng, 0, 300));
    }
    const MatrixXd H = build_measurement_matrix(g, s, PropagationModel{3600});
    ASSERT_EQ(H.rows(), 20);
    ASSERT_EQ(H.cols(), 100);
    EXPECT_GT(H.minCoeff(), 0.0);
    EXPECT_LE(H.maxCoeff(), 1.0);
    for (int n = 0; n < 20; ++n) {
        for (int i = 0; i < 100; ++i) {
            for (int j = 0; j < 100; ++j) {
                const double di = (s.positions[n] - g.points[i]).norm();
                const double dj = (s.positions[n] - g.points[j]).norm();
                if (di < dj) {
                    EXPECT_GE(H(n, i), H(n, j));
                }
            }
        }
    }
}

TEST(MeasurementMatrix, RejectsEmpty) {
    const Grid g = build_grid(300, 300, 10, 10);
    EXPECT_THROW(build_measurement_matrix(g, SensorArray{}, PropagationModel{3600}),
                 InvalidArgument);
}

TEST(Transition, IdentityKernel) {
    const Grid g = build_grid(300, 300, 10, 10);
    const MatrixXd F = build_transition(g, MovementKernel::identity());
    EXPECT_EQ(F, MatrixXd::Identity(100, 100));
}

TEST(Transition, InteriorColumnAndCorner) {
    const Grid g = build_grid(300, 300, 10, 10);
    const MatrixXd F = build_transition(g, MovementKernel::north_east());
    const int i = g.index(4, 4);
    EXPECT_DOUBLE_EQ(F(i, i), 0.25);
    EXPECT_DOUBLE_EQ(F(g.index(5, 4), i), 0.25);  // north
    EXPECT_DOUBLE_EQ(F(g.index(4, 5), i), 0.25);  // east
    EXPECT_DOUBLE_EQ(F(g.index(5, 5), i), 0.25);  // north-east
    EXPECT_DOUBLE_EQ(F.col(i).sum(), 1.0);
    EXPECT_EQ((F.col(i).array() > 0).count(), 4);

    const int ne = g.index(9, 9);
    EXPECT_DOUBLE_EQ(F(ne, ne), 0.25);
    EXPECT_DOUBLE_EQ(F.col(ne).sum(), 0.25);
    EXPECT_EQ((F.col(ne).array() > 0).count(), 1);
}

TEST(Transition, InvalidKernelRejected) {
    const Grid g = build_grid(300, 300, 10, 10);
    EXPECT_THROW(build_transition(g, MovementKernel{{{0, 0, 0.5}}}), InvalidArgument);
    EXPECT_THROW(build_transition(g, MovementKernel{{{0, 0, -0.5}, {1, 0, 1.5}}}),
                 InvalidArgument);
    EXPECT_THROW(build_transition(g, MovementKernel{}), InvalidArgument);
}

TEST(Transition, InteriorColumnsStochasticAndMassConserved) {
    std::mt19937_64 rng(3);
    const Grid g = build_grid(300, 300, 10, 10);
    const MovementKernel k = MovementKernel::north_east();
    const MatrixXd F = build_transition(g, k);
    VectorXd x = VectorXd::Zero(100);
    for (int r = 0; r < 10; ++r) {
        for (int c = 0; c < 10; ++c) {
            const int i = g.index(r, c);
            if (r < 9 && c < 9) {
                EXPECT_EQ(F.col(i).sum(), 1.0);
                x(i) = uniform(rng, 0, 5);
            } else {
                EXPECT_LT(F.col(i).sum(), 1.0);
            }
        }
    }
    EXPECT_NEAR((F * x).sum(), x.sum(), 1e-12 * x.sum());
}

// Brute force: enumerate every k-step path of kernel moves from the start
// cell, keeping only paths that stay on the grid throughout.
TEST(Transition, MatchesKernelConvolution) {
    const MovementKernel kernels[] = {
        MovementKernel::north_east(),
        MovementKernel{{{0, 0, 0.4}, {-1, 0, 0.1}, {0, -1, 0.2}, {1, 1, 0.3}}},
    };
    for (const auto& kernel : kernels) {
        for (int n : {3, 4, 5}) {
            const Grid g = build_grid(100, 80, n, n - 1 > 0 ? n - 1 : 1);
            const MatrixXd F = build_transition(g, kernel);
            for (int start = 0; start < static_cast<int>(g.size()); ++start) {
                std::map<int, double> mass{{start, 1.0}};
                VectorXd x = VectorXd::Zero(static_cast<Eigen::Index>(g.size()));
                x(start) = 1.0;
                for (int step = 0; step < 4; ++step) {
                    std::map<int, double> next;
                    for (const auto& [cell, w] : mass) {
                        for (const auto& e : kernel.entries) {
                            const int r = g.row_of(cell) + e.d_row;
                            const int c = g.col_of(cell) + e.d_col;
                            if (g.on_grid(r, c)) {
                                next[g.index(r, c)] += w * e.probability;
                            }
                        }
                    }
                    mass = std::move(next);
                    x = F * x;
                    VectorXd expect = VectorXd::Zero(x.size());
                    for (const auto& [cell, w] : mass) {
                        expect(cell) = w;
                    }
                    EXPECT_LT((x - expect).cwiseAbs().maxCoeff(), 1e-15);
                }
            }
        }
    }
}

TEST(GridModelBuild, AssemblesHAndF) {
    Grid g = build_grid(300, 300, 10, 10);
    SensorArray s;
    s.positions = {{10, 10}, {200, 100}};
    const GridModel m =
        build_grid_model(g, s, PropagationModel{3600}, MovementKernel::north_east());
    EXPECT_EQ(m.H, build_measurement_matrix(g, s, PropagationModel{3600}));
    EXPECT_EQ(m.F, build_transition(g, MovementKernel::north_east()));
}
