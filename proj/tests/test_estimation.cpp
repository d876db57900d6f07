#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace tssg;
using namespace tssg::testing;

namespace {

WeightedPointSet make_points(const std::vector<Vec2>& pts, const std::vector<double>& w = {}) {
    WeightedPointSet s;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        s.points.push_back(pts[i]);
        s.weights.push_back(w.empty() ? 1.0 : w[i]);
        s.indices.push_back(static_cast<int>(i));
    }
    return s;
}

std::vector<Vec2> blob(const Vec2& c, int n, std::mt19937_64& rng, double radius = 5.0) {
    std::vector<Vec2> out;
    for (int i = 0; i < n; ++i) {
        out.push_back(c + Vec2(uniform(rng, -radius, radius), uniform(rng, -radius, radius)));
    }
    return out;
}

// Weighted within-cluster sum of squares of a labeling, from scratch.
double wcss_of(const WeightedPointSet& s, const std::vector<int>& labels, int k) {
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
        Vec2 sum = Vec2::Zero();
        double mass = 0.0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (labels[i] == c) {
                sum += s.weights[i] * s.points[i];
                mass += s.weights[i];
            }
        }
        if (mass == 0.0) {
            continue;
        }
        const Vec2 mean = sum / mass;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (labels[i] == c) {
                total += s.weights[i] * (s.points[i] - mean).squaredNorm();
            }
        }
    }
    return total;
}

}  // namespace

TEST(SupportPoints, Examples) {
    const Grid g = build_grid(90, 30, 3, 1);
    EXPECT_TRUE(support_points(VectorXd::Zero(3), g, 1e-3).empty());
    const WeightedPointSet one = support_points((VectorXd(3) << 0, 7, 0).finished(), g, 1e-3);
    ASSERT_EQ(one.size(), 1u);
    EXPECT_EQ(one.indices[0], 1);
    EXPECT_EQ(one.points[0], g.points[1]);
    EXPECT_EQ(one.weights[0], 7.0);

    const WeightedPointSet two = support_points((VectorXd(3) << 10, 0.02, 0).finished(), g, 1e-3);
    EXPECT_EQ(two.indices, (std::vector<int>{0, 1}));
    const WeightedPointSet drop = support_points((VectorXd(3) << 10, 0.005, 0).finished(), g, 1e-3);
    EXPECT_EQ(drop.indices, (std::vector<int>{0}));
}

TEST(SupportPoints, Errors) {
    const Grid g = build_grid(90, 30, 3, 1);
    EXPECT_THROW(support_points(VectorXd::Ones(3), g, 0.0), InvalidArgument);
    EXPECT_THROW(support_points(VectorXd::Ones(3), g, 1.0), InvalidArgument);
    EXPECT_THROW(support_points(VectorXd::Ones(4), g, 0.1), InvalidArgument);
}

TEST(WeightedKmeans, SingleCluster) {
    const auto s = make_points({{0, 0}, {10, 0}, {0, 20}}, {1, 2, 1});
    const Clustering c = weighted_kmeans(s, 1, 3, 11);
    EXPECT_EQ(c.k, 1);
    EXPECT_EQ(c.labels, (std::vector<int>{0, 0, 0}));
    EXPECT_NEAR(c.centroids[0].x(), 5.0, 1e-12);
    EXPECT_NEAR(c.centroids[0].y(), 5.0, 1e-12);
}

TEST(WeightedKmeans, TwoFarPoints) {
    const auto s = make_points({{0, 0}, {200, 0}});
    const Clustering c = weighted_kmeans(s, 2, 5, 3);
    EXPECT_NE(c.labels[0], c.labels[1]);
    EXPECT_NEAR(c.wcss, 0.0, 1e-12);
}

TEST(WeightedKmeans, BlobPureForAnySeed) {
    std::mt19937_64 rng(1);
    auto pts = blob({50, 50}, 4, rng);
    const auto b = blob({200, 50}, 4, rng);
    pts.insert(pts.end(), b.begin(), b.end());
    const auto s = make_points(pts);
    // Brute force over every 2-partition.
    double best = std::numeric_limits<double>::infinity();
    std::vector<int> best_labels;
    for (int mask = 1; mask < (1 << 8) - 1; ++mask) {
        std::vector<int> labels(8);
        for (int i = 0; i < 8; ++i) {
            labels[i] = (mask >> i) & 1;
        }
        const double w = wcss_of(s, labels, 2);
        if (w < best) {
            best = w;
            best_labels = labels;
        }
    }
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const Clustering c = weighted_kmeans(s, 2, 10, seed);
        for (int i = 1; i < 4; ++i) {
            EXPECT_EQ(c.labels[i], c.labels[0]);
            EXPECT_EQ(c.labels[4 + i], c.labels[4]);
        }
        EXPECT_NE(c.labels[0], c.labels[4]);
        EXPECT_NEAR(c.wcss, best, 1e-9);
    }
}

TEST(WeightedKmeans, DeterministicAndErrors) {
    std::mt19937_64 rng(2);
    const auto s = make_points(random_points(30, rng));
    const Clustering a = weighted_kmeans(s, 4, 5, 99);
    const Clustering b = weighted_kmeans(s, 4, 5, 99);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_EQ(a.wcss, b.wcss);
    EXPECT_NEAR(a.wcss, wcss_of(s, a.labels, a.k), 1e-9 * std::max(1.0, a.wcss));
    EXPECT_THROW(weighted_kmeans(s, 0, 5, 1), InvalidArgument);
    EXPECT_THROW(weighted_kmeans(s, 31, 5, 1), InvalidArgument);
}

TEST(Silhouette, SelectsNaturalCount) {
    std::mt19937_64 rng(3);
    auto two = blob({40, 40}, 6, rng);
    auto more = blob({250, 40}, 6, rng);
    two.insert(two.end(), more.begin(), more.end());
    EXPECT_EQ(silhouette_select(make_points(two), 5, 10, 1).k, 2);

    auto three = two;
    more = blob({150, 250}, 6, rng);
    three.insert(three.end(), more.begin(), more.end());
    EXPECT_EQ(silhouette_select(make_points(three), 5, 10, 1).k, 3);
}

TEST(Silhouette, DegenerateCases) {
    const auto same = make_points({{5, 5}, {5, 5}, {5, 5}});
    const ClusterCountSelection a = silhouette_select(same, 4, 3, 1);
    EXPECT_EQ(a.k, 1);
    EXPECT_EQ(a.clustering.k, 1);
    const auto single = make_points({{1, 2}});
    EXPECT_EQ(silhouette_select(single, 4, 3, 1).k, 1);
}

// Mean silhouette from its textbook definition for a fixed labeling.
TEST(Silhouette, MatchesDefinition) {
    const auto s = make_points({{0, 0}, {1, 0}, {10, 0}, {12, 0}, {30, 0}});
    const std::vector<int> labels{0, 0, 1, 1, 2};
    auto mean_dist = [&](std::size_t i, int c) {
        double sum = 0.0;
        int n = 0;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (j != i && labels[j] == c) {
                sum += (s.points[i] - s.points[j]).norm();
                ++n;
            }
        }
        return sum / n;
    };
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const double a = mean_dist(i, labels[i]);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < 3; ++c) {
            if (c != labels[i]) {
                b = std::min(b, mean_dist(i, c));
            }
        }
        total += (b - a) / std::max(a, b);
    }
    // Point 4 is a singleton and scores 0.
    EXPECT_NEAR(mean_silhouette(s, labels, 3), total / 5.0, 1e-15);
}

TEST(Strengths, Examples) {
    Clustering c;
    c.k = 1;
    c.masks = {{0, 2}};
    const VectorXd x = (VectorXd(3) << 4, 100, 6).finished();
    EXPECT_EQ(estimate_strengths(c, x), (std::vector<double>{10.0}));
    c.masks = {{1}};
    EXPECT_EQ(estimate_strengths(c, (VectorXd(3) << 0, 10, 0).finished()),
              (std::vector<double>{10.0}));
}

TEST(Positions, Examples) {
    Grid g;
    g.points = {{0, 0}, {4, 0}, {7, 3}};
    Clustering c;
    c.masks = {{2}};
    EXPECT_EQ(estimate_positions(c, (VectorXd(3) << 0, 0, 5).finished(), g)[0], Vec2(7, 3));
    c.masks = {{0, 1}};
    EXPECT_EQ(estimate_positions(c, (VectorXd(3) << 2, 2, 0).finished(), g)[0], Vec2(2, 0));
    EXPECT_EQ(estimate_positions(c, (VectorXd(3) << 3, 1, 0).finished(), g)[0], Vec2(1, 0));
    EXPECT_THROW(estimate_positions(c, VectorXd::Zero(3), g), InvalidState);
}

TEST(Estimation, PartitionScalingHullAndEquivariance) {
    std::mt19937_64 rng(4);
    const Grid g = build_grid(300, 300, 10, 10);
    for (int trial = 0; trial < 20; ++trial) {
        VectorXd x = VectorXd::Zero(100);
        for (int j = 0; j < 100; ++j) {
            if (uniform(rng) < 0.3) {
                x(j) = uniform(rng, 0.01, 5.0);
            }
        }
        const WeightedPointSet pts = support_points(x, g, 1e-3);
        const int k = std::min<int>(3, static_cast<int>(pts.size()));
        const Clustering c = weighted_kmeans(pts, k, 5, static_cast<std::uint64_t>(trial));
        const auto s = estimate_strengths(c, x);
        double support_mass = 0.0;
        for (double w : pts.weights) {
            support_mass += w;
        }
        double total = 0.0;
        for (double v : s) {
            total += v;
        }
        EXPECT_NEAR(total, support_mass, 1e-12 * support_mass);

        const auto p = estimate_positions(c, x, g);
        const auto p3 = estimate_positions(c, 3.0 * x, g);
        const auto s3 = estimate_strengths(c, 3.0 * x);
        for (std::size_t m = 0; m < p.size(); ++m) {
            EXPECT_LT((p[m] - p3[m]).norm(), 1e-9);
            EXPECT_NEAR(s3[m], 3.0 * s[m], 1e-9 * s[m]);
            // Bounding box of the cluster is a necessary hull condition.
            double lo_x = 1e9, hi_x = -1e9, lo_y = 1e9, hi_y = -1e9;
            for (int j : c.masks[m]) {
                lo_x = std::min(lo_x, g.points[j].x());
                hi_x = std::max(hi_x, g.points[j].x());
                lo_y = std::min(lo_y, g.points[j].y());
                hi_y = std::max(hi_y, g.points[j].y());
            }
            EXPECT_GE(p[m].x(), lo_x - 1e-9);
            EXPECT_LE(p[m].x(), hi_x + 1e-9);
            EXPECT_GE(p[m].y(), lo_y - 1e-9);
            EXPECT_LE(p[m].y(), hi_y + 1e-9);
        }

        Clustering rev = c;
        std::reverse(rev.masks.begin(), rev.masks.end());
        const auto pr = estimate_positions(rev, x, g);
        const auto sr = estimate_strengths(rev, x);
        for (std::size_t m = 0; m < p.size(); ++m) {
            EXPECT_EQ(pr[m], p[p.size() - 1 - m]);
            EXPECT_EQ(sr[m], s[s.size() - 1 - m]);
        }
    }
}
