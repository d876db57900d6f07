#pragma once

#include "tssg/errors.hpp"
#include "tssg/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace tssg {

/// sqrt(1/K sum_k |p_hat_k - p_k|^2) over two aligned series.
inline double rmse(const std::vector<Vec2>& estimates, const std::vector<Vec2>& truth) {
    if (estimates.size() != truth.size()) {
        throw InvalidArgument("rmse: series lengths differ");
    }
    if (truth.empty()) {
        throw InvalidArgument("rmse: empty series");
    }
    double acc = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        acc += (estimates[k] - truth[k]).squaredNorm();
    }
    return std::sqrt(acc / static_cast<double>(truth.size()));
}

namespace detail {

// Successive-shortest-path min-cost flow on a small dense graph
// (Bellman-Ford, so negative residual costs are fine).
class MinCostFlow {
public:
    explicit MinCostFlow(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

    int add_edge(int from, int to, std::int64_t cap, double cost) {
        adj_[from].push_back(static_cast<int>(edges_.size()));
        edges_.push_back({to, cap, cost});
        adj_[to].push_back(static_cast<int>(edges_.size()));
        edges_.push_back({from, 0, -cost});
        return static_cast<int>(edges_.size()) - 2;
    }

    std::int64_t flow_on(int edge) const { return edges_[edge ^ 1].cap; }

    std::int64_t run(int source, int sink, std::int64_t want) {
        const auto n = adj_.size();
        std::int64_t sent = 0;
        while (sent < want) {
            std::vector<double> dist(n, std::numeric_limits<double>::infinity());
            std::vector<int> via(n, -1);
            dist[source] = 0.0;
            for (std::size_t round = 0; round + 1 < n; ++round) {
                bool relaxed = false;
                for (std::size_t u = 0; u < n; ++u) {
                    if (!std::isfinite(dist[u])) {
                        continue;
                    }
                    for (int e : adj_[u]) {
                        const Edge& ed = edges_[e];
                        // Relative slack keeps rounding from creating
                        // spurious negative cycles in the residual graph.
                        const double cand = dist[u] + ed.cost;
                        if (ed.cap > 0 && cand < dist[ed.to] - 1e-12 * (1.0 + std::abs(cand))) {
                            dist[ed.to] = dist[u] + ed.cost;
                            via[ed.to] = e;
                            relaxed = true;
                        }
                    }
                }
                if (!relaxed) {
                    break;
                }
            }
            if (via[sink] < 0) {
                break;
            }
            std::int64_t push = want - sent;
            std::size_t hops = 0;
            for (int v = sink; v != source; v = edges_[via[v] ^ 1].to) {
                if (++hops > n) {
                    throw NumericalFailure("min-cost flow: predecessor cycle");
                }
                push = std::min(push, edges_[via[v]].cap);
            }
            for (int v = sink; v != source; v = edges_[via[v] ^ 1].to) {
                edges_[via[v]].cap -= push;
                edges_[via[v] ^ 1].cap += push;
            }
            sent += push;
        }
        return sent;
    }

private:
    struct Edge {
        int to;
        std::int64_t cap;
        double cost;
    };
    std::vector<std::vector<int>> adj_;
    std::vector<Edge> edges_;
};

}  // namespace detail

/// L^p Wasserstein distance between two finite point sets with uniform
/// weights. Marginals are scaled by L = lcm(|P|, |Q|) so the transport
/// problem is an integer min-cost flow; the optimum is divided by L.
inline double wasserstein(const std::vector<Vec2>& P, const std::vector<Vec2>& Q, double p = 1.0) {
    if (P.empty() || Q.empty()) {
        throw InvalidArgument("wasserstein: point sets must be non-empty");
    }
    if (!(p >= 1.0)) {
        throw InvalidArgument("wasserstein: order must be at least 1");
    }
    const auto m = static_cast<int>(P.size());
    const auto n = static_cast<int>(Q.size());
    const std::int64_t L = std::lcm<std::int64_t>(m, n);
    const int source = m + n;
    const int sink = m + n + 1;
    detail::MinCostFlow flow(m + n + 2);
    std::vector<double> cost(static_cast<std::size_t>(m) * n);
    std::vector<int> arcs(static_cast<std::size_t>(m) * n);
    for (int i = 0; i < m; ++i) {
        flow.add_edge(source, i, L / m, 0.0);
    }
    for (int j = 0; j < n; ++j) {
        flow.add_edge(m + j, sink, L / n, 0.0);
    }
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            const std::size_t ij = static_cast<std::size_t>(i) * n + j;
            cost[ij] = std::pow((P[i] - Q[j]).norm(), p);
            arcs[ij] = flow.add_edge(i, m + j, L, cost[ij]);
        }
    }
    if (flow.run(source, sink, L) != L) {
        throw NumericalFailure("wasserstein: transport flow incomplete");
    }
    double total = 0.0;
    for (std::size_t ij = 0; ij < cost.size(); ++ij) {
        total += static_cast<double>(flow.flow_on(arcs[ij])) * cost[ij];
    }
    const double value = total / static_cast<double>(L);
    return p == 1.0 ? value : std::pow(value, 1.0 / p);
}

}  // namespace tssg
