#pragma once

// Graph functionals on point clouds: Euclidean MST, k-nearest-neighbour union
// graph, non-bipartite minimum-distance matching, and the sorted path for
// univariate data. Equal distances are ordered by the index pair (min, max),
// which makes every builder a deterministic function of its input.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "gbt/blossom.hpp"
#include "gbt/graph.hpp"
#include "gbt/random.hpp"

namespace gbt {

struct BuildOptions {
    bool require_nice = false;  // reject inputs with repeated pairwise distances
    std::uint64_t seed = 0;     // used only when a matching must drop a vertex
};

namespace detail {

inline void check_build_input(const PointCloud& pts, const char* who, const BuildOptions& opt) {
    if (pts.size() < 2) throw std::invalid_argument(std::string(who) + ": need at least 2 points (empty graph)");
    if (opt.require_nice && !pts.is_nice())
        throw std::invalid_argument(std::string(who) + ": input has tied pairwise distances and require_nice is set");
}

inline bool pair_less(double d1, std::size_t a1, std::size_t b1, double d2, std::size_t a2, std::size_t b2) {
    return std::tie(d1, a1, b1) < std::tie(d2, a2, b2);
}

}  // namespace detail

/// Prim's algorithm with a dense O(n^2) scan over squared distances.
inline GeometricGraph build_mst(const PointCloud& pts, const BuildOptions& opt = {}) {
    detail::check_build_input(pts, "build_mst", opt);
    const std::size_t n = pts.size();
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(n, inf);
    std::vector<std::size_t> parent(n, 0);
    std::vector<char> in_tree(n, 0);
    std::vector<Edge> edges;
    edges.reserve(n - 1);

    std::size_t current = 0;
    in_tree[0] = 1;
    for (std::size_t step = 1; step < n; ++step) {
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            const double d2 = pts.squared_distance(current, v);
            if (best[v] == inf ||
                detail::pair_less(d2, std::min(current, v), std::max(current, v), best[v], std::min(parent[v], v),
                                  std::max(parent[v], v))) {
                best[v] = d2;
                parent[v] = current;
            }
        }
        std::size_t next = n;
        for (std::size_t v = 0; v < n; ++v) {
            if (in_tree[v]) continue;
            if (next == n || detail::pair_less(best[v], std::min(parent[v], v), std::max(parent[v], v), best[next],
                                               std::min(parent[next], next), std::max(parent[next], next)))
                next = v;
        }
        in_tree[next] = 1;
        edges.emplace_back(std::min(parent[next], next), std::max(parent[next], next));
        current = next;
    }
    std::sort(edges.begin(), edges.end());
    GeometricGraph g(n, false, std::move(edges));
    g.duplicate_points = pts.has_duplicate_points();
    return g;
}

/// Undirected union graph: {a, b} is an edge when either point is among the
/// other's k nearest neighbours. Brute force, O(n^2 log k).
inline GeometricGraph build_knn(const PointCloud& pts, std::size_t k, const BuildOptions& opt = {}) {
    detail::check_build_input(pts, "build_knn", opt);
    const std::size_t n = pts.size();
    if (k < 1 || k >= n)
        throw std::invalid_argument("build_knn: k must satisfy 1 <= k <= n-1 (k=" + std::to_string(k) +
                                    ", n=" + std::to_string(n) + ")");
    std::vector<Edge> edges;
    edges.reserve(n * k);
    std::vector<std::pair<double, std::size_t>> cand(n - 1);
    for (std::size_t a = 0; a < n; ++a) {
        std::size_t m = 0;
        for (std::size_t b = 0; b < n; ++b)
            if (b != a) cand[m++] = {pts.squared_distance(a, b), b};
        std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end());
        for (std::size_t t = 0; t < k; ++t) {
            const std::size_t b = cand[t].second;
            edges.emplace_back(std::min(a, b), std::max(a, b));
        }
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
    GeometricGraph g(n, false, std::move(edges));
    g.duplicate_points = pts.has_duplicate_points();
    return g;
}

/// Minimum total-distance perfect matching (blossom algorithm, O(n^3)). For
/// odd n one uniformly chosen vertex (seeded by opt.seed) is left unmatched
/// and recorded in `dropped_vertex`.
///
/// Distances are mapped to integers on a 2^48 grid relative to the largest
/// distance, so matchings whose lengths differ by less than about
/// n * 2^-48 * max-distance may be ranked as ties.
inline GeometricGraph build_nbm(const PointCloud& pts, const BuildOptions& opt = {}) {
    detail::check_build_input(pts, "build_nbm", opt);
    const std::size_t n = pts.size();
    std::vector<std::size_t> working(n);
    std::iota(working.begin(), working.end(), std::size_t{0});
    std::optional<std::size_t> dropped;
    if (n % 2 == 1) {
        RandomSource rng(opt.seed, stream_id(0x6e626d, n));
        dropped = rng.below(n);
        working.erase(working.begin() + static_cast<std::ptrdiff_t>(*dropped));
    }
    const std::size_t m = working.size();
    double dmax = 0.0;
    std::vector<double> dist(m * m, 0.0);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            const double d = pts.distance(working[a], working[b]);
            dist[a * m + b] = d;
            dmax = std::max(dmax, d);
        }
    constexpr double kGrid = 281474976710656.0;  // 2^48
    const auto offset = static_cast<std::int64_t>(kGrid) + 1;
    std::vector<WeightedEdge> wedges;
    wedges.reserve(m * (m - 1) / 2);
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t b = a + 1; b < m; ++b) {
            const std::int64_t q = dmax > 0.0 ? std::llround(dist[a * m + b] / dmax * kGrid) : 0;
            wedges.push_back({static_cast<int>(a), static_cast<int>(b), offset - q});
        }
    const std::vector<int> mate = max_weight_matching(static_cast<int>(m), std::move(wedges), true);
    std::vector<Edge> edges;
    for (std::size_t a = 0; a < m; ++a) {
        if (mate[a] < 0) throw NumericError("build_nbm: matching is not perfect");
        const auto b = static_cast<std::size_t>(mate[a]);
        if (a < b) edges.emplace_back(working[a], working[b]);
    }
    std::sort(edges.begin(), edges.end());
    GeometricGraph g(n, false, std::move(edges));
    g.duplicate_points = pts.has_duplicate_points();
    g.dropped_vertex = dropped;
    return g;
}

/// Path through the order statistics of univariate data.
inline GeometricGraph build_sorted_path(const PointCloud& pts, const BuildOptions& opt = {}) {
    if (pts.dim() != 1)
        throw std::invalid_argument("build_sorted_path: data must be one-dimensional (d=" + std::to_string(pts.dim()) + ")");
    detail::check_build_input(pts, "build_sorted_path", opt);
    const std::size_t n = pts.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pts.at(a, 0) < pts.at(b, 0); });
    std::vector<Edge> edges;
    edges.reserve(n - 1);
    for (std::size_t t = 1; t < n; ++t) edges.emplace_back(std::min(order[t - 1], order[t]), std::max(order[t - 1], order[t]));
    std::sort(edges.begin(), edges.end());
    GeometricGraph g(n, false, std::move(edges));
    g.duplicate_points = pts.has_duplicate_points();
    return g;
}

}  // namespace gbt
