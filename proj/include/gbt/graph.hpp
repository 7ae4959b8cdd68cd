#pragma once

// Point clouds, geometric graphs over sample indices, and the edge/degree/
// 2-star summaries that drive the variance formula.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "gbt/matrix.hpp"

namespace gbt {

class PointCloud {
public:
    PointCloud() = default;
    PointCloud(std::size_t n, std::size_t d, std::vector<double> coords) : n_(n), d_(d), coords_(std::move(coords)) {
        if (d_ == 0) throw std::invalid_argument("PointCloud: dimension must be >= 1");
        if (coords_.size() != n_ * d_) throw std::invalid_argument("PointCloud: coordinate count does not match n*d");
    }
    PointCloud(std::size_t n, std::size_t d) : PointCloud(n, d, std::vector<double>(n * d, 0.0)) {}

    static PointCloud from_rows(const std::vector<std::vector<double>>& rows) {
        if (rows.empty()) throw std::invalid_argument("PointCloud: no rows");
        const std::size_t d = rows.front().size();
        std::vector<double> c;
        c.reserve(rows.size() * d);
        for (const auto& r : rows) {
            if (r.size() != d) throw std::invalid_argument("PointCloud: ragged rows");
            c.insert(c.end(), r.begin(), r.end());
        }
        return PointCloud(rows.size(), d, std::move(c));
    }
    static PointCloud from_values(const std::vector<double>& xs) { return PointCloud(xs.size(), 1, xs); }
    static PointCloud from_matrix(const Matrix& m) { return PointCloud(m.rows(), m.cols(), m.entries()); }

    std::size_t size() const noexcept { return n_; }
    std::size_t dim() const noexcept { return d_; }
    std::span<const double> operator[](std::size_t i) const { return {coords_.data() + i * d_, d_}; }
    std::span<double> operator[](std::size_t i) { return {coords_.data() + i * d_, d_}; }
    double& at(std::size_t i, std::size_t k) { return coords_[i * d_ + k]; }
    double at(std::size_t i, std::size_t k) const { return coords_[i * d_ + k]; }
    const std::vector<double>& coordinates() const noexcept { return coords_; }
    Matrix as_matrix() const { return Matrix(n_, d_, coords_); }

    double squared_distance(std::size_t i, std::size_t j) const {
        const double* a = coords_.data() + i * d_;
        const double* b = coords_.data() + j * d_;
        double s = 0.0;
        for (std::size_t k = 0; k < d_; ++k) {
            const double t = a[k] - b[k];
            s += t * t;
        }
        return s;
    }
    double distance(std::size_t i, std::size_t j) const { return std::sqrt(squared_distance(i, j)); }

    /// Rows of `other` appended after the rows of this cloud.
    PointCloud concat(const PointCloud& other) const {
        if (other.d_ != d_) throw std::invalid_argument("PointCloud: dimension mismatch in concat");
        std::vector<double> c = coords_;
        c.insert(c.end(), other.coords_.begin(), other.coords_.end());
        return PointCloud(n_ + other.n_, d_, std::move(c));
    }

    PointCloud subset(std::span<const std::size_t> idx) const {
        std::vector<double> c;
        c.reserve(idx.size() * d_);
        for (std::size_t i : idx) {
            const auto r = (*this)[i];
            c.insert(c.end(), r.begin(), r.end());
        }
        return PointCloud(idx.size(), d_, std::move(c));
    }

    bool has_duplicate_points() const {
        std::vector<std::size_t> order(n_);
        for (std::size_t i = 0; i < n_; ++i) order[i] = i;
        auto row_less = [&](std::size_t a, std::size_t b) {
            return std::lexicographical_compare(coords_.begin() + a * d_, coords_.begin() + (a + 1) * d_,
                                                coords_.begin() + b * d_, coords_.begin() + (b + 1) * d_);
        };
        std::sort(order.begin(), order.end(), row_less);
        for (std::size_t k = 1; k < n_; ++k)
            if (!row_less(order[k - 1], order[k])) return true;
        return false;
    }

    /// True when all pairwise distances are distinct (and positive). O(n^2 log n).
    bool is_nice() const {
        std::vector<double> d2;
        d2.reserve(n_ * (n_ - (n_ > 0)) / 2);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) d2.push_back(squared_distance(i, j));
        std::sort(d2.begin(), d2.end());
        if (!d2.empty() && d2.front() == 0.0) return false;
        return std::adjacent_find(d2.begin(), d2.end()) == d2.end();
    }

private:
    std::size_t n_ = 0;
    std::size_t d_ = 0;
    std::vector<double> coords_;
};

using Edge = std::pair<std::size_t, std::size_t>;

class GeometricGraph {
public:
    GeometricGraph() = default;
    GeometricGraph(std::size_t n, bool directed, std::vector<Edge> edges) : n_(n), directed_(directed), edges_(std::move(edges)) {
        for (auto& [i, j] : edges_) {
            if (i >= n_ || j >= n_) throw std::invalid_argument("GeometricGraph: edge endpoint out of range");
            if (i == j) throw std::invalid_argument("GeometricGraph: self-loop");
            if (!directed_ && i > j) std::swap(i, j);
        }
        std::vector<Edge> sorted = edges_;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
            throw std::invalid_argument("GeometricGraph: duplicate edge");
    }

    std::size_t vertex_count() const noexcept { return n_; }
    bool directed() const noexcept { return directed_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }

    /// 𝒢₊: every undirected edge replaced by both orientations.
    GeometricGraph doubled() const {
        if (directed_) throw std::logic_error("GeometricGraph::doubled: graph is already directed");
        std::vector<Edge> e;
        e.reserve(2 * edges_.size());
        for (const auto& [i, j] : edges_) {
            e.emplace_back(i, j);
            e.emplace_back(j, i);
        }
        return GeometricGraph(n_, true, std::move(e));
    }

    /// Sum of Euclidean edge lengths in the given cloud.
    double total_length(const PointCloud& pts) const {
        double s = 0.0;
        for (const auto& [i, j] : edges_) s += pts.distance(i, j);
        return s;
    }

    /// Edge-list export: header `#directed=<0|1> n=<n>` then `i<TAB>j` lines.
    void write_edge_list(std::ostream& os) const {
        os << "#directed=" << (directed_ ? 1 : 0) << " n=" << n_ << '\n';
        for (const auto& [i, j] : edges_) os << i << '\t' << j << '\n';
    }

    static GeometricGraph read_edge_list(std::istream& is) {
        std::string header;
        if (!std::getline(is, header)) throw std::invalid_argument("edge list: missing header");
        int directed = -1;
        std::size_t n = 0;
        if (std::sscanf(header.c_str(), "#directed=%d n=%zu", &directed, &n) != 2 || (directed != 0 && directed != 1))
            throw std::invalid_argument("edge list: malformed header '" + header + "'");
        std::vector<Edge> edges;
        std::size_t i, j;
        while (is >> i >> j) edges.emplace_back(i, j);
        return GeometricGraph(n, directed == 1, std::move(edges));
    }

    // Construction metadata.
    bool duplicate_points = false;
    std::optional<std::size_t> dropped_vertex;  // odd-n matchings leave one vertex out

private:
    std::size_t n_ = 0;
    bool directed_ = false;
    std::vector<Edge> edges_;
};

struct DegreeTriple {
    std::int64_t out = 0;    // d↑
    std::int64_t in = 0;     // d↓
    std::int64_t total = 0;  // d
};

struct GraphStats {
    bool directed = false;
    std::size_t n = 0;
    std::int64_t e_n = 0;
    std::int64_t e_plus = 0;       // unordered pairs joined in both directions
    std::int64_t t2_up = 0;        // Σ C(d↑, 2)
    std::int64_t t2_down = 0;      // Σ C(d↓, 2)
    std::int64_t t2_mixed = 0;     // in-edge from a, out-edge to b, a ≠ b
    std::int64_t t2_undirected = 0;  // Σ C(d, 2)
    std::int64_t max_degree = 0;
    std::vector<DegreeTriple> degrees;

    /// The summary of 𝒢₊ for an undirected graph (identity for directed ones).
    GraphStats doubled() const {
        if (directed) return *this;
        GraphStats s = *this;
        s.directed = true;
        s.e_n = 2 * e_n;
        s.e_plus = e_n;
        s.t2_up = s.t2_down = t2_undirected;
        s.t2_mixed = 2 * t2_undirected;
        for (auto& d : s.degrees) {
            d.out = d.in = d.total;
            d.total *= 2;
        }
        s.t2_undirected = 0;
        for (const auto& d : s.degrees) s.t2_undirected += d.total * (d.total - 1) / 2;
        s.max_degree = 2 * max_degree;
        return s;
    }

    /// Summary of a transitive tournament on n vertices (the depth graph with
    /// a strict total order): out-degrees are a permutation of 0..n-1.
    static GraphStats tournament(std::size_t n) {
        GraphStats s;
        s.directed = true;
        s.n = n;
        const auto N = static_cast<std::int64_t>(n);
        s.e_n = N * (N - 1) / 2;
        s.e_plus = 0;
        s.t2_up = s.t2_down = s.t2_mixed = N * (N - 1) * (N - 2) / 6;
        s.t2_undirected = N * (N - 1) * (N - 2) / 2;
        s.max_degree = N - 1;
        s.degrees.resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            const auto k = static_cast<std::int64_t>(v);
            s.degrees[v] = {N - 1 - k, k, N - 1};
        }
        return s;
    }
};

inline GraphStats graph_stats(const GeometricGraph& g) {
    GraphStats s;
    s.directed = g.directed();
    s.n = g.vertex_count();
    s.e_n = static_cast<std::int64_t>(g.edge_count());
    s.degrees.assign(s.n, {});
    auto c2 = [](std::int64_t k) { return k * (k - 1) / 2; };
    if (!g.directed()) {
        for (const auto& [i, j] : g.edges()) {
            ++s.degrees[i].total;
            ++s.degrees[j].total;
        }
        for (const auto& d : s.degrees) {
            s.t2_undirected += c2(d.total);
            s.max_degree = std::max(s.max_degree, d.total);
        }
        return s;
    }
    for (const auto& [i, j] : g.edges()) {
        ++s.degrees[i].out;
        ++s.degrees[j].in;
    }
    // Bidirectional pairs, and for each vertex the number of neighbours it is
    // joined to in both directions.
    std::vector<Edge> sorted = g.edges();
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::int64_t> mutual(s.n, 0);
    for (const auto& [i, j] : sorted) {
        if (i < j && std::binary_search(sorted.begin(), sorted.end(), Edge{j, i})) {
            ++s.e_plus;
            ++mutual[i];
            ++mutual[j];
        }
    }
    for (std::size_t v = 0; v < s.n; ++v) {
        auto& d = s.degrees[v];
        d.total = d.out + d.in;
        s.t2_up += c2(d.out);
        s.t2_down += c2(d.in);
        s.t2_mixed += d.in * d.out - mutual[v];
        s.t2_undirected += c2(d.total);
        s.max_degree = std::max(s.max_degree, d.total);
    }
    return s;
}

struct ScaledDegrees {
    bool directed = false;
    std::vector<double> up;    // λ↑ (directed)
    std::vector<double> down;  // λ↓ (directed)
    std::vector<double> lambda;  // λ (undirected)
};

/// λ = n_total · degree / e_n per vertex.
inline ScaledDegrees scaled_degrees(const GraphStats& s, std::size_t n_total) {
    if (s.e_n <= 0) throw std::invalid_argument("scaled_degrees: graph has no edges");
    ScaledDegrees out;
    out.directed = s.directed;
    const double scale = static_cast<double>(n_total) / static_cast<double>(s.e_n);
    for (const auto& d : s.degrees) {
        if (s.directed) {
            out.up.push_back(scale * static_cast<double>(d.out));
            out.down.push_back(scale * static_cast<double>(d.in));
        } else {
            out.lambda.push_back(scale * static_cast<double>(d.total));
        }
    }
    return out;
}

inline ScaledDegrees scaled_degrees(const GeometricGraph& g, std::size_t n_total) {
    return scaled_degrees(graph_stats(g), n_total);
}

}  // namespace gbt
