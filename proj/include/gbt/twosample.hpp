#pragma once

// The cross-edge statistic T on a graph over the pooled sample, its exact
// permutation mean, the conditional variance under i.i.d. labels, and
// asymptotic-normal and permutation calibration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

#include "gbt/builders.hpp"
#include "gbt/depth.hpp"
#include "gbt/graph.hpp"
#include "gbt/parallel.hpp"
#include "gbt/random.hpp"
#include "gbt/sample.hpp"

namespace gbt {

enum class Direction { Lower, Upper, TwoSided };

inline std::string to_string(Direction d) {
    switch (d) {
        case Direction::Lower: return "lower";
        case Direction::Upper: return "upper";
        case Direction::TwoSided: return "two-sided";
    }
    return "unknown";
}

inline Direction parse_direction(const std::string& s) {
    if (s == "lower") return Direction::Lower;
    if (s == "upper") return Direction::Upper;
    if (s == "two-sided") return Direction::TwoSided;
    throw std::invalid_argument("unknown direction '" + s + "' (expected lower, upper or two-sided)");
}

/// Which graph to build on the pooled sample.
struct Functional {
    enum class Kind { Mst, Knn, Nbm, Path1d, Depth };
    Kind kind = Kind::Mst;
    std::size_t k = 5;                                // K-NN only
    DepthKind depth_kind = DepthKind::UnivariateCdf;  // depth only
    HalfspaceOptions halfspace{};

    static Functional mst() { return {Kind::Mst}; }
    static Functional knn(std::size_t k) { return {Kind::Knn, k}; }
    static Functional nbm() { return {Kind::Nbm}; }
    static Functional path1d() { return {Kind::Path1d}; }
    static Functional depth(DepthKind kind, HalfspaceOptions hs = {}) { return {Kind::Depth, 0, kind, hs}; }

    bool directed() const noexcept { return kind == Kind::Depth; }
    Direction default_direction() const noexcept { return directed() ? Direction::TwoSided : Direction::Lower; }

    std::string name() const {
        switch (kind) {
            case Kind::Mst: return "mst";
            case Kind::Knn: return "knn(" + std::to_string(k) + ")";
            case Kind::Nbm: return "nbm";
            case Kind::Path1d: return "path1d";
            case Kind::Depth: return "depth(" + to_string(depth_kind) + ")";
        }
        return "unknown";
    }
};

/// Command-line method names: mst, knn, nbm, runs, depth-hd, depth-md, depth-cdf.
inline Functional functional_from_method(const std::string& method, std::size_t k = 5) {
    if (method == "mst") return Functional::mst();
    if (method == "knn") return Functional::knn(k);
    if (method == "nbm") return Functional::nbm();
    if (method == "runs") return Functional::path1d();
    if (method == "depth-hd") return Functional::depth(DepthKind::Halfspace);
    if (method == "depth-md") return Functional::depth(DepthKind::Mahalanobis);
    if (method == "depth-cdf") return Functional::depth(DepthKind::UnivariateCdf);
    throw std::invalid_argument("unknown method '" + method +
                                "' (expected mst, knn, nbm, runs, depth-hd, depth-md or depth-cdf)");
}

inline GeometricGraph build_graph(const Functional& f, const PointCloud& pooled, const BuildOptions& opt = {}) {
    switch (f.kind) {
        case Functional::Kind::Mst: return build_mst(pooled, opt);
        case Functional::Kind::Knn: return build_knn(pooled, f.k, opt);
        case Functional::Kind::Nbm: return build_nbm(pooled, opt);
        case Functional::Kind::Path1d: return build_sorted_path(pooled, opt);
        case Functional::Kind::Depth:
            throw std::invalid_argument("build_graph: the depth graph depends on labels; use depth_graph()");
    }
    throw std::invalid_argument("build_graph: unknown functional");
}

/// Directed: edges (i, j) with c_i = 1 and c_j = 2. Undirected: edges whose
/// endpoints carry different labels.
inline std::int64_t cross_count(const GeometricGraph& g, std::span<const int> labels) {
    if (labels.size() != g.vertex_count()) throw std::invalid_argument("cross_statistic: label count does not match graph");
    std::int64_t c = 0;
    if (g.directed()) {
        for (const auto& [i, j] : g.edges()) c += labels[i] == 1 && labels[j] == 2;
    } else {
        for (const auto& [i, j] : g.edges()) c += labels[i] != labels[j];
    }
    return c;
}

inline double cross_statistic(const GeometricGraph& g, std::span<const int> labels) {
    if (g.edge_count() == 0) throw std::invalid_argument("cross_statistic: graph has no edges");
    return static_cast<double>(cross_count(g, labels)) / static_cast<double>(g.edge_count());
}

/// Exact mean of T over uniform relabelings with fixed (n1, n2):
/// 2 n1 n2 / (N (N-1)) for undirected graphs, half that for directed ones.
inline Rational null_mean(bool directed, std::size_t n1, std::size_t n2) {
    const auto N = static_cast<std::int64_t>(n1 + n2);
    if (N < 2) throw std::invalid_argument("null_mean: need N >= 2");
    const auto prod = static_cast<std::int64_t>(n1) * static_cast<std::int64_t>(n2);
    return Rational(directed ? prod : 2 * prod, N * (N - 1));
}
inline Rational null_mean(const GeometricGraph& g, std::size_t n1, std::size_t n2) {
    return null_mean(g.directed(), n1, n2);
}

namespace detail {

// Variance of sqrt(N) * T for a directed graph when labels are i.i.d. with
// P(label 1) = n1 / N.
inline double directed_bootstrap_variance(const GraphStats& s, std::size_t n1, std::size_t n2) {
    if (s.e_n <= 0) throw std::invalid_argument("bootstrap_variance: graph has no edges");
    const double N = static_cast<double>(n1 + n2), p1 = static_cast<double>(n1), p2 = static_cast<double>(n2);
    const double nu = p1 * p2 / (N * N);
    const double a = nu - nu * nu;
    const double c = nu * nu;
    const double b_up = p1 * p2 * p2 / (N * N * N) - c;
    const double b_down = p1 * p1 * p2 / (N * N * N) - c;
    const double e = static_cast<double>(s.e_n);
    const double e2 = e * e;
    return N * a / e - 2.0 * c * N * static_cast<double>(s.e_plus) / e2 +
           2.0 * b_up * N * static_cast<double>(s.t2_up) / e2 + 2.0 * b_down * N * static_cast<double>(s.t2_down) / e2 -
           2.0 * c * N * static_cast<double>(s.t2_mixed) / e2;
}

inline double count_correction(std::size_t n1, std::size_t n2) {
    const double N = static_cast<double>(n1 + n2);
    const double r = 2.0 * (static_cast<double>(n1) / N) * (static_cast<double>(n2) / N);
    return 0.5 * r * (1.0 - 2.0 * r);
}

}  // namespace detail

/// Variance of sqrt(N)(T - E T) when labels are i.i.d. Bernoulli(n1/N) given
/// the graph. Directed stats use the formula directly; for undirected stats T
/// is twice the statistic of the doubled graph, so the variance is scaled by 4.
inline double bootstrap_variance(const GraphStats& s, std::size_t n1, std::size_t n2) {
    if (s.directed) return detail::directed_bootstrap_variance(s, n1, n2);
    return 4.0 * detail::directed_bootstrap_variance(s.doubled(), n1, n2);
}

/// Null (fixed label count) variance: the i.i.d.-label variance minus the part
/// explained by fluctuation of the label count, on the scale of T.
inline double null_variance(const GraphStats& s, std::size_t n1, std::size_t n2) {
    if (s.directed) return detail::directed_bootstrap_variance(s, n1, n2) - detail::count_correction(n1, n2);
    return 4.0 * (detail::directed_bootstrap_variance(s.doubled(), n1, n2) - detail::count_correction(n1, n2));
}

/// sqrt(N)-scale variance too small to calibrate with: at most 1e-12 or at
/// most 1/N (the statistic then fluctuates on a faster scale than sqrt(N)).
inline bool variance_is_degenerate(double sigma1_sq, std::size_t n_total) {
    return !(sigma1_sq > std::max(1e-12, 1.0 / static_cast<double>(n_total)));
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

inline double normal_quantile(double u) {
    if (!(u > 0.0 && u < 1.0)) throw std::invalid_argument("normal_quantile: argument must lie in (0, 1)");
    return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
}

inline double normal_pvalue(double z, Direction dir) {
    switch (dir) {
        case Direction::Lower: return normal_cdf(z);
        case Direction::Upper: return normal_cdf(-z);
        case Direction::TwoSided: return std::min(1.0, 2.0 * normal_cdf(-std::abs(z)));
    }
    return 1.0;
}

struct TestResult {
    std::string functional;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::int64_t cross = 0;        // numerator of t
    std::int64_t edges = 0;        // denominator of t
    double t = 0.0;
    Rational null_mean_exact;
    double null_mean = 0.0;
    double r_centered = 0.0;
    double sigma11_sq = 0.0;
    double sigma1_sq = 0.0;
    bool degenerate = false;
    std::optional<double> z;
    std::optional<double> p_asymptotic;
    std::optional<double> p_permutation;
    std::size_t permutations = 0;
    Direction direction = Direction::Lower;
    std::uint64_t seed = 0;
    std::vector<std::string> warnings;
};

namespace detail {

// Signed distance of a cross count from its exact null mean, scaled to an
// integer: count * den - edges * num.
inline __int128 deviation(std::int64_t count, std::int64_t edges, const Rational& mean) {
    return static_cast<__int128>(count) * mean.den - static_cast<__int128>(edges) * mean.num;
}

inline bool as_extreme(std::int64_t c, std::int64_t obs, std::int64_t edges, const Rational& mean, Direction dir) {
    switch (dir) {
        case Direction::Lower: return c <= obs;
        case Direction::Upper: return c >= obs;
        case Direction::TwoSided: {
            auto abs128 = [](__int128 v) { return v < 0 ? -v : v; };
            return abs128(deviation(c, edges, mean)) >= abs128(deviation(obs, edges, mean));
        }
    }
    return false;
}

}  // namespace detail

/// Count statistic as a function of a labeling (labels in {1, 2}).
using LabelStatistic = std::function<std::int64_t(std::span<const int>)>;

/// Monte Carlo permutation p-value (1 + #{as or more extreme}) / (b + 1).
/// Replicate k shuffles labels with stream (seed, k), so the value does not
/// depend on the worker count.
inline double permutation_pvalue(const LabelStatistic& stat, std::span<const int> labels, std::int64_t edges,
                                 bool directed, std::size_t b, std::uint64_t seed, Direction dir, unsigned workers = 1) {
    if (b < 1) throw std::invalid_argument("permutation_pvalue: need at least one permutation");
    std::size_t n1 = 0;
    for (int c : labels) n1 += c == 1;
    const Rational mean = null_mean(directed, n1, labels.size() - n1);
    const std::int64_t obs = stat(labels);
    std::vector<char> extreme(b, 0);
    parallel_for(b, workers, [&](std::size_t k) {
        RandomSource rng(seed, stream_id(0x7065726d, k));
        std::vector<int> perm(labels.begin(), labels.end());
        rng.shuffle(perm);
        extreme[k] = detail::as_extreme(stat(perm), obs, edges, mean, dir);
    });
    std::size_t hits = 0;
    for (char x : extreme) hits += x;
    return static_cast<double>(1 + hits) / static_cast<double>(b + 1);
}

inline double permutation_pvalue(const GeometricGraph& g, std::span<const int> labels, std::size_t b,
                                 std::uint64_t seed, Direction dir, unsigned workers = 1) {
    return permutation_pvalue([&](std::span<const int> l) { return cross_count(g, l); }, labels,
                              static_cast<std::int64_t>(g.edge_count()), g.directed(), b, seed, dir, workers);
}

/// Liu-Singh count for a labeling of pooled points: the depth model is rebuilt
/// from whichever points carry label 1.
inline std::int64_t depth_cross_count(const PointCloud& pooled, std::span<const int> labels, DepthKind kind,
                                      const HalfspaceOptions& hs = {}) {
    std::vector<std::size_t> ix, iy;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? ix : iy).push_back(i);
    if (ix.empty() || iy.empty()) throw std::invalid_argument("depth statistic: both labels must be present");
    const DepthModel model(kind, pooled.subset(ix), hs);
    std::vector<double> dx(ix.size()), dy(iy.size());
    for (std::size_t t = 0; t < ix.size(); ++t) dx[t] = model.depth(pooled[ix[t]]);
    for (std::size_t t = 0; t < iy.size(); ++t) dy[t] = model.depth(pooled[iy[t]]);
    return rank_count(std::move(dx), std::move(dy)).le;
}

inline double permutation_pvalue(const PointCloud& pooled, std::span<const int> labels, DepthKind kind,
                                 std::size_t b, std::uint64_t seed, Direction dir, const HalfspaceOptions& hs = {},
                                 unsigned workers = 1) {
    const auto N = static_cast<std::int64_t>(labels.size());
    return permutation_pvalue([&](std::span<const int> l) { return depth_cross_count(pooled, l, kind, hs); }, labels,
                              N * (N - 1) / 2, true, b, seed, dir, workers);
}

/// Calls fn on every labeling of n points with exactly n1 ones (the rest 2),
/// in lexicographic order of the label-1 index sets. Meant for n <= ~20.
inline void for_each_labeling(std::size_t n, std::size_t n1, const std::function<void(std::span<const int>)>& fn) {
    if (n1 > n) throw std::invalid_argument("for_each_labeling: n1 > n");
    std::vector<std::size_t> pick(n1);
    for (std::size_t i = 0; i < n1; ++i) pick[i] = i;
    std::vector<int> labels(n);
    while (true) {
        std::fill(labels.begin(), labels.end(), 2);
        for (std::size_t i : pick) labels[i] = 1;
        fn(labels);
        std::size_t i = n1;
        while (i > 0 && pick[i - 1] == n - n1 + i - 1) --i;
        if (i == 0) return;
        ++pick[i - 1];
        for (std::size_t j = i; j < n1; ++j) pick[j] = pick[j - 1] + 1;
    }
}

/// Exact permutation p-value by enumerating all C(n, n1) relabelings.
inline double exact_permutation_pvalue(const LabelStatistic& stat, std::span<const int> labels, std::int64_t edges,
                                       bool directed, Direction dir) {
    std::size_t n1 = 0;
    for (int c : labels) n1 += c == 1;
    const Rational mean = null_mean(directed, n1, labels.size() - n1);
    const std::int64_t obs = stat(labels);
    std::size_t total = 0, hits = 0;
    for_each_labeling(labels.size(), n1, [&](std::span<const int> l) {
        ++total;
        hits += detail::as_extreme(stat(l), obs, edges, mean, dir);
    });
    return static_cast<double>(hits) / static_cast<double>(total);
}

struct TestOptions {
    std::optional<Direction> direction;  // default depends on the functional
    std::size_t permutations = 0;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

namespace detail {

inline void finish_result(TestResult& res, const GraphStats& stats, const Rational& mean) {
    const std::size_t N = res.n1 + res.n2;
    res.null_mean_exact = mean;
    res.null_mean = mean.value();
    res.t = static_cast<double>(res.cross) / static_cast<double>(res.edges);
    // Centre with exact integer arithmetic before converting.
    const double dev = static_cast<double>(deviation(res.cross, res.edges, mean)) /
                       (static_cast<double>(mean.den) * static_cast<double>(res.edges));
    res.r_centered = std::sqrt(static_cast<double>(N)) * dev;
    res.sigma11_sq = bootstrap_variance(stats, res.n1, res.n2);
    res.sigma1_sq = null_variance(stats, res.n1, res.n2);
    res.degenerate = variance_is_degenerate(res.sigma1_sq, N);
    if (res.degenerate) {
        res.warnings.push_back(
            "degenerate null variance (sigma1_sq=" + std::to_string(res.sigma1_sq) +
            "): the statistic does not fluctuate on the sqrt(N) scale, as happens for dense undirected graphs; "
            "asymptotic p-value withheld, use permutation calibration");
    } else {
        res.z = res.r_centered / std::sqrt(res.sigma1_sq);
        res.p_asymptotic = normal_pvalue(*res.z, res.direction);
    }
}

}  // namespace detail

/// Builds the functional on the pooled sample and calibrates T.
inline TestResult run_test(const LabeledSample& pooled, const Functional& f, const TestOptions& opt = {}) {
    TestResult res;
    res.functional = f.name();
    res.n1 = pooled.n1();
    res.n2 = pooled.n2();
    res.direction = opt.direction.value_or(f.default_direction());
    res.seed = opt.seed;
    const std::size_t N = pooled.n();
    const auto& labels = pooled.labels();

    if (f.kind == Functional::Kind::Depth) {
        const PointCloud x = pooled.sample(1);
        const DepthModel model(f.depth_kind, x, f.halfspace);
        const DepthScores scores = depth_scores(pooled, model);
        std::vector<double> dx, dy;
        for (std::size_t i = 0; i < N; ++i) (labels[i] == 1 ? dx : dy).push_back(scores.depth[i]);
        const RankCount rc = rank_count(std::move(dx), std::move(dy));
        res.cross = rc.le;
        res.edges = static_cast<std::int64_t>(N) * static_cast<std::int64_t>(N - 1) / 2;
        if (rc.ties > 0)
            res.warnings.push_back(std::to_string(rc.ties) +
                                   " cross-sample depth ties: depth values are not continuously distributed");
        detail::finish_result(res, GraphStats::tournament(N), null_mean(true, res.n1, res.n2));
        if (opt.permutations > 0)
            res.p_permutation = permutation_pvalue(pooled.points(), labels, f.depth_kind, opt.permutations, opt.seed,
                                                   res.direction, f.halfspace, opt.workers);
    } else {
        const GeometricGraph g = build_graph(f, pooled.points(), BuildOptions{false, opt.seed});
        if (g.edge_count() == 0) throw std::invalid_argument("run_test: graph has no edges");
        if (g.duplicate_points)
            res.warnings.push_back("duplicate points: tied distances were broken by index order");
        if (g.dropped_vertex)
            res.warnings.push_back("odd sample size: point " + std::to_string(*g.dropped_vertex) +
                                   " left out of the matching");
        res.cross = cross_count(g, labels);
        res.edges = static_cast<std::int64_t>(g.edge_count());
        detail::finish_result(res, graph_stats(g), null_mean(g, res.n1, res.n2));
        if (opt.permutations > 0)
            res.p_permutation = permutation_pvalue(g, labels, opt.permutations, opt.seed, res.direction, opt.workers);
    }
    res.permutations = opt.permutations;
    return res;
}

inline TestResult run_test(const PointCloud& x, const PointCloud& y, const Functional& f, const TestOptions& opt = {}) {
    if (f.kind == Functional::Kind::Path1d && x.dim() != 1)
        throw std::invalid_argument("run_test: path1d requires one-dimensional data");
    return run_test(LabeledSample::pool(x, y), f, opt);
}

}  // namespace gbt
