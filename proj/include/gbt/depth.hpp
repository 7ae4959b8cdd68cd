#pragma once

// Depth functions against an empirical reference distribution, relative
// outlyingness, and the Liu-Singh rank statistic computed by sorting.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbt/graph.hpp"
#include "gbt/matrix.hpp"
#include "gbt/random.hpp"
#include "gbt/sample.hpp"

namespace gbt {

enum class DepthKind { Mahalanobis, Halfspace, UnivariateCdf };

inline std::string to_string(DepthKind k) {
    switch (k) {
        case DepthKind::Mahalanobis: return "mahalanobis";
        case DepthKind::Halfspace: return "halfspace";
        case DepthKind::UnivariateCdf: return "univariate-cdf";
    }
    return "unknown";
}

struct HalfspaceOptions {
    std::size_t projections = 500;         // random directions for d >= 3
    bool add_query_directions = false;     // also try p_i - x for every reference point
    std::uint64_t seed = 0x7d5e1d;
};

/// Depth with respect to the empirical distribution of a reference sample.
/// Immutable after construction.
class DepthModel {
public:
    DepthModel(DepthKind kind, PointCloud reference, HalfspaceOptions hs = {})
        : kind_(kind), ref_(std::move(reference)), hs_(hs) {
        if (ref_.size() == 0) throw std::invalid_argument("DepthModel: empty reference sample");
        const std::size_t n = ref_.size(), d = ref_.dim();
        switch (kind_) {
            case DepthKind::UnivariateCdf: {
                if (d != 1)
                    throw std::invalid_argument("DepthModel: univariate-cdf depth needs d=1 (got d=" + std::to_string(d) + ")");
                sorted_ = ref_.coordinates();
                std::sort(sorted_.begin(), sorted_.end());
                break;
            }
            case DepthKind::Mahalanobis: {
                auto [mean, cov] = mean_and_covariance(ref_.as_matrix(), false);
                mean_ = std::move(mean);
                const auto eig = symmetric_eigen(cov);
                const double top = std::max(eig.values.front(), 0.0);
                const double bottom = eig.values.back();
                if (!(bottom > 1e-12 * std::max(top, 1e-300))) {
                    std::ostringstream os;
                    os << "mahalanobis depth: reference covariance is singular; direction (";
                    for (std::size_t k = 0; k < d; ++k) os << (k ? ", " : "") << eig.vectors(k, d - 1);
                    os << ") has variance " << bottom;
                    throw NumericError(os.str());
                }
                chol_ = cholesky(cov);
                break;
            }
            case DepthKind::Halfspace: {
                if (d == 1) {
                    sorted_ = ref_.coordinates();
                    std::sort(sorted_.begin(), sorted_.end());
                } else if (d >= 3) {
                    if (hs_.projections == 0 && !hs_.add_query_directions)
                        throw std::invalid_argument("DepthModel: halfspace depth needs at least one projection");
                    RandomSource rng(hs_.seed, stream_id(0x68616c66, d));
                    directions_ = Matrix(hs_.projections, d);
                    projected_.assign(hs_.projections, {});
                    for (std::size_t p = 0; p < hs_.projections; ++p) {
                        double norm = 0.0;
                        do {
                            norm = 0.0;
                            for (std::size_t k = 0; k < d; ++k) {
                                directions_(p, k) = rng.normal();
                                norm += directions_(p, k) * directions_(p, k);
                            }
                        } while (norm == 0.0);
                        norm = std::sqrt(norm);
                        for (std::size_t k = 0; k < d; ++k) directions_(p, k) /= norm;
                        auto& proj = projected_[p];
                        proj.resize(n);
                        for (std::size_t i = 0; i < n; ++i) proj[i] = dot(directions_.row(p), ref_[i]);
                        std::sort(proj.begin(), proj.end());
                    }
                }
                break;
            }
        }
    }

    DepthKind kind() const noexcept { return kind_; }
    const PointCloud& reference() const noexcept { return ref_; }
    const HalfspaceOptions& halfspace_options() const noexcept { return hs_; }

    double depth(std::span<const double> x) const {
        if (x.size() != ref_.dim()) throw std::invalid_argument("DepthModel: query dimension mismatch");
        switch (kind_) {
            case DepthKind::UnivariateCdf: return cdf_depth(x[0]);
            case DepthKind::Mahalanobis: return mahalanobis_depth(x);
            case DepthKind::Halfspace: return halfspace_depth(x);
        }
        return 0.0;
    }

    std::vector<double> depths(const PointCloud& pts) const {
        std::vector<double> out(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) out[i] = depth(pts[i]);
        return out;
    }

private:
    static double dot(std::span<const double> a, std::span<const double> b) {
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
        return s;
    }

    double n_ref() const { return static_cast<double>(ref_.size()); }

    std::size_t count_le(const std::vector<double>& sorted, double v) const {
        return static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), v) - sorted.begin());
    }
    std::size_t count_ge(const std::vector<double>& sorted, double v) const {
        return static_cast<std::size_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), v));
    }

    double cdf_depth(double x) const { return static_cast<double>(count_le(sorted_, x)) / n_ref(); }

    double mahalanobis_depth(std::span<const double> x) const {
        std::vector<double> diff(x.size());
        for (std::size_t k = 0; k < x.size(); ++k) diff[k] = x[k] - mean_[k];
        const auto sol = cholesky_solve(chol_, diff);
        return 1.0 / (1.0 + dot(diff, sol));
    }

    double halfspace_depth(std::span<const double> x) const {
        const std::size_t d = ref_.dim();
        if (d == 1) return static_cast<double>(std::min(count_le(sorted_, x[0]), count_ge(sorted_, x[0]))) / n_ref();
        if (d == 2) return static_cast<double>(planar_halfspace_count(x)) / n_ref();
        std::size_t best = ref_.size();
        for (std::size_t p = 0; p < projected_.size(); ++p) {
            const double v = dot(directions_.row(p), x);
            best = std::min({best, count_le(projected_[p], v), count_ge(projected_[p], v)});
        }
        if (hs_.add_query_directions) {
            std::vector<double> u(d);
            for (std::size_t i = 0; i < ref_.size(); ++i) {
                double norm = 0.0;
                for (std::size_t k = 0; k < d; ++k) {
                    u[k] = ref_.at(i, k) - x[k];
                    norm += u[k] * u[k];
                }
                if (norm == 0.0) continue;
                const double v = dot(u, x);
                std::size_t le = 0, ge = 0;
                for (std::size_t j = 0; j < ref_.size(); ++j) {
                    const double w = dot(u, ref_[j]);
                    le += w <= v;
                    ge += w >= v;
                }
                best = std::min({best, le, ge});
            }
        }
        return static_cast<double>(best) / n_ref();
    }

    // Exact bivariate Tukey depth count: minimum number of reference points in
    // a closed halfplane whose boundary passes through x. The count, as a
    // function of the normal's angle, only changes where the boundary line
    // crosses a point, so it suffices to evaluate once inside every arc
    // between consecutive critical angles.
    std::size_t planar_halfspace_count(std::span<const double> x) const {
        constexpr double pi = std::numbers::pi;
        std::size_t at_x = 0;
        std::vector<double> theta;
        theta.reserve(ref_.size());
        for (std::size_t i = 0; i < ref_.size(); ++i) {
            const double dx = ref_.at(i, 0) - x[0], dy = ref_.at(i, 1) - x[1];
            if (dx == 0.0 && dy == 0.0)
                ++at_x;
            else
                theta.push_back(std::atan2(dy, dx));
        }
        if (theta.empty()) return at_x;
        std::sort(theta.begin(), theta.end());
        const std::size_t m = theta.size();
        // Angles on a doubled circle so that wrapped windows are contiguous.
        std::vector<double> wrapped(2 * m);
        for (std::size_t i = 0; i < m; ++i) {
            wrapped[i] = theta[i];
            wrapped[i + m] = theta[i] + 2 * pi;
        }
        auto normalize = [&](double a) {
            while (a < -pi) a += 2 * pi;
            while (a >= pi) a -= 2 * pi;
            return a;
        };
        std::vector<double> critical;
        critical.reserve(2 * m);
        for (double t : theta) {
            critical.push_back(normalize(t + 0.5 * pi));
            critical.push_back(normalize(t - 0.5 * pi));
        }
        std::sort(critical.begin(), critical.end());
        // Points within the closed half-circle [phi - pi/2, phi + pi/2].
        auto count_window = [&](double phi) {
            const double lo = normalize(phi - 0.5 * pi);
            const auto first = std::lower_bound(wrapped.begin(), wrapped.end(), lo);
            const auto last = std::upper_bound(wrapped.begin(), wrapped.end(), lo + pi);
            return static_cast<std::size_t>(last - first);
        };
        std::size_t best = m;
        for (std::size_t i = 0; i < critical.size(); ++i) {
            const double a = critical[i];
            const double b = (i + 1 < critical.size()) ? critical[i + 1] : critical[0] + 2 * pi;
            if (!(b > a)) continue;
            best = std::min(best, count_window(normalize(0.5 * (a + b))));
        }
        return best + at_x;
    }

    DepthKind kind_;
    PointCloud ref_;
    HalfspaceOptions hs_;
    std::vector<double> sorted_;
    std::vector<double> mean_;
    Matrix chol_;
    Matrix directions_;
    std::vector<std::vector<double>> projected_;
};

inline double mahalanobis_depth(std::span<const double> x, const DepthModel& m) {
    if (m.kind() != DepthKind::Mahalanobis) throw std::invalid_argument("mahalanobis_depth: model kind mismatch");
    return m.depth(x);
}
inline double halfspace_depth(std::span<const double> x, const DepthModel& m) {
    if (m.kind() != DepthKind::Halfspace) throw std::invalid_argument("halfspace_depth: model kind mismatch");
    return m.depth(x);
}

struct DepthScores {
    std::vector<double> depth;  // per pooled point, against the label-1 sample
    std::vector<int> labels;
    std::size_t n1 = 0;
    std::size_t n2 = 0;
    std::int64_t tie_pairs = 0;  // (X_i, Y_j) pairs with equal depth
};

/// Number of (x, y) pairs with depth_x <= depth_y, and how many of those tie.
struct RankCount {
    std::int64_t le = 0;
    std::int64_t ties = 0;
};

inline RankCount rank_count(std::vector<double> dx, std::vector<double> dy) {
    std::sort(dx.begin(), dx.end());
    RankCount rc;
    for (double v : dy) {
        const auto lo = std::lower_bound(dx.begin(), dx.end(), v);
        const auto hi = std::upper_bound(lo, dx.end(), v);
        rc.le += hi - dx.begin();
        rc.ties += hi - lo;
    }
    return rc;
}

inline DepthScores depth_scores(const LabeledSample& pooled, const DepthModel& model) {
    const PointCloud x = pooled.sample(1);
    const PointCloud& ref = model.reference();
    if (x.size() != ref.size() || x.dim() != ref.dim() || x.coordinates() != ref.coordinates())
        throw std::invalid_argument("depth_scores: model reference is not the label-1 subsample");
    DepthScores s;
    s.depth = model.depths(pooled.points());
    s.labels = pooled.labels();
    s.n1 = pooled.n1();
    s.n2 = pooled.n2();
    std::vector<double> dx, dy;
    for (std::size_t i = 0; i < s.depth.size(); ++i) (s.labels[i] == 1 ? dx : dy).push_back(s.depth[i]);
    s.tie_pairs = rank_count(std::move(dx), std::move(dy)).ties;
    return s;
}

/// Liu-Singh count #{(i, j): D(X_i, F_x) <= D(Y_j, F_x)} with F_x the empirical
/// distribution of x.
inline RankCount liu_singh_count(const PointCloud& x, const PointCloud& y, DepthKind kind, HalfspaceOptions hs = {}) {
    if (x.size() == 0 || y.size() == 0) throw std::invalid_argument("liu_singh_Q: empty sample");
    if (x.dim() != y.dim()) throw std::invalid_argument("liu_singh_Q: dimension mismatch");
    const DepthModel model(kind, x, hs);
    return rank_count(model.depths(x), model.depths(y));
}

inline double liu_singh_Q(const PointCloud& x, const PointCloud& y, DepthKind kind, HalfspaceOptions hs = {}) {
    const auto rc = liu_singh_count(x, y, kind, hs);
    return static_cast<double>(rc.le) / (static_cast<double>(x.size()) * static_cast<double>(y.size()));
}

/// Fraction of reference points whose depth is at most the depth of y.
inline double relative_outlyingness(std::span<const double> y, const PointCloud& reference, DepthKind kind,
                                    HalfspaceOptions hs = {}) {
    const DepthModel model(kind, reference, hs);
    const double dy = model.depth(y);
    std::size_t c = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) c += model.depth(reference[i]) <= dy;
    return static_cast<double>(c) / static_cast<double>(reference.size());
}

/// Complete directed depth graph: edge i -> j when point i ranks below j in
/// (depth, label, index) order, so tied cross pairs point from X to Y. Only
/// meant for small N (oracle tests).
inline GeometricGraph depth_graph(const DepthScores& s, std::size_t max_n = 200) {
    const std::size_t n = s.depth.size();
    if (n > max_n)
        throw std::invalid_argument("depth_graph: refusing to materialize " + std::to_string(n) + " vertices (limit " +
                                    std::to_string(max_n) + ")");
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::tie(s.depth[a], s.labels[a], a) < std::tie(s.depth[b], s.labels[b], b);
    });
    std::vector<Edge> edges;
    edges.reserve(n * (n - 1) / 2);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) edges.emplace_back(order[a], order[b]);
    return GeometricGraph(n, true, std::move(edges));
}

}  // namespace gbt
