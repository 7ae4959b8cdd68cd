#pragma once

// Asymptotic (Pitman) efficiency of graph-based tests under local
// alternatives theta_1 + h / sqrt(N): the general directed and undirected
// formulas, their closed-form special cases, and Monte Carlo estimators of the
// variance parameters and limiting scaled degrees.

#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbt/depth.hpp"
#include "gbt/families.hpp"
#include "gbt/graph.hpp"
#include "gbt/parallel.hpp"
#include "gbt/quadrature.hpp"
#include "gbt/random.hpp"
#include "gbt/twosample.hpp"

namespace gbt {

/// Limits of the normalized edge and 2-star counts. Directed graphs use the
/// five beta values; undirected graphs use (gamma0, gamma1).
struct VarianceParams {
    bool directed = true;
    double beta0 = 0.0, beta0_plus = 0.0, beta1_up = 0.0, beta1_down = 0.0, beta1_plus = 0.0;
    double gamma0 = 0.0, gamma1 = 0.0;
    std::string provenance = "closed-form";
    std::size_t n = 0;
    std::size_t reps = 0;
    std::vector<double> std_errors;  // same order as values()

    static VarianceParams directed_params(double b0, double b0p, double b1u, double b1d, double b1p) {
        VarianceParams v;
        v.directed = true;
        v.beta0 = b0;
        v.beta0_plus = b0p;
        v.beta1_up = b1u;
        v.beta1_down = b1d;
        v.beta1_plus = b1p;
        return v;
    }
    static VarianceParams undirected_params(double g0, double g1) {
        VarianceParams v;
        v.directed = false;
        v.gamma0 = g0;
        v.gamma1 = g1;
        return v;
    }

    std::vector<double> values() const {
        if (directed) return {beta0, beta0_plus, beta1_up, beta1_down, beta1_plus};
        return {gamma0, gamma1};
    }
    std::vector<std::string> names() const {
        if (directed) return {"beta0", "beta0_plus", "beta1_up", "beta1_down", "beta1_plus"};
        return {"gamma0", "gamma1"};
    }
};

struct IntegralRecord {
    std::string name;
    double value = 0.0;
    double error = 0.0;
    std::string method;
};

struct EfficiencyReport {
    std::string functional;
    std::string family;
    std::vector<double> theta;
    std::vector<double> h;
    double p = 0.0;
    double r = 0.0;
    double sigma12 = 0.0;    // signed covariance limit; numerator = |sigma12|
    double numerator = 0.0;
    double radicand = 0.0;
    double denominator = 0.0;
    std::optional<double> ae;
    bool degenerate = false;
    std::string explanation;
    VarianceParams params;
    std::vector<IntegralRecord> integrals;
    std::vector<std::string> notes;
};

namespace detail {

constexpr double radicand_floor = 1e-12;

inline void check_p(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("efficiency: p must lie in (0, 1)");
}

inline void finish_report(EfficiencyReport& rep) {
    rep.numerator = std::abs(rep.sigma12);
    if (!(rep.radicand > radicand_floor)) {
        rep.degenerate = true;
        rep.denominator = 0.0;
        rep.ae.reset();
        rep.explanation =
            "limiting null variance is zero (radicand " + std::to_string(rep.radicand) +
            "): the statistic has no non-degenerate limit on the sqrt(N) scale, as for dense undirected graphs "
            "with equal sample proportions, so the efficiency is undefined";
        return;
    }
    rep.denominator = std::sqrt(rep.radicand);
    rep.ae = rep.numerator / rep.denominator;
}

}  // namespace detail

/// Efficiency for a directed functional given its variance parameters and the
/// integrals i_up = int <h, grad f> lambda_up and i_down = int <h, grad f> lambda_down.
inline EfficiencyReport ae_directed(const VarianceParams& v, double i_up, double i_down, double p) {
    detail::check_p(p);
    if (!v.directed) throw std::invalid_argument("ae_directed: parameters are for an undirected functional");
    const double q = 1.0 - p, r = 2.0 * p * q;
    EfficiencyReport rep;
    rep.p = p;
    rep.r = r;
    rep.params = v;
    rep.sigma12 = 0.5 * r * (p * i_down - q * i_up);
    rep.radicand = r * ((v.beta0 - 1.0) / 2.0 + q * v.beta1_up + p * v.beta1_down -
                        0.5 * r * (v.beta0 / 2.0 + v.beta0_plus + v.beta1_down + v.beta1_up + v.beta1_plus - 2.0));
    rep.integrals = {{"int <h, grad f> lambda_up", i_up, 0.0, "input"},
                     {"int <h, grad f> lambda_down", i_down, 0.0, "input"}};
    detail::finish_report(rep);
    return rep;
}

/// Efficiency for an undirected functional with (gamma0, gamma1) variance
/// parameters and i_lambda = int <h, grad f> lambda.
inline EfficiencyReport ae_undirected(double gamma0, double gamma1, double i_lambda, double p) {
    detail::check_p(p);
    const double q = 1.0 - p, r = 2.0 * p * q;
    EfficiencyReport rep;
    rep.p = p;
    rep.r = r;
    rep.params = VarianceParams::undirected_params(gamma0, gamma1);
    rep.sigma12 = 0.5 * r * (p - q) * i_lambda;
    rep.radicand = r * (gamma0 * (1.0 - r) + (gamma1 - 2.0) * (1.0 - 2.0 * r));
    rep.integrals = {{"int <h, grad f> lambda", i_lambda, 0.0, "input"}};
    detail::finish_report(rep);
    return rep;
}

/// Quadrature settings for integrals against the density at theta.
inline QuadratureSpec default_quadrature(const ParametricFamily& fam, std::span<const double> theta) {
    QuadratureSpec q;
    q.domain = fam.quadrature_domain(theta);
    const std::size_t d = fam.dim();
    if (d == 1) {
        q.kind = QuadratureKind::Adaptive;
        q.tolerance = 1e-11;
    } else if (d <= 4) {
        q.kind = QuadratureKind::GaussLegendre;
        q.order = d == 2 ? 96 : d == 3 ? 48 : 28;
        q.tolerance = 1e-6;
    } else {
        q.kind = QuadratureKind::MonteCarlo;
        q.mc_samples = 400000;
        q.tolerance = 1e-3;
    }
    return q;
}

using Weight = std::function<double(std::span<const double>)>;

/// int <h, grad_theta f(z | theta)> weight(z) dz.
inline QuadratureResult grad_integral(const ParametricFamily& fam, std::span<const double> theta,
                                      std::span<const double> h, const Weight& weight,
                                      std::optional<QuadratureSpec> quad = std::nullopt) {
    fam.check_theta(theta);
    if (h.size() != fam.theta_dim())
        throw std::invalid_argument("grad_integral: h has " + std::to_string(h.size()) + " entries, expected " +
                                    std::to_string(fam.theta_dim()));
    const QuadratureSpec spec = quad.value_or(default_quadrature(fam, theta));
    return integrate(
        [&](std::span<const double> z) {
            const double w = weight(z);
            if (w == 0.0) return 0.0;
            const auto g = fam.grad_density(z, theta);
            double s = 0.0;
            for (std::size_t k = 0; k < g.size(); ++k) s += h[k] * g[k];
            return s * w;
        },
        spec);
}

/// Population relative outlyingness R(z) = P(D(X) <= D(z)) for X ~ P_theta.
/// univariate-cdf: R = F. Mahalanobis and halfspace depth are decreasing in
/// the Mahalanobis radius for spherical families, so R is a chi-squared tail.
inline Weight population_outlyingness(const ParametricFamily& fam, std::span<const double> theta, DepthKind kind) {
    const std::vector<double> th(theta.begin(), theta.end());
    if (kind == DepthKind::UnivariateCdf) {
        if (fam.dim() != 1 || !fam.cdf(0.0, theta))
            throw std::invalid_argument("univariate-cdf depth needs a one-dimensional family with a distribution function");
        return [&fam, th](std::span<const double> z) { return *fam.cdf(z[0], th); };
    }
    const auto sph = fam.spherical(theta);
    if (!sph)
        throw std::invalid_argument("closed-form outlyingness for " + to_string(kind) +
                                    " depth needs a spherically symmetric family");
    const boost::math::chi_squared chi(static_cast<double>(fam.dim()));
    return [sph = *sph, chi](std::span<const double> z) {
        double u = 0.0;
        for (std::size_t k = 0; k < z.size(); ++k) u += (z[k] - sph.center[k]) * (z[k] - sph.center[k]);
        u /= sph.sd * sph.sd;
        return boost::math::cdf(boost::math::complement(chi, u));
    };
}

inline VarianceParams depth_variance_params() {
    return VarianceParams::directed_params(0.0, 0.0, 2.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0);
}

/// Depth-graph efficiency in closed form. In the depth graph an edge runs from
/// lower to higher depth, so the in-degree of z scales as 2R(z) and the
/// out-degree as 2(1 - R(z)).
inline EfficiencyReport depth_ae(const ParametricFamily& fam, std::span<const double> theta, std::span<const double> h,
                                 double p, DepthKind kind, std::optional<QuadratureSpec> quad = std::nullopt) {
    const Weight R = population_outlyingness(fam, theta, kind);
    const auto i_down = grad_integral(fam, theta, h, [&](std::span<const double> z) { return 2.0 * R(z); }, quad);
    const auto i_up = grad_integral(fam, theta, h, [&](std::span<const double> z) { return 2.0 * (1.0 - R(z)); }, quad);
    auto rep = ae_directed(depth_variance_params(), i_up.value, i_down.value, p);
    const char* how = quad.value_or(default_quadrature(fam, theta)).kind == QuadratureKind::MonteCarlo ? "monte-carlo"
                                                                                                     : "quadrature";
    rep.integrals = {{"int <h, grad f> lambda_up", i_up.value, i_up.error, how},
                     {"int <h, grad f> lambda_down", i_down.value, i_down.error, how}};
    rep.functional = "depth(" + to_string(kind) + ")";
    rep.family = fam.name();
    rep.theta.assign(theta.begin(), theta.end());
    rep.h.assign(h.begin(), h.end());
    return rep;
}

/// Mann-Whitney test as the univariate-cdf depth test: sqrt(6r) |int <h, grad f> F|.
inline EfficiencyReport mann_whitney_ae(const ParametricFamily& fam, std::span<const double> theta,
                                        std::span<const double> h, double p) {
    if (fam.dim() != 1) throw std::invalid_argument("mann_whitney_ae: family must be univariate");
    auto rep = depth_ae(fam, theta, h, p, DepthKind::UnivariateCdf);
    rep.functional = "mann-whitney";
    return rep;
}

namespace detail {

// Scaled degrees of every vertex of the functional's graph on pts. For depth
// functionals the graph is the tournament ordered by (depth, index) against
// the empirical distribution of pts itself.
inline ScaledDegrees functional_scaled_degrees(const Functional& f, const PointCloud& pts, std::uint64_t seed) {
    const std::size_t n = pts.size();
    if (f.kind != Functional::Kind::Depth) return scaled_degrees(build_graph(f, pts, BuildOptions{false, seed}), n);
    const DepthModel model(f.depth_kind, pts, f.halfspace);
    const auto depth = model.depths(pts);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return std::tie(depth[a], a) < std::tie(depth[b], b); });
    ScaledDegrees out;
    out.directed = true;
    out.up.resize(n);
    out.down.resize(n);
    const double scale = static_cast<double>(n) / (0.5 * static_cast<double>(n) * static_cast<double>(n - 1));
    for (std::size_t rank = 0; rank < n; ++rank) {
        out.down[order[rank]] = scale * static_cast<double>(rank);
        out.up[order[rank]] = scale * static_cast<double>(n - 1 - rank);
    }
    return out;
}

inline GraphStats functional_stats(const Functional& f, const PointCloud& pts, std::uint64_t seed) {
    if (f.kind != Functional::Kind::Depth) return graph_stats(build_graph(f, pts, BuildOptions{false, seed}));
    const std::size_t n = pts.size();
    if (n > 300) return GraphStats::tournament(n);
    DepthScores s;
    s.depth = DepthModel(f.depth_kind, pts, f.halfspace).depths(pts);
    s.labels.assign(n, 1);
    s.n1 = n;
    return graph_stats(depth_graph(s, n));
}

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe m;
    if (xs.empty()) return m;
    for (double x : xs) m.mean += x;
    m.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - m.mean) * (x - m.mean);
        m.se = std::sqrt(ss / static_cast<double>(xs.size() - 1) / static_cast<double>(xs.size()));
    }
    return m;
}

}  // namespace detail

/// Monte Carlo means (with standard errors) of N/e, N|E+|/e^2, N T2/e^2 and
/// friends over reps samples of size n from P_theta.
inline VarianceParams estimate_variance_params(const Functional& f, const ParametricFamily& fam,
                                               std::span<const double> theta, std::size_t n, std::size_t reps,
                                               std::uint64_t seed, unsigned workers = 1) {
    if (n < 2) throw std::invalid_argument("estimate_variance_params: n must be >= 2");
    if (reps < 1) throw std::invalid_argument("estimate_variance_params: reps must be >= 1");
    fam.check_theta(theta);
    const bool directed = f.directed();
    const std::size_t m = directed ? 5 : 2;
    std::vector<std::vector<double>> vals(m, std::vector<double>(reps));
    parallel_for(reps, workers, [&](std::size_t k) {
        RandomSource rng(seed, stream_id(0x76617270, k));
        const PointCloud pts = fam.sample_cloud(rng, theta, n);
        const GraphStats s = detail::functional_stats(f, pts, seed + k);
        const double N = static_cast<double>(n), e = static_cast<double>(s.e_n);
        if (directed) {
            vals[0][k] = N / e;
            vals[1][k] = N * static_cast<double>(s.e_plus) / (e * e);
            vals[2][k] = N * static_cast<double>(s.t2_up) / (e * e);
            vals[3][k] = N * static_cast<double>(s.t2_down) / (e * e);
            vals[4][k] = N * static_cast<double>(s.t2_mixed) / (e * e);
        } else {
            vals[0][k] = N / e;
            vals[1][k] = N * static_cast<double>(s.t2_undirected) / (e * e);
        }
    });
    std::vector<detail::MeanSe> ms;
    for (const auto& v : vals) ms.push_back(detail::mean_se(v));
    VarianceParams out = directed ? VarianceParams::directed_params(ms[0].mean, ms[1].mean, ms[2].mean, ms[3].mean, ms[4].mean)
                                  : VarianceParams::undirected_params(ms[0].mean, ms[1].mean);
    out.provenance = "empirical";
    out.n = n;
    out.reps = reps;
    for (const auto& x : ms) out.std_errors.push_back(x.se);
    return out;
}

struct LambdaEstimate {
    std::vector<double> z;
    double up = 0.0, down = 0.0, lambda = 0.0;  // lambda is the undirected scaled degree
    double up_se = 0.0, down_se = 0.0, lambda_se = 0.0;
};

/// Mean scaled degree of a point z inserted into fresh samples of size n.
inline std::vector<LambdaEstimate> estimate_lambda(const Functional& f, const ParametricFamily& fam,
                                                   std::span<const double> theta,
                                                   const std::vector<std::vector<double>>& grid, std::size_t n,
                                                   std::size_t reps, std::uint64_t seed, unsigned workers = 1) {
    fam.check_theta(theta);
    if (reps < 1) throw std::invalid_argument("estimate_lambda: reps must be >= 1");
    std::vector<LambdaEstimate> out;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        if (grid[g].size() != fam.dim()) throw std::invalid_argument("estimate_lambda: grid point dimension mismatch");
        std::vector<double> up(reps), down(reps), lam(reps);
        parallel_for(reps, workers, [&](std::size_t k) {
            RandomSource rng(seed, stream_id(0x6c616d62, g, k));
            const PointCloud pts = fam.sample_cloud(rng, theta, n).concat(PointCloud(1, fam.dim(), grid[g]));
            const ScaledDegrees sd = detail::functional_scaled_degrees(f, pts, seed + k);
            if (sd.directed) {
                up[k] = sd.up[n];
                down[k] = sd.down[n];
            } else {
                lam[k] = sd.lambda[n];
            }
        });
        LambdaEstimate e;
        e.z = grid[g];
        const auto mu = detail::mean_se(up), md = detail::mean_se(down), ml = detail::mean_se(lam);
        e.up = mu.mean;
        e.up_se = mu.se;
        e.down = md.mean;
        e.down_se = md.se;
        e.lambda = ml.mean;
        e.lambda_se = ml.se;
        out.push_back(std::move(e));
    }
    return out;
}

/// Empirical covariance-condition integrals (1/N) sum_i <h, eta(V_i)> lambda(V_i),
/// averaged over reps. Returns {i_up, i_down} for directed functionals and
/// {i_lambda} for undirected ones, each with a standard error.
inline std::vector<IntegralRecord> estimate_cov_integrals(const Functional& f, const ParametricFamily& fam,
                                                          std::span<const double> theta, std::span<const double> h,
                                                          std::size_t n, std::size_t reps, std::uint64_t seed,
                                                          unsigned workers = 1) {
    fam.check_theta(theta);
    std::vector<double> a(reps), b(reps);
    parallel_for(reps, workers, [&](std::size_t k) {
        RandomSource rng(seed, stream_id(0x636f7669, k));
        const PointCloud pts = fam.sample_cloud(rng, theta, n);
        const ScaledDegrees sd = detail::functional_scaled_degrees(f, pts, seed + k);
        double sa = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const auto eta = fam.score(pts[i], theta);
            double he = 0.0;
            for (std::size_t j = 0; j < eta.size(); ++j) he += h[j] * eta[j];
            if (sd.directed) {
                sa += he * sd.up[i];
                sb += he * sd.down[i];
            } else {
                sa += he * sd.lambda[i];
            }
        }
        a[k] = sa / static_cast<double>(n);
        b[k] = sb / static_cast<double>(n);
    });
    const auto ma = detail::mean_se(a), mb = detail::mean_se(b);
    if (f.directed())
        return {{"int <h, grad f> lambda_up", ma.mean, ma.se, "empirical"},
                {"int <h, grad f> lambda_down", mb.mean, mb.se, "empirical"}};
    return {{"int <h, grad f> lambda", ma.mean, ma.se, "empirical"}};
}

/// Sum over y of log f(y | theta + h / sqrt(N)) - log f(y | theta), in log space.
inline double log_likelihood_ratio(const PointCloud& y, const ParametricFamily& fam, std::span<const double> theta,
                                   std::span<const double> h, std::size_t n_total) {
    fam.check_theta(theta);
    if (h.size() != theta.size()) throw std::invalid_argument("log_likelihood_ratio: h dimension mismatch");
    if (n_total == 0) throw std::invalid_argument("log_likelihood_ratio: N must be positive");
    std::vector<double> alt(theta.begin(), theta.end());
    bool zero = true;
    for (std::size_t k = 0; k < alt.size(); ++k) {
        alt[k] += h[k] / std::sqrt(static_cast<double>(n_total));
        zero = zero && h[k] == 0.0;
    }
    if (zero) return 0.0;
    if (!fam.valid_theta(alt)) throw std::invalid_argument("log_likelihood_ratio: theta + h/sqrt(N) outside the parameter space");
    double s = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) s += fam.log_density(y[j], alt) - fam.log_density(y[j], theta);
    return s;
}

enum class EfficiencyMode { ClosedForm, Empirical };

struct EfficiencyRequest {
    Functional functional = Functional::mst();
    std::vector<double> theta;
    std::vector<double> h;
    double p = 0.5;
    EfficiencyMode mode = EfficiencyMode::ClosedForm;
    std::size_t n = 1000;
    std::size_t reps = 50;
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

/// Full efficiency report for one functional. Closed-form mode uses exact
/// variance parameters where they are known (matching, runs, depth) and
/// quadrature for the integrals; parameters without a closed form (MST in
/// d >= 2, K-NN) are estimated by simulation and marked as such.
inline EfficiencyReport compute_efficiency(const ParametricFamily& fam, const EfficiencyRequest& req) {
    fam.check_theta(req.theta);
    if (req.h.size() != fam.theta_dim())
        throw std::invalid_argument("efficiency: h has " + std::to_string(req.h.size()) + " entries, expected " +
                                    std::to_string(fam.theta_dim()));
    const Functional& f = req.functional;
    EfficiencyReport rep;
    if (req.mode == EfficiencyMode::ClosedForm) {
        if (f.kind == Functional::Kind::Depth) {
            rep = depth_ae(fam, req.theta, req.h, req.p, f.depth_kind);
        } else {
            if (f.kind == Functional::Kind::Path1d && fam.dim() != 1)
                throw std::invalid_argument("runs test needs a one-dimensional family");
            VarianceParams v;
            std::vector<std::string> notes;
            const bool on_line = fam.dim() == 1 && (f.kind == Functional::Kind::Mst || f.kind == Functional::Kind::Path1d);
            if (f.kind == Functional::Kind::Nbm) {
                v = VarianceParams::undirected_params(2.0, 0.0);
            } else if (on_line) {
                v = VarianceParams::undirected_params(1.0, 1.0);
            } else {
                v = estimate_variance_params(f, fam, req.theta, req.n, req.reps, req.seed, req.workers);
                notes.push_back("(gamma0, gamma1) have no closed form for this functional; estimated by simulation");
            }
            // Constant limiting scaled degree lambda = 2, so the integral is
            // 2 * grad(int f) = 0. The quadrature value is kept as a check.
            const auto check = grad_integral(fam, req.theta, req.h, [](std::span<const double>) { return 2.0; });
            rep = ae_undirected(v.gamma0, v.gamma1, 0.0, req.p);
            rep.params = v;
            rep.integrals = {{"int <h, grad f> lambda", 0.0, 0.0, "exact (lambda = 2 is constant)"},
                             {"quadrature check of int <h, grad f> 2", check.value, check.error, "quadrature"}};
            rep.notes = notes;
        }
    } else {
        const VarianceParams v = estimate_variance_params(f, fam, req.theta, req.n, req.reps, req.seed, req.workers);
        const auto ints = estimate_cov_integrals(f, fam, req.theta, req.h, req.n, req.reps, req.seed, req.workers);
        rep = f.directed() ? ae_directed(v, ints[0].value, ints[1].value, req.p)
                           : ae_undirected(v.gamma0, v.gamma1, ints[0].value, req.p);
        rep.params = v;
        rep.integrals = ints;
    }
    rep.functional = f.name();
    rep.family = fam.name();
    rep.theta = req.theta;
    rep.h = req.h;
    return rep;
}

}  // namespace gbt
