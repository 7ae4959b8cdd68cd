#pragma once

// Monte Carlo power experiments under local alternatives, the parametric
// baseline tests (Hotelling T^2, scale GLR, covariance LR) and the joint
// simulation of (R, L_N) used to check the limiting covariance.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "gbt/efficiency.hpp"
#include "gbt/families.hpp"
#include "gbt/parallel.hpp"
#include "gbt/twosample.hpp"

namespace gbt {

struct BaselineResult {
    double statistic = 0.0;
    double p_value = 1.0;
    double dof = 0.0;
};

namespace detail {

inline void require_same_dim(const PointCloud& x, const PointCloud& y, const char* who) {
    if (x.dim() != y.dim()) throw std::invalid_argument(std::string(who) + ": samples have different dimensions");
    if (x.size() == 0 || y.size() == 0) throw std::invalid_argument(std::string(who) + ": empty sample");
}

inline double mean_square_norm(const PointCloud& p) {
    double s = 0.0;
    for (double v : p.coordinates()) s += v * v;
    return s / static_cast<double>(p.size());
}

/// Cholesky factor that also rejects numerically singular matrices: a pivot
/// below 1e-12 of the largest diagonal entry counts as zero.
inline Matrix checked_cholesky(const Matrix& m) {
    Matrix l = cholesky(m);
    double dmax = 0.0, pmin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m.rows(); ++i) {
        dmax = std::max(dmax, m(i, i));
        pmin = std::min(pmin, l(i, i) * l(i, i));
    }
    if (!(pmin > 1e-12 * dmax)) throw NumericError("numerically singular (smallest pivot " + std::to_string(pmin) + ")");
    return l;
}

inline double chi2_upper(double stat, double dof) {
    if (!(stat > 0.0)) return 1.0;
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

}  // namespace detail

/// Two-sample Hotelling T^2 with the pooled unbiased covariance, calibrated by
/// F(d, N - d - 1).
inline BaselineResult hotelling_t2(const PointCloud& x, const PointCloud& y) {
    detail::require_same_dim(x, y, "hotelling_t2");
    const std::size_t n1 = x.size(), n2 = y.size(), N = n1 + n2, d = x.dim();
    if (N <= d + 1) throw std::invalid_argument("hotelling_t2: need n1 + n2 > d + 1");
    auto [mx, cx] = mean_and_covariance(x.as_matrix(), false);
    auto [my, cy] = mean_and_covariance(y.as_matrix(), false);
    Matrix s(d, d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
            s(a, b) = (static_cast<double>(n1) * cx(a, b) + static_cast<double>(n2) * cy(a, b)) / static_cast<double>(N - 2);
    Matrix l;
    try {
        l = detail::checked_cholesky(s);
    } catch (const NumericError& e) {
        throw NumericError(std::string("hotelling_t2: singular pooled covariance (") + e.what() + ")");
    }
    std::vector<double> diff(d);
    for (std::size_t k = 0; k < d; ++k) diff[k] = mx[k] - my[k];
    const auto sol = cholesky_solve(l, diff);
    double q = 0.0;
    for (std::size_t k = 0; k < d; ++k) q += diff[k] * sol[k];
    const double dn1 = static_cast<double>(n1), dn2 = static_cast<double>(n2), dN = static_cast<double>(N);
    const double dd = static_cast<double>(d);
    BaselineResult r;
    r.statistic = dn1 * dn2 / dN * q;
    r.dof = dd;
    const double f = r.statistic * (dN - dd - 1.0) / ((dN - 2.0) * dd);
    r.p_value = f > 0.0 ? boost::math::cdf(boost::math::complement(boost::math::fisher_f(dd, dN - dd - 1.0), f)) : 1.0;
    return r;
}

/// Scale GLR statistic N log(mean |z|^2) - N1 log(mean |x|^2) - N2 log(mean |y|^2).
/// The likelihood ratio for the family N(0, sigma^2 I_d) is d times this
/// quantity, which is what gets compared with chi-squared(1).
inline BaselineResult glr_scale_test(const PointCloud& x, const PointCloud& y) {
    detail::require_same_dim(x, y, "glr_scale_test");
    const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size()), N = n1 + n2;
    const double sx = detail::mean_square_norm(x), sy = detail::mean_square_norm(y);
    if (!(sx > 0.0) || !(sy > 0.0)) throw std::invalid_argument("glr_scale_test: a sample has zero norm");
    const double sz = (n1 * sx + n2 * sy) / N;
    BaselineResult r;
    r.statistic = std::max(0.0, N * std::log(sz) - n1 * std::log(sx) - n2 * std::log(sy));
    r.dof = 1.0;
    r.p_value = detail::chi2_upper(static_cast<double>(x.dim()) * r.statistic, 1.0);
    return r;
}

/// Likelihood ratio for equality of two normal covariance matrices,
/// N log|S0| - N1 log|S1| - N2 log|S2| with maximum likelihood estimates;
/// S0 is the pooled within-sample estimate. Calibrated by chi-squared with
/// d(d+1)/2 degrees of freedom.
inline BaselineResult cov_lr_test(const PointCloud& x, const PointCloud& y) {
    detail::require_same_dim(x, y, "cov_lr_test");
    const std::size_t d = x.dim();
    const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size()), N = n1 + n2;
    auto cx = mean_and_covariance(x.as_matrix(), false).second;
    auto cy = mean_and_covariance(y.as_matrix(), false).second;
    Matrix c0(d, d);
    for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) c0(a, b) = (n1 * cx(a, b) + n2 * cy(a, b)) / N;
    auto logdet = [&](const Matrix& m, const char* which) {
        try {
            return cholesky_log_det(detail::checked_cholesky(m));
        } catch (const NumericError&) {
            throw NumericError(std::string("cov_lr_test: singular covariance estimate for ") + which +
                               "; each sample needs more than d points in general position (use a larger n)");
        }
    };
    const double l1 = logdet(cx, "x"), l2 = logdet(cy, "y"), l0 = logdet(c0, "the pooled sample");
    BaselineResult r;
    r.statistic = std::max(0.0, N * l0 - n1 * l1 - n2 * l2);
    r.dof = static_cast<double>(d * (d + 1) / 2);
    r.p_value = detail::chi2_upper(r.statistic, r.dof);
    return r;
}

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov helpers

/// P(K > lambda) for the Kolmogorov distribution.
inline double kolmogorov_survival(double lambda) {
    if (!(lambda > 0.0)) return 1.0;
    if (lambda < 1.0) {
        // Jacobi theta form converges quickly for small lambda.
        const double pi2 = std::numbers::pi * std::numbers::pi;
        double s = 0.0;
        for (int k = 1; k <= 50; ++k) {
            const double m = 2.0 * k - 1.0;
            s += std::exp(-m * m * pi2 / (8.0 * lambda * lambda));
        }
        return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double t = std::exp(-2.0 * k * k * lambda * lambda);
        s += (k % 2 == 1 ? 2.0 : -2.0) * t;
        if (t < 1e-17) break;
    }
    return std::clamp(s, 0.0, 1.0);
}

/// sup |F_n - F| for a continuous reference distribution function.
template <class Cdf>
double ks_distance(std::vector<double> sample, Cdf&& cdf) {
    if (sample.empty()) throw std::invalid_argument("ks_distance: empty sample");
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double f = cdf(sample[i]);
        d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
    }
    return d;
}

struct KsResult {
    double distance = 0.0;
    double p_value = 1.0;
};

/// Two-sample KS distance with the asymptotic p-value (Stephens' correction).
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] == v) ++i;
        while (j < b.size() && b[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_survival((ne + 0.12 + 0.11 / ne) * d)};
}

/// Exact binomial band [lo, hi] on the rejection fraction with the given
/// two-sided coverage, for `reps` trials at rate alpha.
inline std::pair<double, double> binomial_band(std::size_t reps, double alpha, double coverage = 0.99) {
    const boost::math::binomial_distribution<> b(static_cast<double>(reps), alpha);
    const double tail = (1.0 - coverage) / 2.0;
    const double lo = std::floor(boost::math::quantile(b, tail));
    const double hi = std::ceil(boost::math::quantile(boost::math::complement(b, tail)));
    return {lo / static_cast<double>(reps), hi / static_cast<double>(reps)};
}

// ---------------------------------------------------------------------------
// Power experiments

struct PowerTestSpec {
    enum class Kind { Graph, Hotelling, GlrScale, CovLr };
    Kind kind = Kind::Graph;
    Functional functional;
    std::string name;
};

/// Accepts mst, knn, knn(K), nbm, runs, depth-hd, depth-md, depth-cdf,
/// hotelling, glr-scale, cov-lr.
inline PowerTestSpec parse_power_test(const std::string& s, std::size_t default_k = 5) {
    if (s == "hotelling") return {PowerTestSpec::Kind::Hotelling, {}, s};
    if (s == "glr-scale") return {PowerTestSpec::Kind::GlrScale, {}, s};
    if (s == "cov-lr") return {PowerTestSpec::Kind::CovLr, {}, s};
    std::string method = s;
    std::size_t k = default_k;
    if (s.rfind("knn(", 0) == 0 && s.back() == ')') {
        const std::string inner = s.substr(4, s.size() - 5);
        std::size_t val = 0;
        const auto [ptr, ec] = std::from_chars(inner.data(), inner.data() + inner.size(), val);
        if (ec != std::errc() || ptr != inner.data() + inner.size() || val == 0)
            throw std::invalid_argument("invalid test '" + s + "': k must be a positive integer");
        method = "knn";
        k = val;
    }
    const Functional f = functional_from_method(method, k);
    return {PowerTestSpec::Kind::Graph, f, method == "depth-hd" || method == "depth-md" || method == "depth-cdf" ? method : f.name()};
}

struct PowerExperimentConfig {
    std::string family = "normal-location";
    std::size_t dim = 4;
    std::vector<double> theta1;  // empty: the family default (0 for location, 1 for scale)
    std::vector<double> h;       // empty: all ones
    std::vector<double> deltas = default_grid();
    std::size_t n1 = 1125;
    std::size_t n2 = 375;
    std::size_t replications = 1000;
    double alpha = 0.05;
    std::vector<std::string> tests = {"mst", "depth-hd", "hotelling"};
    std::uint64_t seed = 0;
    std::size_t permutations = 0;  // 0: asymptotic calibration for graph tests
    bool local = true;             // false: fixed alternatives theta1 + delta h
    std::size_t knn_k = 5;
    HalfspaceOptions halfspace{};
    unsigned workers = 1;

    static std::vector<double> default_grid(double delta_max = 3.0, std::size_t points = 20) {
        if (points == 0) throw std::invalid_argument("delta grid needs at least one point");
        std::vector<double> g(points);
        for (std::size_t i = 0; i < points; ++i)
            g[i] = points == 1 ? delta_max : delta_max * static_cast<double>(i) / static_cast<double>(points - 1);
        return g;
    }

    std::vector<double> resolved_theta1(const ParametricFamily& fam) const {
        if (!theta1.empty()) return theta1;
        return fam.name() == "normal-scale" ? std::vector<double>{1.0} : std::vector<double>(fam.theta_dim(), 0.0);
    }
    std::vector<double> resolved_h(const ParametricFamily& fam) const {
        return h.empty() ? std::vector<double>(fam.theta_dim(), 1.0) : h;
    }

    void validate() const {
        if (deltas.empty()) throw std::invalid_argument("power: delta grid is empty");
        if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("power: alpha must lie in (0, 1)");
        if (replications == 0) throw std::invalid_argument("power: replications must be >= 1");
        if (n1 == 0 || n2 == 0) throw std::invalid_argument("power: n1 and n2 must be positive");
        if (tests.empty()) throw std::invalid_argument("power: no tests configured");
        for (const auto& t : tests) parse_power_test(t, knn_k);
    }
};

struct PowerCell {
    std::string test;
    double delta = 0.0;
    double power = 0.0;
    double se = 0.0;
    double mean_stat = 0.0;
    double mean_p = 0.0;
    std::size_t valid = 0;   // replicates with a usable p-value
    std::size_t failed = 0;  // replicates recorded as NaN
};

struct PowerCurve {
    std::vector<PowerCell> cells;  // test-major, then delta order
    std::vector<std::string> warnings;

    const PowerCell& at(const std::string& test, std::size_t delta_index, std::size_t n_deltas) const {
        for (std::size_t i = 0; i < cells.size(); i += n_deltas)
            if (cells[i].test == test) return cells[i + delta_index];
        throw std::out_of_range("PowerCurve: no test named '" + test + "'");
    }
    std::vector<PowerCell> for_test(const std::string& test) const {
        std::vector<PowerCell> out;
        for (const auto& c : cells)
            if (c.test == test) out.push_back(c);
        return out;
    }
};

/// Shortest round-trip decimal form; "nan" for NaN.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string power_curve_csv(const PowerCurve& c) {
    std::ostringstream os;
    os << "test,delta,power,se,mean_stat,mean_p\n";
    for (const auto& cell : c.cells)
        os << cell.test << ',' << format_double(cell.delta) << ',' << format_double(cell.power) << ','
           << format_double(cell.se) << ',' << format_double(cell.mean_stat) << ',' << format_double(cell.mean_p) << '\n';
    return os.str();
}

namespace detail {

struct Outcome {
    double stat = std::numeric_limits<double>::quiet_NaN();
    double p = std::numeric_limits<double>::quiet_NaN();
};

inline Outcome run_power_test(const PowerTestSpec& t, const PointCloud& x, const PointCloud& y,
                              const PowerExperimentConfig& cfg, std::uint64_t perm_seed) {
    Outcome o;
    try {
        switch (t.kind) {
            case PowerTestSpec::Kind::Hotelling: {
                const auto r = hotelling_t2(x, y);
                return {r.statistic, r.p_value};
            }
            case PowerTestSpec::Kind::GlrScale: {
                const auto r = glr_scale_test(x, y);
                return {r.statistic, r.p_value};
            }
            case PowerTestSpec::Kind::CovLr: {
                const auto r = cov_lr_test(x, y);
                return {r.statistic, r.p_value};
            }
            case PowerTestSpec::Kind::Graph: {
                Functional f = t.functional;
                f.halfspace = cfg.halfspace;
                TestOptions opt;
                opt.permutations = cfg.permutations;
                opt.seed = perm_seed;
                const auto r = run_test(x, y, f, opt);
                o.stat = r.t;
                if (cfg.permutations > 0 && r.p_permutation) o.p = *r.p_permutation;
                else if (r.p_asymptotic) o.p = *r.p_asymptotic;
                return o;
            }
        }
    } catch (const std::exception&) {
        // Recorded as a NaN cell.
    }
    return o;
}

}  // namespace detail

/// Power sweep. Replicate k at grid point g draws from stream (g, k) of the
/// seed, so the curve is identical for any worker count.
inline PowerCurve run_power_experiment(const PowerExperimentConfig& cfg) {
    cfg.validate();
    const auto fam = make_family(cfg.family, cfg.dim);
    const auto theta1 = cfg.resolved_theta1(*fam);
    const auto h = cfg.resolved_h(*fam);
    fam->check_theta(theta1);
    if (h.size() != theta1.size()) throw std::invalid_argument("power: h has the wrong dimension");

    std::vector<PowerTestSpec> tests;
    for (const auto& t : cfg.tests) tests.push_back(parse_power_test(t, cfg.knn_k));
    const std::size_t G = cfg.deltas.size(), R = cfg.replications, T = tests.size();
    const double scale = cfg.local ? 1.0 / std::sqrt(static_cast<double>(cfg.n1 + cfg.n2)) : 1.0;

    std::vector<detail::Outcome> out(G * R * T);
    std::vector<std::string> bad_theta(G);
    parallel_for(G * R, cfg.workers, [&](std::size_t task) {
        const std::size_t g = task / R, k = task % R;
        std::vector<double> theta2 = theta1;
        for (std::size_t i = 0; i < theta2.size(); ++i) theta2[i] += cfg.deltas[g] * h[i] * scale;
        if (!fam->valid_theta(theta2)) {
            bad_theta[g] = "alternative parameter outside the parameter space at delta=" + format_double(cfg.deltas[g]);
            return;
        }
        RandomSource rng(cfg.seed, stream_id(0x706f7772, g, k));
        const PointCloud x = fam->sample_cloud(rng, theta1, cfg.n1);
        const PointCloud y = fam->sample_cloud(rng, theta2, cfg.n2);
        for (std::size_t t = 0; t < T; ++t)
            out[(g * R + k) * T + t] = detail::run_power_test(tests[t], x, y, cfg, stream_id(cfg.seed, g, k));
    });

    PowerCurve curve;
    for (const auto& w : bad_theta)
        if (!w.empty()) curve.warnings.push_back(w);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t g = 0; g < G; ++g) {
            PowerCell c;
            c.test = tests[t].name;
            c.delta = cfg.deltas[g];
            std::size_t rejections = 0;
            double sum_stat = 0.0, sum_p = 0.0;
            for (std::size_t k = 0; k < R; ++k) {
                const auto& o = out[(g * R + k) * T + t];
                if (std::isnan(o.p)) {
                    ++c.failed;
                    continue;
                }
                ++c.valid;
                sum_stat += o.stat;
                sum_p += o.p;
                if (o.p <= cfg.alpha) ++rejections;
            }
            if (c.valid == 0) {
                c.power = c.se = c.mean_stat = c.mean_p = std::numeric_limits<double>::quiet_NaN();
            } else {
                const double v = static_cast<double>(c.valid);
                c.power = static_cast<double>(rejections) / v;
                c.se = std::sqrt(c.power * (1.0 - c.power) / v);
                c.mean_stat = sum_stat / v;
                c.mean_p = sum_p / v;
            }
            if (c.failed > 0)
                curve.warnings.push_back(c.test + " at delta=" + format_double(c.delta) + ": " + std::to_string(c.failed) +
                                         " of " + std::to_string(R) + " replicates produced no p-value");
            curve.cells.push_back(std::move(c));
        }
    }
    return curve;
}

// ---------------------------------------------------------------------------
// Joint simulation of the centred statistic and the log-likelihood ratio

struct LeCamConfig {
    Functional functional = Functional::mst();
    std::vector<double> theta1;
    std::vector<double> h;
    double p = 0.5;
    std::size_t n = 1000;  // pooled size N
    std::size_t reps = 500;
    std::uint64_t seed = 0;
    double alpha = 0.05;
    std::optional<Direction> direction;
    unsigned workers = 1;
};

struct Estimate {
    double value = 0.0;
    double se = 0.0;
};

struct LeCamReport {
    std::size_t n1 = 0, n2 = 0, reps = 0;
    Estimate cov_r_l;            // null covariance of (R, L_N)
    Estimate mean_r_null;
    Estimate var_r_null;
    Estimate mean_l_null;
    Estimate mean_r_alt;         // R under theta1 + h / sqrt(N)
    Estimate power_alt;          // rejection rate at alpha under the alternative
    double sigma12 = 0.0;        // closed-form limit
    double sigma1_sq = 0.0;      // mean of the per-replicate sigma1^2
    std::optional<double> ae;
    std::optional<double> predicted_power;
    std::vector<std::string> notes;
};

namespace detail {

inline Estimate mean_estimate(const std::vector<double>& v) {
    const double n = static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += x;
    const double m = s / n;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return {m, n > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0};
}

}  // namespace detail

inline LeCamReport lecam_joint_check(const ParametricFamily& fam, const LeCamConfig& cfg) {
    fam.check_theta(cfg.theta1);
    if (cfg.h.size() != cfg.theta1.size()) throw std::invalid_argument("lecam_joint_check: h has the wrong dimension");
    if (!(cfg.p > 0.0 && cfg.p < 1.0)) throw std::invalid_argument("lecam_joint_check: p must lie in (0, 1)");
    if (cfg.reps < 2) throw std::invalid_argument("lecam_joint_check: need at least two replicates");
    LeCamReport rep;
    rep.n1 = static_cast<std::size_t>(std::llround(cfg.p * static_cast<double>(cfg.n)));
    if (rep.n1 == 0 || rep.n1 >= cfg.n) throw std::invalid_argument("lecam_joint_check: n too small for this p");
    rep.n2 = cfg.n - rep.n1;
    rep.reps = cfg.reps;
    const double root_n = std::sqrt(static_cast<double>(cfg.n));
    std::vector<double> theta2 = cfg.theta1;
    for (std::size_t i = 0; i < theta2.size(); ++i) theta2[i] += cfg.h[i] / root_n;
    fam.check_theta(theta2);
    const Direction dir = cfg.direction.value_or(cfg.functional.default_direction());

    std::vector<double> r0(cfg.reps), l0(cfg.reps), r1(cfg.reps), s1(cfg.reps), rej(cfg.reps);
    parallel_for(cfg.reps, cfg.workers, [&](std::size_t k) {
        TestOptions opt;
        opt.direction = dir;
        {
            RandomSource rng(cfg.seed, stream_id(0x6c65636d, 0, k));
            const PointCloud x = fam.sample_cloud(rng, cfg.theta1, rep.n1);
            const PointCloud y = fam.sample_cloud(rng, cfg.theta1, rep.n2);
            const auto res = run_test(x, y, cfg.functional, opt);
            r0[k] = res.r_centered;
            s1[k] = res.sigma1_sq;
            l0[k] = log_likelihood_ratio(y, fam, cfg.theta1, cfg.h, cfg.n);
        }
        {
            RandomSource rng(cfg.seed, stream_id(0x6c65636d, 1, k));
            const PointCloud x = fam.sample_cloud(rng, cfg.theta1, rep.n1);
            const PointCloud y = fam.sample_cloud(rng, theta2, rep.n2);
            const auto res = run_test(x, y, cfg.functional, opt);
            r1[k] = res.r_centered;
            rej[k] = res.p_asymptotic && *res.p_asymptotic <= cfg.alpha ? 1.0 : 0.0;
        }
    });

    rep.mean_r_null = detail::mean_estimate(r0);
    rep.mean_l_null = detail::mean_estimate(l0);
    std::vector<double> prod(cfg.reps), sq(cfg.reps);
    for (std::size_t k = 0; k < cfg.reps; ++k) {
        prod[k] = (r0[k] - rep.mean_r_null.value) * (l0[k] - rep.mean_l_null.value);
        sq[k] = (r0[k] - rep.mean_r_null.value) * (r0[k] - rep.mean_r_null.value);
    }
    rep.cov_r_l = detail::mean_estimate(prod);
    rep.var_r_null = detail::mean_estimate(sq);
    rep.mean_r_alt = detail::mean_estimate(r1);
    rep.power_alt = detail::mean_estimate(rej);
    rep.sigma1_sq = detail::mean_estimate(s1).value;

    EfficiencyRequest req;
    req.functional = cfg.functional;
    req.theta = cfg.theta1;
    req.h = cfg.h;
    req.p = static_cast<double>(rep.n1) / static_cast<double>(cfg.n);
    req.n = std::min<std::size_t>(cfg.n, 1000);
    req.reps = 20;
    req.seed = cfg.seed;
    req.workers = cfg.workers;
    const auto eff = compute_efficiency(fam, req);
    rep.sigma12 = eff.sigma12;
    rep.ae = eff.ae;
    for (const auto& n : eff.notes) rep.notes.push_back(n);
    if (eff.ae) {
        const double z = normal_quantile(1.0 - (dir == Direction::TwoSided ? cfg.alpha / 2.0 : cfg.alpha));
        const bool aligned = dir == Direction::TwoSided || (dir == Direction::Upper) == (eff.sigma12 >= 0.0);
        const double shift = aligned ? *eff.ae : -*eff.ae;
        rep.predicted_power = normal_cdf(-z + shift);
        if (dir == Direction::TwoSided) *rep.predicted_power += normal_cdf(-z - shift);
    }
    return rep;
}

}  // namespace gbt
