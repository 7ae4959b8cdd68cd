#pragma once

// Numerical integration on boxes and on R^d. Unbounded axes always go through
// the substitution x = center + scale * tan(pi u / 2), u in (-1, 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <queue>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "gbt/matrix.hpp"
#include "gbt/random.hpp"

namespace gbt {

enum class QuadratureKind { GaussLegendre, Adaptive, MonteCarlo };

/// One axis of the integration domain: either [lower, upper] or the whole
/// real line with a centre/scale used by the change of variable.
struct Axis {
    bool bounded = false;
    double lower = 0.0;
    double upper = 0.0;
    double center = 0.0;
    double scale = 1.0;

    static Axis interval(double a, double b) { return {true, a, b, 0.0, 1.0}; }
    static Axis real_line(double center = 0.0, double scale = 1.0) { return {false, 0.0, 0.0, center, scale}; }
};

struct QuadratureSpec {
    QuadratureKind kind = QuadratureKind::Adaptive;
    std::vector<Axis> domain{Axis::real_line()};
    double tolerance = 1e-10;
    int order = 48;                      // fixed-order Gauss-Legendre nodes per axis
    int max_subdivisions = 2000;         // adaptive cells per 1-D integral
    std::uint64_t mc_samples = 200000;   // Monte Carlo draws
    std::uint64_t mc_seed = 0x5eed;

    std::size_t dim() const noexcept { return domain.size(); }
};

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;          // estimated absolute error (standard error for Monte Carlo)
    std::uint64_t evaluations = 0;
};

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_n.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre_rule(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre_rule: order must be >= 1");
    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            const double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = w[n - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
    }
    return {std::move(x), std::move(w)};
}

namespace detail {

// Maps u in the axis' reference interval to x and returns dx/du.
struct AxisMap {
    Axis axis;
    double ref_lo() const { return axis.bounded ? axis.lower : -1.0; }
    double ref_hi() const { return axis.bounded ? axis.upper : 1.0; }
    std::pair<double, double> operator()(double u) const {
        if (axis.bounded) return {u, 1.0};
        const double a = 0.5 * std::numbers::pi * u;
        const double c = std::cos(a);
        return {axis.center + axis.scale * std::tan(a), axis.scale * 0.5 * std::numbers::pi / (c * c)};
    }
};

struct Cell {
    double a, b, value, error;
    bool operator<(const Cell& o) const { return error < o.error; }
};

// Gauss-Kronrod 7/15 on [a, b].
template <class F>
Cell gk15(const F& g, double a, double b) {
    static constexpr double xk[8] = {0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
                                     0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
                                     0.207784955007898468, 0.000000000000000000};
    static constexpr double wk[8] = {0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                                     0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                                     0.204432940075298892, 0.209482141084727828};
    static constexpr double wg[4] = {0.129484966168869693, 0.279705391489276668, 0.381830050505118945,
                                     0.417959183673469388};
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = g(c);
    double k = fc * wk[7], gsum = fc * wg[3];
    for (int j = 0; j < 7; ++j) {
        const double f1 = g(c - h * xk[j]), f2 = g(c + h * xk[j]);
        k += wk[j] * (f1 + f2);
        if (j % 2 == 1) gsum += wg[j / 2] * (f1 + f2);
    }
    return {a, b, k * h, std::abs((k - gsum) * h)};
}

template <class F>
QuadratureResult adaptive_1d(const F& g, double a, double b, double tol, int max_cells) {
    std::priority_queue<Cell> cells;
    Cell first = gk15(g, a, b);
    double value = first.value, error = first.error;
    std::uint64_t evals = 15;
    cells.push(first);
    int count = 1;
    while (error > tol) {
        if (count >= max_cells) {
            std::ostringstream os;
            os << "integrate: adaptive subdivision cap (" << max_cells << " cells) reached; total error estimate "
               << error << ", worst cell [" << cells.top().a << ", " << cells.top().b << "] error "
               << cells.top().error;
            throw NumericError(os.str());
        }
        Cell worst = cells.top();
        cells.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        Cell left = gk15(g, worst.a, mid), right = gk15(g, mid, worst.b);
        evals += 30;
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        cells.push(left);
        cells.push(right);
        ++count;
        if (!(std::abs(mid - worst.a) > 0.0)) break;
    }
    // Re-sum to avoid drift from incremental updates.
    double v = 0.0, e = 0.0;
    while (!cells.empty()) {
        v += cells.top().value;
        e += cells.top().error;
        cells.pop();
    }
    return {v, e, evals};
}

}  // namespace detail

using Integrand = std::function<double(std::span<const double>)>;

/// Integrates f over spec.domain.
///  - GaussLegendre: tensor product of spec.order nodes per axis; the error
///    estimate compares against a half-order rule.
///  - Adaptive: iterated 1-D Gauss-Kronrod with global subdivision; throws
///    NumericError when the cell cap is hit.
///  - MonteCarlo: uniform sampling on boxes, Gaussian importance sampling on
///    unbounded axes; the error is the standard error.
inline QuadratureResult integrate(const Integrand& f, const QuadratureSpec& spec) {
    const std::size_t d = spec.dim();
    if (d == 0) throw std::invalid_argument("integrate: empty domain");
    if (!(spec.tolerance > 0.0)) throw std::invalid_argument("integrate: tolerance must be > 0");
    std::vector<detail::AxisMap> maps;
    for (const Axis& ax : spec.domain) maps.push_back({ax});

    switch (spec.kind) {
        case QuadratureKind::GaussLegendre: {
            auto tensor = [&](int order) {
                const auto [x, w] = gauss_legendre_rule(order);
                std::vector<int> idx(d, 0);
                std::vector<double> point(d);
                double total = 0.0;
                std::uint64_t evals = 0;
                while (true) {
                    double weight = 1.0;
                    for (std::size_t k = 0; k < d; ++k) {
                        const double lo = maps[k].ref_lo(), hi = maps[k].ref_hi();
                        const double u = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x[idx[k]];
                        const auto [xv, jac] = maps[k](u);
                        point[k] = xv;
                        weight *= w[idx[k]] * 0.5 * (hi - lo) * jac;
                    }
                    total += weight * f(point);
                    ++evals;
                    std::size_t k = 0;
                    while (k < d && ++idx[k] == order) idx[k++] = 0;
                    if (k == d) break;
                }
                return std::pair{total, evals};
            };
            const auto [full, n1] = tensor(spec.order);
            const auto [half, n2] = tensor(std::max(1, spec.order / 2));
            return {full, std::abs(full - half), n1 + n2};
        }
        case QuadratureKind::Adaptive: {
            std::uint64_t evals = 0;
            std::vector<double> point(d);
            double worst_error = 0.0;
            std::function<double(std::size_t, double)> level = [&](std::size_t k, double tol) -> double {
                const double lo = maps[k].ref_lo(), hi = maps[k].ref_hi();
                auto g = [&](double u) {
                    const auto [xv, jac] = maps[k](u);
                    point[k] = xv;
                    if (k + 1 == d) {
                        ++evals;
                        return f(point) * jac;
                    }
                    return level(k + 1, tol) * jac;
                };
                const QuadratureResult r = detail::adaptive_1d(g, lo, hi, tol, spec.max_subdivisions);
                if (k == 0) worst_error = r.error;
                return r.value;
            };
            const double v = level(0, spec.tolerance / static_cast<double>(d));
            return {v, worst_error, evals};
        }
        case QuadratureKind::MonteCarlo: {
            RandomSource rng(spec.mc_seed, 0);
            std::vector<double> point(d);
            double mean = 0.0, m2 = 0.0;
            for (std::uint64_t s = 0; s < spec.mc_samples; ++s) {
                double weight = 1.0;
                for (std::size_t k = 0; k < d; ++k) {
                    const Axis& ax = spec.domain[k];
                    if (ax.bounded) {
                        point[k] = ax.lower + (ax.upper - ax.lower) * rng.uniform();
                        weight *= ax.upper - ax.lower;
                    } else {
                        const double z = rng.normal();
                        point[k] = ax.center + ax.scale * z;
                        weight *= ax.scale * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * z * z);
                    }
                }
                const double y = weight * f(point);
                const double delta = y - mean;
                mean += delta / static_cast<double>(s + 1);
                m2 += delta * (y - mean);
            }
            const double n = static_cast<double>(spec.mc_samples);
            return {mean, std::sqrt(m2 / (n - 1.0) / n), spec.mc_samples};
        }
    }
    throw std::invalid_argument("integrate: unknown quadrature kind");
}

/// Convenience overload for scalar integrands on a single axis.
inline QuadratureResult integrate_1d(const std::function<double(double)>& f, Axis axis,
                                     double tolerance = 1e-10, int max_subdivisions = 2000) {
    QuadratureSpec spec;
    spec.domain = {axis};
    spec.tolerance = tolerance;
    spec.max_subdivisions = max_subdivisions;
    return integrate([&](std::span<const double> x) { return f(x[0]); }, spec);
}

}  // namespace gbt
