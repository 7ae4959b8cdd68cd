#pragma once

// Parametric families: density, gradient of the density in theta, score,
// Fisher information and sampling. Two families ship; others can be added by
// deriving from ParametricFamily.

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbt/graph.hpp"
#include "gbt/matrix.hpp"
#include "gbt/quadrature.hpp"
#include "gbt/random.hpp"

namespace gbt {

class ParametricFamily {
public:
    virtual ~ParametricFamily() = default;

    virtual std::string name() const = 0;
    /// Dimension of the observations.
    virtual std::size_t dim() const = 0;
    /// Dimension of theta.
    virtual std::size_t theta_dim() const = 0;
    virtual bool valid_theta(std::span<const double> theta) const = 0;

    virtual double log_density(std::span<const double> x, std::span<const double> theta) const = 0;
    /// Score eta(x, theta) = grad_theta f / f.
    virtual std::vector<double> score(std::span<const double> x, std::span<const double> theta) const = 0;
    virtual void sample(RandomSource& rng, std::span<const double> theta, std::span<double> out) const = 0;

    /// Closed-form Fisher information when known.
    virtual std::optional<Matrix> fisher_info(std::span<const double> /*theta*/) const { return std::nullopt; }
    /// Distribution function, for univariate families only.
    virtual std::optional<double> cdf(double /*x*/, std::span<const double> /*theta*/) const { return std::nullopt; }
    /// For spherically symmetric families: centre and per-axis standard
    /// deviation, so that ||X - centre||^2 / sd^2 is chi-squared with dim()
    /// degrees of freedom.
    struct Spherical {
        std::vector<double> center;
        double sd = 1.0;
    };
    virtual std::optional<Spherical> spherical(std::span<const double> /*theta*/) const { return std::nullopt; }
    /// Per-axis integration domain suited to the density at theta.
    virtual std::vector<Axis> quadrature_domain(std::span<const double> theta) const = 0;

    double density(std::span<const double> x, std::span<const double> theta) const {
        return std::exp(log_density(x, theta));
    }

    std::vector<double> grad_density(std::span<const double> x, std::span<const double> theta) const {
        const double f = density(x, theta);
        auto g = score(x, theta);
        for (double& v : g) v *= f;
        return g;
    }

    PointCloud sample_cloud(RandomSource& rng, std::span<const double> theta, std::size_t n) const {
        check_theta(theta);
        PointCloud p(n, dim());
        for (std::size_t i = 0; i < n; ++i) sample(rng, theta, p[i]);
        return p;
    }

    void check_theta(std::span<const double> theta) const {
        if (theta.size() != theta_dim())
            throw std::invalid_argument(name() + ": theta has " + std::to_string(theta.size()) + " entries, expected " +
                                        std::to_string(theta_dim()));
        if (!valid_theta(theta)) throw std::invalid_argument(name() + ": theta outside the parameter space");
    }
};

/// N(theta, I_d), theta in R^d.
class NormalLocation final : public ParametricFamily {
public:
    explicit NormalLocation(std::size_t d) : d_(d) {
        if (d == 0) throw std::invalid_argument("normal-location: dimension must be >= 1");
    }
    std::string name() const override { return "normal-location"; }
    std::size_t dim() const override { return d_; }
    std::size_t theta_dim() const override { return d_; }
    bool valid_theta(std::span<const double> theta) const override {
        for (double t : theta)
            if (!std::isfinite(t)) return false;
        return true;
    }
    double log_density(std::span<const double> x, std::span<const double> theta) const override {
        double q = 0.0;
        for (std::size_t k = 0; k < d_; ++k) q += (x[k] - theta[k]) * (x[k] - theta[k]);
        return -0.5 * q - 0.5 * static_cast<double>(d_) * std::log(2.0 * std::numbers::pi);
    }
    std::vector<double> score(std::span<const double> x, std::span<const double> theta) const override {
        std::vector<double> s(d_);
        for (std::size_t k = 0; k < d_; ++k) s[k] = x[k] - theta[k];
        return s;
    }
    void sample(RandomSource& rng, std::span<const double> theta, std::span<double> out) const override {
        for (std::size_t k = 0; k < d_; ++k) out[k] = theta[k] + rng.normal();
    }
    std::optional<Matrix> fisher_info(std::span<const double>) const override { return Matrix::identity(d_); }
    std::optional<double> cdf(double x, std::span<const double> theta) const override {
        if (d_ != 1) return std::nullopt;
        return 0.5 * std::erfc(-(x - theta[0]) / std::numbers::sqrt2);
    }
    std::optional<Spherical> spherical(std::span<const double> theta) const override {
        return Spherical{{theta.begin(), theta.end()}, 1.0};
    }
    std::vector<Axis> quadrature_domain(std::span<const double> theta) const override {
        std::vector<Axis> ax;
        for (std::size_t k = 0; k < d_; ++k) ax.push_back(Axis::real_line(theta[k], 2.0));
        return ax;
    }

private:
    std::size_t d_;
};

/// N(0, sigma^2 I_d), theta = sigma > 0.
class NormalScale final : public ParametricFamily {
public:
    explicit NormalScale(std::size_t d) : d_(d) {
        if (d == 0) throw std::invalid_argument("normal-scale: dimension must be >= 1");
    }
    std::string name() const override { return "normal-scale"; }
    std::size_t dim() const override { return d_; }
    std::size_t theta_dim() const override { return 1; }
    bool valid_theta(std::span<const double> theta) const override { return theta.size() == 1 && theta[0] > 0.0 && std::isfinite(theta[0]); }
    double log_density(std::span<const double> x, std::span<const double> theta) const override {
        const double s = theta[0];
        double q = 0.0;
        for (std::size_t k = 0; k < d_; ++k) q += x[k] * x[k];
        const double dd = static_cast<double>(d_);
        return -dd * std::log(s) - 0.5 * q / (s * s) - 0.5 * dd * std::log(2.0 * std::numbers::pi);
    }
    std::vector<double> score(std::span<const double> x, std::span<const double> theta) const override {
        const double s = theta[0];
        double q = 0.0;
        for (std::size_t k = 0; k < d_; ++k) q += x[k] * x[k];
        return {-static_cast<double>(d_) / s + q / (s * s * s)};
    }
    void sample(RandomSource& rng, std::span<const double> theta, std::span<double> out) const override {
        for (std::size_t k = 0; k < d_; ++k) out[k] = theta[0] * rng.normal();
    }
    std::optional<Matrix> fisher_info(std::span<const double> theta) const override {
        return Matrix{{2.0 * static_cast<double>(d_) / (theta[0] * theta[0])}};
    }
    std::optional<double> cdf(double x, std::span<const double> theta) const override {
        if (d_ != 1) return std::nullopt;
        return 0.5 * std::erfc(-x / (theta[0] * std::numbers::sqrt2));
    }
    std::optional<Spherical> spherical(std::span<const double> theta) const override {
        return Spherical{std::vector<double>(d_, 0.0), theta[0]};
    }
    std::vector<Axis> quadrature_domain(std::span<const double> theta) const override {
        return std::vector<Axis>(d_, Axis::real_line(0.0, 2.0 * theta[0]));
    }

private:
    std::size_t d_;
};

inline std::unique_ptr<ParametricFamily> make_family(const std::string& name, std::size_t d) {
    if (name == "normal-location") return std::make_unique<NormalLocation>(d);
    if (name == "normal-scale") return std::make_unique<NormalScale>(d);
    throw std::invalid_argument("unknown family '" + name + "' (expected normal-location or normal-scale)");
}

/// Monte Carlo covariance of the score, with the standard error of each entry.
struct FisherEstimate {
    Matrix info;
    Matrix std_error;
};

inline FisherEstimate fisher_info_monte_carlo(const ParametricFamily& fam, std::span<const double> theta,
                                              std::size_t samples, std::uint64_t seed) {
    fam.check_theta(theta);
    const std::size_t p = fam.theta_dim();
    RandomSource rng(seed, stream_id(0x66697368, p));
    std::vector<double> x(fam.dim());
    Matrix s1(p, p), s2(p, p);
    std::vector<double> mean(p, 0.0);
    std::vector<std::vector<double>> scores;
    scores.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) {
        fam.sample(rng, theta, x);
        scores.push_back(fam.score(x, theta));
        for (std::size_t a = 0; a < p; ++a) mean[a] += scores.back()[a];
    }
    for (double& m : mean) m /= static_cast<double>(samples);
    for (const auto& s : scores)
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b) {
                const double v = (s[a] - mean[a]) * (s[b] - mean[b]);
                s1(a, b) += v;
                s2(a, b) += v * v;
            }
    FisherEstimate out{Matrix(p, p), Matrix(p, p)};
    const double n = static_cast<double>(samples);
    for (std::size_t a = 0; a < p; ++a)
        for (std::size_t b = 0; b < p; ++b) {
            const double m = s1(a, b) / n;
            out.info(a, b) = s1(a, b) / (n - 1.0);
            out.std_error(a, b) = std::sqrt(std::max(s2(a, b) / n - m * m, 0.0) / n);
        }
    return out;
}

}  // namespace gbt
