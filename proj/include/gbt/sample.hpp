#pragma once

// Pooled two-sample data with 1/2 labels, plus a small exact rational type
// for null-mean bookkeeping.

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbt/graph.hpp"

namespace gbt {

/// Reduced fraction of 64-bit integers. Only the operations needed for exact
/// mean checks are provided; intermediate products use 128-bit integers.
struct Rational {
    std::int64_t num = 0;
    std::int64_t den = 1;

    Rational() = default;
    Rational(std::int64_t n, std::int64_t d = 1) {
        if (d == 0) throw std::invalid_argument("Rational: zero denominator");
        if (d < 0) {
            n = -n;
            d = -d;
        }
        const std::int64_t g = std::gcd(n < 0 ? -n : n, d);
        num = g ? n / g : 0;
        den = g ? d / g : 1;
    }

    double value() const noexcept { return static_cast<double>(num) / static_cast<double>(den); }
    std::string str() const { return std::to_string(num) + "/" + std::to_string(den); }

    friend Rational operator+(const Rational& a, const Rational& b) {
        const __int128 n = static_cast<__int128>(a.num) * b.den + static_cast<__int128>(b.num) * a.den;
        const __int128 d = static_cast<__int128>(a.den) * b.den;
        return reduce(n, d);
    }
    friend Rational operator*(const Rational& a, const Rational& b) {
        return reduce(static_cast<__int128>(a.num) * b.num, static_cast<__int128>(a.den) * b.den);
    }
    friend bool operator==(const Rational& a, const Rational& b) { return a.num == b.num && a.den == b.den; }

private:
    static Rational reduce(__int128 n, __int128 d) {
        auto abs128 = [](__int128 v) { return v < 0 ? -v : v; };
        __int128 a = abs128(n), b = abs128(d);
        while (b != 0) {
            const __int128 t = a % b;
            a = b;
            b = t;
        }
        if (a == 0) a = 1;
        n /= a;
        d /= a;
        if (d < 0) {
            n = -n;
            d = -d;
        }
        constexpr __int128 lim = static_cast<__int128>(INT64_MAX);
        if (abs128(n) > lim || d > lim) throw std::overflow_error("Rational: value does not fit in 64 bits");
        Rational r;
        r.num = static_cast<std::int64_t>(n);
        r.den = static_cast<std::int64_t>(d);
        return r;
    }
};

class LabeledSample {
public:
    LabeledSample(PointCloud points, std::vector<int> labels) : points_(std::move(points)), labels_(std::move(labels)) {
        if (labels_.size() != points_.size())
            throw std::invalid_argument("LabeledSample: label count " + std::to_string(labels_.size()) +
                                        " does not match point count " + std::to_string(points_.size()));
        for (int c : labels_) {
            if (c == 1)
                ++n1_;
            else if (c == 2)
                ++n2_;
            else
                throw std::invalid_argument("LabeledSample: labels must be 1 or 2");
        }
        if (n1_ == 0 || n2_ == 0) throw std::invalid_argument("LabeledSample: each sample needs at least one point");
    }

    /// X rows first (label 1), then Y rows (label 2).
    static LabeledSample pool(const PointCloud& x, const PointCloud& y) {
        if (x.dim() != y.dim())
            throw std::invalid_argument("LabeledSample: dimension mismatch (" + std::to_string(x.dim()) + " vs " +
                                        std::to_string(y.dim()) + ")");
        std::vector<int> labels(x.size(), 1);
        labels.resize(x.size() + y.size(), 2);
        return LabeledSample(x.concat(y), std::move(labels));
    }

    const PointCloud& points() const noexcept { return points_; }
    const std::vector<int>& labels() const noexcept { return labels_; }
    std::size_t n() const noexcept { return labels_.size(); }
    std::size_t n1() const noexcept { return n1_; }
    std::size_t n2() const noexcept { return n2_; }

    PointCloud sample(int label) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < labels_.size(); ++i)
            if (labels_[i] == label) idx.push_back(i);
        return points_.subset(idx);
    }

private:
    PointCloud points_;
    std::vector<int> labels_;
    std::size_t n1_ = 0;
    std::size_t n2_ = 0;
};

}  // namespace gbt
