// Synthetic 48-feature two-class data run through the test suite on the
// first one, two and three principal components and on the raw features.
//
// Usage: pca_pipeline [--n1 N] [--n2 N] [--shift S] [--permutations B] [--seed S]

#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gbt/gbt.hpp"

namespace {

// Rows share a 3-factor structure plus noise. Class 2 moves the second
// factor by `shift` and inflates the third factor's scale.
gbt::PointCloud synth(gbt::RandomSource& rng, std::size_t n, double shift, double scale) {
    constexpr std::size_t d = 48;
    gbt::PointCloud p(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const double f1 = 3.0 * rng.normal(), f2 = 1.5 * rng.normal() + shift, f3 = scale * rng.normal();
        for (std::size_t k = 0; k < d; ++k) {
            const double w = static_cast<double>(k) / (d - 1);
            p.at(i, k) = f1 * (1.0 - w) + f2 * (k % 2 ? 1.0 : -1.0) + f3 * w + 0.5 * rng.normal();
        }
    }
    return p;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace gbt;
    CLI::App app{"PCA pipeline on synthetic 48-feature data"};
    std::size_t n1 = 120, n2 = 80, perms = 499;
    double shift = 0.5;
    std::uint64_t seed = 7;
    app.add_option("--n1", n1);
    app.add_option("--n2", n2);
    app.add_option("--shift", shift);
    app.add_option("--permutations", perms);
    app.add_option("--seed", seed);
    CLI11_PARSE(app, argc, argv);

    RandomSource rng(seed, 0);
    const PointCloud x = synth(rng, n1, 0.0, 1.0), y = synth(rng, n2, shift, 1.4);
    const PointCloud pooled = LabeledSample::pool(x, y).points();

    const std::vector<Functional> tests = {Functional::mst(), Functional::knn(5), Functional::nbm(),
                                           Functional::depth(DepthKind::Halfspace)};
    std::printf("%-6s %8s", "input", "explained");
    for (const auto& f : tests) std::printf(" %16s", f.name().c_str());
    std::printf(" %16s\n", "hotelling");

    for (std::size_t k : {1, 2, 3, 0}) {
        PointCloud px = x, py = y;
        double explained = 1.0;
        if (k > 0) {
            const PcaModel model = fit_pca(pooled, k);
            px = model.project(x);
            py = model.project(y);
            explained = model.explained_total();
        }
        std::printf("%-6s %8.3f", k ? ("PCA" + std::to_string(k)).c_str() : "full", explained);
        for (const auto& f : tests) {
            TestOptions opt;
            opt.permutations = perms;
            opt.seed = seed;
            const auto r = run_test(px, py, f, opt);
            std::printf(" %16.4f", r.p_permutation.value_or(std::numeric_limits<double>::quiet_NaN()));
        }
        std::printf(" %16.4g\n", hotelling_t2(px, py).p_value);
    }
}
