// Prints Pitman efficiencies for a few tests under normal location and scale
// alternatives, next to the parametric benchmark sqrt(pq h' I h).

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "gbt/gbt.hpp"

int main() {
    using namespace gbt;
    struct Row {
        std::string family;
        std::size_t dim;
        std::vector<double> theta, h;
        Functional functional;
        EfficiencyMode mode;
    };
    const std::vector<Row> rows = {
        {"normal-location", 1, {0.0}, {1.0}, Functional::depth(DepthKind::UnivariateCdf), EfficiencyMode::ClosedForm},
        {"normal-location", 1, {0.0}, {1.0}, Functional::path1d(), EfficiencyMode::ClosedForm},
        {"normal-location", 2, {0.0, 0.0}, {1.0, 0.0}, Functional::mst(), EfficiencyMode::Empirical},
        {"normal-location", 2, {0.0, 0.0}, {1.0, 0.0}, Functional::knn(3), EfficiencyMode::Empirical},
        {"normal-scale", 2, {1.0}, {1.0}, Functional::depth(DepthKind::Halfspace), EfficiencyMode::ClosedForm},
        {"normal-scale", 2, {1.0}, {1.0}, Functional::mst(), EfficiencyMode::Empirical},
    };

    std::printf("%-16s %-4s %-22s %-10s %10s %10s\n", "family", "d", "test", "mode", "AE", "benchmark");
    for (const auto& row : rows) {
        const auto fam = make_family(row.family, row.dim);
        EfficiencyRequest req;
        req.functional = row.functional;
        req.theta = row.theta;
        req.h = row.h;
        req.p = 0.5;
        req.mode = row.mode;
        req.n = 800;
        req.reps = 40;
        req.seed = 11;
        const auto rep = compute_efficiency(*fam, req);

        // Noncentrality of the optimal parametric test: sqrt(pq h' I h).
        const Matrix info = *fam->fisher_info(row.theta);
        double quad = 0.0;
        for (std::size_t i = 0; i < row.h.size(); ++i)
            for (std::size_t j = 0; j < row.h.size(); ++j) quad += row.h[i] * info(i, j) * row.h[j];
        const double benchmark = std::sqrt(0.25 * quad);

        std::printf("%-16s %-4zu %-22s %-10s %10s %10.5f\n", row.family.c_str(), row.dim, row.functional.name().c_str(),
                    row.mode == EfficiencyMode::ClosedForm ? "closed" : "empirical",
                    rep.ae ? std::to_string(*rep.ae).c_str() : "degenerate", benchmark);
    }
}
