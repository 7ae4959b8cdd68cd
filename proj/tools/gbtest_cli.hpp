#pragma once

// Implementation of the gbtest command line. execute() is kept separate from
// main() so the tests can drive it in-process.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gbt/gbt.hpp"

namespace gbt::cli {

enum ExitCode { kOk = 0, kInputError = 1, kDegenerate = 2 };

struct Outputs {
    std::string stdout_text;
    std::map<std::string, std::string> files;  // path -> content
    std::map<std::string, std::string> inputs;  // path -> checksum
    std::uint64_t seed = 0;
    int code = kOk;
};

namespace detail {

inline std::string dump(const Json& j) { return j.dump(2) + "\n"; }

inline Dataset load(const std::string& path, bool header, Outputs& o) {
    const std::string text = gbt::detail::read_file(path);
    o.inputs[path] = checksum(text);
    return parse_csv(text, header, path);
}

inline std::pair<Dataset, Dataset> load_pair(const std::string& x, const std::string& y, const std::string& labeled,
                                             const std::string& label_col, bool header, Outputs& o) {
    if (!labeled.empty()) {
        if (!x.empty() || !y.empty()) throw InputError("--labeled cannot be combined with --x/--y");
        if (label_col.empty()) throw InputError("--labeled requires --label-col");
        const std::string text = gbt::detail::read_file(labeled);
        o.inputs[labeled] = checksum(text);
        return parse_labeled_csv(text, label_col, labeled);
    }
    if (x.empty() || y.empty()) throw InputError("both --x and --y are required (or --labeled with --label-col)");
    auto dx = load(x, header, o);
    auto dy = load(y, header, o);
    if (dx.d() != dy.d())
        throw InputError("--x has " + std::to_string(dx.d()) + " columns but --y has " + std::to_string(dy.d()));
    return {std::move(dx), std::move(dy)};
}

inline Json data_json(const Dataset& d) {
    return Json{{"source", d.source}, {"n", d.n()}, {"d", d.d()}};
}

inline DepthKind parse_depth_kind(const std::string& s) {
    if (s == "hd" || s == "halfspace") return DepthKind::Halfspace;
    if (s == "md" || s == "mahalanobis") return DepthKind::Mahalanobis;
    if (s == "cdf" || s == "univariate-cdf") return DepthKind::UnivariateCdf;
    throw InputError("--kind: unknown depth '" + s + "' (expected hd, md or cdf)");
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    int paren = 0;
    for (char c : s) {
        if (c == '(') ++paren;
        if (c == ')') --paren;
        if (c == ',' && paren == 0) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

inline const CLI::Validator kPositive(
    [](std::string& v) {
        std::size_t x = 0;
        const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || ptr != v.data() + v.size() || x == 0) return "'" + v + "' must be a positive integer";
        return std::string();
    },
    "POSITIVE");

}  // namespace detail

/// Parses and executes one invocation; args excludes the program name.
/// Output is collected rather than printed so manifests can checksum it.
inline Outputs execute(const std::vector<std::string>& args) {
    Outputs o;
    CLI::App app{"Graph- and depth-based two-sample tests", "gbtest"};
    app.require_subcommand(1);
    app.fallthrough();
    unsigned threads = 1;
    std::string manifest_path;
    app.add_option("--threads", threads, "Worker threads (results do not depend on this)")->check(detail::kPositive);
    app.add_option("--manifest", manifest_path, "Write a run manifest to this file");
    app.set_version_flag("--version", kVersion);

    // test ------------------------------------------------------------------
    auto* test = app.add_subcommand("test", "Two-sample test on two CSV files");
    std::string x, y, labeled, label_col, method = "mst", direction;
    std::size_t k = 5, permutations = 0, pca = 0, projections = 500;
    std::uint64_t seed = 0;
    bool json = false, header = false;
    test->add_option("--x", x, "CSV file with the first sample");
    test->add_option("--y", y, "CSV file with the second sample");
    test->add_option("--labeled", labeled, "Single CSV file with a label column");
    test->add_option("--label-col", label_col, "Name of the label column in --labeled");
    test->add_flag("--header", header, "Input files start with a header row");
    test->add_option("--method", method, "mst|knn|nbm|runs|depth-hd|depth-md|depth-cdf")
        ->check(CLI::IsMember({"mst", "knn", "nbm", "runs", "depth-hd", "depth-md", "depth-cdf"}));
    test->add_option("--k", k, "Neighbours for knn")->check(detail::kPositive);
    test->add_option("--permutations", permutations, "Monte Carlo permutations (0: asymptotic only)");
    test->add_option("--direction", direction, "lower|upper|two-sided")
        ->check(CLI::IsMember({"lower", "upper", "two-sided"}));
    test->add_option("--seed", seed, "Random seed");
    test->add_option("--pca", pca, "Project the pooled data on its first INT principal components");
    test->add_option("--halfspace-projections", projections, "Random directions for halfspace depth in d >= 3")
        ->check(detail::kPositive);
    test->add_flag("--json", json, "Emit the full result as JSON");

    // power -----------------------------------------------------------------
    auto* power = app.add_subcommand("power", "Monte Carlo power curve under local alternatives");
    PowerExperimentConfig pc;
    std::string family = "normal-location", tests_list = "mst,depth-hd,hotelling", out_path;
    double delta_max = 3.0;
    std::size_t grid = 20, reps = 1000;
    power->add_option("--family", family)->check(CLI::IsMember({"normal-location", "normal-scale"}));
    power->add_option("--dim", pc.dim)->check(detail::kPositive);
    power->add_option("--n1", pc.n1)->check(detail::kPositive);
    power->add_option("--n2", pc.n2)->check(detail::kPositive);
    power->add_option("--delta-max", delta_max);
    power->add_option("--grid", grid)->check(detail::kPositive);
    power->add_option("--reps", reps)->check(detail::kPositive);
    power->add_option("--alpha", pc.alpha)->check(CLI::Range(0.0, 1.0));
    power->add_option("--tests", tests_list, "Comma-separated: mst, knn(K), nbm, depth-hd, depth-md, hotelling, glr-scale, cov-lr");
    power->add_option("--seed", pc.seed);
    power->add_option("--permutations", pc.permutations, "Permutation calibration for graph tests (0: asymptotic)");
    power->add_option("--k", pc.knn_k)->check(detail::kPositive);
    power->add_option("--halfspace-projections", pc.halfspace.projections)->check(detail::kPositive);
    power->add_option("--out", out_path, "CSV output; the JSON sidecar goes to OUT.json")->required();

    // efficiency ------------------------------------------------------------
    auto* eff = app.add_subcommand("efficiency", "Pitman efficiency under a parametric family");
    eff->set_help_flag("--help", "Print this help message and exit");
    std::vector<double> theta, h;
    std::size_t dim = 0, n = 1000, ereps = 50;
    double p = 0.5;
    std::string mode = "closed-form", emethod = "mst", efamily = "normal-location";
    std::uint64_t eseed = 0;
    eff->add_option("--family", efamily)->check(CLI::IsMember({"normal-location", "normal-scale"}));
    eff->add_option("--dim", dim, "Observation dimension (default: size of --theta for location)");
    eff->add_option("--theta", theta, "Null parameter, comma-separated")->delimiter(',');
    eff->add_option("--h", h, "Local direction, comma-separated")->delimiter(',');
    eff->add_option("--p", p, "Sample proportion n1/N")->check(CLI::Range(0.0, 1.0));
    eff->add_option("--method", emethod)
        ->check(CLI::IsMember({"mst", "knn", "nbm", "runs", "depth-hd", "depth-md", "depth-cdf"}));
    eff->add_option("--k", k)->check(detail::kPositive);
    eff->add_option("--mode", mode)->check(CLI::IsMember({"closed-form", "empirical"}));
    eff->add_option("--n", n)->check(detail::kPositive);
    eff->add_option("--reps", ereps)->check(detail::kPositive);
    eff->add_option("--seed", eseed);

    // depth -----------------------------------------------------------------
    auto* depth = app.add_subcommand("depth", "Depth and relative outlyingness against a reference sample");
    std::string dx, dy, kind = "md";
    bool dheader = false;
    depth->add_option("--x", dx, "Reference sample")->required();
    depth->add_option("--y", dy, "Query points (default: the reference itself)");
    depth->add_option("--kind", kind, "hd|md|cdf");
    depth->add_flag("--header", dheader);
    depth->add_option("--halfspace-projections", projections)->check(detail::kPositive);

    // graph -----------------------------------------------------------------
    auto* graph = app.add_subcommand("graph", "Build a geometric graph and print its edges");
    std::string gx, gy, gmethod = "mst";
    bool gheader = false;
    graph->add_option("--x", gx)->required();
    graph->add_option("--y", gy, "Optional second sample; adds the cross count");
    graph->add_option("--method", gmethod)->check(CLI::IsMember({"mst", "knn", "nbm", "runs"}));
    graph->add_option("--k", k)->check(detail::kPositive);
    graph->add_flag("--header", gheader);

    // replay ----------------------------------------------------------------
    auto* replay = app.add_subcommand("replay", "Re-run a manifest and compare outputs byte for byte");
    std::string replay_path;
    replay->add_option("manifest", replay_path)->required();

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        o.stdout_text = app.help();
        return o;
    } catch (const CLI::CallForAllHelp&) {
        o.stdout_text = app.help("", CLI::AppFormatMode::All);
        return o;
    }

    std::ostringstream out;
    std::optional<PowerCurve> curve;
    if (test->parsed()) {
        auto [X, Y] = detail::load_pair(x, y, labeled, label_col, header, o);
        Json data = Json{{"x", detail::data_json(X)}, {"y", detail::data_json(Y)}};
        if (pca > 0) {
            PointCloud pooled = LabeledSample::pool(X.points, Y.points).points();
            const auto model = fit_pca(pooled, pca);
            X.points = model.project(X.points);
            Y.points = model.project(Y.points);
            data["pca"] = Json{{"components", pca}, {"explained_variance_ratio", model.explained}};
        }
        Functional f = functional_from_method(method, k);
        f.halfspace.projections = projections;
        if (f.kind == Functional::Kind::Path1d && X.d() != 1)
            throw InputError("--method runs needs one-dimensional data (got d=" + std::to_string(X.d()) + "; try --pca 1)");
        TestOptions opt;
        if (!direction.empty()) opt.direction = parse_direction(direction);
        opt.permutations = permutations;
        opt.seed = seed;
        opt.workers = threads;
        const TestResult r = run_test(X.points, Y.points, f, opt);
        o.seed = seed;
        if (json) {
            Json j = to_json(r);
            j["data"] = data;
            out << detail::dump(j);
        } else {
            out << r.functional << ": T=" << r.cross << "/" << r.edges << " (" << r.t << "), E[T]=" << r.null_mean_exact.str();
            if (r.z) out << ", z=" << *r.z << ", p_asymptotic=" << *r.p_asymptotic;
            if (r.p_permutation) out << ", p_permutation=" << *r.p_permutation;
            out << " [" << to_string(r.direction) << "]\n";
            for (const auto& w : r.warnings) out << "warning: " << w << "\n";
        }
        if (r.degenerate) o.code = kDegenerate;
    } else if (power->parsed()) {
        pc.family = family;
        pc.deltas = PowerExperimentConfig::default_grid(delta_max, grid);
        pc.replications = reps;
        pc.tests = detail::split_list(tests_list);
        pc.workers = threads;
        pc.validate();
        curve = run_power_experiment(pc);
        o.files[out_path] = power_curve_csv(*curve);
        o.seed = pc.seed;
        out << "wrote " << curve->cells.size() << " cells to " << out_path << "\n";
        for (const auto& w : curve->warnings) out << "warning: " << w << "\n";
    } else if (eff->parsed()) {
        if (dim == 0) dim = efamily == "normal-location" && !theta.empty() ? theta.size() : 1;
        const auto fam = make_family(efamily, dim);
        if (theta.empty()) theta = efamily == "normal-scale" ? std::vector<double>{1.0} : std::vector<double>(dim, 0.0);
        if (h.empty()) h = std::vector<double>(fam->theta_dim(), 1.0);
        EfficiencyRequest req;
        req.functional = functional_from_method(emethod, k);
        req.theta = theta;
        req.h = h;
        req.p = p;
        req.mode = mode == "empirical" ? EfficiencyMode::Empirical : EfficiencyMode::ClosedForm;
        req.n = n;
        req.reps = ereps;
        req.seed = eseed;
        req.workers = threads;
        const auto rep = compute_efficiency(*fam, req);
        o.seed = eseed;
        out << detail::dump(to_json(rep));
        if (rep.degenerate) o.code = kDegenerate;
    } else if (depth->parsed()) {
        const Dataset ref = detail::load(dx, dheader, o);
        const Dataset qry = dy.empty() ? ref : detail::load(dy, dheader, o);
        if (ref.d() != qry.d()) throw InputError("--x and --y have different numbers of columns");
        HalfspaceOptions hs;
        hs.projections = projections;
        const DepthKind dk = detail::parse_depth_kind(kind);
        const DepthModel model(dk, ref.points, hs);
        std::vector<double> ref_depth(ref.n());
        for (std::size_t i = 0; i < ref.n(); ++i) ref_depth[i] = model.depth(ref.points[i]);
        std::sort(ref_depth.begin(), ref_depth.end());
        Json depths = Json::array(), outl = Json::array();
        double q = 0.0;
        for (std::size_t i = 0; i < qry.n(); ++i) {
            const double dv = model.depth(qry.points[i]);
            const double R = static_cast<double>(std::upper_bound(ref_depth.begin(), ref_depth.end(), dv) - ref_depth.begin()) /
                             static_cast<double>(ref.n());
            depths.push_back(dv);
            outl.push_back(R);
            q += R;
        }
        out << detail::dump(Json{{"kind", to_string(dk)},
                                 {"reference", detail::data_json(ref)},
                                 {"queries", detail::data_json(qry)},
                                 {"depth", depths},
                                 {"outlyingness", outl},
                                 {"liu_singh_q", q / static_cast<double>(qry.n())}});
    } else if (graph->parsed()) {
        const Dataset X = detail::load(gx, gheader, o);
        PointCloud pts = X.points;
        std::vector<int> labels(X.n(), 1);
        if (!gy.empty()) {
            const Dataset Y = detail::load(gy, gheader, o);
            if (Y.d() != X.d()) throw InputError("--x and --y have different numbers of columns");
            pts = LabeledSample::pool(X.points, Y.points).points();
            labels.resize(pts.size(), 2);
        }
        const Functional f = functional_from_method(gmethod, k);
        if (f.kind == Functional::Kind::Path1d && pts.dim() != 1) throw InputError("--method runs needs one-dimensional data");
        const GeometricGraph g = build_graph(f, pts);
        Json edges = Json::array();
        for (const auto& [i, j] : g.edges()) edges.push_back(Json::array({i, j}));
        Json j{{"method", f.name()}, {"n", g.vertex_count()}, {"directed", g.directed()}, {"edge_count", g.edge_count()},
               {"total_length", g.total_length(pts)}};
        if (g.dropped_vertex) j["dropped_vertex"] = *g.dropped_vertex;
        if (!gy.empty()) j["cross"] = cross_count(g, labels);
        j["edges"] = edges;
        out << detail::dump(j);
    } else if (replay->parsed()) {
        const std::string text = gbt::detail::read_file(replay_path);
        RunManifest m;
        try {
            const Json j = Json::parse(text);
            m = RunManifest::from_json(j.contains("manifest") ? j.at("manifest") : j);
        } catch (const Json::parse_error& e) {
            throw InputError(replay_path + ": not valid JSON (" + e.what() + ")");
        }
        for (const auto& [path, sum] : m.inputs)
            if (file_checksum(path) != sum) throw InputError("replay: input '" + path + "' changed since the recorded run");
        const Outputs again = execute(m.args);
        std::vector<std::string> diffs;
        for (const auto& [name, sum] : m.outputs) {
            const std::string now = name == "stdout" ? checksum(again.stdout_text)
                                                     : (again.files.count(name) ? checksum(again.files.at(name)) : "");
            if (now != sum) diffs.push_back(name);
        }
        if (diffs.empty()) {
            out << "replay ok: " << m.outputs.size() << " output(s) reproduced byte for byte\n";
            o.files = again.files;
        } else {
            out << "replay mismatch:";
            for (const auto& d : diffs) out << " " << d;
            out << "\n";
            o.code = kInputError;
        }
        o.stdout_text = out.str();
        return o;
    }
    o.stdout_text = out.str();

    RunManifest m;
    for (const auto* sc : app.get_subcommands()) m.subcommand = sc->get_name();
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--manifest") {
            ++i;
            continue;
        }
        if (args[i].rfind("--manifest=", 0) == 0) continue;
        m.args.push_back(args[i]);
    }
    m.seed = o.seed;
    m.inputs = o.inputs;
    m.outputs["stdout"] = checksum(o.stdout_text);
    for (const auto& [path, content] : o.files) m.outputs[path] = checksum(content);
    m.timestamp = RunManifest::utc_now();
    if (curve) {
        Json side;
        side["config"] = to_json(pc);
        side["curve"] = to_json(*curve);
        side["manifest"] = m.to_json();
        o.files[out_path + ".json"] = detail::dump(side);
    }
    if (!manifest_path.empty()) o.files[manifest_path] = detail::dump(m.to_json());
    return o;
}

}  // namespace gbt::cli
