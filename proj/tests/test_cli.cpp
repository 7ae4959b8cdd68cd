#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "gbtest_cli.hpp"

using namespace gbt;
using gbt::cli::execute;

namespace {

namespace fs = std::filesystem;

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("gbtest_cli_" + std::to_string(::getpid()) + "_" +
                                           ::testing::UnitTest::GetInstance()->current_test_info()->name());
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string file(const std::string& name, const std::string& content) {
        const auto p = (dir_ / name).string();
        std::ofstream(p) << content;
        return p;
    }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    static std::string gaussian_csv(std::uint64_t seed, std::size_t n, std::size_t d, double shift) {
        RandomSource rng(seed, 0);
        std::ostringstream os;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < d; ++k) os << shift + rng.normal() << (k + 1 == d ? '\n' : ',');
        return os.str();
    }

    fs::path dir_;
};

}  // namespace

TEST_F(Cli, RunsStatisticOnSortedValues) {
    const auto x = file("x.csv", "1\n2\n"), y = file("y.csv", "3\n4\n");
    const auto o = execute({"test", "--x", x, "--y", y, "--method", "runs", "--json"});
    EXPECT_EQ(o.code, 0);
    const auto j = Json::parse(o.stdout_text);
    EXPECT_DOUBLE_EQ(j["t"].get<double>(), 1.0 / 3.0);
    EXPECT_EQ(j["data"]["x"]["n"], 2);
}

TEST_F(Cli, CrossMatchPermutationMatchesEnumeration) {
    const auto x = file("x.csv", "0\n1\n"), y = file("y.csv", "10\n11\n");
    const auto o = execute({"test", "--x", x, "--y", y, "--method", "nbm", "--permutations", "9999", "--seed", "3", "--json"});
    const auto j = Json::parse(o.stdout_text);
    EXPECT_EQ(j["cross"], 0);
    EXPECT_NEAR(j["p_permutation"].get<double>(), 1.0 / 3.0, 0.02);
}

TEST_F(Cli, SeparatedGaussiansWithMst) {
    const auto x = file("x.csv", gaussian_csv(1, 100, 3, 0.0)), y = file("y.csv", gaussian_csv(2, 100, 3, 3.0));
    const auto o = execute({"test", "--x", x, "--y", y, "--method", "mst", "--json"});
    EXPECT_LT(Json::parse(o.stdout_text)["p_asymptotic"].get<double>(), 0.001);
}

TEST_F(Cli, DegenerateVarianceExitsWithTwo) {
    const auto x = file("x.csv", gaussian_csv(3, 20, 2, 0.0)), y = file("y.csv", gaussian_csv(4, 20, 2, 0.0));
    const auto o = execute({"test", "--x", x, "--y", y, "--method", "knn", "--k", "39", "--json"});
    EXPECT_EQ(o.code, 2);
    const auto j = Json::parse(o.stdout_text);
    EXPECT_TRUE(j["degenerate"].get<bool>());
    EXPECT_TRUE(j["p_asymptotic"].is_null());
    EXPECT_FALSE(j["warnings"].empty());
}

TEST_F(Cli, InputErrorsNameTheFlag) {
    const auto x = file("x.csv", "1,2\n3,NaN\n"), y = file("y.csv", "1,2\n");
    try {
        execute({"test", "--x", x, "--y", y});
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("row 2, column 2"), std::string::npos);
    }
    EXPECT_THROW(execute({"test", "--x", y, "--y", y, "--method", "wilcoxon"}), CLI::ValidationError);
    EXPECT_THROW(execute({"power", "--reps", "0", "--out", path("p.csv")}), CLI::ValidationError);
    try {
        execute({"test", "--x", y});
        FAIL();
    } catch (const InputError& e) {
        EXPECT_NE(std::string(e.what()).find("--y"), std::string::npos);
    }
}

TEST_F(Cli, LabeledInputMatchesTwoFiles) {
    const auto x = file("x.csv", "a,b\n0,0\n1,0.5\n2,1\n"), y = file("y.csv", "a,b\n5,5\n6,5.5\n");
    const auto l = file("l.csv", "a,grp,b\n0,g1,0\n5,g2,5\n1,g1,0.5\n6,g2,5.5\n2,g1,1\n");
    auto a = Json::parse(execute({"test", "--x", x, "--y", y, "--header", "--json"}).stdout_text);
    auto b = Json::parse(execute({"test", "--labeled", l, "--label-col", "grp", "--json"}).stdout_text);
    a.erase("data");
    b.erase("data");
    EXPECT_EQ(a, b);
}

TEST_F(Cli, PcaThenTestEqualsTestOnProjectedFile) {
    const auto xs = gaussian_csv(5, 40, 4, 0.0), ys = gaussian_csv(6, 30, 4, 0.5);
    const auto x = file("x.csv", xs), y = file("y.csv", ys);
    auto direct = Json::parse(execute({"test", "--x", x, "--y", y, "--pca", "2", "--method", "mst", "--json"}).stdout_text);
    const auto X = parse_csv(xs, false), Y = parse_csv(ys, false);
    const auto model = fit_pca(LabeledSample::pool(X.points, Y.points).points(), 2);
    auto write = [&](const std::string& name, const PointCloud& p) {
        std::ostringstream os;
        os.precision(17);
        for (std::size_t i = 0; i < p.size(); ++i) os << p.at(i, 0) << ',' << p.at(i, 1) << '\n';
        return file(name, os.str());
    };
    const auto px = write("px.csv", model.project(X.points)), py = write("py.csv", model.project(Y.points));
    auto pre = Json::parse(execute({"test", "--x", px, "--y", py, "--method", "mst", "--json"}).stdout_text);
    EXPECT_EQ(direct["pca"], nullptr);
    EXPECT_EQ(direct["cross"], pre["cross"]);
    EXPECT_EQ(direct["t"], pre["t"]);
    EXPECT_EQ(direct["data"]["pca"]["components"], 2);
}

TEST_F(Cli, EfficiencyExamples) {
    auto mst = Json::parse(execute({"efficiency", "--method", "mst", "--dim", "2", "--n", "200", "--reps", "4"}).stdout_text);
    EXPECT_EQ(mst["ae"].get<double>(), 0.0);
    auto mw = Json::parse(
        execute({"efficiency", "--method", "depth-cdf", "--family", "normal-location", "--p", "0.5", "--h", "1"}).stdout_text);
    EXPECT_NEAR(mw["ae"].get<double>(), 0.48860, 5e-6);
    const auto knn = execute({"efficiency", "--method", "knn", "--p", "0.5", "--theta", "0,0", "--h", "1,0", "--n", "300", "--reps", "4"});
    EXPECT_EQ(knn.code, 0);
    auto kj = Json::parse(knn.stdout_text);
    EXPECT_EQ(kj["ae"].get<double>(), 0.0);
    EXPECT_GT(kj["denominator"].get<double>(), 0.0);
}

TEST_F(Cli, PowerIsDeterministicAndWritesSidecar) {
    const std::vector<std::string> args = {"power", "--dim", "2", "--n1", "60", "--n2", "40", "--grid", "3", "--reps", "20",
                                           "--tests", "mst,knn(3),hotelling", "--seed", "9", "--out", path("p.csv")};
    const auto a = execute(args);
    auto with_threads = args;
    with_threads.insert(with_threads.begin(), {"--threads", "4"});
    const auto b = execute(with_threads);
    EXPECT_EQ(a.files.at(path("p.csv")), b.files.at(path("p.csv")));
    const auto& csv = a.files.at(path("p.csv"));
    EXPECT_EQ(csv.rfind("test,delta,power,se,mean_stat,mean_p\n", 0), 0u);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
    const auto side = Json::parse(a.files.at(path("p.csv.json")));
    EXPECT_EQ(side["config"]["seed"], 9);
    EXPECT_EQ(side["manifest"]["subcommand"], "power");
}

TEST_F(Cli, ManifestReplayReproducesOutputs) {
    const auto x = file("x.csv", gaussian_csv(7, 30, 2, 0.0)), y = file("y.csv", gaussian_csv(8, 30, 2, 0.3));
    const auto o = execute({"test", "--x", x, "--y", y, "--permutations", "199", "--seed", "5", "--json", "--manifest",
                            path("m.json")});
    const auto& mtext = o.files.at(path("m.json"));
    std::ofstream(path("m.json")) << mtext;
    const auto m = RunManifest::from_json(Json::parse(mtext));
    EXPECT_EQ(m.seed, 5u);
    EXPECT_EQ(m.inputs.size(), 2u);
    EXPECT_EQ(std::find(m.args.begin(), m.args.end(), "--manifest"), m.args.end());
    const auto r = execute({"replay", path("m.json")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.stdout_text.find("replay ok"), std::string::npos);
    // Editing an input invalidates the replay.
    std::ofstream(x) << "0,0\n";
    EXPECT_THROW(execute({"replay", path("m.json")}), InputError);
}

TEST_F(Cli, DepthAndGraphSubcommands) {
    const auto x = file("x.csv", "1\n2\n3\n4\n5\n"), y = file("y.csv", "3\n10\n");
    auto d = Json::parse(execute({"depth", "--x", x, "--y", y, "--kind", "cdf"}).stdout_text);
    EXPECT_EQ(d["depth"].size(), 2u);
    EXPECT_EQ(d["kind"], "univariate-cdf");
    auto g = Json::parse(execute({"graph", "--x", x, "--y", y, "--method", "mst"}).stdout_text);
    EXPECT_EQ(g["edge_count"], 6);
    EXPECT_EQ(g["n"], 7);
    EXPECT_TRUE(g.contains("cross"));
}

TEST_F(Cli, HelpIsPrintedForTheSelectedSubcommand) {
    const auto o = execute({"power", "--help"});
    EXPECT_EQ(o.code, 0);
    EXPECT_NE(o.stdout_text.find("--out"), std::string::npos);
    EXPECT_NE(execute({"--help"}).stdout_text.find("replay"), std::string::npos);
}
