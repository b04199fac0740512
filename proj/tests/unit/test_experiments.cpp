#include <doctest.h>

#include "twocultures/experiments.hpp"

#include <filesystem>
#include <fstream>

using namespace twocultures;
namespace tx = twocultures::experiments;

namespace {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& name)
        : path(std::filesystem::temp_directory_path() / ("twocultures_exp_" + name)) {
        std::filesystem::remove_all(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace

TEST_SUITE("experiments") {

TEST_CASE("donut artifacts carry headers and sane metrics") {
    TempDir dir("donut");
    tx::ExperimentSpec spec;
    spec.name = "donut";
    spec.seed = 3;
    spec.output_dir = dir.path.string();

    tx::ExperimentResult result = tx::run_experiment(spec);
    REQUIRE(result.artifacts.size() == 4);
    CHECK(result.metrics.at("accuracy").get<double>() >= 0.95);
    CHECK(result.metrics.at("seed").get<std::uint64_t>() == 3);

    for (const std::string& artifact : result.artifacts) {
        CHECK(std::filesystem::exists(artifact));
        const std::string text = slurp(artifact);
        CHECK(text.find("0.1.0") != std::string::npos);       // tool version
        CHECK(text.find("timestamp") != std::string::npos);
        CHECK(text.find("donut") != std::string::npos);
    }
}

TEST_CASE("linear-system metrics record the per-round table") {
    TempDir dir("ls");
    tx::ExperimentSpec spec;
    spec.name = "linear-system";
    spec.seed = 1;
    spec.output_dir = dir.path.string();

    tx::ExperimentResult result = tx::run_experiment(spec);
    CHECK(result.metrics.at("variance_captured_after_2").get<double>() >= 0.99);
    CHECK(result.metrics.at("per_round").size() == 4);  // rounds 0..3
}

TEST_CASE("shrinkage-demo flags an expanded direction") {
    TempDir dir("sd");
    tx::ExperimentSpec spec;
    spec.name = "shrinkage-demo";
    spec.seed = 1;
    spec.output_dir = dir.path.string();

    tx::ExperimentResult result = tx::run_experiment(spec);
    CHECK(result.metrics.at("expanded_directions").get<int>() >= 1);
    CHECK(result.metrics.at("max_f_pls").get<double>() > 1.0);

    const std::string table = slurp((dir.path / "diagnostic_table.csv").string());
    CHECK(table.find("j,e2_j,alpha_j,f_RR,f_PCR,f_PLS,expanded_flag") != std::string::npos);
}

TEST_CASE("unknown experiments and missing marthe data are rejected") {
    tx::ExperimentSpec spec;
    spec.name = "not-an-experiment";
    spec.output_dir = (std::filesystem::temp_directory_path() / "twocultures_exp_bad").string();
    CHECK_THROWS_AS(tx::run_experiment(spec), ValidationError);

    spec.name = "marthe";
    try {
        tx::run_experiment(spec);
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("--data") != std::string::npos);
    }
    std::filesystem::remove_all(spec.output_dir);
}

TEST_CASE("same seed reruns are byte-identical apart from timestamps") {
    TempDir a("det_a"), b("det_b");
    for (const auto* dir : {&a, &b}) {
        tx::ExperimentSpec spec;
        spec.name = "shrinkage-demo";
        spec.seed = 7;
        spec.output_dir = dir->path.string();
        tx::run_experiment(spec);
    }
    for (const std::string file : {"metrics.json", "diagnostic_table.csv", "predictions.csv"}) {
        std::istringstream sa(slurp((a.path / file).string()));
        std::istringstream sb(slurp((b.path / file).string()));
        std::string la, lb;
        while (std::getline(sa, la) && std::getline(sb, lb)) {
            if (la.find("timestamp") != std::string::npos) continue;
            CHECK(la == lb);
        }
    }
}

TEST_CASE("split and synthetic generators are deterministic") {
    tx::Split s1 = tx::make_split(100, 0.8, 5);
    tx::Split s2 = tx::make_split(100, 0.8, 5);
    CHECK(s1.train == s2.train);
    CHECK(s1.test.size() == 20);

    tx::MartheSynthetic d1 = tx::make_marthe_synthetic(50, 20, 9);
    tx::MartheSynthetic d2 = tx::make_marthe_synthetic(50, 20, 9);
    CHECK((d1.x - d2.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d1.y - d2.y).cwiseAbs().maxCoeff() == 0.0);

    tx::DonutData donut = tx::make_donut_data(100, 2);
    for (Index i = 0; i < 100; ++i) CHECK(donut.x.row(i).norm() <= 1.4 + 1e-12);
    for (Index i = 100; i < 200; ++i) {
        CHECK(donut.x.row(i).norm() >= 2.2 - 1e-12);
        CHECK(donut.x.row(i).norm() <= 3.0 + 1e-12);
    }
}

}  // TEST_SUITE
