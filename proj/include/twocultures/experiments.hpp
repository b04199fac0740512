#pragma once

#include "twocultures/dataset.hpp"
#include "twocultures/matrix.hpp"
#include "twocultures/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

namespace twocultures::experiments {

inline constexpr const char* kToolVersion = "0.1.0";

std::string format17(double value);

// CSV artifact with the standard comment header (tool version, context name,
// seed, timestamp) followed by a column header row.
class ArtifactCsv {
public:
    ArtifactCsv(const std::string& path, const std::string& context, std::uint64_t seed,
                const std::vector<std::string>& columns);
    void row(const std::vector<double>& values);
    std::string finish();

private:
    std::string path_;
    std::ofstream out_;
};

struct ExperimentSpec {
    std::string name;
    std::uint64_t seed = 1;
    std::string output_dir = ".";
    std::map<std::string, std::string> overrides;
    std::string data_path;          // marthe input table
    std::uint64_t split_seed = 1;   // train/test split for marthe
    double train_frac = 0.8;
    bool log_target = false;
};

struct ExperimentResult {
    nlohmann::json metrics;
    std::vector<std::string> artifacts;  // paths written, metrics.json first
};

const std::vector<std::string>& experiment_names();

ExperimentResult run_experiment(const ExperimentSpec& spec);

// Synthetic stand-ins used by experiments and the acceptance suite.

// Inputs on [-2, 2]^p with a smooth nonlinear response on a 3-dimensional
// rotated active subspace; mirrors the simulator benchmark's shape (n x 20).
struct MartheSynthetic {
    Matrix x;
    Vector y;
};
MartheSynthetic make_marthe_synthetic(Index n, Index p, std::uint64_t seed);

// Disk of one class inside an annulus of the other, sampled uniformly.
struct DonutData {
    Matrix x;        // n x 2
    Vector label;    // 1 = annulus (outer), 0 = disk (inner)
};
DonutData make_donut_data(Index per_class, std::uint64_t seed);

// Train/test split by a seeded shuffle.
struct Split {
    std::vector<Index> train;
    std::vector<Index> test;
};
Split make_split(Index n, double train_frac, std::uint64_t seed);

Matrix take_rows(const Matrix& m, const std::vector<Index>& rows);

}  // namespace twocultures::experiments
