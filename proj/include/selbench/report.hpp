#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selbench/dataset.hpp"
#include "selbench/metrics.hpp"
#include "selbench/noiselab.hpp"
#include "selbench/selection.hpp"

namespace selbench {

// Selector plus the dataset-level feature reductions it was trained behind.
struct SelectorBundle {
    Selector selector;
    std::vector<GroupReduction> reductions; // empty = raw features

    FeatureTable transform(const FeatureTable& raw) const;
    void save(const std::string& path) const;
    static SelectorBundle load(const std::string& path);
};

enum class ClusterDistance { kOneMinusSrocc, kOneMinusAbsSrocc };

ClusterDistance cluster_distance_from_string(const std::string& s);

struct BenchmarkOptions {
    SplitMask rows = SplitMask::only(Split::kTest);
    std::string split_name = "test";
    int rank_depth = 3;
    ClusterDistance cluster_distance = ClusterDistance::kOneMinusSrocc;
    std::vector<std::pair<std::string, std::string>> scatter_pairs;
};

struct MethodRow {
    std::string name;
    double srocc = 0.0;
    double mae = 0.0;
    std::vector<int> rank_counts;
};

// Everything the benchmark command reports: a Table-1-shaped method table,
// a Table-2-shaped SBM/VBM/AS pick table, the method correlation matrix,
// and its Ward clustering.
struct BenchmarkReport {
    std::vector<MethodRow> methods;
    MethodRow virtual_best;
    int sbm_index = 0;
    OracleResult oracle;
    std::optional<EvalReport> selector_eval;
    Eigen::MatrixXd correlation;
    std::string newick;
    std::size_t evaluated_rows = 0;
    std::string split_name;
    int rank_depth = 3;
    std::vector<std::string> method_names;
};

BenchmarkReport run_benchmark(const PredictionTable& aligned, const QualityDataset& ds,
                              const BenchmarkOptions& opts,
                              const SelectorBundle* bundle = nullptr,
                              const FeatureTable* raw_features = nullptr);

nlohmann::json benchmark_to_json(const BenchmarkReport& report);
void write_benchmark_csv(const BenchmarkReport& report, const std::string& out_dir);
void write_scatter_csv(const PredictionTable& aligned, const QualityDataset& ds,
                       const std::string& method_a, const std::string& method_b,
                       const std::string& path);

// Minimal dependency-free SVG line chart of a sweep (mae curves vs grid).
std::string sweep_to_svg(const SweepResult& sweep, const std::string& title);
SweepResult read_sweep_csv(const std::string& path);

} // namespace selbench
