#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selbench/alignment.hpp"
#include "selbench/features.hpp"
#include "selbench/report.hpp"
#include "selbench/selection.hpp"

namespace selbench {

// Parsed CLI config file. Unknown keys anywhere are errors (fail-closed).
struct RunConfig {
    struct Data {
        std::string mos;
        std::string predictions;
        std::optional<std::string> features;
        bool aligned = false; // predictions file already on the quality scale
        std::vector<std::string> exclude;
    };
    struct Scale {
        bool rescale = false;
        double lo = 0.0;
        double hi = 100.0;
    };
    struct ValSplit {
        std::uint64_t seed = 1;
        std::size_t val_count = 0;
    };
    struct Reduction {
        bool enabled = true;
        Eigen::Index cap = 100;
        bool standardize = true;
    };
    struct Benchmark {
        std::string split = "test";
        int rank_depth = 3;
        ClusterDistance cluster_distance = ClusterDistance::kOneMinusSrocc;
        std::vector<std::pair<std::string, std::string>> scatter_pairs;
        std::optional<std::string> selector_path;
    };
    struct Select {
        std::optional<SelectorConfig> train;
        std::vector<SelectorConfig> space;
        std::size_t budget = 20;
        int folds = 5;
        std::uint64_t seed = 1;
        std::string eval_split = "test";
        std::optional<std::string> selector_path;
    };
    struct SimulateSweep {
        std::vector<double> sigma_grid;
        int k = 8;
        std::size_t n = 2000;
        int trials = 20;
        std::uint64_t seed = 1;
    };
    struct SimulateFutility {
        std::vector<double> rho_grid;
        SelectorConfig selector;
        std::size_t n = 5000;
        int k = 8;
        double sigma = 10.0;
        int seeds = 10;
        std::uint64_t seed = 1;
    };
    struct SimulateOracleMae {
        std::vector<double> bias;  // defaults to zeros of length k
        std::vector<double> sigma; // defaults to `sigma_scale` repeated k times
        int k = 8;
        double sigma_scale = 1.0;
        std::size_t trials = 1000000;
        std::uint64_t seed = 1;
    };
    struct Report {
        std::string input;
        std::string title = "sweep";
    };
    struct Output {
        std::string dir = "out";
        bool json = true;
        bool csv = true;
        bool svg = false;
    };

    std::optional<Data> data;
    Scale scale;
    ValSplit split;
    AlignOptions alignment;
    Reduction reduction;
    Benchmark benchmark;
    Select select;
    std::optional<SimulateSweep> simulate_sweep;
    std::optional<SimulateFutility> simulate_futility;
    std::optional<SimulateOracleMae> simulate_oracle_mae;
    std::optional<Report> report;
    Output output;

    std::string config_hash; // FNV-1a of the canonicalized config text
};

RunConfig parse_run_config(const std::string& path);
RunConfig parse_run_config_json(const nlohmann::json& doc);

std::uint64_t fnv1a64(const std::string& text);

} // namespace selbench
