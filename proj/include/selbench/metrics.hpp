#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "selbench/dataset.hpp"

namespace selbench {

// Pairwise (cascade) summation; keeps means reproducible across platforms.
double pairwise_sum(std::span<const double> v);
double mean(std::span<const double> v);

double mae(std::span<const double> pred, std::span<const double> mos);
double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& mos);

// Fractional (average-tie) ranks, 1-based.
std::vector<double> fractional_ranks(std::span<const double> v);

// Spearman rank correlation: Pearson correlation of fractional ranks.
double srocc(std::span<const double> a, std::span<const double> b);
double srocc(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Per-instance, per-method absolute error on the filtered rows.
struct CostMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> method_names;
    std::vector<std::string> ids;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index method_count() const { return values.cols(); }
};

CostMatrix cost_matrix(const PredictionTable& aligned, const QualityDataset& ds,
                       SplitMask rows = SplitMask::all());

// Entry (k, r): number of instances where method k has the r-th smallest
// cost. Cost ties break toward the lower method index.
Eigen::MatrixXi rank_count_table(const CostMatrix& costs, int depth);

// Symmetric K x K SROCC matrix between aligned prediction columns.
Eigen::MatrixXd method_correlation_matrix(const PredictionTable& aligned,
                                          const QualityDataset& ds,
                                          SplitMask rows = SplitMask::all());

// Signed errors (a - mos, b - mos) per instance, for scatter export.
std::vector<std::pair<double, double>>
signed_error_pairs(const PredictionTable& aligned, const QualityDataset& ds,
                   const std::string& method_a, const std::string& method_b);

// Agglomerative merge tree. Leaves are 0..K-1; merge i creates node K+i
// (children may be leaves or earlier merge nodes).
struct ClusterTree {
    struct Merge {
        int left = -1;
        int right = -1;
        double height = 0.0;
        int size = 0;
    };
    int leaf_count = 0;
    std::vector<Merge> merges;
};

// Ward linkage via the Lance-Williams update, treating the input as a
// squared-Euclidean-like dissimilarity. Deterministic tie-break: smallest
// (i, j) pair by current node index.
ClusterTree ward_cluster(const Eigen::MatrixXd& dist);

std::string to_newick(const ClusterTree& tree, const std::vector<std::string>& leaf_names);

} // namespace selbench
