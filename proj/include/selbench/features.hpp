#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selbench/dataset.hpp"

namespace selbench {

// Principal components of column-centered data, via thin SVD. Component rows
// are orthonormal; sign convention: each row's largest-magnitude entry is
// positive.
struct PcaModel {
    Eigen::VectorXd mean;          // D
    Eigen::MatrixXd components;    // k x D
    Eigen::VectorXd explained_variance; // k, non-increasing

    Eigen::Index k() const { return components.rows(); }
    Eigen::Index input_dim() const { return components.cols(); }
};

PcaModel pca_fit(const Eigen::MatrixXd& x, Eigen::Index k);
Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x);

// Per-column train-split mean/std; constant columns map to 0.
struct ScalerModel {
    Eigen::VectorXd mean;
    Eigen::VectorXd std_dev; // sample std, 0 for constant columns
    std::vector<bool> constant;
};

ScalerModel standardize_fit(const Eigen::MatrixXd& x_train);
Eigen::MatrixXd standardize_apply(const ScalerModel& model, const Eigen::MatrixXd& x);

struct ReduceOptions {
    Eigen::Index cap = 100;
    bool standardize_before_pca = true;
};

// One reduction pipeline per oversized group (fit on train rows only).
struct GroupReduction {
    std::string method;
    std::optional<ScalerModel> scaler;
    std::optional<PcaModel> pca;
};

struct ReducedFeatures {
    FeatureTable table;
    std::vector<GroupReduction> reductions;
};

// Groups wider than cap are replaced by their top-cap PCA scores; the rest
// pass through unchanged. Output width = sum of min(dim_g, cap).
ReducedFeatures reduce_feature_groups(const FeatureTable& features, const QualityDataset& ds,
                                      const ReduceOptions& opts = {});

// Applies previously fitted reductions to a feature table with the same
// group layout (prediction-time path).
FeatureTable apply_feature_reductions(const FeatureTable& features,
                                      const std::vector<GroupReduction>& reductions);

nlohmann::json pca_to_json(const PcaModel& model);
PcaModel pca_from_json(const nlohmann::json& j);
nlohmann::json scaler_to_json(const ScalerModel& model);
ScalerModel scaler_from_json(const nlohmann::json& j);
nlohmann::json reductions_to_json(const std::vector<GroupReduction>& reductions);
std::vector<GroupReduction> reductions_from_json(const nlohmann::json& j);

} // namespace selbench
