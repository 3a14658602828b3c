#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "selbench/dataset.hpp"
#include "selbench/features.hpp"
#include "selbench/metrics.hpp"

namespace selbench {

enum class ModelKind {
    kConstantSbm,
    kKnn,
    kDecisionForest,
    kMultinomialLinear,
    kErrorRegressors,
};

enum class SelectorMode { kDirectClass, kArgminError };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);

struct PreprocessingSpec {
    bool scaling = true;
    Eigen::Index pca_dim = 0; // 0 = off
};

struct SelectorConfig {
    ModelKind model_kind = ModelKind::kConstantSbm;

    int knn_k = 5;

    int forest_trees = 50;
    int forest_depth = 8;
    int forest_min_leaf = 5;

    double l2 = 1e-3; // linear classifier and error-regressor heads
    int epochs = 200;
    std::vector<int> hidden; // error-regressor hidden widths; empty = linear heads

    PreprocessingSpec preprocessing;
    std::uint64_t seed = 0;

    void validate() const;
    std::string describe() const;
};

nlohmann::json selector_config_to_json(const SelectorConfig& config);
SelectorConfig selector_config_from_json(const nlohmann::json& j);

// --- fitted models ---------------------------------------------------------

struct KnnModel {
    int k = 1;
    Eigen::MatrixXd train_x; // post-preprocessing
    std::vector<int> labels;
    int class_count = 0;
};

struct DecisionTree {
    struct Node {
        int feature = -1;
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        int label = -1; // >= 0 marks a leaf
    };
    std::vector<Node> nodes;

    int predict(const Eigen::VectorXd& x) const;
};

struct ForestModel {
    std::vector<DecisionTree> trees;
    int class_count = 0;
};

struct LinearSoftmaxModel {
    Eigen::MatrixXd w; // K x d
    Eigen::VectorXd b; // K
};

// Small fully-connected regressor, tanh hidden activations, linear output.
// Targets are standardized during training; predictions are de-standardized.
struct MlpRegressor {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
    double target_mean = 0.0;
    double target_std = 1.0;

    double predict(const Eigen::VectorXd& x) const;
};

struct ErrorRegressorModel {
    std::vector<MlpRegressor> heads; // one per method
};

// A trained per-instance method picker: preprocessing stem plus either a
// K-class model on oracle labels or K per-method error regressors.
class Selector {
public:
    SelectorMode mode() const;
    int select(const Eigen::VectorXd& features) const;
    // argmin_error mode only: per-method predicted errors (quality units).
    Eigen::VectorXd predicted_errors(const Eigen::VectorXd& features) const;

    const SelectorConfig& config() const { return config_; }
    const std::vector<std::string>& method_names() const { return method_names_; }
    Eigen::Index input_dim() const { return input_dim_; }

    nlohmann::json to_json() const;
    static Selector from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static Selector load(const std::string& path);

private:
    friend Selector train_selector_on_rows(const SelectorConfig&, const FeatureTable&,
                                           const CostMatrix&,
                                           const std::vector<std::size_t>&);
    Eigen::VectorXd preprocess(const Eigen::VectorXd& features) const;

    SelectorConfig config_;
    std::vector<std::string> method_names_;
    Eigen::Index input_dim_ = 0;
    std::optional<ScalerModel> scaler_;
    std::optional<PcaModel> pca_;
    std::optional<int> constant_index_;
    std::optional<KnnModel> knn_;
    std::optional<ForestModel> forest_;
    std::optional<LinearSoftmaxModel> linear_;
    std::optional<ErrorRegressorModel> regressors_;
};

// --- portfolio baselines ----------------------------------------------------

// Index minimizing total cost; ties toward the lower index.
int single_best(const CostMatrix& costs);

struct OracleResult {
    std::vector<int> picks;       // per instance
    std::vector<int> pick_counts; // K
    double oracle_mae = 0.0;      // mean of row minima
};

OracleResult oracle_assign(const CostMatrix& costs);

// --- training / evaluation --------------------------------------------------

// Trains on the train-tagged rows of ds. features and costs must both be
// row-aligned with ds (costs built with SplitMask::all()).
Selector train_selector(const SelectorConfig& config, const FeatureTable& features,
                        const CostMatrix& costs, const QualityDataset& ds);

// Same, on an explicit row set (used for cross-validation folds).
Selector train_selector_on_rows(const SelectorConfig& config, const FeatureTable& features,
                                const CostMatrix& costs,
                                const std::vector<std::size_t>& rows);

// The SBM baseline method is chosen on the train split (falling back to the
// evaluated rows when no train rows are available) and its MAE is measured
// on the evaluated rows, so a constant_sbm selector closes exactly zero gap.
struct EvalReport {
    double mae = 0.0;
    double srocc = 0.0; // NaN when undefined on the filtered rows
    double oracle_mae = 0.0;
    double sbm_mae = 0.0;
    double gap_closure = 0.0; // (sbm - as) / (sbm - oracle), 0 on zero gap
    int sbm_index = 0;
    std::vector<int> pick_counts;
    std::vector<int> picks;
    std::vector<std::string> ids;
    std::vector<double> assembled_scores;
};

EvalReport evaluate_selector(const Selector& selector, const FeatureTable& features,
                             const CostMatrix& costs, const PredictionTable& aligned,
                             const QualityDataset& ds, SplitMask rows);

// Report for a fixed per-instance pick vector (oracle or externally supplied).
EvalReport evaluate_picks(const std::vector<int>& picks, const CostMatrix& costs,
                          const PredictionTable& aligned, const QualityDataset& ds,
                          SplitMask rows);

struct SearchLogEntry {
    std::size_t config_index = 0;
    SelectorConfig config;
    double cv_mae = 0.0; // +inf when the config failed
    std::vector<double> fold_maes;
    std::string error; // empty on success
};

struct SearchResult {
    std::size_t best_index = 0;
    SelectorConfig best_config;
    Selector selector;
    std::vector<SearchLogEntry> log;
};

// Budgeted design-space search by k-fold cross-validated selection-MAE on the
// train split; deterministic for fixed (space, budget, folds, seed).
SearchResult search_selectors(const std::vector<SelectorConfig>& space, std::size_t budget,
                              int folds, const FeatureTable& features, const CostMatrix& costs,
                              const QualityDataset& ds, std::uint64_t seed, int threads = 1);

// --- portfolio surgery ------------------------------------------------------

PredictionTable exclude_method(const PredictionTable& preds, const std::string& method);
CostMatrix exclude_method(const CostMatrix& costs, const std::string& method);
// Drops the method's feature group when present; otherwise returns the input.
FeatureTable exclude_method(const FeatureTable& features, const std::string& method);

nlohmann::json eval_report_to_json(const EvalReport& report,
                                   const std::vector<std::string>& method_names);
void write_picks_csv(const EvalReport& report, const std::vector<std::string>& method_names,
                     const std::string& path);

} // namespace selbench
