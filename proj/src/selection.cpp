#include "selbench/selection.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "selbench/csv.hpp"
#include "selbench/errors.hpp"
#include "selbench/parallel.hpp"
#include "selbench/rng.hpp"

namespace selbench {

namespace {

constexpr double kLinearLearningRate = 0.1;
constexpr double kRegressorLearningRate = 0.05;
constexpr int kSelectorFormatVersion = 1;

int argmin_row(const Eigen::MatrixXd& m, Eigen::Index row) {
    int best = 0;
    for (Eigen::Index c = 1; c < m.cols(); ++c) {
        if (m(row, c) < m(row, best)) best = static_cast<int>(c);
    }
    return best;
}

std::vector<int> oracle_labels(const Eigen::MatrixXd& costs) {
    std::vector<int> labels(static_cast<std::size_t>(costs.rows()));
    for (Eigen::Index i = 0; i < costs.rows(); ++i) {
        labels[static_cast<std::size_t>(i)] = argmin_row(costs, i);
    }
    return labels;
}

int majority_label(const std::vector<int>& labels, const std::vector<std::size_t>& idx,
                   int class_count) {
    std::vector<int> counts(static_cast<std::size_t>(class_count), 0);
    for (std::size_t i : idx) counts[static_cast<std::size_t>(labels[i])] += 1;
    int best = 0;
    for (int c = 1; c < class_count; ++c) {
        if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) {
            best = c;
        }
    }
    return best;
}

double gini_impurity(const std::vector<int>& counts, int total) {
    if (total == 0) return 0.0;
    double g = 1.0;
    for (int c : counts) {
        const double p = static_cast<double>(c) / total;
        g -= p * p;
    }
    return g;
}

// --- decision forest --------------------------------------------------------

struct TreeBuilder {
    const Eigen::MatrixXd& x;
    const std::vector<int>& labels;
    int class_count;
    int max_depth;
    int min_leaf;
    int mtry;
    Rng& rng;
    DecisionTree tree;

    int build(std::vector<std::size_t> idx, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        bool pure = true;
        for (std::size_t i = 1; i < idx.size(); ++i) {
            if (labels[idx[i]] != labels[idx[0]]) {
                pure = false;
                break;
            }
        }
        if (pure || depth >= max_depth || idx.size() < 2 * static_cast<std::size_t>(min_leaf)) {
            tree.nodes[static_cast<std::size_t>(node_id)].label =
                majority_label(labels, idx, class_count);
            return node_id;
        }

        const auto candidates =
            rng.sample_without_replacement(static_cast<std::size_t>(x.cols()),
                                           static_cast<std::size_t>(mtry));
        int best_feature = -1;
        double best_threshold = 0.0;
        double best_score = std::numeric_limits<double>::infinity();

        std::vector<std::pair<double, int>> values(idx.size());
        for (std::size_t f : candidates) {
            const auto col = static_cast<Eigen::Index>(f);
            for (std::size_t i = 0; i < idx.size(); ++i) {
                values[i] = {x(static_cast<Eigen::Index>(idx[i]), col), labels[idx[i]]};
            }
            std::sort(values.begin(), values.end());

            std::vector<int> left_counts(static_cast<std::size_t>(class_count), 0);
            std::vector<int> right_counts(static_cast<std::size_t>(class_count), 0);
            for (const auto& [v, y] : values) right_counts[static_cast<std::size_t>(y)] += 1;

            const int total = static_cast<int>(values.size());
            for (int i = 0; i + 1 < total; ++i) {
                const int y = values[static_cast<std::size_t>(i)].second;
                left_counts[static_cast<std::size_t>(y)] += 1;
                right_counts[static_cast<std::size_t>(y)] -= 1;
                const int nl = i + 1;
                const int nr = total - nl;
                if (nl < min_leaf || nr < min_leaf) continue;
                const double v_here = values[static_cast<std::size_t>(i)].first;
                const double v_next = values[static_cast<std::size_t>(i + 1)].first;
                if (v_here == v_next) continue;
                const double score = (nl * gini_impurity(left_counts, nl) +
                                      nr * gini_impurity(right_counts, nr)) /
                                     total;
                if (score < best_score) {
                    best_score = score;
                    best_feature = static_cast<int>(f);
                    best_threshold = 0.5 * (v_here + v_next);
                }
            }
        }

        if (best_feature < 0) {
            tree.nodes[static_cast<std::size_t>(node_id)].label =
                majority_label(labels, idx, class_count);
            return node_id;
        }

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx) {
            if (x(static_cast<Eigen::Index>(i), best_feature) <= best_threshold) {
                left_idx.push_back(i);
            } else {
                right_idx.push_back(i);
            }
        }
        idx.clear();
        idx.shrink_to_fit();

        const int left = build(std::move(left_idx), depth + 1);
        const int right = build(std::move(right_idx), depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left;
        node.right = right;
        return node_id;
    }
};

ForestModel train_forest(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                         int class_count, const SelectorConfig& config) {
    ForestModel forest;
    forest.class_count = class_count;
    forest.trees.resize(static_cast<std::size_t>(config.forest_trees));
    const Rng base(config.seed);
    const int mtry = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(x.cols()))));
    for (int t = 0; t < config.forest_trees; ++t) {
        Rng rng = base.stream(static_cast<std::uint64_t>(t));
        std::vector<std::size_t> sample(static_cast<std::size_t>(x.rows()));
        for (auto& s : sample) {
            s = static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(x.rows())));
        }
        TreeBuilder builder{x,
                            labels,
                            class_count,
                            config.forest_depth,
                            config.forest_min_leaf,
                            mtry,
                            rng,
                            {}};
        builder.build(std::move(sample), 0);
        forest.trees[static_cast<std::size_t>(t)] = std::move(builder.tree);
    }
    return forest;
}

int forest_predict(const ForestModel& forest, const Eigen::VectorXd& x) {
    std::vector<int> votes(static_cast<std::size_t>(forest.class_count), 0);
    for (const auto& tree : forest.trees) {
        votes[static_cast<std::size_t>(tree.predict(x))] += 1;
    }
    int best = 0;
    for (int c = 1; c < forest.class_count; ++c) {
        if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) best = c;
    }
    return best;
}

// --- multinomial linear classifier -------------------------------------------

LinearSoftmaxModel train_linear_softmax(const Eigen::MatrixXd& x, const std::vector<int>& labels,
                                        int class_count, const SelectorConfig& config) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    LinearSoftmaxModel model;
    model.w = Eigen::MatrixXd::Zero(class_count, d);
    model.b = Eigen::VectorXd::Zero(class_count);

    Eigen::MatrixXd logits(n, class_count);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        logits.noalias() = x * model.w.transpose();
        logits.rowwise() += model.b.transpose();
        // softmax rows, stabilized
        for (Eigen::Index i = 0; i < n; ++i) {
            const double mx = logits.row(i).maxCoeff();
            logits.row(i) = (logits.row(i).array() - mx).exp();
            logits.row(i) /= logits.row(i).sum();
        }
        for (Eigen::Index i = 0; i < n; ++i) {
            logits(i, labels[static_cast<std::size_t>(i)]) -= 1.0;
        }
        const Eigen::MatrixXd grad_w =
            logits.transpose() * x / static_cast<double>(n) + config.l2 * model.w;
        const Eigen::VectorXd grad_b = logits.colwise().mean();
        model.w -= kLinearLearningRate * grad_w;
        model.b -= kLinearLearningRate * grad_b;
    }
    return model;
}

int linear_predict(const LinearSoftmaxModel& model, const Eigen::VectorXd& x) {
    const Eigen::VectorXd logits = model.w * x + model.b;
    int best = 0;
    for (Eigen::Index c = 1; c < logits.size(); ++c) {
        if (logits[c] > logits[best]) best = static_cast<int>(c);
    }
    return best;
}

// --- per-method error regressors ---------------------------------------------

MlpRegressor train_mlp_head(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                            const std::vector<int>& hidden, const SelectorConfig& config,
                            Rng rng) {
    const Eigen::Index n = x.rows();
    std::vector<Eigen::Index> widths;
    widths.push_back(x.cols());
    for (int h : hidden) widths.push_back(h);
    widths.push_back(1);

    MlpRegressor head;
    head.target_mean = y.mean();
    {
        const double var = (y.array() - head.target_mean).square().sum() /
                           std::max<double>(1.0, static_cast<double>(n - 1));
        head.target_std = std::sqrt(var);
        if (head.target_std == 0.0) head.target_std = 1.0;
    }
    const Eigen::VectorXd z = (y.array() - head.target_mean) / head.target_std;

    const std::size_t layers = widths.size() - 1;
    head.weights.resize(layers);
    head.biases.resize(layers);
    for (std::size_t l = 0; l < layers; ++l) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(widths[l]));
        head.weights[l].resize(widths[l + 1], widths[l]);
        for (Eigen::Index r = 0; r < head.weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < head.weights[l].cols(); ++c) {
                head.weights[l](r, c) = rng.uniform(-scale, scale);
            }
        }
        head.biases[l] = Eigen::VectorXd::Zero(widths[l + 1]);
    }

    // full-batch subgradient descent on MAE with L2 regularization
    std::vector<Eigen::MatrixXd> acts(layers + 1);
    acts[0] = x;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        for (std::size_t l = 0; l < layers; ++l) {
            Eigen::MatrixXd pre = acts[l] * head.weights[l].transpose();
            pre.rowwise() += head.biases[l].transpose();
            acts[l + 1] = (l + 1 < layers) ? pre.array().tanh().matrix() : pre;
        }
        // delta at the output: sign(pred - z) / n
        Eigen::MatrixXd delta(n, 1);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double diff = acts[layers](i, 0) - z[i];
            delta(i, 0) = (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0)) /
                          static_cast<double>(n);
        }
        for (std::size_t l = layers; l-- > 0;) {
            const Eigen::MatrixXd grad_w =
                delta.transpose() * acts[l] + config.l2 * head.weights[l];
            const Eigen::VectorXd grad_b = delta.colwise().sum();
            if (l > 0) {
                Eigen::MatrixXd back = delta * head.weights[l];
                // through tanh
                delta = back.array() * (1.0 - acts[l].array().square());
            }
            head.weights[l] -= kRegressorLearningRate * grad_w;
            head.biases[l] -= kRegressorLearningRate * grad_b;
        }
    }
    return head;
}

ErrorRegressorModel train_error_regressors(const Eigen::MatrixXd& x, const Eigen::MatrixXd& costs,
                                           const SelectorConfig& config) {
    ErrorRegressorModel model;
    model.heads.resize(static_cast<std::size_t>(costs.cols()));
    const Rng base(config.seed);
    for (Eigen::Index k = 0; k < costs.cols(); ++k) {
        model.heads[static_cast<std::size_t>(k)] =
            train_mlp_head(x, costs.col(k), config.hidden, config,
                           base.stream(static_cast<std::uint64_t>(k) + 1));
    }
    return model;
}

} // namespace

int DecisionTree::predict(const Eigen::VectorXd& x) const {
    int node = 0;
    for (;;) {
        const Node& n = nodes[static_cast<std::size_t>(node)];
        if (n.label >= 0) return n.label;
        node = x[n.feature] <= n.threshold ? n.left : n.right;
    }
}

double MlpRegressor::predict(const Eigen::VectorXd& x) const {
    Eigen::VectorXd act = x;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        Eigen::VectorXd pre = weights[l] * act + biases[l];
        act = (l + 1 < weights.size()) ? pre.array().tanh().matrix().eval() : pre;
    }
    return act[0] * target_std + target_mean;
}

const char* to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::kConstantSbm: return "constant_sbm";
    case ModelKind::kKnn: return "knn";
    case ModelKind::kDecisionForest: return "decision_forest";
    case ModelKind::kMultinomialLinear: return "multinomial_linear";
    case ModelKind::kErrorRegressors: return "error_regressors";
    }
    return "constant_sbm";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "constant_sbm") return ModelKind::kConstantSbm;
    if (s == "knn") return ModelKind::kKnn;
    if (s == "decision_forest") return ModelKind::kDecisionForest;
    if (s == "multinomial_linear") return ModelKind::kMultinomialLinear;
    if (s == "error_regressors") return ModelKind::kErrorRegressors;
    throw ValidationError("unknown model kind '" + s + "'");
}

void SelectorConfig::validate() const {
    switch (model_kind) {
    case ModelKind::kConstantSbm:
        break;
    case ModelKind::kKnn:
        if (knn_k < 1) throw ValidationError("selector config: knn k must be >= 1");
        break;
    case ModelKind::kDecisionForest:
        if (forest_trees < 1 || forest_depth < 1 || forest_min_leaf < 1) {
            throw ValidationError("selector config: forest hyperparameters must be >= 1");
        }
        break;
    case ModelKind::kMultinomialLinear:
        if (epochs < 1 || l2 < 0.0) {
            throw ValidationError("selector config: linear model needs epochs >= 1, l2 >= 0");
        }
        break;
    case ModelKind::kErrorRegressors:
        if (epochs < 1 || l2 < 0.0) {
            throw ValidationError("selector config: error regressors need epochs >= 1, l2 >= 0");
        }
        for (int h : hidden) {
            if (h < 1) throw ValidationError("selector config: hidden widths must be >= 1");
        }
        break;
    }
    if (preprocessing.pca_dim < 0) {
        throw ValidationError("selector config: pca dim must be >= 1 when on");
    }
}

std::string SelectorConfig::describe() const {
    std::ostringstream out;
    out << to_string(model_kind);
    out << '(';
    switch (model_kind) {
    case ModelKind::kConstantSbm: break;
    case ModelKind::kKnn: out << "k=" << knn_k << ';'; break;
    case ModelKind::kDecisionForest:
        out << "trees=" << forest_trees << ";depth=" << forest_depth
            << ";min_leaf=" << forest_min_leaf << ';';
        break;
    case ModelKind::kMultinomialLinear:
        out << "l2=" << l2 << ";epochs=" << epochs << ';';
        break;
    case ModelKind::kErrorRegressors:
        out << "l2=" << l2 << ";epochs=" << epochs << ";hidden=[";
        for (std::size_t i = 0; i < hidden.size(); ++i) {
            if (i) out << ' ';
            out << hidden[i];
        }
        out << "];";
        break;
    }
    out << "scaling=" << (preprocessing.scaling ? "on" : "off") << ";pca=";
    if (preprocessing.pca_dim > 0) {
        out << preprocessing.pca_dim;
    } else {
        out << "off";
    }
    out << ";seed=" << seed << ')';
    return out.str();
}

nlohmann::json selector_config_to_json(const SelectorConfig& config) {
    nlohmann::json hyper = nlohmann::json::object();
    switch (config.model_kind) {
    case ModelKind::kConstantSbm: break;
    case ModelKind::kKnn: hyper["k"] = config.knn_k; break;
    case ModelKind::kDecisionForest:
        hyper["trees"] = config.forest_trees;
        hyper["depth"] = config.forest_depth;
        hyper["min_leaf"] = config.forest_min_leaf;
        break;
    case ModelKind::kMultinomialLinear:
        hyper["l2"] = config.l2;
        hyper["epochs"] = config.epochs;
        break;
    case ModelKind::kErrorRegressors:
        hyper["l2"] = config.l2;
        hyper["epochs"] = config.epochs;
        hyper["hidden"] = config.hidden;
        break;
    }
    return {{"model_kind", to_string(config.model_kind)},
            {"hyperparams", std::move(hyper)},
            {"preprocessing",
             {{"scaling", config.preprocessing.scaling},
              {"pca", config.preprocessing.pca_dim}}},
            {"seed", config.seed}};
}

SelectorConfig selector_config_from_json(const nlohmann::json& j) {
    SelectorConfig config;
    config.model_kind = model_kind_from_string(j.at("model_kind").get<std::string>());
    const auto hyper = j.value("hyperparams", nlohmann::json::object());
    for (const auto& [key, value] : hyper.items()) {
        if (key == "k") config.knn_k = value.get<int>();
        else if (key == "trees") config.forest_trees = value.get<int>();
        else if (key == "depth") config.forest_depth = value.get<int>();
        else if (key == "min_leaf") config.forest_min_leaf = value.get<int>();
        else if (key == "l2") config.l2 = value.get<double>();
        else if (key == "epochs") config.epochs = value.get<int>();
        else if (key == "hidden") config.hidden = value.get<std::vector<int>>();
        else throw ValidationError("selector config: unknown hyperparameter '" + key + "'");
    }
    if (j.contains("preprocessing")) {
        const auto& pre = j.at("preprocessing");
        for (const auto& [key, value] : pre.items()) {
            if (key == "scaling") config.preprocessing.scaling = value.get<bool>();
            else if (key == "pca") config.preprocessing.pca_dim = value.get<Eigen::Index>();
            else throw ValidationError("selector config: unknown preprocessing key '" + key + "'");
        }
    }
    config.seed = j.value("seed", std::uint64_t{0});
    for (const auto& [key, value] : j.items()) {
        if (key != "model_kind" && key != "hyperparams" && key != "preprocessing" &&
            key != "seed") {
            throw ValidationError("selector config: unknown key '" + key + "'");
        }
    }
    config.validate();
    return config;
}

SelectorMode Selector::mode() const {
    return config_.model_kind == ModelKind::kErrorRegressors ? SelectorMode::kArgminError
                                                             : SelectorMode::kDirectClass;
}

Eigen::VectorXd Selector::preprocess(const Eigen::VectorXd& features) const {
    if (features.size() != input_dim_) {
        throw ValidationError("select: feature row has " + std::to_string(features.size()) +
                              " values, selector expects " + std::to_string(input_dim_));
    }
    Eigen::MatrixXd row = features.transpose();
    if (scaler_) row = standardize_apply(*scaler_, row);
    if (pca_) row = pca_transform(*pca_, row);
    return row.row(0).transpose();
}

int Selector::select(const Eigen::VectorXd& features) const {
    const Eigen::VectorXd z = preprocess(features);
    if (constant_index_) return *constant_index_;
    if (knn_) {
        const auto& m = *knn_;
        const Eigen::Index n = m.train_x.rows();
        std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            dist[static_cast<std::size_t>(i)] = {
                (m.train_x.row(i).transpose() - z).squaredNorm(), i};
        }
        const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(m.k),
                                                    dist.size());
        std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k),
                          dist.end());
        std::vector<int> votes(static_cast<std::size_t>(m.class_count), 0);
        for (std::size_t i = 0; i < k; ++i) {
            votes[static_cast<std::size_t>(
                m.labels[static_cast<std::size_t>(dist[i].second)])] += 1;
        }
        int best = 0;
        for (int c = 1; c < m.class_count; ++c) {
            if (votes[static_cast<std::size_t>(c)] > votes[static_cast<std::size_t>(best)]) {
                best = c;
            }
        }
        return best;
    }
    if (forest_) return forest_predict(*forest_, z);
    if (linear_) return linear_predict(*linear_, z);
    if (regressors_) {
        const auto& heads = regressors_->heads;
        int best = 0;
        double best_err = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < heads.size(); ++k) {
            const double err = heads[k].predict(z);
            if (!std::isfinite(err)) {
                throw NumericError("select: non-finite predicted error for method '" +
                                   method_names_[k] + "'");
            }
            if (err < best_err) {
                best_err = err;
                best = static_cast<int>(k);
            }
        }
        return best;
    }
    throw ValidationError("select: selector has no fitted model");
}

Eigen::VectorXd Selector::predicted_errors(const Eigen::VectorXd& features) const {
    if (!regressors_) {
        throw ValidationError("predicted_errors: selector is not in argmin_error mode");
    }
    const Eigen::VectorXd z = preprocess(features);
    Eigen::VectorXd errs(static_cast<Eigen::Index>(regressors_->heads.size()));
    for (std::size_t k = 0; k < regressors_->heads.size(); ++k) {
        errs[static_cast<Eigen::Index>(k)] = regressors_->heads[k].predict(z);
    }
    return errs;
}

int single_best(const CostMatrix& costs) {
    if (costs.rows() == 0 || costs.method_count() == 0) {
        throw ValidationError("single_best: empty cost matrix");
    }
    int best = 0;
    double best_total = costs.values.col(0).sum();
    for (Eigen::Index c = 1; c < costs.method_count(); ++c) {
        const double total = costs.values.col(c).sum();
        if (total < best_total) {
            best_total = total;
            best = static_cast<int>(c);
        }
    }
    return best;
}

OracleResult oracle_assign(const CostMatrix& costs) {
    if (costs.rows() == 0 || costs.method_count() == 0) {
        throw ValidationError("oracle_assign: empty cost matrix");
    }
    OracleResult result;
    result.picks.resize(static_cast<std::size_t>(costs.rows()));
    result.pick_counts.assign(static_cast<std::size_t>(costs.method_count()), 0);
    std::vector<double> minima(static_cast<std::size_t>(costs.rows()));
    for (Eigen::Index i = 0; i < costs.rows(); ++i) {
        const int pick = argmin_row(costs.values, i);
        result.picks[static_cast<std::size_t>(i)] = pick;
        result.pick_counts[static_cast<std::size_t>(pick)] += 1;
        minima[static_cast<std::size_t>(i)] = costs.values(i, pick);
    }
    result.oracle_mae = mean(minima);
    return result;
}

Selector train_selector_on_rows(const SelectorConfig& config, const FeatureTable& features,
                                const CostMatrix& costs,
                                const std::vector<std::size_t>& rows) {
    config.validate();
    if (rows.empty()) throw ValidationError("train_selector: empty train split");
    if (features.values.rows() != costs.values.rows()) {
        throw ValidationError("train_selector: features and costs are not row-aligned");
    }

    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), features.values.cols());
    Eigen::MatrixXd c(static_cast<Eigen::Index>(rows.size()), costs.values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        x.row(static_cast<Eigen::Index>(i)) =
            features.values.row(static_cast<Eigen::Index>(rows[i]));
        c.row(static_cast<Eigen::Index>(i)) =
            costs.values.row(static_cast<Eigen::Index>(rows[i]));
    }

    Selector sel;
    sel.config_ = config;
    sel.method_names_ = costs.method_names;
    sel.input_dim_ = features.values.cols();

    if (config.model_kind != ModelKind::kConstantSbm) {
        if (config.preprocessing.scaling) {
            sel.scaler_ = standardize_fit(x);
            x = standardize_apply(*sel.scaler_, x);
        }
        if (config.preprocessing.pca_dim > 0) {
            sel.pca_ = pca_fit(x, config.preprocessing.pca_dim);
            x = pca_transform(*sel.pca_, x);
        }
    }

    const int class_count = static_cast<int>(costs.method_count());
    switch (config.model_kind) {
    case ModelKind::kConstantSbm: {
        CostMatrix train_costs;
        train_costs.values = c;
        train_costs.method_names = costs.method_names;
        sel.constant_index_ = single_best(train_costs);
        break;
    }
    case ModelKind::kKnn: {
        KnnModel m;
        m.k = config.knn_k;
        m.train_x = x;
        m.labels = oracle_labels(c);
        m.class_count = class_count;
        sel.knn_ = std::move(m);
        break;
    }
    case ModelKind::kDecisionForest:
        sel.forest_ = train_forest(x, oracle_labels(c), class_count, config);
        break;
    case ModelKind::kMultinomialLinear:
        sel.linear_ = train_linear_softmax(x, oracle_labels(c), class_count, config);
        break;
    case ModelKind::kErrorRegressors:
        sel.regressors_ = train_error_regressors(x, c, config);
        break;
    }
    return sel;
}

Selector train_selector(const SelectorConfig& config, const FeatureTable& features,
                        const CostMatrix& costs, const QualityDataset& ds) {
    if (costs.values.rows() != static_cast<Eigen::Index>(ds.size())) {
        throw ValidationError(
            "train_selector: costs must cover all dataset rows (use SplitMask::all())");
    }
    return train_selector_on_rows(config, features, costs,
                                  ds.rows_with(SplitMask::only(Split::kTrain)));
}

namespace {

// picks/costs are restricted to the evaluated rows; sbm_index is the single
// best chosen on the train split (no eval leakage), measured here on the
// evaluated rows so a constant_sbm selector closes exactly zero gap.
EvalReport report_for_picks(const std::vector<int>& picks,
                            const std::vector<std::size_t>& rows, const CostMatrix& costs,
                            const PredictionTable& aligned, const QualityDataset& ds,
                            int sbm_index) {
    const Eigen::Index k = costs.method_count();
    EvalReport report;
    report.picks = picks;
    report.pick_counts.assign(static_cast<std::size_t>(k), 0);

    std::vector<double> picked_costs(rows.size());
    std::vector<double> minima(rows.size());
    std::vector<double> mos(rows.size());
    report.assembled_scores.resize(rows.size());
    report.ids.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(rows[i]);
        const int pick = picks[i];
        if (pick < 0 || pick >= static_cast<int>(k)) {
            throw ValidationError("evaluate: pick out of range");
        }
        report.pick_counts[static_cast<std::size_t>(pick)] += 1;
        picked_costs[i] = costs.values(static_cast<Eigen::Index>(i), pick);
        minima[i] = costs.values(static_cast<Eigen::Index>(i),
                                 argmin_row(costs.values, static_cast<Eigen::Index>(i)));
        mos[i] = ds[rows[i]].mos;
        report.assembled_scores[i] = aligned.values(r, pick);
        report.ids.push_back(ds[rows[i]].id);
    }
    report.mae = mean(picked_costs);
    report.oracle_mae = mean(minima);

    report.sbm_index = sbm_index;
    std::vector<double> sbm_costs(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sbm_costs[i] = costs.values(static_cast<Eigen::Index>(i), report.sbm_index);
    }
    report.sbm_mae = mean(sbm_costs);

    const double gap = report.sbm_mae - report.oracle_mae;
    report.gap_closure = gap > 0.0 ? (report.sbm_mae - report.mae) / gap : 0.0;

    try {
        report.srocc = srocc(std::span<const double>(report.assembled_scores),
                             std::span<const double>(mos));
    } catch (const Error&) {
        report.srocc = std::numeric_limits<double>::quiet_NaN();
    }
    return report;
}

// Single best on the train split when the full cost table is at hand;
// otherwise on the rows being evaluated.
int baseline_sbm_index(const CostMatrix& costs, const QualityDataset& ds,
                       const std::vector<std::size_t>& fallback_rows) {
    std::vector<std::size_t> rows;
    if (costs.values.rows() == static_cast<Eigen::Index>(ds.size())) {
        rows = ds.rows_with(SplitMask::only(Split::kTrain));
    }
    if (rows.empty()) rows = fallback_rows;
    CostMatrix sub;
    sub.method_names = costs.method_names;
    sub.values.resize(static_cast<Eigen::Index>(rows.size()), costs.values.cols());
    const bool full = costs.values.rows() == static_cast<Eigen::Index>(ds.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto src = static_cast<Eigen::Index>(full ? rows[i] : i);
        sub.values.row(static_cast<Eigen::Index>(i)) = costs.values.row(src);
    }
    return single_best(sub);
}

} // namespace

EvalReport evaluate_selector(const Selector& selector, const FeatureTable& features,
                             const CostMatrix& costs, const PredictionTable& aligned,
                             const QualityDataset& ds, SplitMask rows) {
    if (costs.values.rows() != static_cast<Eigen::Index>(ds.size()) ||
        features.values.rows() != static_cast<Eigen::Index>(ds.size()) ||
        aligned.values.rows() != static_cast<Eigen::Index>(ds.size())) {
        throw ValidationError("evaluate_selector: tables must cover all dataset rows");
    }
    const auto keep = ds.rows_with(rows);
    if (keep.empty()) throw ValidationError("evaluate_selector: empty row filter");

    std::vector<int> picks(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        picks[i] = selector.select(
            features.values.row(static_cast<Eigen::Index>(keep[i])).transpose());
    }
    // subset costs to the filtered rows for reporting
    CostMatrix sub;
    sub.method_names = costs.method_names;
    sub.values.resize(static_cast<Eigen::Index>(keep.size()), costs.values.cols());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        sub.values.row(static_cast<Eigen::Index>(i)) =
            costs.values.row(static_cast<Eigen::Index>(keep[i]));
    }
    return report_for_picks(picks, keep, sub, aligned, ds,
                            baseline_sbm_index(costs, ds, keep));
}

EvalReport evaluate_picks(const std::vector<int>& picks, const CostMatrix& costs,
                          const PredictionTable& aligned, const QualityDataset& ds,
                          SplitMask rows) {
    const auto keep = ds.rows_with(rows);
    if (keep.empty()) throw ValidationError("evaluate_picks: empty row filter");
    if (picks.size() != keep.size()) {
        throw ValidationError("evaluate_picks: pick count does not match filtered rows");
    }
    CostMatrix sub;
    sub.method_names = costs.method_names;
    sub.values.resize(static_cast<Eigen::Index>(keep.size()), costs.values.cols());
    if (costs.values.rows() == static_cast<Eigen::Index>(ds.size())) {
        for (std::size_t i = 0; i < keep.size(); ++i) {
            sub.values.row(static_cast<Eigen::Index>(i)) =
                costs.values.row(static_cast<Eigen::Index>(keep[i]));
        }
    } else if (costs.values.rows() == static_cast<Eigen::Index>(keep.size())) {
        sub.values = costs.values;
    } else {
        throw ValidationError("evaluate_picks: cost matrix rows match neither dataset nor filter");
    }
    return report_for_picks(picks, keep, sub, aligned, ds,
                            baseline_sbm_index(costs, ds, keep));
}

SearchResult search_selectors(const std::vector<SelectorConfig>& space, std::size_t budget,
                              int folds, const FeatureTable& features, const CostMatrix& costs,
                              const QualityDataset& ds, std::uint64_t seed, int threads) {
    if (space.empty()) throw ValidationError("search_selectors: empty config space");
    if (budget < 1) throw ValidationError("search_selectors: budget must be >= 1");
    if (folds < 2) throw ValidationError("search_selectors: need at least 2 folds");

    std::vector<std::size_t> train_rows = ds.rows_with(SplitMask::only(Split::kTrain));
    if (train_rows.size() < static_cast<std::size_t>(folds)) {
        throw ValidationError("search_selectors: fewer train rows than folds");
    }
    Rng rng(seed);
    rng.shuffle(train_rows);

    std::vector<std::vector<std::size_t>> fold_rows(static_cast<std::size_t>(folds));
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
        fold_rows[i % static_cast<std::size_t>(folds)].push_back(train_rows[i]);
    }

    const std::size_t tried = std::min(budget, space.size());
    std::vector<SearchLogEntry> log(tried);
    parallel_for(tried, threads, [&](std::size_t idx) {
        SearchLogEntry entry;
        entry.config_index = idx;
        entry.config = space[idx];
        try {
            std::vector<double> fold_maes;
            for (int f = 0; f < folds; ++f) {
                std::vector<std::size_t> fit_rows;
                for (int g = 0; g < folds; ++g) {
                    if (g == f) continue;
                    const auto& rows = fold_rows[static_cast<std::size_t>(g)];
                    fit_rows.insert(fit_rows.end(), rows.begin(), rows.end());
                }
                const Selector sel =
                    train_selector_on_rows(space[idx], features, costs, fit_rows);
                const auto& held = fold_rows[static_cast<std::size_t>(f)];
                std::vector<double> held_costs(held.size());
                for (std::size_t i = 0; i < held.size(); ++i) {
                    const auto r = static_cast<Eigen::Index>(held[i]);
                    const int pick = sel.select(features.values.row(r).transpose());
                    held_costs[i] = costs.values(r, pick);
                }
                fold_maes.push_back(mean(held_costs));
            }
            entry.fold_maes = fold_maes;
            entry.cv_mae = mean(fold_maes);
        } catch (const Error& e) {
            entry.cv_mae = std::numeric_limits<double>::infinity();
            entry.error = e.what();
        }
        log[idx] = std::move(entry);
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < log.size(); ++i) {
        if (log[i].cv_mae < log[best].cv_mae) best = i;
    }
    if (!std::isfinite(log[best].cv_mae)) {
        throw NumericError("search_selectors: every evaluated config failed (first error: " +
                           log[0].error + ")");
    }

    SearchResult result;
    result.best_index = best;
    result.best_config = space[best];
    result.log = std::move(log);
    result.selector = train_selector_on_rows(space[best], features, costs,
                                             ds.rows_with(SplitMask::only(Split::kTrain)));
    return result;
}

PredictionTable exclude_method(const PredictionTable& preds, const std::string& method) {
    const Eigen::Index drop = preds.method_index(method);
    if (preds.values.cols() < 2) {
        throw ValidationError("exclude_method: portfolio would become empty");
    }
    PredictionTable out;
    out.aligned = preds.aligned;
    out.values.resize(preds.values.rows(), preds.values.cols() - 1);
    Eigen::Index t = 0;
    for (Eigen::Index c = 0; c < preds.values.cols(); ++c) {
        if (c == drop) continue;
        out.values.col(t) = preds.values.col(c);
        out.method_names.push_back(preds.method_names[static_cast<std::size_t>(c)]);
        ++t;
    }
    return out;
}

CostMatrix exclude_method(const CostMatrix& costs, const std::string& method) {
    Eigen::Index drop = -1;
    for (std::size_t k = 0; k < costs.method_names.size(); ++k) {
        if (costs.method_names[k] == method) drop = static_cast<Eigen::Index>(k);
    }
    if (drop < 0) throw ValidationError("unknown method '" + method + "'");
    if (costs.values.cols() < 2) {
        throw ValidationError("exclude_method: portfolio would become empty");
    }
    CostMatrix out;
    out.ids = costs.ids;
    out.values.resize(costs.values.rows(), costs.values.cols() - 1);
    Eigen::Index t = 0;
    for (Eigen::Index c = 0; c < costs.values.cols(); ++c) {
        if (c == drop) continue;
        out.values.col(t) = costs.values.col(c);
        out.method_names.push_back(costs.method_names[static_cast<std::size_t>(c)]);
        ++t;
    }
    return out;
}

FeatureTable exclude_method(const FeatureTable& features, const std::string& method) {
    const FeatureGroup* group = features.find_group(method);
    if (group == nullptr) return features;
    FeatureTable out;
    out.values.resize(features.values.rows(), features.values.cols() - group->dim);
    Eigen::Index offset = 0;
    for (const auto& g : features.groups) {
        if (g.method == method) continue;
        out.values.middleCols(offset, g.dim) = features.values.middleCols(g.offset, g.dim);
        out.groups.push_back({g.method, offset, g.dim});
        offset += g.dim;
    }
    return out;
}

// --- serialization -----------------------------------------------------------

namespace {

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(m.cols()));
        for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
        rows.push_back(std::move(row));
    }
    return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
    const auto rows = j.get<std::vector<std::vector<double>>>();
    if (rows.empty()) return Eigen::MatrixXd(0, 0);
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size()) {
            throw ValidationError("selector file: ragged matrix");
        }
        for (std::size_t c = 0; c < rows[r].size(); ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
    }
    return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
    const auto v = j.get<std::vector<double>>();
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), out.data());
    return out;
}

} // namespace

nlohmann::json Selector::to_json() const {
    nlohmann::json doc{{"format", "selbench-selector"},
                       {"version", kSelectorFormatVersion},
                       {"config", selector_config_to_json(config_)},
                       {"mode", mode() == SelectorMode::kArgminError ? "argmin_error"
                                                                     : "direct_class"},
                       {"method_names", method_names_},
                       {"input_dim", input_dim_}};
    doc["scaler"] = scaler_ ? scaler_to_json(*scaler_) : nlohmann::json();
    doc["pca"] = pca_ ? pca_to_json(*pca_) : nlohmann::json();
    nlohmann::json model;
    if (constant_index_) {
        model = {{"kind", "constant"}, {"index", *constant_index_}};
    } else if (knn_) {
        model = {{"kind", "knn"},
                 {"k", knn_->k},
                 {"train_x", matrix_to_json(knn_->train_x)},
                 {"labels", knn_->labels},
                 {"class_count", knn_->class_count}};
    } else if (forest_) {
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& tree : forest_->trees) {
            nlohmann::json nodes = nlohmann::json::array();
            for (const auto& n : tree.nodes) {
                nodes.push_back({{"f", n.feature},
                                 {"t", n.threshold},
                                 {"l", n.left},
                                 {"r", n.right},
                                 {"y", n.label}});
            }
            trees.push_back(std::move(nodes));
        }
        model = {{"kind", "forest"},
                 {"trees", std::move(trees)},
                 {"class_count", forest_->class_count}};
    } else if (linear_) {
        model = {{"kind", "linear"},
                 {"w", matrix_to_json(linear_->w)},
                 {"b", vector_to_json(linear_->b)}};
    } else if (regressors_) {
        nlohmann::json heads = nlohmann::json::array();
        for (const auto& head : regressors_->heads) {
            nlohmann::json weights = nlohmann::json::array();
            nlohmann::json biases = nlohmann::json::array();
            for (const auto& w : head.weights) weights.push_back(matrix_to_json(w));
            for (const auto& b : head.biases) biases.push_back(vector_to_json(b));
            heads.push_back({{"weights", std::move(weights)},
                             {"biases", std::move(biases)},
                             {"target_mean", head.target_mean},
                             {"target_std", head.target_std}});
        }
        model = {{"kind", "error_regressors"}, {"heads", std::move(heads)}};
    }
    doc["model"] = std::move(model);
    return doc;
}

Selector Selector::from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "selbench-selector") {
        throw ValidationError("selector file: unrecognized format");
    }
    if (j.value("version", -1) != kSelectorFormatVersion) {
        throw ValidationError("selector file: unknown version " +
                              std::to_string(j.value("version", -1)));
    }
    Selector sel;
    sel.config_ = selector_config_from_json(j.at("config"));
    sel.method_names_ = j.at("method_names").get<std::vector<std::string>>();
    sel.input_dim_ = j.at("input_dim").get<Eigen::Index>();
    if (!j.at("scaler").is_null()) sel.scaler_ = scaler_from_json(j.at("scaler"));
    if (!j.at("pca").is_null()) sel.pca_ = pca_from_json(j.at("pca"));
    const auto& model = j.at("model");
    const std::string kind = model.at("kind").get<std::string>();
    if (kind == "constant") {
        sel.constant_index_ = model.at("index").get<int>();
    } else if (kind == "knn") {
        KnnModel m;
        m.k = model.at("k").get<int>();
        m.train_x = matrix_from_json(model.at("train_x"));
        m.labels = model.at("labels").get<std::vector<int>>();
        m.class_count = model.at("class_count").get<int>();
        if (m.train_x.rows() != static_cast<Eigen::Index>(m.labels.size())) {
            throw ValidationError("selector file: knn rows/labels mismatch");
        }
        sel.knn_ = std::move(m);
    } else if (kind == "forest") {
        ForestModel m;
        m.class_count = model.at("class_count").get<int>();
        for (const auto& tree_json : model.at("trees")) {
            DecisionTree tree;
            for (const auto& n : tree_json) {
                DecisionTree::Node node;
                node.feature = n.at("f").get<int>();
                node.threshold = n.at("t").get<double>();
                node.left = n.at("l").get<int>();
                node.right = n.at("r").get<int>();
                node.label = n.at("y").get<int>();
                tree.nodes.push_back(node);
            }
            m.trees.push_back(std::move(tree));
        }
        sel.forest_ = std::move(m);
    } else if (kind == "linear") {
        LinearSoftmaxModel m;
        m.w = matrix_from_json(model.at("w"));
        m.b = vector_from_json(model.at("b"));
        sel.linear_ = std::move(m);
    } else if (kind == "error_regressors") {
        ErrorRegressorModel m;
        for (const auto& head_json : model.at("heads")) {
            MlpRegressor head;
            for (const auto& w : head_json.at("weights")) {
                head.weights.push_back(matrix_from_json(w));
            }
            for (const auto& b : head_json.at("biases")) {
                head.biases.push_back(vector_from_json(b));
            }
            head.target_mean = head_json.at("target_mean").get<double>();
            head.target_std = head_json.at("target_std").get<double>();
            m.heads.push_back(std::move(head));
        }
        sel.regressors_ = std::move(m);
    } else {
        throw ValidationError("selector file: unknown model kind '" + kind + "'");
    }
    return sel;
}

void Selector::save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << to_json().dump(2) << '\n';
}

Selector Selector::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
    return from_json(doc);
}

nlohmann::json eval_report_to_json(const EvalReport& report,
                                   const std::vector<std::string>& method_names) {
    nlohmann::json picks_by_method = nlohmann::json::object();
    for (std::size_t k = 0; k < method_names.size(); ++k) {
        picks_by_method[method_names[k]] = report.pick_counts[k];
    }
    nlohmann::json doc{{"mae", report.mae},
                       {"oracle_mae", report.oracle_mae},
                       {"sbm_mae", report.sbm_mae},
                       {"sbm_method", method_names[static_cast<std::size_t>(report.sbm_index)]},
                       {"gap_closure", report.gap_closure},
                       {"evaluated_rows", report.picks.size()},
                       {"pick_counts", std::move(picks_by_method)}};
    if (std::isfinite(report.srocc)) {
        doc["srocc"] = report.srocc;
    } else {
        doc["srocc"] = nullptr;
    }
    return doc;
}

void write_picks_csv(const EvalReport& report, const std::vector<std::string>& method_names,
                     const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(report.ids.size());
    for (std::size_t i = 0; i < report.ids.size(); ++i) {
        rows.push_back({report.ids[i],
                        method_names[static_cast<std::size_t>(report.picks[i])],
                        csv::format_number(report.assembled_scores[i])});
    }
    csv::write(path, {"id", "chosen_method", "assembled_score"}, rows);
}

} // namespace selbench
