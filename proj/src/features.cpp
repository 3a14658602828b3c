#include "selbench/features.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SVD>

#include "selbench/errors.hpp"

namespace selbench {

namespace {

std::vector<double> eigen_to_vec(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vec_to_eigen(const std::vector<double>& v) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
    std::copy(v.begin(), v.end(), out.data());
    return out;
}

Eigen::MatrixXd rows_of(const Eigen::MatrixXd& x, const std::vector<std::size_t>& rows) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
    }
    return out;
}

} // namespace

PcaModel pca_fit(const Eigen::MatrixXd& x, Eigen::Index k) {
    const Eigen::Index n = x.rows();
    const Eigen::Index d = x.cols();
    if (n < 2) throw ValidationError("pca_fit: need at least 2 rows");
    if (k < 1 || k > std::min(n - 1, d)) {
        throw ValidationError("pca_fit: k must be in [1, min(n-1, D)], got " +
                              std::to_string(k));
    }
    PcaModel model;
    model.mean = x.colwise().mean();
    Eigen::MatrixXd centered = x.rowwise() - model.mean.transpose();

    // Thin SVD of the centered data. Components are right singular vectors,
    // explained variances are squared singular values over n-1.
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
    const auto& singular = svd.singularValues();
    const Eigen::MatrixXd& v = svd.matrixV(); // d x min(n,d)

    model.components.resize(k, d);
    model.explained_variance.resize(k);
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::VectorXd comp = v.col(c);
        // deterministic sign: largest-magnitude entry positive (lowest index wins ties)
        Eigen::Index arg = 0;
        double best = -1.0;
        for (Eigen::Index i = 0; i < d; ++i) {
            if (std::abs(comp[i]) > best) {
                best = std::abs(comp[i]);
                arg = i;
            }
        }
        if (comp[arg] < 0.0) comp = -comp;
        model.components.row(c) = comp.transpose();
        model.explained_variance[c] =
            singular[c] * singular[c] / static_cast<double>(n - 1);
    }
    return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.input_dim()) {
        throw ValidationError("pca_transform: input has " + std::to_string(x.cols()) +
                              " columns, model expects " + std::to_string(model.input_dim()));
    }
    return (x.rowwise() - model.mean.transpose()) * model.components.transpose();
}

ScalerModel standardize_fit(const Eigen::MatrixXd& x_train) {
    if (x_train.rows() < 1) throw ValidationError("standardize_fit: empty input");
    const Eigen::Index n = x_train.rows();
    const Eigen::Index d = x_train.cols();
    ScalerModel model;
    model.mean = x_train.colwise().mean();
    model.std_dev.resize(d);
    model.constant.assign(static_cast<std::size_t>(d), false);
    for (Eigen::Index c = 0; c < d; ++c) {
        double ss = 0.0;
        for (Eigen::Index r = 0; r < n; ++r) {
            const double dv = x_train(r, c) - model.mean[c];
            ss += dv * dv;
        }
        const double var = n > 1 ? ss / static_cast<double>(n - 1) : 0.0;
        const double sd = std::sqrt(var);
        if (sd == 0.0) {
            model.constant[static_cast<std::size_t>(c)] = true;
            model.std_dev[c] = 0.0;
        } else {
            model.std_dev[c] = sd;
        }
    }
    return model;
}

Eigen::MatrixXd standardize_apply(const ScalerModel& model, const Eigen::MatrixXd& x) {
    if (x.cols() != model.mean.size()) {
        throw ValidationError("standardize_apply: column count mismatch");
    }
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        if (model.constant[static_cast<std::size_t>(c)]) {
            out.col(c).setZero();
        } else {
            out.col(c) = (x.col(c).array() - model.mean[c]) / model.std_dev[c];
        }
    }
    return out;
}

ReducedFeatures reduce_feature_groups(const FeatureTable& features, const QualityDataset& ds,
                                      const ReduceOptions& opts) {
    if (opts.cap < 1) throw ValidationError("reduce_feature_groups: cap must be >= 1");
    if (features.values.rows() != static_cast<Eigen::Index>(ds.size())) {
        throw ValidationError("reduce_feature_groups: feature rows do not match dataset");
    }
    const auto train_rows = ds.rows_with(SplitMask::only(Split::kTrain));

    Eigen::Index out_dim = 0;
    for (const auto& g : features.groups) out_dim += std::min(g.dim, opts.cap);

    ReducedFeatures result;
    result.table.values.resize(features.values.rows(), out_dim);
    Eigen::Index offset = 0;
    for (const auto& g : features.groups) {
        const auto block = features.values.middleCols(g.offset, g.dim);
        GroupReduction reduction;
        reduction.method = g.method;
        Eigen::Index width = g.dim;
        if (g.dim > opts.cap) {
            if (train_rows.empty()) {
                throw ValidationError("reduce_feature_groups: no train rows to fit on");
            }
            Eigen::MatrixXd train_block = rows_of(block, train_rows);
            Eigen::MatrixXd all_block = block;
            if (opts.standardize_before_pca) {
                reduction.scaler = standardize_fit(train_block);
                train_block = standardize_apply(*reduction.scaler, train_block);
                all_block = standardize_apply(*reduction.scaler, all_block);
            }
            try {
                reduction.pca = pca_fit(train_block, opts.cap);
            } catch (const Error& e) {
                throw ValidationError("reduce_feature_groups: group '" + g.method +
                                      "': " + e.what());
            }
            result.table.values.middleCols(offset, opts.cap) =
                pca_transform(*reduction.pca, all_block);
            width = opts.cap;
        } else {
            result.table.values.middleCols(offset, g.dim) = block;
        }
        result.table.groups.push_back({g.method, offset, width});
        result.reductions.push_back(std::move(reduction));
        offset += width;
    }
    return result;
}

FeatureTable apply_feature_reductions(const FeatureTable& features,
                                      const std::vector<GroupReduction>& reductions) {
    if (features.groups.size() != reductions.size()) {
        throw ValidationError("apply_feature_reductions: group count mismatch");
    }
    Eigen::Index out_dim = 0;
    for (std::size_t i = 0; i < reductions.size(); ++i) {
        out_dim += reductions[i].pca ? reductions[i].pca->k() : features.groups[i].dim;
    }
    FeatureTable out;
    out.values.resize(features.values.rows(), out_dim);
    Eigen::Index offset = 0;
    for (std::size_t i = 0; i < reductions.size(); ++i) {
        const auto& g = features.groups[i];
        const auto& red = reductions[i];
        if (g.method != red.method) {
            throw ValidationError("apply_feature_reductions: group order mismatch ('" +
                                  g.method + "' vs '" + red.method + "')");
        }
        Eigen::MatrixXd block = features.values.middleCols(g.offset, g.dim);
        Eigen::Index width = g.dim;
        if (red.scaler) block = standardize_apply(*red.scaler, block);
        if (red.pca) {
            block = pca_transform(*red.pca, block);
            width = red.pca->k();
        }
        out.values.middleCols(offset, width) = block;
        out.groups.push_back({g.method, offset, width});
        offset += width;
    }
    return out;
}

nlohmann::json pca_to_json(const PcaModel& model) {
    nlohmann::json comps = nlohmann::json::array();
    for (Eigen::Index r = 0; r < model.components.rows(); ++r) {
        comps.push_back(eigen_to_vec(model.components.row(r).transpose()));
    }
    return {{"mean", eigen_to_vec(model.mean)},
            {"components", std::move(comps)},
            {"explained_variance", eigen_to_vec(model.explained_variance)}};
}

PcaModel pca_from_json(const nlohmann::json& j) {
    PcaModel model;
    model.mean = vec_to_eigen(j.at("mean").get<std::vector<double>>());
    const auto comps = j.at("components").get<std::vector<std::vector<double>>>();
    if (comps.empty()) throw ValidationError("pca model: empty components");
    model.components.resize(static_cast<Eigen::Index>(comps.size()), model.mean.size());
    for (std::size_t r = 0; r < comps.size(); ++r) {
        if (static_cast<Eigen::Index>(comps[r].size()) != model.mean.size()) {
            throw ValidationError("pca model: component width mismatch");
        }
        model.components.row(static_cast<Eigen::Index>(r)) =
            vec_to_eigen(comps[r]).transpose();
    }
    model.explained_variance =
        vec_to_eigen(j.at("explained_variance").get<std::vector<double>>());
    return model;
}

nlohmann::json scaler_to_json(const ScalerModel& model) {
    return {{"mean", eigen_to_vec(model.mean)},
            {"std_dev", eigen_to_vec(model.std_dev)},
            {"constant", model.constant}};
}

ScalerModel scaler_from_json(const nlohmann::json& j) {
    ScalerModel model;
    model.mean = vec_to_eigen(j.at("mean").get<std::vector<double>>());
    model.std_dev = vec_to_eigen(j.at("std_dev").get<std::vector<double>>());
    model.constant = j.at("constant").get<std::vector<bool>>();
    if (model.std_dev.size() != model.mean.size() ||
        static_cast<Eigen::Index>(model.constant.size()) != model.mean.size()) {
        throw ValidationError("scaler model: field length mismatch");
    }
    return model;
}

nlohmann::json reductions_to_json(const std::vector<GroupReduction>& reductions) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& red : reductions) {
        nlohmann::json entry{{"method", red.method}};
        entry["scaler"] = red.scaler ? scaler_to_json(*red.scaler) : nlohmann::json();
        entry["pca"] = red.pca ? pca_to_json(*red.pca) : nlohmann::json();
        arr.push_back(std::move(entry));
    }
    return arr;
}

std::vector<GroupReduction> reductions_from_json(const nlohmann::json& j) {
    std::vector<GroupReduction> out;
    for (const auto& entry : j) {
        GroupReduction red;
        red.method = entry.at("method").get<std::string>();
        if (!entry.at("scaler").is_null()) red.scaler = scaler_from_json(entry.at("scaler"));
        if (!entry.at("pca").is_null()) red.pca = pca_from_json(entry.at("pca"));
        out.push_back(std::move(red));
    }
    return out;
}

} // namespace selbench
