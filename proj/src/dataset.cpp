#include "selbench/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "selbench/csv.hpp"
#include "selbench/errors.hpp"
#include "selbench/rng.hpp"

namespace selbench {

namespace {

using nlohmann::json;

std::unordered_map<std::string, std::size_t> index_by_id(const csv::Table& table) {
    std::unordered_map<std::string, std::size_t> map;
    map.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string& id = table.rows[r][0];
        if (id.empty()) {
            throw ValidationError(table.path + ": empty id at row " + std::to_string(r + 1));
        }
        if (!map.emplace(id, r).second) {
            throw ValidationError(table.path + ": duplicate id '" + id + "'");
        }
    }
    return map;
}

// Feature group CSVs must cover exactly the dataset ids; rows are reordered
// into dataset order.
Eigen::MatrixXd load_feature_group(const std::string& path, Eigen::Index dim,
                                   const std::vector<std::string>& ids) {
    const csv::Table table = csv::read(path);
    if (table.header.empty() || table.header[0] != "id") {
        throw ValidationError(path + ": first column must be 'id'");
    }
    if (static_cast<Eigen::Index>(table.cols()) - 1 != dim) {
        throw ValidationError(path + ": expected " + std::to_string(dim) +
                              " feature columns, found " + std::to_string(table.cols() - 1));
    }
    const auto by_id = index_by_id(table);
    if (table.rows.size() != ids.size()) {
        const std::unordered_set<std::string> known(ids.begin(), ids.end());
        for (const auto& [id, row] : by_id) {
            if (!known.count(id)) {
                throw ValidationError(path + ": id '" + id + "' not present in mos file");
            }
        }
    }
    Eigen::MatrixXd values(static_cast<Eigen::Index>(ids.size()), dim);
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const auto it = by_id.find(ids[i]);
        if (it == by_id.end()) {
            throw ValidationError(path + ": missing id '" + ids[i] + "'");
        }
        for (Eigen::Index c = 0; c < dim; ++c) {
            const double v =
                csv::parse_number(table, it->second, static_cast<std::size_t>(c) + 1);
            if (!std::isfinite(v)) {
                throw ValidationError(path + ": non-finite value for id '" + ids[i] + "'");
            }
            values(static_cast<Eigen::Index>(i), c) = v;
        }
    }
    return values;
}

std::vector<FeatureGroupSpec> read_manifest(const std::string& manifest_path) {
    std::ifstream in(manifest_path);
    if (!in) throw IoError("cannot open file: " + manifest_path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(manifest_path + ": invalid JSON: " + e.what());
    }
    if (!doc.is_array() || doc.empty()) {
        throw ValidationError(manifest_path + ": manifest must be a non-empty array");
    }
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    std::vector<FeatureGroupSpec> specs;
    for (const auto& entry : doc) {
        if (!entry.is_object() || !entry.contains("method") || !entry.contains("dim") ||
            !entry.contains("path")) {
            throw ValidationError(manifest_path +
                                  ": each entry needs 'method', 'dim' and 'path'");
        }
        FeatureGroupSpec spec;
        spec.method = entry.at("method").get<std::string>();
        spec.dim = entry.at("dim").get<Eigen::Index>();
        if (spec.dim <= 0) {
            throw ValidationError(manifest_path + ": group '" + spec.method +
                                  "' has non-positive dim");
        }
        std::filesystem::path p = entry.at("path").get<std::string>();
        spec.path = p.is_absolute() ? p.string() : (base / p).string();
        specs.push_back(std::move(spec));
    }
    return specs;
}

FeatureTable assemble_features(const std::vector<FeatureGroupSpec>& specs,
                               const std::vector<std::string>& ids) {
    Eigen::Index total = 0;
    for (const auto& spec : specs) total += spec.dim;
    FeatureTable table;
    table.values.resize(static_cast<Eigen::Index>(ids.size()), total);
    Eigen::Index offset = 0;
    for (const auto& spec : specs) {
        table.values.middleCols(offset, spec.dim) = load_feature_group(spec.path, spec.dim, ids);
        table.groups.push_back({spec.method, offset, spec.dim});
        offset += spec.dim;
    }
    return table;
}

} // namespace

const char* to_string(Split s) {
    switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    }
    return "train";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::kTrain;
    if (s == "val") return Split::kVal;
    if (s == "test") return Split::kTest;
    throw ValidationError("unknown split tag '" + s + "' (expected train, val or test)");
}

QualityDataset::QualityDataset(std::vector<Instance> instances)
    : instances_(std::move(instances)) {
    std::unordered_set<std::string> seen;
    seen.reserve(instances_.size());
    for (const auto& inst : instances_) {
        if (inst.id.empty()) throw ValidationError("dataset: empty instance id");
        if (!seen.insert(inst.id).second) {
            throw ValidationError("dataset: duplicate id '" + inst.id + "'");
        }
        if (!std::isfinite(inst.mos)) {
            throw ValidationError("dataset: non-finite mos for id '" + inst.id + "'");
        }
    }
}

std::vector<std::size_t> QualityDataset::rows_with(SplitMask mask) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        if (mask.contains(instances_[i].split)) rows.push_back(i);
    }
    return rows;
}

std::size_t QualityDataset::count(Split s) const {
    std::size_t n = 0;
    for (const auto& inst : instances_) {
        if (inst.split == s) ++n;
    }
    return n;
}

Eigen::VectorXd QualityDataset::mos_vector() const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(instances_.size()));
    for (std::size_t i = 0; i < instances_.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = instances_[i].mos;
    }
    return v;
}

Eigen::VectorXd QualityDataset::mos_vector(const std::vector<std::size_t>& rows) const {
    Eigen::VectorXd v(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        v[static_cast<Eigen::Index>(i)] = instances_[rows[i]].mos;
    }
    return v;
}

Eigen::Index PredictionTable::method_index(const std::string& name) const {
    for (std::size_t k = 0; k < method_names.size(); ++k) {
        if (method_names[k] == name) return static_cast<Eigen::Index>(k);
    }
    throw ValidationError("unknown method '" + name + "'");
}

const FeatureGroup* FeatureTable::find_group(const std::string& method) const {
    for (const auto& g : groups) {
        if (g.method == method) return &g;
    }
    return nullptr;
}

LoadedData load_dataset(const std::string& mos_path, const std::string& predictions_path,
                        const std::optional<std::string>& feature_manifest_path) {
    const csv::Table mos_table = csv::read(mos_path);
    if (mos_table.cols() < 2 || mos_table.header[0] != "id" || mos_table.header[1] != "mos" ||
        mos_table.cols() > 3 || (mos_table.cols() == 3 && mos_table.header[2] != "split")) {
        throw ValidationError(mos_path + ": header must be 'id,mos' or 'id,mos,split'");
    }
    const bool has_split = mos_table.cols() == 3;

    std::vector<Instance> instances;
    instances.reserve(mos_table.rows.size());
    for (std::size_t r = 0; r < mos_table.rows.size(); ++r) {
        Instance inst;
        inst.id = mos_table.rows[r][0];
        inst.mos = csv::parse_number(mos_table, r, 1);
        if (!std::isfinite(inst.mos)) {
            throw ValidationError(mos_path + ": non-finite mos at row " + std::to_string(r + 1));
        }
        inst.split = has_split ? split_from_string(mos_table.rows[r][2]) : Split::kTrain;
        instances.push_back(std::move(inst));
    }
    QualityDataset dataset(std::move(instances));

    const csv::Table pred_table = csv::read(predictions_path);
    if (pred_table.cols() < 2 || pred_table.header[0] != "id") {
        throw ValidationError(predictions_path + ": header must be 'id,<method>,...'");
    }
    PredictionTable preds;
    preds.method_names.assign(pred_table.header.begin() + 1, pred_table.header.end());
    {
        std::unordered_set<std::string> seen;
        for (const auto& m : preds.method_names) {
            if (m.empty() || !seen.insert(m).second) {
                throw ValidationError(predictions_path + ": method names must be unique and non-empty");
            }
        }
    }
    const auto pred_by_id = index_by_id(pred_table);
    {
        std::unordered_set<std::string> known;
        known.reserve(dataset.size());
        for (const auto& inst : dataset.instances()) known.insert(inst.id);
        for (const auto& [id, row] : pred_by_id) {
            if (!known.count(id)) {
                throw ValidationError(predictions_path + ": id '" + id +
                                      "' not present in mos file");
            }
        }
    }
    const Eigen::Index n = static_cast<Eigen::Index>(dataset.size());
    const Eigen::Index k = static_cast<Eigen::Index>(preds.method_names.size());
    preds.values.resize(n, k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string& id = dataset[static_cast<std::size_t>(i)].id;
        const auto it = pred_by_id.find(id);
        if (it == pred_by_id.end()) {
            throw ValidationError(predictions_path + ": missing id '" + id + "'");
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            const double v =
                csv::parse_number(pred_table, it->second, static_cast<std::size_t>(c) + 1);
            if (!std::isfinite(v)) {
                throw ValidationError(predictions_path + ": non-finite prediction for id '" +
                                      id + "'");
            }
            preds.values(i, c) = v;
        }
    }
    preds.aligned = false;

    LoadedData data{std::move(dataset), std::move(preds), std::nullopt};

    if (feature_manifest_path) {
        const auto specs = read_manifest(*feature_manifest_path);
        std::unordered_set<std::string> methods(data.predictions.method_names.begin(),
                                                data.predictions.method_names.end());
        std::unordered_set<std::string> seen;
        for (const auto& spec : specs) {
            if (!methods.count(spec.method)) {
                throw ValidationError(*feature_manifest_path + ": group '" + spec.method +
                                      "' is not a portfolio method");
            }
            if (!seen.insert(spec.method).second) {
                throw ValidationError(*feature_manifest_path + ": duplicate group '" +
                                      spec.method + "'");
            }
        }
        std::vector<std::string> ids;
        ids.reserve(data.dataset.size());
        for (const auto& inst : data.dataset.instances()) ids.push_back(inst.id);
        data.features = assemble_features(specs, ids);
    }
    return data;
}

std::pair<FeatureTable, std::vector<std::string>>
load_features(const std::string& feature_manifest_path) {
    const auto specs = read_manifest(feature_manifest_path);
    const csv::Table first = csv::read(specs.front().path);
    if (first.header.empty() || first.header[0] != "id") {
        throw ValidationError(specs.front().path + ": first column must be 'id'");
    }
    std::vector<std::string> ids;
    ids.reserve(first.rows.size());
    std::unordered_set<std::string> seen;
    for (const auto& row : first.rows) {
        if (row[0].empty() || !seen.insert(row[0]).second) {
            throw ValidationError(specs.front().path + ": ids must be unique and non-empty");
        }
        ids.push_back(row[0]);
    }
    return {assemble_features(specs, ids), ids};
}

QualityDataset scale_mos(const QualityDataset& ds, double lo, double hi) {
    if (!(lo < hi)) throw ValidationError("scale_mos: lo must be < hi");
    if (ds.size() == 0) throw ValidationError("scale_mos: empty dataset");
    double mn = ds[0].mos;
    double mx = ds[0].mos;
    for (const auto& inst : ds.instances()) {
        mn = std::min(mn, inst.mos);
        mx = std::max(mx, inst.mos);
    }
    if (mn == mx) {
        throw ValidationError("scale_mos: all mos values equal (" + csv::format_number(mn) +
                              "), degenerate scale");
    }
    std::vector<Instance> out = ds.instances();
    const double span = mx - mn;
    for (auto& inst : out) {
        inst.mos = lo + (inst.mos - mn) / span * (hi - lo);
    }
    return QualityDataset(std::move(out));
}

QualityDataset split_dataset(const QualityDataset& ds, std::uint64_t seed, std::size_t val_count) {
    if (val_count == 0) return ds;
    std::vector<std::size_t> train_rows = ds.rows_with(SplitMask::only(Split::kTrain));
    if (val_count >= train_rows.size()) {
        throw ValidationError("split_dataset: val_count " + std::to_string(val_count) +
                              " must be smaller than the train split (" +
                              std::to_string(train_rows.size()) + ")");
    }
    Rng rng(seed);
    const auto chosen = rng.sample_without_replacement(train_rows.size(), val_count);
    std::vector<Instance> out = ds.instances();
    for (std::size_t idx : chosen) out[train_rows[idx]].split = Split::kVal;
    return QualityDataset(std::move(out));
}

void write_mos_csv(const QualityDataset& ds, const std::string& path) {
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.size());
    for (const auto& inst : ds.instances()) {
        rows.push_back({inst.id, csv::format_number(inst.mos), to_string(inst.split)});
    }
    csv::write(path, {"id", "mos", "split"}, rows);
}

void write_predictions_csv(const PredictionTable& preds, const QualityDataset& ds,
                           const std::string& path) {
    std::vector<std::string> header{"id"};
    header.insert(header.end(), preds.method_names.begin(), preds.method_names.end());
    std::vector<std::vector<std::string>> rows;
    rows.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<std::string> row{ds[i].id};
        for (Eigen::Index c = 0; c < preds.values.cols(); ++c) {
            row.push_back(csv::format_number(preds.values(static_cast<Eigen::Index>(i), c)));
        }
        rows.push_back(std::move(row));
    }
    csv::write(path, header, rows);
}

void write_features(const FeatureTable& features, const QualityDataset& ds,
                    const std::string& manifest_path) {
    const std::filesystem::path base = std::filesystem::path(manifest_path).parent_path();
    json manifest = json::array();
    for (const auto& group : features.groups) {
        const std::string file = "features_" + group.method + ".csv";
        std::vector<std::string> header{"id"};
        for (Eigen::Index c = 0; c < group.dim; ++c) {
            header.push_back("f" + std::to_string(c + 1));
        }
        std::vector<std::vector<std::string>> rows;
        rows.reserve(ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            std::vector<std::string> row{ds[i].id};
            for (Eigen::Index c = 0; c < group.dim; ++c) {
                row.push_back(csv::format_number(
                    features.values(static_cast<Eigen::Index>(i), group.offset + c)));
            }
            rows.push_back(std::move(row));
        }
        csv::write((base / file).string(), header, rows);
        manifest.push_back({{"method", group.method},
                            {"dim", group.dim},
                            {"path", file}});
    }
    std::ofstream out(manifest_path);
    if (!out) throw IoError("cannot write file: " + manifest_path);
    out << manifest.dump(2) << '\n';
}

} // namespace selbench
