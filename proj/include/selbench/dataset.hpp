#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace selbench {

enum class Split { kTrain, kVal, kTest };

const char* to_string(Split s);
Split split_from_string(const std::string& s);

// Row filter over split tags.
struct SplitMask {
    bool train = false;
    bool val = false;
    bool test = false;

    static SplitMask all() { return {true, true, true}; }
    static SplitMask only(Split s) {
        SplitMask m;
        m.set(s);
        return m;
    }
    void set(Split s) {
        if (s == Split::kTrain) train = true;
        else if (s == Split::kVal) val = true;
        else test = true;
    }
    bool contains(Split s) const {
        if (s == Split::kTrain) return train;
        if (s == Split::kVal) return val;
        return test;
    }
};

struct Instance {
    std::string id;
    double mos = 0.0;
    Split split = Split::kTrain;
};

// Instance-level ground truth. Immutable after construction; ids unique and
// non-empty, every mos finite.
class QualityDataset {
public:
    QualityDataset() = default;
    explicit QualityDataset(std::vector<Instance> instances);

    std::size_t size() const { return instances_.size(); }
    const Instance& operator[](std::size_t i) const { return instances_[i]; }
    const std::vector<Instance>& instances() const { return instances_; }

    std::vector<std::size_t> rows_with(SplitMask mask) const;
    std::size_t count(Split s) const;
    Eigen::VectorXd mos_vector() const;
    Eigen::VectorXd mos_vector(const std::vector<std::size_t>& rows) const;

private:
    std::vector<Instance> instances_;
};

// N x K raw or aligned method scores, row-aligned with a QualityDataset.
struct PredictionTable {
    std::vector<std::string> method_names;
    Eigen::MatrixXd values;
    bool aligned = false;

    Eigen::Index method_count() const { return values.cols(); }
    Eigen::Index method_index(const std::string& name) const;
};

struct FeatureGroupSpec {
    std::string method;
    Eigen::Index dim = 0;
    std::string path;
};

struct FeatureGroup {
    std::string method;
    Eigen::Index offset = 0;
    Eigen::Index dim = 0;
};

// N x D feature matrix with per-column group provenance.
struct FeatureTable {
    Eigen::MatrixXd values;
    std::vector<FeatureGroup> groups;

    Eigen::Index dim() const { return values.cols(); }
    const FeatureGroup* find_group(const std::string& method) const;
};

struct LoadedData {
    QualityDataset dataset;
    PredictionTable predictions;
    std::optional<FeatureTable> features;
};

// Loads and row-aligns mos/predictions (and optionally feature groups) by id.
// Instance order is the order of the mos file; the predictions table comes
// back with aligned=false.
LoadedData load_dataset(const std::string& mos_path, const std::string& predictions_path,
                        const std::optional<std::string>& feature_manifest_path = std::nullopt);

// Loads feature groups alone (prediction-time path); ids come from the first
// group file and all groups must agree on them.
std::pair<FeatureTable, std::vector<std::string>>
load_features(const std::string& feature_manifest_path);

// Affine min-max map of the mos column onto [lo, hi].
QualityDataset scale_mos(const QualityDataset& ds, double lo, double hi);

// Re-tags exactly val_count train instances as val, seeded draw without
// replacement. Test tags are untouched.
QualityDataset split_dataset(const QualityDataset& ds, std::uint64_t seed, std::size_t val_count);

void write_mos_csv(const QualityDataset& ds, const std::string& path);
void write_predictions_csv(const PredictionTable& preds, const QualityDataset& ds,
                           const std::string& path);
// Writes one CSV per group next to the manifest, plus the manifest itself.
void write_features(const FeatureTable& features, const QualityDataset& ds,
                    const std::string& manifest_path);

} // namespace selbench
