#include "selbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "selbench/errors.hpp"

namespace selbench {

namespace {

bool is_constant(std::span<const double> v) {
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] != v[0]) return false;
    }
    return true;
}

// Pearson correlation with pairwise-summed moments.
double pearson(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size();
    const double ma = mean(a);
    const double mb = mean(b);
    std::vector<double> cov(n), va(n), vb(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        cov[i] = da * db;
        va[i] = da * da;
        vb[i] = db * db;
    }
    // sqrt of the product keeps perfectly correlated inputs at exactly +-1
    const double denom = std::sqrt(pairwise_sum(va) * pairwise_sum(vb));
    if (denom == 0.0) {
        throw NumericError("correlation undefined: zero variance input");
    }
    return pairwise_sum(cov) / denom;
}

} // namespace

double pairwise_sum(std::span<const double> v) {
    if (v.empty()) return 0.0;
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double mean(std::span<const double> v) {
    if (v.empty()) throw ValidationError("mean of empty vector");
    return pairwise_sum(v) / static_cast<double>(v.size());
}

double mae(std::span<const double> pred, std::span<const double> mos) {
    if (pred.size() != mos.size()) throw ValidationError("mae: length mismatch");
    if (pred.empty()) throw ValidationError("mae: empty input");
    std::vector<double> abs_err(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        abs_err[i] = std::abs(pred[i] - mos[i]);
    }
    return mean(abs_err);
}

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& mos) {
    return mae(std::span<const double>(pred.data(), static_cast<std::size_t>(pred.size())),
               std::span<const double>(mos.data(), static_cast<std::size_t>(mos.size())));
}

std::vector<double> fractional_ranks(std::span<const double> v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = avg;
        i = j + 1;
    }
    return ranks;
}

double srocc(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ValidationError("srocc: length mismatch");
    if (a.size() < 2) throw ValidationError("srocc: need at least 2 points");
    if (is_constant(a) || is_constant(b)) {
        throw NumericError("srocc undefined: constant input vector");
    }
    const auto ra = fractional_ranks(a);
    const auto rb = fractional_ranks(b);
    return pearson(ra, rb);
}

double srocc(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return srocc(std::span<const double>(a.data(), static_cast<std::size_t>(a.size())),
                 std::span<const double>(b.data(), static_cast<std::size_t>(b.size())));
}

CostMatrix cost_matrix(const PredictionTable& aligned, const QualityDataset& ds,
                       SplitMask rows) {
    if (!aligned.aligned) {
        throw ValidationError("cost_matrix: predictions must be aligned first");
    }
    if (aligned.values.rows() != static_cast<Eigen::Index>(ds.size())) {
        throw ValidationError("cost_matrix: prediction rows do not match dataset size");
    }
    const auto keep = ds.rows_with(rows);
    CostMatrix costs;
    costs.method_names = aligned.method_names;
    costs.values.resize(static_cast<Eigen::Index>(keep.size()), aligned.values.cols());
    costs.ids.reserve(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(keep[i]);
        costs.ids.push_back(ds[keep[i]].id);
        for (Eigen::Index c = 0; c < aligned.values.cols(); ++c) {
            costs.values(static_cast<Eigen::Index>(i), c) =
                std::abs(aligned.values(r, c) - ds[keep[i]].mos);
        }
    }
    return costs;
}

Eigen::MatrixXi rank_count_table(const CostMatrix& costs, int depth) {
    const Eigen::Index k = costs.method_count();
    if (depth < 1 || depth > k) {
        throw ValidationError("rank_count_table: depth must be in [1, K]");
    }
    Eigen::MatrixXi counts = Eigen::MatrixXi::Zero(k, depth);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(k));
    for (Eigen::Index i = 0; i < costs.rows(); ++i) {
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            if (costs.values(i, a) != costs.values(i, b)) {
                return costs.values(i, a) < costs.values(i, b);
            }
            return a < b;
        });
        for (int r = 0; r < depth; ++r) {
            counts(order[static_cast<std::size_t>(r)], r) += 1;
        }
    }
    return counts;
}

Eigen::MatrixXd method_correlation_matrix(const PredictionTable& aligned,
                                          const QualityDataset& ds, SplitMask rows) {
    if (!aligned.aligned) {
        throw ValidationError("method_correlation_matrix: predictions must be aligned first");
    }
    const auto keep = ds.rows_with(rows);
    if (keep.size() < 2) {
        throw ValidationError("method_correlation_matrix: need at least 2 rows");
    }
    const Eigen::Index k = aligned.values.cols();
    std::vector<std::vector<double>> cols(static_cast<std::size_t>(k));
    for (Eigen::Index c = 0; c < k; ++c) {
        auto& col = cols[static_cast<std::size_t>(c)];
        col.resize(keep.size());
        for (std::size_t i = 0; i < keep.size(); ++i) {
            col[i] = aligned.values(static_cast<Eigen::Index>(keep[i]), c);
        }
        if (is_constant(col)) {
            throw NumericError("method_correlation_matrix: method '" +
                               aligned.method_names[static_cast<std::size_t>(c)] +
                               "' is constant on the selected rows");
        }
    }
    Eigen::MatrixXd corr = Eigen::MatrixXd::Identity(k, k);
    for (Eigen::Index a = 0; a < k; ++a) {
        for (Eigen::Index b = a + 1; b < k; ++b) {
            const double r =
                srocc(cols[static_cast<std::size_t>(a)], cols[static_cast<std::size_t>(b)]);
            corr(a, b) = r;
            corr(b, a) = r;
        }
    }
    return corr;
}

std::vector<std::pair<double, double>>
signed_error_pairs(const PredictionTable& aligned, const QualityDataset& ds,
                   const std::string& method_a, const std::string& method_b) {
    const Eigen::Index a = aligned.method_index(method_a);
    const Eigen::Index b = aligned.method_index(method_b);
    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        pairs.emplace_back(aligned.values(r, a) - ds[i].mos, aligned.values(r, b) - ds[i].mos);
    }
    return pairs;
}

ClusterTree ward_cluster(const Eigen::MatrixXd& dist) {
    const Eigen::Index k = dist.rows();
    if (k < 2 || dist.cols() != k) {
        throw ValidationError("ward_cluster: need a square matrix with K >= 2");
    }
    for (Eigen::Index i = 0; i < k; ++i) {
        if (dist(i, i) != 0.0) throw ValidationError("ward_cluster: diagonal must be zero");
        for (Eigen::Index j = 0; j < k; ++j) {
            if (dist(i, j) < 0.0) throw ValidationError("ward_cluster: negative distance");
            if (std::abs(dist(i, j) - dist(j, i)) > 1e-12) {
                throw ValidationError("ward_cluster: matrix not symmetric");
            }
        }
    }

    ClusterTree tree;
    tree.leaf_count = static_cast<int>(k);

    // active clusters: node id, size, and current pairwise dissimilarity
    std::vector<int> node(static_cast<std::size_t>(k));
    std::vector<double> size(static_cast<std::size_t>(k), 1.0);
    std::iota(node.begin(), node.end(), 0);
    Eigen::MatrixXd d = dist;

    std::vector<bool> alive(static_cast<std::size_t>(k), true);
    int next_node = static_cast<int>(k);
    for (Eigen::Index merge = 0; merge + 1 < k; ++merge) {
        Eigen::Index bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < k; ++i) {
            if (!alive[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = i + 1; j < k; ++j) {
                if (!alive[static_cast<std::size_t>(j)]) continue;
                if (d(i, j) < best) {
                    best = d(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        const double ni = size[static_cast<std::size_t>(bi)];
        const double nj = size[static_cast<std::size_t>(bj)];
        ClusterTree::Merge m;
        m.left = node[static_cast<std::size_t>(bi)];
        m.right = node[static_cast<std::size_t>(bj)];
        m.height = best;
        m.size = static_cast<int>(ni + nj);
        tree.merges.push_back(m);

        // Lance-Williams Ward update into slot bi
        for (Eigen::Index t = 0; t < k; ++t) {
            if (!alive[static_cast<std::size_t>(t)] || t == bi || t == bj) continue;
            const double nt = size[static_cast<std::size_t>(t)];
            const double denom = ni + nj + nt;
            const double v =
                ((ni + nt) * d(bi, t) + (nj + nt) * d(bj, t) - nt * d(bi, bj)) / denom;
            d(bi, t) = v;
            d(t, bi) = v;
        }
        size[static_cast<std::size_t>(bi)] = ni + nj;
        node[static_cast<std::size_t>(bi)] = next_node++;
        alive[static_cast<std::size_t>(bj)] = false;
    }
    return tree;
}

namespace {

void write_newick_node(std::ostringstream& out, const ClusterTree& tree,
                       const std::vector<std::string>& leaf_names, int node,
                       double parent_height) {
    if (node < tree.leaf_count) {
        out << leaf_names[static_cast<std::size_t>(node)] << ':' << parent_height;
        return;
    }
    const auto& m = tree.merges[static_cast<std::size_t>(node - tree.leaf_count)];
    out << '(';
    write_newick_node(out, tree, leaf_names, m.left, m.height);
    out << ',';
    write_newick_node(out, tree, leaf_names, m.right, m.height);
    out << "):" << (parent_height - m.height);
}

} // namespace

std::string to_newick(const ClusterTree& tree, const std::vector<std::string>& leaf_names) {
    if (static_cast<int>(leaf_names.size()) != tree.leaf_count) {
        throw ValidationError("to_newick: leaf name count mismatch");
    }
    if (tree.merges.empty()) {
        return leaf_names.empty() ? ";" : leaf_names[0] + ";";
    }
    const auto& root = tree.merges.back();
    std::ostringstream out;
    out << '(';
    write_newick_node(out, tree, leaf_names, root.left, root.height);
    out << ',';
    write_newick_node(out, tree, leaf_names, root.right, root.height);
    out << ");";
    return out.str();
}

} // namespace selbench
