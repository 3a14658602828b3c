#include "selbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "selbench/csv.hpp"
#include "selbench/errors.hpp"

namespace selbench {

namespace {

constexpr int kBundleFormatVersion = 1;

std::vector<double> column_on_rows(const Eigen::MatrixXd& values,
                                   const std::vector<std::size_t>& rows, Eigen::Index col) {
    std::vector<double> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[i] = values(static_cast<Eigen::Index>(rows[i]), col);
    }
    return out;
}

} // namespace

FeatureTable SelectorBundle::transform(const FeatureTable& raw) const {
    if (reductions.empty()) return raw;
    return apply_feature_reductions(raw, reductions);
}

void SelectorBundle::save(const std::string& path) const {
    nlohmann::json doc{{"format", "selbench-selector-bundle"},
                       {"version", kBundleFormatVersion},
                       {"selector", selector.to_json()}};
    doc["feature_reductions"] =
        reductions.empty() ? nlohmann::json() : reductions_to_json(reductions);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << doc.dump(2) << '\n';
}

SelectorBundle SelectorBundle::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
    if (doc.value("format", "") != "selbench-selector-bundle") {
        throw ValidationError(path + ": unrecognized selector bundle format");
    }
    if (doc.value("version", -1) != kBundleFormatVersion) {
        throw ValidationError(path + ": unknown selector bundle version");
    }
    SelectorBundle bundle;
    bundle.selector = Selector::from_json(doc.at("selector"));
    if (!doc.at("feature_reductions").is_null()) {
        bundle.reductions = reductions_from_json(doc.at("feature_reductions"));
    }
    return bundle;
}

ClusterDistance cluster_distance_from_string(const std::string& s) {
    if (s == "one_minus_srocc") return ClusterDistance::kOneMinusSrocc;
    if (s == "one_minus_abs_srocc") return ClusterDistance::kOneMinusAbsSrocc;
    throw ValidationError("unknown cluster distance '" + s +
                          "' (expected one_minus_srocc or one_minus_abs_srocc)");
}

BenchmarkReport run_benchmark(const PredictionTable& aligned, const QualityDataset& ds,
                              const BenchmarkOptions& opts, const SelectorBundle* bundle,
                              const FeatureTable* raw_features) {
    if (!aligned.aligned) throw ValidationError("benchmark: predictions must be aligned");
    const auto rows = ds.rows_with(opts.rows);
    if (rows.size() < 2) throw ValidationError("benchmark: need at least 2 rows in split '" +
                                               opts.split_name + "'");
    const CostMatrix costs = cost_matrix(aligned, ds, opts.rows);
    const Eigen::Index k = costs.method_count();
    const int depth = std::min<int>(opts.rank_depth, static_cast<int>(k));

    BenchmarkReport report;
    report.split_name = opts.split_name;
    report.rank_depth = depth;
    report.evaluated_rows = rows.size();
    report.method_names = aligned.method_names;

    const Eigen::MatrixXi ranks = rank_count_table(costs, depth);
    const Eigen::VectorXd mos = ds.mos_vector(rows);
    for (Eigen::Index c = 0; c < k; ++c) {
        MethodRow row;
        row.name = aligned.method_names[static_cast<std::size_t>(c)];
        const auto col = column_on_rows(aligned.values, rows, c);
        try {
            row.mae = mae(std::span<const double>(col),
                          std::span<const double>(mos.data(),
                                                  static_cast<std::size_t>(mos.size())));
            row.srocc = srocc(std::span<const double>(col),
                              std::span<const double>(mos.data(),
                                                      static_cast<std::size_t>(mos.size())));
        } catch (const NumericError& e) {
            throw NumericError("benchmark: method '" + row.name + "': " + e.what());
        }
        for (int r = 0; r < depth; ++r) row.rank_counts.push_back(ranks(c, r));
        report.methods.push_back(std::move(row));
    }

    report.oracle = oracle_assign(costs);
    report.sbm_index = single_best(costs);
    {
        MethodRow vbm;
        vbm.name = "virtual_best";
        vbm.mae = report.oracle.oracle_mae;
        std::vector<double> assembled(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            assembled[i] = aligned.values(static_cast<Eigen::Index>(rows[i]),
                                          report.oracle.picks[i]);
        }
        vbm.srocc = srocc(std::span<const double>(assembled),
                          std::span<const double>(mos.data(),
                                                  static_cast<std::size_t>(mos.size())));
        vbm.rank_counts.assign(static_cast<std::size_t>(depth), 0);
        vbm.rank_counts[0] = static_cast<int>(rows.size());
        report.virtual_best = std::move(vbm);
    }

    report.correlation = method_correlation_matrix(aligned, ds, opts.rows);
    Eigen::MatrixXd dist(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        for (Eigen::Index j = 0; j < k; ++j) {
            const double c = report.correlation(i, j);
            dist(i, j) = opts.cluster_distance == ClusterDistance::kOneMinusSrocc
                             ? 1.0 - c
                             : 1.0 - std::abs(c);
        }
        dist(i, i) = 0.0;
    }
    if (k >= 2) {
        report.newick = to_newick(ward_cluster(dist), aligned.method_names);
    }

    if (bundle != nullptr) {
        if (raw_features == nullptr) {
            throw ValidationError("benchmark: a selector was given but no features");
        }
        const FeatureTable transformed = bundle->transform(*raw_features);
        const CostMatrix all_costs = cost_matrix(aligned, ds, SplitMask::all());
        report.selector_eval = evaluate_selector(bundle->selector, transformed, all_costs,
                                                 aligned, ds, opts.rows);
    }
    return report;
}

nlohmann::json benchmark_to_json(const BenchmarkReport& report) {
    nlohmann::json methods = nlohmann::json::array();
    auto row_to_json = [&](const MethodRow& row) {
        return nlohmann::json{{"method", row.name},
                              {"srocc", row.srocc},
                              {"mae", row.mae},
                              {"rank_counts", row.rank_counts}};
    };
    for (const auto& row : report.methods) methods.push_back(row_to_json(row));

    nlohmann::json corr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < report.correlation.rows(); ++i) {
        std::vector<double> r(static_cast<std::size_t>(report.correlation.cols()));
        for (Eigen::Index j = 0; j < report.correlation.cols(); ++j) {
            r[static_cast<std::size_t>(j)] = report.correlation(i, j);
        }
        corr.push_back(std::move(r));
    }

    const double sbm_mae = report.methods[static_cast<std::size_t>(report.sbm_index)].mae;
    nlohmann::json doc{
        {"split", report.split_name},
        {"evaluated_rows", report.evaluated_rows},
        {"rank_depth", report.rank_depth},
        {"methods", std::move(methods)},
        {"virtual_best", row_to_json(report.virtual_best)},
        {"sbm_method", report.method_names[static_cast<std::size_t>(report.sbm_index)]},
        {"vbm_sbm_mae_ratio", sbm_mae > 0.0 ? report.virtual_best.mae / sbm_mae : 0.0},
        {"oracle_pick_counts", report.oracle.pick_counts},
        {"correlation", std::move(corr)},
        {"cluster_newick", report.newick},
    };
    if (report.selector_eval) {
        doc["selector"] = eval_report_to_json(*report.selector_eval, report.method_names);
    }
    return doc;
}

void write_benchmark_csv(const BenchmarkReport& report, const std::string& out_dir) {
    {
        std::vector<std::string> header{"method", "srocc", "mae"};
        for (int r = 0; r < report.rank_depth; ++r) {
            header.push_back("rank" + std::to_string(r + 1));
        }
        std::vector<std::vector<std::string>> rows;
        auto push_row = [&](const MethodRow& row) {
            std::vector<std::string> cells{row.name, csv::format_number(row.srocc),
                                           csv::format_number(row.mae)};
            for (int c : row.rank_counts) cells.push_back(std::to_string(c));
            rows.push_back(std::move(cells));
        };
        for (const auto& row : report.methods) push_row(row);
        push_row(report.virtual_best);
        csv::write(out_dir + "/method_table.csv", header, rows);
    }
    {
        // Table-2 shape: per-method pick counts for SBM / VBM / AS
        std::vector<std::string> header{"method", "sbm", "vbm"};
        if (report.selector_eval) header.push_back("as");
        std::vector<std::vector<std::string>> rows;
        for (std::size_t m = 0; m < report.method_names.size(); ++m) {
            std::vector<std::string> cells{report.method_names[m]};
            cells.push_back(static_cast<int>(m) == report.sbm_index
                                ? std::to_string(report.evaluated_rows)
                                : "0");
            cells.push_back(std::to_string(report.oracle.pick_counts[m]));
            if (report.selector_eval) {
                cells.push_back(std::to_string(report.selector_eval->pick_counts[m]));
            }
            rows.push_back(std::move(cells));
        }
        std::vector<std::string> mae_row{"MAE"};
        std::vector<std::string> srocc_row{"SROCC"};
        const auto& sbm = report.methods[static_cast<std::size_t>(report.sbm_index)];
        mae_row.push_back(csv::format_number(sbm.mae));
        srocc_row.push_back(csv::format_number(sbm.srocc));
        mae_row.push_back(csv::format_number(report.virtual_best.mae));
        srocc_row.push_back(csv::format_number(report.virtual_best.srocc));
        if (report.selector_eval) {
            mae_row.push_back(csv::format_number(report.selector_eval->mae));
            srocc_row.push_back(csv::format_number(report.selector_eval->srocc));
        }
        rows.push_back(std::move(mae_row));
        rows.push_back(std::move(srocc_row));
        csv::write(out_dir + "/selection_table.csv", header, rows);
    }
    {
        std::vector<std::string> header{"method"};
        header.insert(header.end(), report.method_names.begin(), report.method_names.end());
        std::vector<std::vector<std::string>> rows;
        for (Eigen::Index i = 0; i < report.correlation.rows(); ++i) {
            std::vector<std::string> cells{report.method_names[static_cast<std::size_t>(i)]};
            for (Eigen::Index j = 0; j < report.correlation.cols(); ++j) {
                cells.push_back(csv::format_number(report.correlation(i, j)));
            }
            rows.push_back(std::move(cells));
        }
        csv::write(out_dir + "/correlation.csv", header, rows);
    }
    if (!report.newick.empty()) {
        std::ofstream out(out_dir + "/cluster.newick");
        if (!out) throw IoError("cannot write file: " + out_dir + "/cluster.newick");
        out << report.newick << '\n';
    }
}

void write_scatter_csv(const PredictionTable& aligned, const QualityDataset& ds,
                       const std::string& method_a, const std::string& method_b,
                       const std::string& path) {
    const auto pairs = signed_error_pairs(aligned, ds, method_a, method_b);
    std::vector<std::vector<std::string>> rows;
    rows.reserve(pairs.size());
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        rows.push_back({ds[i].id, csv::format_number(pairs[i].first),
                        csv::format_number(pairs[i].second)});
    }
    csv::write(path, {"id", "err_" + method_a, "err_" + method_b}, rows);
}

namespace {

struct Series {
    std::string label;
    std::string color;
    std::vector<double> y;
};

std::string format_axis(double v) {
    std::ostringstream out;
    out.precision(4);
    out << v;
    return out.str();
}

} // namespace

std::string sweep_to_svg(const SweepResult& sweep, const std::string& title) {
    const int width = 640, height = 420;
    const int ml = 70, mr = 20, mt = 40, mb = 50;
    const double plot_w = width - ml - mr;
    const double plot_h = height - mt - mb;

    std::vector<double> xs;
    for (const auto& p : sweep.points) xs.push_back(p.grid_value);

    std::vector<Series> series;
    series.push_back({"sbm_mae", "#d62728", {}});
    series.push_back({"vbm_mae", "#1f77b4", {}});
    bool any_selector = false;
    for (const auto& p : sweep.points) any_selector = any_selector || p.has_selector;
    if (any_selector) series.push_back({"selector_mae", "#2ca02c", {}});
    for (const auto& p : sweep.points) {
        series[0].y.push_back(p.sbm_mae);
        series[1].y.push_back(p.vbm_mae);
        if (any_selector) series[2].y.push_back(p.selector_mae);
    }

    double x_min = xs.empty() ? 0.0 : *std::min_element(xs.begin(), xs.end());
    double x_max = xs.empty() ? 1.0 : *std::max_element(xs.begin(), xs.end());
    if (x_min == x_max) {
        x_min -= 0.5;
        x_max += 0.5;
    }
    double y_min = 0.0, y_max = 0.0;
    for (const auto& s : series) {
        for (double v : s.y) {
            if (std::isfinite(v)) y_max = std::max(y_max, v);
        }
    }
    if (y_max == y_min) y_max = 1.0;
    y_max *= 1.05;

    auto px = [&](double x) { return ml + (x - x_min) / (x_max - x_min) * plot_w; };
    auto py = [&](double y) { return mt + plot_h - (y - y_min) / (y_max - y_min) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << title << "</text>\n";

    for (int t = 0; t <= 4; ++t) {
        const double fy = y_min + (y_max - y_min) * t / 4.0;
        const double fx = x_min + (x_max - x_min) * t / 4.0;
        svg << "<line x1=\"" << ml << "\" y1=\"" << py(fy) << "\" x2=\"" << width - mr
            << "\" y2=\"" << py(fy) << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << ml - 8 << "\" y=\"" << py(fy) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << format_axis(fy) << "</text>\n";
        svg << "<text x=\"" << px(fx) << "\" y=\"" << height - mb + 18
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
            << format_axis(fx) << "</text>\n";
    }
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << mt + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + plot_h << "\" x2=\"" << width - mr
        << "\" y2=\"" << mt + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << sweep.grid_name << "</text>\n";

    int legend_y = mt + 6;
    for (const auto& s : series) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            svg << px(xs[i]) << ',' << py(s.y[i]) << ' ';
        }
        svg << "\"/>\n";
        for (std::size_t i = 0; i < xs.size(); ++i) {
            if (!std::isfinite(s.y[i])) continue;
            svg << "<circle cx=\"" << px(xs[i]) << "\" cy=\"" << py(s.y[i])
                << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
        }
        svg << "<rect x=\"" << width - mr - 130 << "\" y=\"" << legend_y
            << "\" width=\"12\" height=\"12\" fill=\"" << s.color << "\"/>\n";
        svg << "<text x=\"" << width - mr - 112 << "\" y=\"" << legend_y + 10
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << s.label << "</text>\n";
        legend_y += 18;
    }
    svg << "</svg>\n";
    return svg.str();
}

SweepResult read_sweep_csv(const std::string& path) {
    const csv::Table table = csv::read(path);
    if (table.cols() < 9) {
        throw ValidationError(path + ": not a sweep CSV (too few columns)");
    }
    SweepResult sweep;
    sweep.grid_name = table.header[0];
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        SweepPoint p;
        p.grid_value = csv::parse_number(table, r, 0);
        p.sbm_mae = csv::parse_number(table, r, 1);
        p.sbm_se = csv::parse_number(table, r, 2);
        p.vbm_mae = csv::parse_number(table, r, 3);
        p.vbm_se = csv::parse_number(table, r, 4);
        p.gap = csv::parse_number(table, r, 5);
        p.gap_se = csv::parse_number(table, r, 6);
        p.ratio = csv::parse_number(table, r, 7);
        p.ratio_se = csv::parse_number(table, r, 8);
        if (table.cols() >= 13 && !table.rows[r][9].empty()) {
            p.has_selector = true;
            p.selector_mae = csv::parse_number(table, r, 9);
            p.selector_mae_se = csv::parse_number(table, r, 10);
            p.gap_closure = csv::parse_number(table, r, 11);
            p.gap_closure_se = csv::parse_number(table, r, 12);
        }
        sweep.points.push_back(p);
    }
    return sweep;
}

} // namespace selbench
