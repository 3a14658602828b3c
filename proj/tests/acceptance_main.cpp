// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Criterion 9 needs externally supplied KonIQ-style data files and is skipped
// unless SELBENCH_KONIQ_DIR is set (see README).

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "selbench/alignment.hpp"
#include "selbench/csv.hpp"
#include "selbench/dataset.hpp"
#include "selbench/features.hpp"
#include "selbench/metrics.hpp"
#include "selbench/noiselab.hpp"
#include "selbench/parallel.hpp"
#include "selbench/rng.hpp"
#include "selbench/selection.hpp"

using namespace selbench;

namespace {

struct CriterionCheck {
    bool ok = true;
    std::ostringstream detail;

    void require(bool condition, const std::string& message) {
        if (!condition) {
            ok = false;
            if (detail.tellp() > 0) detail << "; ";
            detail << message;
        }
    }
};

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v) {
    std::ostringstream out;
    out.precision(6);
    out << v;
    return out.str();
}

// ---- criterion 1: oracle dominance -----------------------------------------

void criterion_oracle_dominance(CriterionCheck& check) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(1001);
    for (int rep = 0; rep < 1000; ++rep) {
        const int n = 1 + static_cast<int>(rng.below(200));
        const int k = 1 + static_cast<int>(rng.below(8));
        CostMatrix costs;
        costs.values.resize(n, k);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < k; ++c) costs.values(i, c) = rng.uniform(0.0, 50.0);
        }
        for (int c = 0; c < k; ++c) costs.method_names.push_back("m" + std::to_string(c));
        const OracleResult oracle = oracle_assign(costs);
        for (int c = 0; c < k; ++c) {
            std::vector<double> col(costs.values.col(c).data(),
                                    costs.values.col(c).data() + n);
            check.require(oracle.oracle_mae <= mean(col),
                          "oracle above method mean in rep " + std::to_string(rep));
        }
    }
    // constructed dominance: equality must be exact
    Rng dom_rng(1002);
    for (int rep = 0; rep < 20; ++rep) {
        const int n = 2 + static_cast<int>(dom_rng.below(100));
        const int k = 2 + static_cast<int>(dom_rng.below(7));
        CostMatrix costs;
        costs.values.resize(n, k);
        for (int i = 0; i < n; ++i) {
            const double base = dom_rng.uniform(0.0, 10.0);
            costs.values(i, 0) = base;
            for (int c = 1; c < k; ++c) {
                costs.values(i, c) = base + dom_rng.uniform(0.0, 5.0);
            }
        }
        for (int c = 0; c < k; ++c) costs.method_names.push_back("m" + std::to_string(c));
        const OracleResult oracle = oracle_assign(costs);
        std::vector<double> col(costs.values.col(0).data(), costs.values.col(0).data() + n);
        check.require(oracle.oracle_mae == mean(col),
                      "dominance equality not exact in rep " + std::to_string(rep));
    }
    const double secs = elapsed_seconds(start);
    check.require(secs < 10.0, "runtime " + fmt(secs) + "s exceeds 10s");
    check.detail << "1000 random + 20 dominance matrices in " << fmt(secs) << "s";
}

// ---- criterion 2: rank-table conservation ----------------------------------

void criterion_rank_conservation(CriterionCheck& check) {
    Rng rng(2001);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 1 + static_cast<int>(rng.below(150));
        const int k = 1 + static_cast<int>(rng.below(8));
        CostMatrix costs;
        costs.values.resize(n, k);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < k; ++c) {
                costs.values(i, c) = std::floor(rng.uniform(0.0, 7.0)); // plant ties
            }
        }
        for (int c = 0; c < k; ++c) costs.method_names.push_back("m" + std::to_string(c));
        const Eigen::MatrixXi counts = rank_count_table(costs, k);
        for (int r = 0; r < k; ++r) {
            check.require(counts.col(r).sum() == n, "rank column sum mismatch");
        }
        for (int c = 0; c < k; ++c) {
            check.require(counts.row(c).sum() == n, "method row sum mismatch");
        }
    }
    check.detail << "100 random matrices, exact column and row conservation";
}

// ---- criterion 3: logistic alignment recovery --------------------------------

void criterion_logistic_recovery(CriterionCheck& check) {
    const auto start = std::chrono::steady_clock::now();
    Rng rng(3001);
    double worst = 0.0;
    for (int draw = 0; draw < 20; ++draw) {
        std::array<double, 5> truth;
        truth[0] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(20.0, 80.0);
        truth[1] = rng.uniform(0.02, 0.3);
        truth[2] = rng.uniform(20.0, 80.0);
        truth[3] = rng.uniform(-0.5, 1.0);
        truth[4] = rng.uniform(0.0, 60.0);

        Eigen::VectorXd raw(200), target(200);
        for (int i = 0; i < 200; ++i) {
            raw[i] = rng.uniform(0.0, 100.0);
            target[i] = logistic5(truth, raw[i]);
        }
        Logistic5Options opts;
        opts.restarts = 10;
        opts.tol = 1e-14;
        opts.seed = static_cast<std::uint64_t>(draw);
        const Logistic5Params fit = fit_logistic5(raw, target, opts);
        double sse = 0.0;
        for (int i = 0; i < 200; ++i) {
            const double r = logistic5(fit.beta, raw[i]) - target[i];
            sse += r * r;
        }
        const double rmse = std::sqrt(sse / 200.0);
        worst = std::max(worst, rmse);
        check.require(rmse < 1e-6,
                      "draw " + std::to_string(draw) + " rmse " + fmt(rmse));
        check.require(fit.fit_info.restarts_used <= 10, "used more than 10 restarts");
    }
    const double secs = elapsed_seconds(start);
    check.require(secs < 30.0, "runtime " + fmt(secs) + "s exceeds 30s");
    check.detail << "20 draws, worst prediction rmse " << fmt(worst) << " in "
                 << fmt(secs) << "s";
}

// ---- criterion 4: srocc correctness ------------------------------------------

double srocc_bruteforce(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    auto ranks = [n](const std::vector<double>& v) {
        std::vector<double> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            double below = 0.0, equal = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                if (v[j] < v[i]) below += 1.0;
                if (j != i && v[j] == v[i]) equal += 1.0;
            }
            r[i] = 1.0 + below + equal / 2.0;
        }
        return r;
    };
    const auto ra = ranks(a);
    const auto rb = ranks(b);
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double cov = 0.0, va = 0.0, vb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        cov += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    return cov / std::sqrt(va * vb);
}

void criterion_srocc(CriterionCheck& check) {
    Rng rng(4001);
    int tested = 0;
    while (tested < 100) {
        const int n = 8 + static_cast<int>(rng.below(80));
        std::vector<double> a(static_cast<std::size_t>(n));
        std::vector<double> b(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            a[static_cast<std::size_t>(i)] = std::floor(rng.uniform(0.0, 9.0));
            b[static_cast<std::size_t>(i)] = std::floor(rng.uniform(0.0, 9.0));
        }
        const bool const_a = std::all_of(a.begin(), a.end(),
                                         [&](double v) { return v == a[0]; });
        const bool const_b = std::all_of(b.begin(), b.end(),
                                         [&](double v) { return v == b[0]; });
        if (const_a || const_b) continue;
        ++tested;
        const double lib = srocc(std::span<const double>(a), std::span<const double>(b));
        const double oracle = srocc_bruteforce(a, b);
        check.require(std::abs(lib - oracle) < 1e-12,
                      "oracle mismatch " + fmt(std::abs(lib - oracle)));

        std::vector<double> cubed;
        for (double v : a) cubed.push_back(v * v * v);
        std::vector<double> exped;
        for (double v : b) exped.push_back(std::exp(v / 100.0));
        check.require(std::abs(srocc(std::span<const double>(cubed),
                                     std::span<const double>(b)) -
                               lib) < 1e-12,
                      "cube transform moved srocc");
        check.require(std::abs(srocc(std::span<const double>(a),
                                     std::span<const double>(exped)) -
                               lib) < 1e-12,
                      "exp transform moved srocc");
    }
    check.detail << "100 tied random vectors vs brute-force oracle, 1e-12";
}

// ---- criterion 5: feature reduction arithmetic --------------------------------

void criterion_feature_reduction(CriterionCheck& check) {
    const auto start = std::chrono::steady_clock::now();
    const std::vector<std::pair<std::string, Eigen::Index>> groups = {
        {"BIQI", 18},    {"BLIINDS-II", 24}, {"BRISQUE", 36}, {"CORNIA", 20000},
        {"DIIVINE", 88}, {"HOSA", 14700},    {"SSEQ", 12},    {"KonCept512", 1536}};
    Eigen::Index total = 0;
    FeatureTable features;
    for (const auto& [name, dim] : groups) {
        features.groups.push_back({name, total, dim});
        total += dim;
    }
    check.require(total == 36414, "group dims do not sum to 36414");

    const Eigen::Index n = 120;
    Rng rng(5001);
    features.values.resize(n, total);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index c = 0; c < total; ++c) features.values(i, c) = rng.normal();
    }
    std::vector<Instance> instances;
    for (Eigen::Index i = 0; i < n; ++i) {
        instances.push_back({"i" + std::to_string(i), 50.0,
                             i < 112 ? Split::kTrain : Split::kTest});
    }
    const QualityDataset ds(instances);

    ReduceOptions opts;
    opts.cap = 100;
    const ReducedFeatures reduced = reduce_feature_groups(features, ds, opts);
    check.require(reduced.table.dim() == 478,
                  "reduced width " + std::to_string(reduced.table.dim()) + " != 478");

    double worst_orth = 0.0;
    for (const auto& red : reduced.reductions) {
        if (!red.pca) continue;
        const Eigen::MatrixXd gram = red.pca->components * red.pca->components.transpose();
        const double err =
            (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
        worst_orth = std::max(worst_orth, err);
    }
    check.require(worst_orth < 1e-10, "orthonormality error " + fmt(worst_orth));

    // full-rank reconstruction oracle
    Rng recon_rng(5002);
    Eigen::MatrixXd x(50, 10);
    for (Eigen::Index i = 0; i < 50; ++i) {
        for (Eigen::Index c = 0; c < 10; ++c) x(i, c) = recon_rng.normal();
    }
    const PcaModel full = pca_fit(x, 10);
    const Eigen::MatrixXd recon =
        (pca_transform(full, x) * full.components).rowwise() + full.mean.transpose();
    const double recon_err = (recon - x).cwiseAbs().maxCoeff();
    check.require(recon_err < 1e-8, "reconstruction error " + fmt(recon_err));

    check.detail << "478 columns, orthonormality " << fmt(worst_orth) << ", reconstruction "
                 << fmt(recon_err) << ", " << fmt(elapsed_seconds(start)) << "s";
}

// ---- criterion 6: noise-lab quantitative checks -------------------------------

// Independent quadrature route for E[min_k |eps_k|]: composite Simpson on
// erfc(x/sqrt(2))^k over [0, 8] (the tail term is ~1e-120 at x=8 for k=8).
double quadrature_min_folded_normal(int k) {
    const double a = 0.0, b = 8.0;
    const int steps = 80000; // even
    const double h = (b - a) / steps;
    auto f = [k](double x) { return std::pow(std::erfc(x / std::sqrt(2.0)), k); };
    double sum = f(a) + f(b);
    for (int i = 1; i < steps; ++i) {
        sum += f(a + i * h) * (i % 2 == 0 ? 2.0 : 4.0);
    }
    return sum * h / 3.0;
}

void criterion_noiselab(CriterionCheck& check) {
    const auto start = std::chrono::steady_clock::now();

    const Estimate k1 = expected_oracle_mae(NoiseModel::equal_noise(1, 1.0, 0.0), 1000000, 61);
    const double sqrt_2_over_pi = std::sqrt(2.0 / M_PI);
    check.require(std::abs(k1.value - sqrt_2_over_pi) < 3.0 * k1.std_error,
                  "K=1 estimate " + fmt(k1.value) + " vs " + fmt(sqrt_2_over_pi) +
                      " (3se=" + fmt(3.0 * k1.std_error) + ")");

    const double quad8 = quadrature_min_folded_normal(8);
    check.require(std::abs(quad8 - 0.14141012566312655) < 1e-9,
                  "quadrature oracle drifted: " + fmt(quad8));
    const Estimate k8 = expected_oracle_mae(NoiseModel::equal_noise(8, 1.0, 0.0), 1000000, 67);
    check.require(std::abs(k8.value - quad8) < 3.0 * k8.std_error,
                  "K=8 estimate " + fmt(k8.value) + " vs quadrature " + fmt(quad8) +
                      " (3se=" + fmt(3.0 * k8.std_error) + ")");

    const SweepResult sweep =
        gap_vs_noise_sweep({2.0, 8.0, 32.0}, 8, 2000, 16, 71, default_thread_count());
    for (std::size_t a = 0; a < sweep.points.size(); ++a) {
        for (std::size_t b = a + 1; b < sweep.points.size(); ++b) {
            const double diff = std::abs(sweep.points[a].ratio - sweep.points[b].ratio);
            const double se = std::hypot(sweep.points[a].ratio_se, sweep.points[b].ratio_se);
            check.require(diff < 4.0 * se,
                          "ratio not sigma-invariant: |" + fmt(sweep.points[a].ratio) +
                              " - " + fmt(sweep.points[b].ratio) + "| vs 4se " +
                              fmt(4.0 * se));
        }
    }
    const double secs = elapsed_seconds(start);
    check.require(secs < 60.0, "runtime " + fmt(secs) + "s exceeds 60s");
    check.detail << "K=1 " << fmt(k1.value) << ", K=8 " << fmt(k8.value) << " vs quad "
                 << fmt(quad8) << ", ratio drift ok, " << fmt(secs) << "s";
}

// ---- criterion 7: selector futility -------------------------------------------

void criterion_futility(CriterionCheck& check) {
    const auto start = std::chrono::steady_clock::now();
    const int threads = default_thread_count();

    std::vector<SelectorConfig> zoo;
    {
        SelectorConfig c;
        c.model_kind = ModelKind::kConstantSbm;
        zoo.push_back(c);
    }
    {
        SelectorConfig c;
        c.model_kind = ModelKind::kKnn;
        c.knn_k = 15;
        zoo.push_back(c);
    }
    {
        SelectorConfig c;
        c.model_kind = ModelKind::kDecisionForest;
        c.forest_trees = 50;
        c.forest_depth = 8;
        c.forest_min_leaf = 5;
        zoo.push_back(c);
    }
    {
        SelectorConfig c;
        c.model_kind = ModelKind::kMultinomialLinear;
        c.epochs = 200;
        zoo.push_back(c);
    }
    {
        SelectorConfig c;
        c.model_kind = ModelKind::kErrorRegressors;
        c.epochs = 300;
        c.hidden = {8};
        zoo.push_back(c);
    }

    for (std::size_t z = 0; z < zoo.size(); ++z) {
        SelectorConfig config = zoo[z];
        config.seed = 7000 + z;
        const SweepResult sweep =
            futility_experiment({0.0}, config, 5000, 8, 10.0, 10, 7100 + z, threads);
        const double closure = sweep.points[0].gap_closure;
        check.require(closure >= -0.05 && closure <= 0.10,
                      std::string(to_string(config.model_kind)) + " closure at rho=0 is " +
                          fmt(closure));
        check.detail << to_string(config.model_kind) << "@rho0=" << fmt(closure) << " ";
    }

    SelectorConfig knn;
    knn.model_kind = ModelKind::kKnn;
    knn.knn_k = 15;
    knn.seed = 7200;
    const SweepResult planted =
        futility_experiment({1.0}, knn, 5000, 8, 10.0, 10, 7300, threads);
    const double closure1 = planted.points[0].gap_closure;
    check.require(closure1 >= 0.8, "knn closure at rho=1 is " + fmt(closure1));
    check.detail << "knn@rho1=" << fmt(closure1);

    const double secs = elapsed_seconds(start);
    check.require(secs < 600.0, "runtime " + fmt(secs) + "s exceeds 10min");
    check.detail << " in " << fmt(secs) << "s";
}

// ---- criterion 8: end-to-end determinism ---------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(SELBENCH_CLI_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string strip_generated_at(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.find("generated_at") != std::string::npos) continue;
        out += line;
        out += '\n';
    }
    return out;
}

void test_util_write(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
}

void criterion_determinism(CriterionCheck& check) {
    namespace fs = std::filesystem;
    const fs::path root = fs::temp_directory_path() / "selbench_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const auto file = [&](const std::string& name) { return (root / name).string(); };

    Rng rng(8001);
    std::string mos = "id,mos,split\n";
    std::string preds = "id,alpha,beta\n";
    std::string feats = "id,f1,f2,f3\n";
    for (int i = 0; i < 160; ++i) {
        const double m = rng.uniform(0.0, 100.0);
        const std::string id = "x" + std::to_string(i);
        mos += id + "," + csv::format_number(m) + "," + (i % 4 == 3 ? "test" : "train") + "\n";
        preds += id + "," + csv::format_number(0.6 * m + 12.0 + rng.normal()) + "," +
                 csv::format_number(9.5 * std::sqrt(m) + rng.normal()) + "\n";
        feats += id + "," + csv::format_number(rng.normal()) + "," +
                 csv::format_number(rng.normal()) + "," + csv::format_number(rng.normal()) +
                 "\n";
    }
    test_util_write(file("mos.csv"), mos);
    test_util_write(file("preds.csv"), preds);
    test_util_write(file("features_alpha.csv"), feats);
    test_util_write(file("manifest.json"),
                    R"([{"method":"alpha","dim":3,"path":"features_alpha.csv"}])");

    nlohmann::json config;
    config["data"] = {{"mos", file("mos.csv")},
                      {"predictions", file("preds.csv")},
                      {"features", file("manifest.json")}};
    config["alignment"] = {{"seed", 3}, {"restarts", 6}};
    nlohmann::json space = nlohmann::json::array();
    for (int k : {1, 3, 5}) {
        space.push_back({{"model_kind", "knn"}, {"hyperparams", {{"k", k}}}});
    }
    space.push_back({{"model_kind", "constant_sbm"}});
    config["select"] = {{"space", space}, {"budget", 4}, {"folds", 3}, {"seed", 5},
                        {"eval_split", "test"}};
    config["simulate"] = {{"sweep",
                           {{"sigma_grid", {1.0, 4.0}}, {"k", 4}, {"n", 400}, {"trials", 6},
                            {"seed", 9}}}};
    config["output"] = {{"dir", file("out")}};
    test_util_write(file("config.json"), config.dump(2));

    const std::string cfg = " --config " + file("config.json");
    check.require(run_cli("align" + cfg + " --out " + file("a1")) == 0, "align run 1 failed");
    check.require(run_cli("align" + cfg + " --out " + file("a2") + " --threads 3") == 0,
                  "align run 2 failed");
    check.require(read_file(file("a1/aligned_predictions.csv")) ==
                      read_file(file("a2/aligned_predictions.csv")),
                  "aligned csv differs");
    check.require(read_file(file("a1/alignment_params.json")) ==
                      read_file(file("a2/alignment_params.json")),
                  "params json differs");
    check.require(strip_generated_at(read_file(file("a1/align_report.json"))) ==
                      strip_generated_at(read_file(file("a2/align_report.json"))),
                  "align report differs beyond generated_at");

    check.require(run_cli("select search" + cfg + " --out " + file("s1")) == 0,
                  "search run 1 failed");
    check.require(run_cli("select search" + cfg + " --out " + file("s2") + " --threads 3") ==
                      0,
                  "search run 2 failed");
    check.require(read_file(file("s1/selector.json")) == read_file(file("s2/selector.json")),
                  "selector json differs");
    check.require(read_file(file("s1/search_log.csv")) == read_file(file("s2/search_log.csv")),
                  "search log differs");
    check.require(read_file(file("s1/picks.csv")) == read_file(file("s2/picks.csv")),
                  "picks differ");
    check.require(strip_generated_at(read_file(file("s1/search_report.json"))) ==
                      strip_generated_at(read_file(file("s2/search_report.json"))),
                  "search report differs beyond generated_at");

    check.require(run_cli("simulate sweep" + cfg + " --out " + file("w1")) == 0,
                  "sweep run 1 failed");
    check.require(run_cli("simulate sweep" + cfg + " --out " + file("w2") + " --threads 3") ==
                      0,
                  "sweep run 2 failed");
    check.require(read_file(file("w1/sweep.csv")) == read_file(file("w2/sweep.csv")),
                  "sweep csv differs");
    check.require(strip_generated_at(read_file(file("w1/sweep_report.json"))) ==
                      strip_generated_at(read_file(file("w2/sweep_report.json"))),
                  "sweep report differs beyond generated_at");

    fs::remove_all(root);
    check.detail << "align, select search, simulate sweep byte-identical across reruns";
}

// ---- criterion 9: optional KonIQ-10k reference-table reproduction ---------------

bool criterion_koniq(CriterionCheck& check) {
    const char* dir = std::getenv("SELBENCH_KONIQ_DIR");
    if (dir == nullptr) return false;
    const std::string base = dir;
    const LoadedData data =
        load_dataset(base + "/mos.csv", base + "/predictions.csv", std::nullopt);
    AlignOptions opts;
    opts.threads = default_thread_count();
    const AlignResult aligned = align_portfolio(data.predictions, data.dataset, opts);
    const CostMatrix costs =
        cost_matrix(aligned.aligned, data.dataset, SplitMask::only(Split::kTest));
    const Eigen::MatrixXi ranks = rank_count_table(costs, 3);
    const auto rows = data.dataset.rows_with(SplitMask::only(Split::kTest));
    const Eigen::VectorXd mos = data.dataset.mos_vector(rows);

    // Reported test-set values for the eight methods (SROCC, MAE, rank-1 count)
    struct Expected {
        const char* method;
        double srocc, mae;
        int rank1;
    };
    const std::vector<Expected> expected = {
        {"BIQI", 0.559, 8.339, 187},      {"BLIINDS-II", 0.585, 9.239, 185},
        {"BRISQUE", 0.705, 8.224, 176},   {"CORNIA", 0.780, 7.308, 217},
        {"DIIVINE", 0.589, 8.180, 169},   {"HOSA", 0.805, 6.792, 220},
        {"SSEQ", 0.604, 9.403, 179},      {"KonCept512", 0.921, 4.154, 682},
    };
    for (const auto& exp : expected) {
        const Eigen::Index m = aligned.aligned.method_index(exp.method);
        std::vector<double> col(rows.size());
        for (std::size_t i = 0; i < rows.size(); ++i) {
            col[i] = aligned.aligned.values(static_cast<Eigen::Index>(rows[i]), m);
        }
        const double got_srocc = srocc(std::span<const double>(col),
                                       std::span<const double>(mos.data(),
                                                               static_cast<std::size_t>(
                                                                   mos.size())));
        const double got_mae = mae(std::span<const double>(col),
                                   std::span<const double>(mos.data(),
                                                           static_cast<std::size_t>(
                                                               mos.size())));
        check.require(std::abs(got_srocc - exp.srocc) <= 0.02,
                      std::string(exp.method) + " srocc " + fmt(got_srocc));
        check.require(std::abs(got_mae - exp.mae) <= 0.15,
                      std::string(exp.method) + " mae " + fmt(got_mae));
        check.require(std::abs(ranks(m, 0) - exp.rank1) <= 25,
                      std::string(exp.method) + " rank1 " + std::to_string(ranks(m, 0)));
    }
    check.detail << "table reproduction within tolerances";
    return true;
}

} // namespace

int main() {
    struct Entry {
        int id;
        std::string name;
        std::function<void(CriterionCheck&)> fn;
    };
    const std::vector<Entry> criteria = {
        {1, "oracle dominance property suite", criterion_oracle_dominance},
        {2, "rank-table conservation", criterion_rank_conservation},
        {3, "logistic alignment recovery", criterion_logistic_recovery},
        {4, "srocc correctness vs brute-force oracle", criterion_srocc},
        {5, "feature reduction arithmetic (478 columns)", criterion_feature_reduction},
        {6, "noise-lab quantitative checks", criterion_noiselab},
        {7, "selector futility at rho=0 / recovery at rho=1", criterion_futility},
        {8, "end-to-end determinism of align/search/simulate", criterion_determinism},
    };

    int failures = 0;
    for (const auto& entry : criteria) {
        CriterionCheck check;
        try {
            entry.fn(check);
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail << "exception: " << e.what();
        }
        std::cout << (check.ok ? "PASS" : "FAIL") << "  criterion " << entry.id << ": "
                  << entry.name << " -- " << check.detail.str() << "\n";
        if (!check.ok) ++failures;
    }

    {
        CriterionCheck check;
        bool ran = false;
        try {
            ran = criterion_koniq(check);
        } catch (const std::exception& e) {
            check.ok = false;
            check.detail << "exception: " << e.what();
            ran = true;
        }
        if (!ran) {
            std::cout << "SKIP  criterion 9: KonIQ-10k reference-table reproduction (set "
                         "SELBENCH_KONIQ_DIR to run against user-supplied data)\n";
        } else {
            std::cout << (check.ok ? "PASS" : "FAIL") << "  criterion 9: KonIQ-10k "
                      << "reference-table reproduction -- " << check.detail.str() << "\n";
            if (!check.ok) ++failures;
        }
    }

    if (failures > 0) {
        std::cout << failures << " criterion(s) failed\n";
        return 1;
    }
    std::cout << "all criteria passed\n";
    return 0;
}
