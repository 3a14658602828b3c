#include "selbench/noiselab.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "selbench/csv.hpp"
#include "selbench/errors.hpp"
#include "selbench/metrics.hpp"
#include "selbench/parallel.hpp"
#include "selbench/rng.hpp"

namespace selbench {

namespace {

// Seeded random Fourier expansion; smooth in x, one instance per method.
struct FourierFunction {
    Eigen::MatrixXd freq;   // terms x dim
    Eigen::VectorXd phase;  // terms
    double amp = 1.0;

    static FourierFunction draw(int dim, int terms, double bandwidth, Rng& rng) {
        FourierFunction f;
        f.freq.resize(terms, dim);
        f.phase.resize(terms);
        for (int t = 0; t < terms; ++t) {
            for (int d = 0; d < dim; ++d) f.freq(t, d) = bandwidth * rng.normal();
            f.phase[t] = rng.uniform(0.0, 2.0 * std::numbers::pi);
        }
        f.amp = std::sqrt(2.0 / static_cast<double>(terms));
        return f;
    }

    double operator()(const Eigen::VectorXd& x) const {
        double s = 0.0;
        for (Eigen::Index t = 0; t < phase.size(); ++t) {
            s += std::cos(freq.row(t).dot(x) + phase[t]);
        }
        return amp * s;
    }
};

struct ReplicateStats {
    double sbm = 0.0;
    double vbm = 0.0;
};

ReplicateStats replicate_gap(int k, std::size_t n, double sigma, Rng& rng) {
    // direct error-space simulation: cost_ik = |sigma * eps_ik|
    Eigen::MatrixXd costs(static_cast<Eigen::Index>(n), k);
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
        for (int c = 0; c < k; ++c) costs(i, c) = std::abs(sigma * rng.normal());
    }
    ReplicateStats stats;
    double best_total = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
        best_total = std::min(best_total, costs.col(c).sum());
    }
    stats.sbm = best_total / static_cast<double>(n);
    stats.vbm = costs.rowwise().minCoeff().mean();
    return stats;
}

Estimate mean_and_se(const std::vector<double>& values) {
    Estimate est;
    est.value = mean(values);
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - est.value) * (v - est.value);
        est.std_error = std::sqrt(ss / (static_cast<double>(values.size()) *
                                        static_cast<double>(values.size() - 1)));
    }
    return est;
}

} // namespace

void NoiseModel::validate() const {
    if (sigma.empty() || bias.size() != sigma.size()) {
        throw ValidationError("noise model: bias and sigma must be non-empty, equal length");
    }
    for (double s : sigma) {
        if (!(s >= 0.0)) throw ValidationError("noise model: sigma must be >= 0");
    }
    if (!(rho >= 0.0 && rho <= 1.0)) {
        throw ValidationError("noise model: rho must be in [0, 1]");
    }
    if (feature_dim < 1 || fourier_terms < 1) {
        throw ValidationError("noise model: feature_dim and fourier_terms must be >= 1");
    }
    if (mos_dist == MosDistribution::kBeta && (beta_a <= 0.0 || beta_b <= 0.0)) {
        throw ValidationError("noise model: beta parameters must be > 0");
    }
}

NoiseModel NoiseModel::equal_noise(int k, double sigma, double rho) {
    if (k < 1) throw ValidationError("noise model: need at least one method");
    NoiseModel model;
    model.bias.assign(static_cast<std::size_t>(k), 0.0);
    model.sigma.assign(static_cast<std::size_t>(k), sigma);
    model.rho = rho;
    model.validate();
    return model;
}

SimData simulate_portfolio(std::size_t n, const NoiseModel& model, std::uint64_t seed) {
    model.validate();
    if (n < 1) throw ValidationError("simulate_portfolio: need n >= 1");
    const int k = model.method_count();
    const Rng base(seed);
    Rng mos_rng = base.stream(0);
    Rng feat_rng = base.stream(1);
    Rng noise_rng = base.stream(2);
    Rng fn_rng = base.stream(3);

    std::vector<FourierFunction> fns;
    fns.reserve(static_cast<std::size_t>(k));
    for (int m = 0; m < k; ++m) {
        Rng r = fn_rng.stream(static_cast<std::uint64_t>(m));
        fns.push_back(FourierFunction::draw(model.feature_dim, model.fourier_terms,
                                            model.fourier_bandwidth, r));
    }

    const auto rows = static_cast<Eigen::Index>(n);
    std::vector<Instance> instances(n);
    for (std::size_t i = 0; i < n; ++i) {
        instances[i].id = "sim_" + std::to_string(i + 1);
        instances[i].mos = model.mos_dist == MosDistribution::kUniform
                               ? mos_rng.uniform(0.0, 100.0)
                               : 100.0 * mos_rng.beta(model.beta_a, model.beta_b);
        instances[i].split = i < n / 2 ? Split::kTrain : Split::kTest;
    }

    FeatureTable features;
    features.values.resize(rows, model.feature_dim);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (int d = 0; d < model.feature_dim; ++d) features.values(i, d) = feat_rng.normal();
    }
    features.groups.push_back({"sim_features", 0, model.feature_dim});

    // predictable error component per method, normalized to unit variance
    // over the emitted sample so rho is an exact variance fraction
    Eigen::MatrixXd g(rows, k);
    for (int m = 0; m < k; ++m) {
        for (Eigen::Index i = 0; i < rows; ++i) {
            g(i, m) = fns[static_cast<std::size_t>(m)](features.values.row(i).transpose());
        }
        const double mean_g = g.col(m).mean();
        const double var_g = n > 1 ? (g.col(m).array() - mean_g).square().sum() /
                                         static_cast<double>(n - 1)
                                   : 0.0;
        if (var_g > 1e-24) {
            g.col(m) = (g.col(m).array() - mean_g) / std::sqrt(var_g);
        } else {
            g.col(m).setZero();
        }
    }

    PredictionTable preds;
    preds.aligned = true;
    preds.values.resize(rows, k);
    for (int m = 0; m < k; ++m) preds.method_names.push_back("m" + std::to_string(m + 1));
    const double w_pred = std::sqrt(model.rho);
    const double w_noise = std::sqrt(1.0 - model.rho);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (int m = 0; m < k; ++m) {
            const auto mi = static_cast<std::size_t>(m);
            preds.values(i, m) = instances[static_cast<std::size_t>(i)].mos + model.bias[mi] +
                                 w_pred * model.sigma[mi] * g(i, m) +
                                 w_noise * model.sigma[mi] * noise_rng.normal();
        }
    }

    return SimData{QualityDataset(std::move(instances)), std::move(preds), std::move(features)};
}

Estimate expected_oracle_mae(const NoiseModel& model, std::size_t trials, std::uint64_t seed) {
    model.validate();
    if (model.rho != 0.0) {
        throw ValidationError("expected_oracle_mae: model must have rho = 0");
    }
    if (trials < 1) throw ValidationError("expected_oracle_mae: need trials >= 1");
    const int k = model.method_count();
    Rng rng(seed);
    double sum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
        double mn = std::numeric_limits<double>::infinity();
        for (int m = 0; m < k; ++m) {
            const auto mi = static_cast<std::size_t>(m);
            mn = std::min(mn, std::abs(model.bias[mi] + model.sigma[mi] * rng.normal()));
        }
        sum += mn;
        sum_sq += mn * mn;
    }
    Estimate est;
    const double nt = static_cast<double>(trials);
    est.value = sum / nt;
    if (trials > 1) {
        const double var = std::max(0.0, (sum_sq - nt * est.value * est.value) / (nt - 1.0));
        est.std_error = std::sqrt(var / nt);
    }
    return est;
}

SweepResult gap_vs_noise_sweep(const std::vector<double>& sigma_grid, int k, std::size_t n,
                               int trials, std::uint64_t seed, int threads) {
    if (sigma_grid.empty()) throw ValidationError("gap_vs_noise_sweep: empty grid");
    if (k < 1 || n < 1 || trials < 1) {
        throw ValidationError("gap_vs_noise_sweep: k, n and trials must be >= 1");
    }
    SweepResult sweep;
    sweep.grid_name = "sigma";
    sweep.points.resize(sigma_grid.size());
    const Rng base(seed);
    parallel_for(sigma_grid.size(), threads, [&](std::size_t gi) {
        const double sigma = sigma_grid[gi];
        if (sigma < 0.0) throw ValidationError("gap_vs_noise_sweep: sigma must be >= 0");
        const Rng point_rng = base.stream(gi);
        std::vector<double> sbm(static_cast<std::size_t>(trials));
        std::vector<double> vbm(static_cast<std::size_t>(trials));
        std::vector<double> gap(static_cast<std::size_t>(trials));
        std::vector<double> ratio;
        for (int t = 0; t < trials; ++t) {
            Rng rng = point_rng.stream(static_cast<std::uint64_t>(t));
            const auto stats = replicate_gap(k, n, sigma, rng);
            sbm[static_cast<std::size_t>(t)] = stats.sbm;
            vbm[static_cast<std::size_t>(t)] = stats.vbm;
            gap[static_cast<std::size_t>(t)] = stats.sbm - stats.vbm;
            if (stats.sbm > 0.0) ratio.push_back(stats.vbm / stats.sbm);
        }
        SweepPoint point;
        point.grid_value = sigma;
        const auto sbm_est = mean_and_se(sbm);
        const auto vbm_est = mean_and_se(vbm);
        const auto gap_est = mean_and_se(gap);
        point.sbm_mae = sbm_est.value;
        point.sbm_se = sbm_est.std_error;
        point.vbm_mae = vbm_est.value;
        point.vbm_se = vbm_est.std_error;
        point.gap = gap_est.value;
        point.gap_se = gap_est.std_error;
        if (!ratio.empty()) {
            const auto ratio_est = mean_and_se(ratio);
            point.ratio = ratio_est.value;
            point.ratio_se = ratio_est.std_error;
        } else {
            point.ratio = std::numeric_limits<double>::quiet_NaN();
            point.ratio_se = std::numeric_limits<double>::quiet_NaN();
        }
        sweep.points[gi] = point;
    });
    return sweep;
}

SweepResult futility_experiment(const std::vector<double>& rho_grid,
                                const SelectorConfig& selector_config, std::size_t n, int k,
                                double sigma, int seeds, std::uint64_t seed, int threads) {
    if (rho_grid.empty()) throw ValidationError("futility_experiment: empty grid");
    if (seeds < 1) throw ValidationError("futility_experiment: need seeds >= 1");
    if (n < 4) throw ValidationError("futility_experiment: need n >= 4");
    for (double rho : rho_grid) {
        if (!(rho >= 0.0 && rho <= 1.0)) {
            throw ValidationError("futility_experiment: rho values must be in [0, 1]");
        }
    }
    selector_config.validate();

    SweepResult sweep;
    sweep.grid_name = "rho";
    sweep.points.resize(rho_grid.size());
    const Rng base(seed);

    // one task per (rho, seed) replicate
    const std::size_t total = rho_grid.size() * static_cast<std::size_t>(seeds);
    struct Cell {
        double sbm = 0, vbm = 0, sel = 0, closure = 0;
    };
    std::vector<Cell> cells(total);
    parallel_for(total, threads, [&](std::size_t task) {
        const std::size_t gi = task / static_cast<std::size_t>(seeds);
        const std::size_t rep = task % static_cast<std::size_t>(seeds);
        NoiseModel model = NoiseModel::equal_noise(k, sigma, rho_grid[gi]);
        const std::uint64_t sim_seed = base.stream(gi).stream(rep).seed();
        const SimData sim = simulate_portfolio(n, model, sim_seed);
        const CostMatrix costs = cost_matrix(sim.predictions, sim.dataset, SplitMask::all());

        SelectorConfig config = selector_config;
        config.seed = Rng(selector_config.seed).stream(task).seed();
        const Selector selector = train_selector(config, sim.features, costs, sim.dataset);
        const EvalReport report =
            evaluate_selector(selector, sim.features, costs, sim.predictions, sim.dataset,
                              SplitMask::only(Split::kTest));
        cells[task] = {report.sbm_mae, report.oracle_mae, report.mae, report.gap_closure};
    });

    for (std::size_t gi = 0; gi < rho_grid.size(); ++gi) {
        std::vector<double> sbm, vbm, sel, closure;
        for (int rep = 0; rep < seeds; ++rep) {
            const auto& cell = cells[gi * static_cast<std::size_t>(seeds) +
                                     static_cast<std::size_t>(rep)];
            sbm.push_back(cell.sbm);
            vbm.push_back(cell.vbm);
            sel.push_back(cell.sel);
            closure.push_back(cell.closure);
        }
        SweepPoint point;
        point.grid_value = rho_grid[gi];
        point.has_selector = true;
        const auto sbm_est = mean_and_se(sbm);
        const auto vbm_est = mean_and_se(vbm);
        const auto sel_est = mean_and_se(sel);
        const auto closure_est = mean_and_se(closure);
        point.sbm_mae = sbm_est.value;
        point.sbm_se = sbm_est.std_error;
        point.vbm_mae = vbm_est.value;
        point.vbm_se = vbm_est.std_error;
        point.selector_mae = sel_est.value;
        point.selector_mae_se = sel_est.std_error;
        point.gap_closure = closure_est.value;
        point.gap_closure_se = closure_est.std_error;
        point.gap = sbm_est.value - vbm_est.value;
        point.ratio = sbm_est.value > 0.0
                          ? vbm_est.value / sbm_est.value
                          : std::numeric_limits<double>::quiet_NaN();
        sweep.points[gi] = point;
    }
    return sweep;
}

void write_sweep_csv(const SweepResult& sweep, const std::string& path) {
    std::vector<std::string> header{sweep.grid_name, "sbm_mae",      "sbm_se",
                                    "vbm_mae",       "vbm_se",       "gap",
                                    "gap_se",        "ratio",        "ratio_se",
                                    "selector_mae",  "selector_se",  "gap_closure",
                                    "gap_closure_se"};
    std::vector<std::vector<std::string>> rows;
    rows.reserve(sweep.points.size());
    for (const auto& p : sweep.points) {
        std::vector<std::string> row{
            csv::format_number(p.grid_value), csv::format_number(p.sbm_mae),
            csv::format_number(p.sbm_se),     csv::format_number(p.vbm_mae),
            csv::format_number(p.vbm_se),     csv::format_number(p.gap),
            csv::format_number(p.gap_se),     csv::format_number(p.ratio),
            csv::format_number(p.ratio_se)};
        if (p.has_selector) {
            row.push_back(csv::format_number(p.selector_mae));
            row.push_back(csv::format_number(p.selector_mae_se));
            row.push_back(csv::format_number(p.gap_closure));
            row.push_back(csv::format_number(p.gap_closure_se));
        } else {
            row.insert(row.end(), {"", "", "", ""});
        }
        rows.push_back(std::move(row));
    }
    csv::write(path, header, rows);
}

} // namespace selbench
