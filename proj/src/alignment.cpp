#include "selbench/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include <nlohmann/json.hpp>

#include "selbench/errors.hpp"
#include "selbench/metrics.hpp"
#include "selbench/parallel.hpp"
#include "selbench/rng.hpp"

namespace selbench {

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;
using Mat5 = Eigen::Matrix<double, 5, 5>;

// 1/(1+exp(u)) without overflow on either tail.
double stable_inv_logit(double u) {
    if (u > 0.0) {
        const double e = std::exp(-u);
        return e / (1.0 + e);
    }
    const double e = std::exp(u);
    return 1.0 / (1.0 + e);
}

double sse_of(const std::array<double, 5>& beta, const Eigen::VectorXd& x,
              const Eigen::VectorXd& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double r = logistic5(beta, x[i]) - y[i];
        s += r * r;
    }
    return s;
}

struct LmOutcome {
    std::array<double, 5> beta;
    double sse = std::numeric_limits<double>::infinity();
    bool converged = false;
    int iterations = 0;
};

LmOutcome levenberg_marquardt(std::array<double, 5> beta, const Eigen::VectorXd& x,
                              const Eigen::VectorXd& y, int max_iter, double tol) {
    const Eigen::Index n = x.size();
    Eigen::VectorXd residual(n);
    Eigen::MatrixXd jac(n, 5);

    double sse = sse_of(beta, x, y);
    double lambda = 1e-3;
    LmOutcome out;
    out.beta = beta;
    out.sse = sse;

    for (int iter = 0; iter < max_iter; ++iter) {
        out.iterations = iter + 1;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double u = beta[1] * (x[i] - beta[2]);
            const double s = stable_inv_logit(u);
            const double sp = s * (1.0 - s); // d(1/(1+e^u))/du = -s(1-s)
            residual[i] = logistic5(beta, x[i]) - y[i];
            jac(i, 0) = 0.5 - s;
            jac(i, 1) = beta[0] * sp * (x[i] - beta[2]);
            jac(i, 2) = -beta[0] * sp * beta[1];
            jac(i, 3) = x[i];
            jac(i, 4) = 1.0;
        }
        const Mat5 jtj = (jac.transpose() * jac).eval();
        const Vec5 jtr = jac.transpose() * residual;

        bool stepped = false;
        for (int attempt = 0; attempt < 40; ++attempt) {
            Mat5 damped = jtj;
            for (int d = 0; d < 5; ++d) {
                damped(d, d) += lambda * std::max(jtj(d, d), 1e-12);
            }
            const Vec5 delta = damped.ldlt().solve(-jtr);
            if (!delta.allFinite()) {
                lambda *= 10.0;
                continue;
            }
            std::array<double, 5> trial = beta;
            for (int d = 0; d < 5; ++d) trial[d] += delta[d];
            const double trial_sse = sse_of(trial, x, y);
            if (std::isfinite(trial_sse) && trial_sse <= sse) {
                const double drop = sse - trial_sse;
                beta = trial;
                const double prev = sse;
                sse = trial_sse;
                lambda = std::max(lambda / 10.0, 1e-15);
                stepped = true;
                if (drop <= tol * std::max(prev, 1e-300)) {
                    out.converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if (lambda > 1e14) break;
        }
        out.beta = beta;
        out.sse = sse;
        if (!stepped || out.converged || sse == 0.0) {
            if (!stepped || sse == 0.0) out.converged = true;
            break;
        }
    }
    return out;
}

std::array<double, 5> default_start(const Eigen::VectorXd& raw, const Eigen::VectorXd& target) {
    const double raw_min = raw.minCoeff();
    const double raw_max = raw.maxCoeff();
    const double tgt_min = target.minCoeff();
    const double tgt_max = target.maxCoeff();
    double corr = 0.0;
    try {
        corr = srocc(raw, target);
    } catch (const Error&) {
        corr = 1.0; // constant target: direction is irrelevant
    }
    std::array<double, 5> beta;
    beta[0] = std::max(tgt_max - tgt_min, 1e-3);
    beta[1] = (corr >= 0.0 ? 1.0 : -1.0) * 4.0 / std::max(raw_max - raw_min, 1e-12);
    beta[2] = [&] {
        std::vector<double> sorted(raw.data(), raw.data() + raw.size());
        std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
        return sorted[sorted.size() / 2];
    }();
    beta[3] = 0.0;
    beta[4] = target.mean();
    return beta;
}

} // namespace

double logistic5(const std::array<double, 5>& beta, double x) {
    const double u = beta[1] * (x - beta[2]);
    return beta[0] * (0.5 - stable_inv_logit(u)) + beta[3] * x + beta[4];
}

Logistic5Params fit_logistic5(const Eigen::VectorXd& raw, const Eigen::VectorXd& target,
                              const Logistic5Options& opts) {
    if (raw.size() != target.size()) {
        throw ValidationError("fit_logistic5: raw/target length mismatch");
    }
    if (raw.size() < 5) {
        throw ValidationError("fit_logistic5: need at least 5 points, got " +
                              std::to_string(raw.size()));
    }
    if (raw.maxCoeff() == raw.minCoeff()) {
        throw ValidationError("fit_logistic5: raw scores are constant, degenerate input");
    }
    if (!raw.allFinite() || !target.allFinite()) {
        throw ValidationError("fit_logistic5: non-finite input");
    }
    if (opts.restarts < 1) throw ValidationError("fit_logistic5: restarts must be >= 1");

    const auto base = default_start(raw, target);
    const Rng seed_rng(opts.seed);
    const double raw_range = raw.maxCoeff() - raw.minCoeff();
    const double tgt_range = std::max(target.maxCoeff() - target.minCoeff(), 1e-3);
    Eigen::VectorXd sorted_raw = raw;
    std::sort(sorted_raw.data(), sorted_raw.data() + sorted_raw.size());
    const auto raw_quantile = [&](double q) {
        const auto idx = static_cast<Eigen::Index>(q * static_cast<double>(raw.size() - 1));
        return sorted_raw[idx];
    };

    LmOutcome best;
    int restarts_used = 0;
    const double n = static_cast<double>(raw.size());
    for (int start = 0; start < opts.restarts; ++start) {
        std::array<double, 5> init = base;
        if (start > 0) {
            // Restarts explore both logistic directions and a wide beta2 /
            // beta3 spread; pure +-50% jitter of the base cannot escape the
            // wrong-direction basin when the linear and logistic parts fight.
            Rng rng = seed_rng.stream(static_cast<std::uint64_t>(start));
            const double direction = (start % 2 == 0) ? -1.0 : 1.0;
            init[0] = tgt_range * rng.uniform(0.3, 1.5);
            init[1] = direction * std::copysign(base[1], 1.0) *
                      std::exp(rng.uniform(-1.5, 1.5));
            init[2] = raw_quantile(rng.uniform(0.1, 0.9));
            init[3] = tgt_range / std::max(raw_range, 1e-12) * rng.uniform(-1.0, 1.0);
            init[4] = target.mean() + 0.3 * tgt_range * rng.uniform(-1.0, 1.0);
        }
        const LmOutcome outcome =
            levenberg_marquardt(init, raw, target, opts.max_iter, opts.tol);
        ++restarts_used;
        if (outcome.sse < best.sse) best = outcome;
        if (std::sqrt(best.sse / n) < 1e-8) break; // already a near-exact fit
    }

    Logistic5Params params;
    params.beta = best.beta;
    params.fit_info.converged = best.converged;
    params.fit_info.iterations = best.iterations;
    params.fit_info.final_rmse = std::sqrt(best.sse / n);
    params.fit_info.restarts_used = restarts_used;
    for (double b : params.beta) {
        if (!std::isfinite(b)) throw NumericError("fit_logistic5: fit diverged to non-finite parameters");
    }
    return params;
}

Eigen::VectorXd apply_logistic5(const Logistic5Params& params, const Eigen::VectorXd& raw,
                                double lo, double hi) {
    for (double b : params.beta) {
        if (!std::isfinite(b)) throw ValidationError("apply_logistic5: non-finite parameters");
    }
    if (!(lo <= hi)) throw ValidationError("apply_logistic5: clamp lo must be <= hi");
    Eigen::VectorXd out(raw.size());
    for (Eigen::Index i = 0; i < raw.size(); ++i) {
        out[i] = std::clamp(logistic5(params.beta, raw[i]), lo, hi);
    }
    return out;
}

AlignResult align_portfolio(const PredictionTable& preds, const QualityDataset& ds,
                            const AlignOptions& opts) {
    if (preds.aligned) {
        throw ValidationError("align_portfolio: table is already aligned");
    }
    if (preds.values.rows() != static_cast<Eigen::Index>(ds.size())) {
        throw ValidationError("align_portfolio: prediction rows do not match dataset size");
    }
    SplitMask fit_mask = SplitMask::only(Split::kTrain);
    if (opts.include_val_rows) fit_mask.val = true;
    const auto fit_rows = ds.rows_with(fit_mask);
    if (fit_rows.empty()) {
        throw ValidationError("align_portfolio: no train rows to fit on");
    }

    Eigen::VectorXd target(static_cast<Eigen::Index>(fit_rows.size()));
    for (std::size_t i = 0; i < fit_rows.size(); ++i) {
        target[static_cast<Eigen::Index>(i)] = ds[fit_rows[i]].mos;
    }

    const Eigen::Index k = preds.values.cols();
    AlignResult result;
    result.aligned.method_names = preds.method_names;
    result.aligned.values.resizeLike(preds.values);
    result.aligned.aligned = true;
    result.params.resize(static_cast<std::size_t>(k));

    std::vector<std::string> warnings(static_cast<std::size_t>(k));
    parallel_for(static_cast<std::size_t>(k), opts.threads, [&](std::size_t m) {
        const auto c = static_cast<Eigen::Index>(m);
        Eigen::VectorXd raw(static_cast<Eigen::Index>(fit_rows.size()));
        for (std::size_t i = 0; i < fit_rows.size(); ++i) {
            raw[static_cast<Eigen::Index>(i)] =
                preds.values(static_cast<Eigen::Index>(fit_rows[i]), c);
        }
        Logistic5Options fit_opts = opts.fit;
        fit_opts.seed = Rng(opts.fit.seed).stream(m).seed();
        try {
            result.params[m] = fit_logistic5(raw, target, fit_opts);
        } catch (const ValidationError& e) {
            throw ValidationError("align_portfolio: method '" + preds.method_names[m] +
                                  "': " + e.what());
        } catch (const Error& e) {
            throw NumericError("align_portfolio: method '" + preds.method_names[m] +
                               "': " + e.what());
        }
        result.aligned.values.col(c) =
            apply_logistic5(result.params[m], preds.values.col(c), opts.clamp_lo, opts.clamp_hi);

        // report (not enforce) non-monotonicity over the observed raw range
        Eigen::VectorXd sorted_raw = raw;
        std::sort(sorted_raw.data(), sorted_raw.data() + sorted_raw.size());
        bool up = false, down = false;
        for (Eigen::Index i = 1; i < sorted_raw.size(); ++i) {
            if (sorted_raw[i] == sorted_raw[i - 1]) continue;
            const double a = logistic5(result.params[m].beta, sorted_raw[i - 1]);
            const double b = logistic5(result.params[m].beta, sorted_raw[i]);
            if (b > a + 1e-12) up = true;
            if (b < a - 1e-12) down = true;
        }
        if (up && down) warnings[m] = preds.method_names[m];
    });
    for (auto& w : warnings) {
        if (!w.empty()) result.monotonicity_warnings.push_back(std::move(w));
    }
    return result;
}

void save_alignment_params(const std::string& path,
                           const std::vector<std::string>& method_names,
                           const std::vector<Logistic5Params>& params) {
    if (method_names.size() != params.size()) {
        throw ValidationError("save_alignment_params: name/params count mismatch");
    }
    nlohmann::json doc = nlohmann::json::object();
    for (std::size_t m = 0; m < params.size(); ++m) {
        doc[method_names[m]] = {
            {"beta", params[m].beta},
            {"converged", params[m].fit_info.converged},
            {"iterations", params[m].fit_info.iterations},
            {"final_rmse", params[m].fit_info.final_rmse},
            {"restarts_used", params[m].fit_info.restarts_used},
        };
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << doc.dump(2) << '\n';
}

std::pair<std::vector<std::string>, std::vector<Logistic5Params>>
load_alignment_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
    std::vector<std::string> names;
    std::vector<Logistic5Params> params;
    for (const auto& [name, entry] : doc.items()) {
        Logistic5Params p;
        const auto beta = entry.at("beta").get<std::vector<double>>();
        if (beta.size() != 5) {
            throw ValidationError(path + ": method '" + name + "' needs 5 beta values");
        }
        std::copy(beta.begin(), beta.end(), p.beta.begin());
        p.fit_info.converged = entry.value("converged", false);
        p.fit_info.iterations = entry.value("iterations", 0);
        p.fit_info.final_rmse = entry.value("final_rmse", 0.0);
        p.fit_info.restarts_used = entry.value("restarts_used", 0);
        names.push_back(name);
        params.push_back(p);
    }
    return {std::move(names), std::move(params)};
}

} // namespace selbench
