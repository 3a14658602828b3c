#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "selbench/dataset.hpp"

namespace selbench {

// Monotone-ish 5-parameter logistic mapping raw scores onto the quality
// scale: f(x) = b1*(1/2 - 1/(1+exp(b2*(x-b3)))) + b4*x + b5.
struct Logistic5Params {
    std::array<double, 5> beta{0, 0, 0, 0, 0};
    struct FitInfo {
        bool converged = false;
        int iterations = 0;
        double final_rmse = 0.0;
        int restarts_used = 0;
    } fit_info;
};

struct Logistic5Options {
    int max_iter = 500;
    double tol = 1e-10;   // relative SSE change
    int restarts = 10;    // multi-start count (first start unjittered)
    std::uint64_t seed = 0;
};

double logistic5(const std::array<double, 5>& beta, double x);

// Damped Gauss-Newton (Levenberg-Marquardt) least squares with analytic
// Jacobian and seeded multi-start; returns the best start's parameters.
Logistic5Params fit_logistic5(const Eigen::VectorXd& raw, const Eigen::VectorXd& target,
                              const Logistic5Options& opts = {});

// Elementwise curve evaluation, clamped into [lo, hi]; saturates without
// overflow for large |b2*(x-b3)|.
Eigen::VectorXd apply_logistic5(const Logistic5Params& params, const Eigen::VectorXd& raw,
                                double lo, double hi);

struct AlignOptions {
    Logistic5Options fit;
    double clamp_lo = 0.0;
    double clamp_hi = 100.0;
    bool include_val_rows = false; // also fit on val-tagged rows
    int threads = 1;
};

struct AlignResult {
    PredictionTable aligned;
    std::vector<Logistic5Params> params;
    // methods whose fitted curve is non-monotone over the observed raw range
    std::vector<std::string> monotonicity_warnings;
};

// One fit per method on train rows, applied to all rows; output aligned=true.
AlignResult align_portfolio(const PredictionTable& preds, const QualityDataset& ds,
                            const AlignOptions& opts = {});

// JSON round-trip of fitted parameters, keyed by method name.
void save_alignment_params(const std::string& path,
                           const std::vector<std::string>& method_names,
                           const std::vector<Logistic5Params>& params);
std::pair<std::vector<std::string>, std::vector<Logistic5Params>>
load_alignment_params(const std::string& path);

} // namespace selbench
