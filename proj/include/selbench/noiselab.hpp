#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "selbench/dataset.hpp"
#include "selbench/selection.hpp"

namespace selbench {

enum class MosDistribution { kUniform, kBeta };

// Generative description of a synthetic portfolio. Method k predicts
//   mos + bias_k + sqrt(rho)*sigma_k*g_k(x) + sqrt(1-rho)*sigma_k*eps,
// where g_k is a seeded smooth unit-variance function of the emitted
// features x and eps is standard normal. rho is the fraction of the error
// component a selector could in principle learn from x.
struct NoiseModel {
    std::vector<double> bias;
    std::vector<double> sigma;
    double rho = 0.0;
    MosDistribution mos_dist = MosDistribution::kUniform;
    double beta_a = 2.0;
    double beta_b = 2.0;
    int feature_dim = 3;
    int fourier_terms = 16;
    double fourier_bandwidth = 0.8;

    int method_count() const { return static_cast<int>(sigma.size()); }
    void validate() const;

    // Unbiased portfolio with equal noise scales.
    static NoiseModel equal_noise(int k, double sigma, double rho);
};

struct SimData {
    QualityDataset dataset; // first half train, second half test
    PredictionTable predictions; // emitted aligned (quality units, unclamped)
    FeatureTable features;
};

SimData simulate_portfolio(std::size_t n, const NoiseModel& model, std::uint64_t seed);

struct Estimate {
    double value = 0.0;
    double std_error = 0.0;
};

// Monte Carlo estimate of E[min_k |bias_k + sigma_k * eps_k|]; requires rho=0.
Estimate expected_oracle_mae(const NoiseModel& model, std::size_t trials, std::uint64_t seed);

struct SweepPoint {
    double grid_value = 0.0;
    double sbm_mae = 0.0, sbm_se = 0.0;
    double vbm_mae = 0.0, vbm_se = 0.0;
    double gap = 0.0, gap_se = 0.0;
    double ratio = 0.0, ratio_se = 0.0; // vbm/sbm
    double selector_mae = 0.0, selector_mae_se = 0.0;
    double gap_closure = 0.0, gap_closure_se = 0.0;
    bool has_selector = false;
};

struct SweepResult {
    std::string grid_name; // "sigma" or "rho"
    std::vector<SweepPoint> points;
};

// Pure-noise (rho=0) SBM/VBM gap as a function of sigma; `trials` independent
// replicates per grid point give the Monte Carlo standard errors.
SweepResult gap_vs_noise_sweep(const std::vector<double>& sigma_grid, int k, std::size_t n,
                               int trials, std::uint64_t seed, int threads = 1);

// For each rho: simulate, train the configured selector on the train half,
// report gap closure on the held-out test half, averaged over `seeds` runs.
SweepResult futility_experiment(const std::vector<double>& rho_grid,
                                const SelectorConfig& selector_config, std::size_t n, int k,
                                double sigma, int seeds, std::uint64_t seed, int threads = 1);

void write_sweep_csv(const SweepResult& sweep, const std::string& path);

} // namespace selbench
