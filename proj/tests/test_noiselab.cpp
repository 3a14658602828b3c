#include <doctest.h>

#include <cmath>
#include <numbers>

#include "selbench/errors.hpp"
#include "selbench/metrics.hpp"
#include "selbench/noiselab.hpp"
#include "selbench/rng.hpp"

using namespace selbench;

namespace {

constexpr double kFoldedNormalMean = 0.7978845608028654; // sqrt(2/pi)

} // namespace

TEST_SUITE("noiselab") {

TEST_CASE("noiseless portfolio reproduces mos exactly") {
    const NoiseModel model = NoiseModel::equal_noise(3, 0.0, 0.0);
    const SimData sim = simulate_portfolio(50, model, 7);
    for (Eigen::Index i = 0; i < 50; ++i) {
        for (Eigen::Index c = 0; c < 3; ++c) {
            CHECK(sim.predictions.values(i, c) ==
                  sim.dataset[static_cast<std::size_t>(i)].mos);
        }
    }
    const CostMatrix costs = cost_matrix(sim.predictions, sim.dataset, SplitMask::all());
    const OracleResult oracle = oracle_assign(costs);
    CHECK(oracle.oracle_mae == 0.0);
    CHECK(costs.values.col(single_best(costs)).mean() == 0.0);
}

TEST_CASE("simulated splits halve the sample and tables stay row-aligned") {
    const NoiseModel model = NoiseModel::equal_noise(4, 5.0, 0.3);
    const SimData sim = simulate_portfolio(101, model, 9);
    CHECK(sim.dataset.count(Split::kTrain) == 50);
    CHECK(sim.dataset.count(Split::kTest) == 51);
    CHECK(sim.predictions.values.rows() == 101);
    CHECK(sim.features.values.rows() == 101);
    CHECK(sim.predictions.aligned);
}

TEST_CASE("simulation is deterministic per seed") {
    const NoiseModel model = NoiseModel::equal_noise(3, 2.0, 0.5);
    const SimData a = simulate_portfolio(40, model, 11);
    const SimData b = simulate_portfolio(40, model, 11);
    CHECK(a.predictions.values == b.predictions.values);
    CHECK(a.features.values == b.features.values);
    const SimData c = simulate_portfolio(40, model, 12);
    CHECK(a.predictions.values != c.predictions.values);
}

TEST_CASE("pure-noise sbm mae matches the folded-normal mean") {
    const double sigma = 10.0;
    const NoiseModel model = NoiseModel::equal_noise(8, sigma, 0.0);
    const SimData sim = simulate_portfolio(20000, model, 13);
    const CostMatrix costs = cost_matrix(sim.predictions, sim.dataset, SplitMask::all());
    const int sbm = single_best(costs);
    const double sbm_mae = costs.values.col(sbm).mean();
    CHECK(sbm_mae == doctest::Approx(sigma * kFoldedNormalMean).epsilon(0.03));
}

TEST_CASE("rho=1 errors are a deterministic function of the features") {
    const NoiseModel model = NoiseModel::equal_noise(2, 4.0, 1.0);
    const SimData sim = simulate_portfolio(64, model, 17);
    // same seed, same features -> rerunning reproduces identical predictions;
    // the error column has variance sigma^2 exactly (empirical normalization)
    const Eigen::VectorXd mos = sim.dataset.mos_vector();
    for (Eigen::Index c = 0; c < 2; ++c) {
        const Eigen::VectorXd err = sim.predictions.values.col(c) - mos;
        const double mean_err = err.mean();
        const double var = (err.array() - mean_err).square().sum() / 63.0;
        CHECK(std::sqrt(var) == doctest::Approx(4.0).epsilon(1e-9));
    }
}

TEST_CASE("expected_oracle_mae matches closed forms") {
    {
        const NoiseModel model = NoiseModel::equal_noise(1, 1.0, 0.0);
        const Estimate est = expected_oracle_mae(model, 400000, 19);
        CHECK(std::abs(est.value - kFoldedNormalMean) < 3.0 * est.std_error);
        CHECK(est.std_error > 0.0);
    }
    {
        NoiseModel model = NoiseModel::equal_noise(3, 1.0, 0.0);
        model.sigma[1] = 0.0; // one perfect method
        const Estimate est = expected_oracle_mae(model, 1000, 23);
        CHECK(est.value == 0.0);
    }
}

TEST_CASE("expected_oracle_mae rejects rho > 0") {
    const NoiseModel model = NoiseModel::equal_noise(2, 1.0, 0.5);
    CHECK_THROWS_AS(expected_oracle_mae(model, 10, 1), ValidationError);
}

TEST_CASE("oracle mae is monotone non-increasing in K under shared draws") {
    Rng rng(29);
    std::vector<double> sums(8, 0.0);
    const int trials = 20000;
    for (int t = 0; t < trials; ++t) {
        double running_min = std::numeric_limits<double>::infinity();
        for (int k = 0; k < 8; ++k) {
            running_min = std::min(running_min, std::abs(rng.normal()));
            sums[static_cast<std::size_t>(k)] += running_min;
        }
    }
    for (int k = 1; k < 8; ++k) {
        CHECK(sums[static_cast<std::size_t>(k)] <= sums[static_cast<std::size_t>(k - 1)]);
    }
}

TEST_CASE("gap sweep: zero noise point has zero gap and vbm <= sbm everywhere") {
    const SweepResult sweep = gap_vs_noise_sweep({0.0, 5.0, 10.0}, 8, 500, 8, 31);
    REQUIRE(sweep.points.size() == 3);
    CHECK(sweep.points[0].gap == 0.0);
    for (const auto& p : sweep.points) {
        CHECK(p.vbm_mae <= p.sbm_mae + 1e-12);
    }
}

TEST_CASE("vbm/sbm ratio is sigma-invariant within monte carlo error") {
    const SweepResult sweep = gap_vs_noise_sweep({2.0, 8.0, 32.0}, 8, 2000, 16, 37);
    for (std::size_t a = 0; a < sweep.points.size(); ++a) {
        for (std::size_t b = a + 1; b < sweep.points.size(); ++b) {
            const double diff = std::abs(sweep.points[a].ratio - sweep.points[b].ratio);
            const double se = std::hypot(sweep.points[a].ratio_se, sweep.points[b].ratio_se);
            CHECK(diff < 4.0 * se + 1e-9);
        }
    }
}

TEST_CASE("sweep is deterministic per seed") {
    const SweepResult a = gap_vs_noise_sweep({1.0, 2.0}, 4, 300, 5, 41, 2);
    const SweepResult b = gap_vs_noise_sweep({1.0, 2.0}, 4, 300, 5, 41, 1);
    REQUIRE(a.points.size() == b.points.size());
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        CHECK(a.points[i].sbm_mae == b.points[i].sbm_mae);
        CHECK(a.points[i].vbm_mae == b.points[i].vbm_mae);
    }
}

TEST_CASE("futility: constant selector closes nothing at rho 0") {
    SelectorConfig config;
    config.model_kind = ModelKind::kConstantSbm;
    const SweepResult sweep = futility_experiment({0.0}, config, 400, 4, 8.0, 3, 43);
    REQUIRE(sweep.points.size() == 1);
    CHECK(sweep.points[0].gap_closure == 0.0);
}

TEST_CASE("futility: knn closure grows from rho 0 to rho 1") {
    SelectorConfig config;
    config.model_kind = ModelKind::kKnn;
    config.knn_k = 15;
    config.seed = 5;
    const SweepResult sweep = futility_experiment({0.0, 1.0}, config, 2000, 4, 8.0, 4, 47);
    REQUIRE(sweep.points.size() == 2);
    CHECK(std::abs(sweep.points[0].gap_closure) < 0.1);
    CHECK(sweep.points[1].gap_closure > 0.5);
    CHECK(sweep.points[1].gap_closure > sweep.points[0].gap_closure);
}

TEST_CASE("futility validates its grid") {
    SelectorConfig config;
    config.model_kind = ModelKind::kConstantSbm;
    CHECK_THROWS_AS(futility_experiment({1.5}, config, 100, 2, 1.0, 2, 1), ValidationError);
    CHECK_THROWS_AS(futility_experiment({}, config, 100, 2, 1.0, 2, 1), ValidationError);
}

TEST_CASE("beta-shaped mos draws stay in range") {
    NoiseModel model = NoiseModel::equal_noise(2, 1.0, 0.0);
    model.mos_dist = MosDistribution::kBeta;
    model.beta_a = 2.0;
    model.beta_b = 5.0;
    const SimData sim = simulate_portfolio(500, model, 53);
    double mean_mos = 0.0;
    for (const auto& inst : sim.dataset.instances()) {
        CHECK(inst.mos >= 0.0);
        CHECK(inst.mos <= 100.0);
        mean_mos += inst.mos;
    }
    mean_mos /= 500.0;
    CHECK(mean_mos == doctest::Approx(100.0 * 2.0 / 7.0).epsilon(0.15));
}

} // TEST_SUITE
