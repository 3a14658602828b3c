#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "selbench/alignment.hpp"
#include "selbench/csv.hpp"
#include "selbench/dataset.hpp"
#include "selbench/errors.hpp"
#include "selbench/features.hpp"
#include "selbench/metrics.hpp"
#include "selbench/noiselab.hpp"
#include "selbench/parallel.hpp"
#include "selbench/report.hpp"
#include "selbench/rng.hpp"
#include "selbench/run_config.hpp"
#include "selbench/selection.hpp"
#include "selbench/version.hpp"

namespace {

using namespace selbench;
using nlohmann::json;

struct GlobalArgs {
    std::string config_path;
    std::optional<std::string> out_override;
    std::optional<std::uint64_t> seed_override;
    int threads = default_thread_count();
    std::optional<std::string> format_override;
};

std::string iso_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm_utc{};
    gmtime_r(&t, &tm_utc);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    return buf;
}

// generated_at is the one field excluded from byte-identity across reruns
json provenance(const RunConfig& config) {
    return {{"toolkit_version", kVersion},
            {"config_hash", config.config_hash},
            {"generated_at", iso_timestamp()}};
}

void write_json_file(const std::string& path, const json& doc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << doc.dump(2) << '\n';
}

RunConfig load_config(GlobalArgs& args) {
    if (args.config_path.empty()) {
        throw ValidationError("missing --config <path>");
    }
    RunConfig config = parse_run_config(args.config_path);
    if (args.out_override) config.output.dir = *args.out_override;
    if (args.format_override) {
        config.output.json = false;
        config.output.csv = false;
        config.output.svg = false;
        std::stringstream ss(*args.format_override);
        std::string fmt;
        while (std::getline(ss, fmt, ',')) {
            if (fmt == "json") config.output.json = true;
            else if (fmt == "csv") config.output.csv = true;
            else if (fmt == "svg") config.output.svg = true;
            else throw ValidationError("unknown format '" + fmt + "'");
        }
    }
    if (args.seed_override) {
        config.alignment.fit.seed = *args.seed_override;
        config.split.seed = *args.seed_override;
        config.select.seed = *args.seed_override;
        if (config.simulate_sweep) config.simulate_sweep->seed = *args.seed_override;
        if (config.simulate_futility) config.simulate_futility->seed = *args.seed_override;
        if (config.simulate_oracle_mae) config.simulate_oracle_mae->seed = *args.seed_override;
    }
    std::filesystem::create_directories(config.output.dir);
    return config;
}

struct PipelineData {
    QualityDataset dataset;
    PredictionTable aligned;
    std::vector<Logistic5Params> params;
    std::vector<std::string> warnings;
    std::optional<FeatureTable> features;
};

const RunConfig::Data& require_data(const RunConfig& config) {
    if (!config.data) throw ValidationError("config: this command needs a 'data' section");
    return *config.data;
}

// Shared front half of every data-driven command: load, optional rescale,
// align on train rows, then the val re-tag and portfolio exclusions.
PipelineData load_and_align(const RunConfig& config, int threads, bool allow_prealigned) {
    const auto& data_cfg = require_data(config);
    LoadedData loaded = load_dataset(data_cfg.mos, data_cfg.predictions, data_cfg.features);
    PipelineData pipe{std::move(loaded.dataset), {}, {}, {}, std::move(loaded.features)};

    if (config.scale.rescale) {
        pipe.dataset = scale_mos(pipe.dataset, config.scale.lo, config.scale.hi);
    }

    if (data_cfg.aligned) {
        if (!allow_prealigned) {
            throw ValidationError("align: input predictions are declared aligned already");
        }
        pipe.aligned = std::move(loaded.predictions);
        pipe.aligned.aligned = true;
    } else {
        AlignOptions opts = config.alignment;
        opts.threads = threads;
        AlignResult result = align_portfolio(loaded.predictions, pipe.dataset, opts);
        pipe.aligned = std::move(result.aligned);
        pipe.params = std::move(result.params);
        pipe.warnings = std::move(result.monotonicity_warnings);
    }

    if (config.split.val_count > 0) {
        pipe.dataset = split_dataset(pipe.dataset, config.split.seed, config.split.val_count);
    }

    for (const auto& method : data_cfg.exclude) {
        pipe.aligned = exclude_method(pipe.aligned, method);
        if (pipe.features) *pipe.features = exclude_method(*pipe.features, method);
    }
    return pipe;
}

SplitMask mask_from_name(const std::string& name) {
    if (name == "all") return SplitMask::all();
    return SplitMask::only(split_from_string(name));
}

int cmd_align(GlobalArgs& args) {
    const RunConfig config = load_config(args);
    const auto& data_cfg = require_data(config);
    if (data_cfg.aligned) {
        throw ValidationError("align: input predictions are declared aligned already");
    }
    const PipelineData pipe = load_and_align(config, args.threads, false);
    const std::string out = config.output.dir;

    write_predictions_csv(pipe.aligned, pipe.dataset, out + "/aligned_predictions.csv");
    save_alignment_params(out + "/alignment_params.json", pipe.aligned.method_names,
                          pipe.params);
    json report{{"provenance", provenance(config)},
                {"methods", pipe.aligned.method_names},
                {"rows", pipe.dataset.size()},
                {"monotonicity_warnings", pipe.warnings}};
    write_json_file(out + "/align_report.json", report);
    std::cout << "aligned " << pipe.aligned.method_names.size() << " methods over "
              << pipe.dataset.size() << " instances -> " << out << "\n";
    return 0;
}

int cmd_benchmark(GlobalArgs& args) {
    const RunConfig config = load_config(args);
    const PipelineData pipe = load_and_align(config, args.threads, true);
    const std::string out = config.output.dir;

    BenchmarkOptions opts;
    opts.rows = mask_from_name(config.benchmark.split);
    opts.split_name = config.benchmark.split;
    opts.rank_depth = config.benchmark.rank_depth;
    opts.cluster_distance = config.benchmark.cluster_distance;
    opts.scatter_pairs = config.benchmark.scatter_pairs;

    std::optional<SelectorBundle> bundle;
    if (config.benchmark.selector_path) {
        bundle = SelectorBundle::load(*config.benchmark.selector_path);
        if (!pipe.features) {
            throw ValidationError("benchmark: selector evaluation needs a feature manifest");
        }
    }
    const BenchmarkReport report =
        run_benchmark(pipe.aligned, pipe.dataset, opts, bundle ? &*bundle : nullptr,
                      pipe.features ? &*pipe.features : nullptr);

    if (config.output.json) {
        json doc = benchmark_to_json(report);
        doc["provenance"] = provenance(config);
        write_json_file(out + "/benchmark.json", doc);
    }
    if (config.output.csv) {
        write_benchmark_csv(report, out);
        for (const auto& [a, b] : opts.scatter_pairs) {
            write_scatter_csv(pipe.aligned, pipe.dataset, a, b,
                              out + "/scatter_" + a + "_" + b + ".csv");
        }
    }
    std::cout << "benchmark on split '" << report.split_name << "': sbm="
              << report.method_names[static_cast<std::size_t>(report.sbm_index)]
              << " mae=" << report.methods[static_cast<std::size_t>(report.sbm_index)].mae
              << " vbm mae=" << report.virtual_best.mae << " -> " << out << "\n";
    return 0;
}

struct SelectorTrainingInput {
    PipelineData pipe;
    FeatureTable reduced;
    std::vector<GroupReduction> reductions;
    CostMatrix costs;
};

SelectorTrainingInput prepare_selector_input(const RunConfig& config, int threads) {
    SelectorTrainingInput input{load_and_align(config, threads, true), {}, {}, {}};
    if (!input.pipe.features) {
        throw ValidationError("select: this command needs a feature manifest in 'data'");
    }
    if (config.reduction.enabled) {
        ReduceOptions opts;
        opts.cap = config.reduction.cap;
        opts.standardize_before_pca = config.reduction.standardize;
        ReducedFeatures reduced = reduce_feature_groups(*input.pipe.features,
                                                        input.pipe.dataset, opts);
        input.reduced = std::move(reduced.table);
        input.reductions = std::move(reduced.reductions);
        bool any_pca = false;
        for (const auto& r : input.reductions) any_pca = any_pca || r.pca.has_value();
        if (!any_pca) input.reductions.clear(); // identity; keep the bundle lean
    } else {
        input.reduced = *input.pipe.features;
    }
    input.costs = cost_matrix(input.pipe.aligned, input.pipe.dataset, SplitMask::all());
    return input;
}

json eval_to_json_with_names(const EvalReport& report, const std::vector<std::string>& names) {
    return eval_report_to_json(report, names);
}

int cmd_select(GlobalArgs& args, const std::string& subaction) {
    const RunConfig config = load_config(args);
    const std::string out = config.output.dir;

    if (subaction == "predict") {
        if (!config.select.selector_path) {
            throw ValidationError("select predict: config needs select.selector");
        }
        const auto& data_cfg = require_data(config);
        if (!data_cfg.features) {
            throw ValidationError("select predict: config needs data.features");
        }
        const SelectorBundle bundle = SelectorBundle::load(*config.select.selector_path);
        const auto [raw, ids] = load_features(*data_cfg.features);
        const FeatureTable transformed = bundle.transform(raw);
        std::vector<std::vector<std::string>> rows;
        rows.reserve(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const int pick = bundle.selector.select(
                transformed.values.row(static_cast<Eigen::Index>(i)).transpose());
            rows.push_back(
                {ids[i], bundle.selector.method_names()[static_cast<std::size_t>(pick)]});
        }
        csv::write(out + "/picks.csv", {"id", "chosen_method"}, rows);
        std::cout << "predicted picks for " << ids.size() << " instances -> " << out << "\n";
        return 0;
    }

    SelectorTrainingInput input = prepare_selector_input(config, args.threads);
    const SplitMask eval_mask = mask_from_name(config.select.eval_split);

    auto finish = [&](const Selector& selector, const std::vector<GroupReduction>& reductions,
                      json extra, const std::string& what) {
        SelectorBundle bundle{selector, reductions};
        bundle.save(out + "/selector.json");
        const EvalReport eval =
            evaluate_selector(selector, input.reduced, input.costs, input.pipe.aligned,
                              input.pipe.dataset, eval_mask);
        json doc{{"provenance", provenance(config)},
                 {"eval_split", config.select.eval_split},
                 {"config", selector_config_to_json(selector.config())},
                 {"evaluation", eval_to_json_with_names(eval, selector.method_names())}};
        for (auto& [key, value] : extra.items()) doc[key] = value;
        write_json_file(out + "/" + what + "_report.json", doc);
        if (config.output.csv) {
            write_picks_csv(eval, selector.method_names(), out + "/picks.csv");
        }
        std::cout << what << ": " << selector.config().describe()
                  << " mae=" << eval.mae << " gap_closure=" << eval.gap_closure << " -> "
                  << out << "\n";
    };

    if (subaction == "train") {
        if (!config.select.train) {
            throw ValidationError("select train: config needs select.train");
        }
        const Selector selector = train_selector(*config.select.train, input.reduced,
                                                 input.costs, input.pipe.dataset);
        finish(selector, input.reductions, json::object(), "train");
        return 0;
    }
    if (subaction == "search") {
        if (config.select.space.empty()) {
            throw ValidationError("select search: config needs a non-empty select.space");
        }
        const SearchResult result =
            search_selectors(config.select.space, config.select.budget, config.select.folds,
                             input.reduced, input.costs, input.pipe.dataset,
                             config.select.seed, args.threads);
        if (config.output.csv) {
            std::vector<std::vector<std::string>> rows;
            for (const auto& entry : result.log) {
                rows.push_back({std::to_string(entry.config_index), entry.config.describe(),
                                csv::format_number(entry.cv_mae), entry.error});
            }
            csv::write(out + "/search_log.csv", {"index", "config", "cv_mae", "error"}, rows);
        }
        json extra{{"best_index", result.best_index},
                   {"evaluated_configs", result.log.size()}};
        finish(result.selector, input.reductions, extra, "search");
        return 0;
    }
    if (subaction == "evaluate") {
        if (!config.select.selector_path) {
            throw ValidationError("select evaluate: config needs select.selector");
        }
        const SelectorBundle bundle = SelectorBundle::load(*config.select.selector_path);
        const FeatureTable transformed = bundle.transform(*input.pipe.features);
        const EvalReport eval =
            evaluate_selector(bundle.selector, transformed, input.costs, input.pipe.aligned,
                              input.pipe.dataset, eval_mask);
        json doc{{"provenance", provenance(config)},
                 {"eval_split", config.select.eval_split},
                 {"config", selector_config_to_json(bundle.selector.config())},
                 {"evaluation", eval_to_json_with_names(eval, bundle.selector.method_names())}};
        write_json_file(out + "/eval_report.json", doc);
        if (config.output.csv) {
            write_picks_csv(eval, bundle.selector.method_names(), out + "/picks.csv");
        }
        std::cout << "evaluate: mae=" << eval.mae << " gap_closure=" << eval.gap_closure
                  << " -> " << out << "\n";
        return 0;
    }
    throw ValidationError("unknown select subcommand '" + subaction + "'");
}

int cmd_simulate(GlobalArgs& args, const std::string& subaction) {
    const RunConfig config = load_config(args);
    const std::string out = config.output.dir;

    if (subaction == "sweep") {
        if (!config.simulate_sweep) {
            throw ValidationError("simulate sweep: config needs simulate.sweep");
        }
        const auto& s = *config.simulate_sweep;
        const SweepResult sweep =
            gap_vs_noise_sweep(s.sigma_grid, s.k, s.n, s.trials, s.seed, args.threads);
        write_sweep_csv(sweep, out + "/sweep.csv");
        if (config.output.svg) {
            std::ofstream svg(out + "/sweep.svg");
            svg << sweep_to_svg(sweep, "pure-noise SBM/VBM gap");
        }
        if (config.output.json) {
            // reference value for interpreting measured portfolios: the
            // VBM/SBM MAE ratio a K-method portfolio shows when the entire
            // oracle gap is unpredictable noise
            const Estimate oracle =
                expected_oracle_mae(NoiseModel::equal_noise(s.k, 1.0, 0.0), 400000,
                                    Rng(s.seed).stream(987).seed());
            const double folded_mean = std::sqrt(2.0 / 3.14159265358979323846);
            json doc{{"provenance", provenance(config)},
                     {"grid", s.sigma_grid},
                     {"k", s.k},
                     {"n", s.n},
                     {"trials", s.trials},
                     {"pure_noise_vbm_sbm_ratio", oracle.value / folded_mean}};
            write_json_file(out + "/sweep_report.json", doc);
        }
        std::cout << "sweep over " << s.sigma_grid.size() << " sigma values -> " << out << "\n";
        return 0;
    }
    if (subaction == "futility") {
        if (!config.simulate_futility) {
            throw ValidationError("simulate futility: config needs simulate.futility");
        }
        const auto& f = *config.simulate_futility;
        const SweepResult sweep = futility_experiment(f.rho_grid, f.selector, f.n, f.k,
                                                      f.sigma, f.seeds, f.seed, args.threads);
        write_sweep_csv(sweep, out + "/futility.csv");
        if (config.output.svg) {
            std::ofstream svg(out + "/futility.svg");
            svg << sweep_to_svg(sweep, "selector gap closure vs predictability");
        }
        if (config.output.json) {
            json doc{{"provenance", provenance(config)},
                     {"grid", f.rho_grid},
                     {"selector", selector_config_to_json(f.selector)},
                     {"n", f.n},
                     {"k", f.k},
                     {"sigma", f.sigma},
                     {"seeds", f.seeds}};
            write_json_file(out + "/futility_report.json", doc);
        }
        std::cout << "futility over " << f.rho_grid.size() << " rho values -> " << out << "\n";
        return 0;
    }
    if (subaction == "oracle-mae") {
        if (!config.simulate_oracle_mae) {
            throw ValidationError("simulate oracle-mae: config needs simulate.oracle_mae");
        }
        const auto& o = *config.simulate_oracle_mae;
        NoiseModel model;
        model.bias = o.bias.empty() ? std::vector<double>(static_cast<std::size_t>(o.k), 0.0)
                                    : o.bias;
        model.sigma = o.sigma.empty()
                          ? std::vector<double>(static_cast<std::size_t>(o.k), o.sigma_scale)
                          : o.sigma;
        model.rho = 0.0;
        const Estimate est = expected_oracle_mae(model, o.trials, o.seed);
        json doc{{"provenance", provenance(config)},
                 {"value", est.value},
                 {"std_error", est.std_error},
                 {"trials", o.trials},
                 {"bias", model.bias},
                 {"sigma", model.sigma}};
        write_json_file(out + "/oracle_mae.json", doc);
        std::cout << "expected oracle mae = " << est.value << " +- " << est.std_error
                  << " -> " << out << "\n";
        return 0;
    }
    throw ValidationError("unknown simulate subcommand '" + subaction + "'");
}

int cmd_report(GlobalArgs& args) {
    const RunConfig config = load_config(args);
    if (!config.report) throw ValidationError("report: config needs a 'report' section");
    const SweepResult sweep = read_sweep_csv(config.report->input);
    const std::string out = config.output.dir;
    std::ofstream svg(out + "/report.svg");
    if (!svg) throw IoError("cannot write file: " + out + "/report.svg");
    svg << sweep_to_svg(sweep, config.report->title);
    std::cout << "rendered " << config.report->input << " -> " << out << "/report.svg\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"per-instance algorithm selection benchmark toolkit"};
    app.require_subcommand(1);
    app.fallthrough(); // global options may follow the subcommand

    GlobalArgs args;
    app.add_option("--config", args.config_path, "JSON config file")->required(false);
    std::string out_dir;
    app.add_option("--out", out_dir, "output directory (overrides config)");
    std::int64_t seed = -1;
    app.add_option("--seed", seed, "seed override for all seeded stages");
    app.add_option("--threads", args.threads, "worker thread cap");
    std::string format;
    app.add_option("--format", format, "comma-separated output formats: json,csv,svg");

    auto* align_cmd = app.add_subcommand("align", "fit per-method logistic alignment");
    auto* benchmark_cmd = app.add_subcommand("benchmark", "method table, SBM/VBM/AS reports");
    auto* select_cmd = app.add_subcommand("select", "train/search/predict/evaluate selectors");
    std::string select_action;
    select_cmd->add_option("action", select_action, "train|search|predict|evaluate")
        ->required();
    auto* simulate_cmd = app.add_subcommand("simulate", "synthetic noise-portfolio studies");
    std::string simulate_action;
    simulate_cmd->add_option("action", simulate_action, "sweep|futility|oracle-mae")
        ->required();
    auto* report_cmd = app.add_subcommand("report", "render a sweep CSV as SVG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e); // --help
        app.exit(e);
        return 2;
    }

    if (!out_dir.empty()) args.out_override = out_dir;
    if (seed >= 0) args.seed_override = static_cast<std::uint64_t>(seed);
    if (!format.empty()) args.format_override = format;
    if (args.threads < 1) args.threads = 1;

    try {
        if (align_cmd->parsed()) return cmd_align(args);
        if (benchmark_cmd->parsed()) return cmd_benchmark(args);
        if (select_cmd->parsed()) return cmd_select(args, select_action);
        if (simulate_cmd->parsed()) return cmd_simulate(args, simulate_action);
        if (report_cmd->parsed()) return cmd_report(args);
        throw ValidationError("no subcommand given");
    } catch (const Error& e) {
        json err{{"error", e.what()}, {"exit_code", e.exit_code()}};
        std::cerr << err.dump() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        json err{{"error", e.what()}, {"exit_code", 1}};
        std::cerr << err.dump() << "\n";
        return 1;
    }
}
