#include "selbench/run_config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "selbench/errors.hpp"

namespace selbench {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& context) {
    if (!j.is_object()) throw ValidationError("config: '" + context + "' must be an object");
    for (const auto& [key, value] : j.items()) {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ValidationError("config: unknown key '" + key + "' in " + context);
        }
    }
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const json& j,
                                                             const std::string& context) {
    std::vector<std::pair<std::string, std::string>> out;
    if (!j.is_array()) throw ValidationError("config: '" + context + "' must be an array");
    for (const auto& entry : j) {
        if (!entry.is_array() || entry.size() != 2) {
            throw ValidationError("config: entries of '" + context + "' must be [a, b] pairs");
        }
        out.emplace_back(entry[0].get<std::string>(), entry[1].get<std::string>());
    }
    return out;
}

} // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

RunConfig parse_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError(path + ": invalid JSON: " + e.what());
    }
    return parse_run_config_json(doc);
}

RunConfig parse_run_config_json(const json& doc) {
    require_keys(doc,
                 {"data", "scale", "split", "alignment", "reduction", "benchmark", "select",
                  "simulate", "report", "output"},
                 "config root");
    RunConfig config;

    if (doc.contains("data")) {
        const auto& d = doc.at("data");
        require_keys(d, {"mos", "predictions", "features", "aligned", "exclude"}, "data");
        RunConfig::Data data;
        data.mos = d.at("mos").get<std::string>();
        data.predictions = d.at("predictions").get<std::string>();
        if (d.contains("features") && !d.at("features").is_null()) {
            data.features = d.at("features").get<std::string>();
        }
        data.aligned = d.value("aligned", false);
        if (d.contains("exclude")) {
            data.exclude = d.at("exclude").get<std::vector<std::string>>();
        }
        config.data = std::move(data);
    }

    if (doc.contains("scale")) {
        const auto& s = doc.at("scale");
        require_keys(s, {"rescale", "lo", "hi"}, "scale");
        config.scale.rescale = s.value("rescale", false);
        config.scale.lo = s.value("lo", 0.0);
        config.scale.hi = s.value("hi", 100.0);
        if (!(config.scale.lo < config.scale.hi)) {
            throw ValidationError("config: scale.lo must be < scale.hi");
        }
    }

    if (doc.contains("split")) {
        const auto& s = doc.at("split");
        require_keys(s, {"seed", "val_count"}, "split");
        config.split.seed = s.value("seed", std::uint64_t{1});
        config.split.val_count = s.value("val_count", std::size_t{0});
    }

    if (doc.contains("alignment")) {
        const auto& a = doc.at("alignment");
        require_keys(a,
                     {"max_iter", "tol", "restarts", "seed", "clamp_lo", "clamp_hi",
                      "include_val_rows"},
                     "alignment");
        config.alignment.fit.max_iter = a.value("max_iter", 500);
        config.alignment.fit.tol = a.value("tol", 1e-10);
        config.alignment.fit.restarts = a.value("restarts", 10);
        config.alignment.fit.seed = a.value("seed", std::uint64_t{0});
        config.alignment.clamp_lo = a.value("clamp_lo", 0.0);
        config.alignment.clamp_hi = a.value("clamp_hi", 100.0);
        config.alignment.include_val_rows = a.value("include_val_rows", false);
        if (config.alignment.fit.max_iter < 1 || config.alignment.fit.restarts < 1 ||
            config.alignment.fit.tol <= 0.0) {
            throw ValidationError("config: alignment options out of range");
        }
    }

    if (doc.contains("reduction")) {
        const auto& r = doc.at("reduction");
        require_keys(r, {"enabled", "cap", "standardize"}, "reduction");
        config.reduction.enabled = r.value("enabled", true);
        config.reduction.cap = r.value("cap", Eigen::Index{100});
        config.reduction.standardize = r.value("standardize", true);
        if (config.reduction.cap < 1) {
            throw ValidationError("config: reduction.cap must be >= 1");
        }
    }

    if (doc.contains("benchmark")) {
        const auto& b = doc.at("benchmark");
        require_keys(b, {"split", "rank_depth", "cluster_distance", "scatter_pairs", "selector"},
                     "benchmark");
        config.benchmark.split = b.value("split", std::string("test"));
        config.benchmark.rank_depth = b.value("rank_depth", 3);
        if (b.contains("cluster_distance")) {
            config.benchmark.cluster_distance =
                cluster_distance_from_string(b.at("cluster_distance").get<std::string>());
        }
        if (b.contains("scatter_pairs")) {
            config.benchmark.scatter_pairs =
                parse_pairs(b.at("scatter_pairs"), "benchmark.scatter_pairs");
        }
        if (b.contains("selector") && !b.at("selector").is_null()) {
            config.benchmark.selector_path = b.at("selector").get<std::string>();
        }
        if (config.benchmark.rank_depth < 1) {
            throw ValidationError("config: benchmark.rank_depth must be >= 1");
        }
    }

    if (doc.contains("select")) {
        const auto& s = doc.at("select");
        require_keys(s, {"train", "space", "budget", "folds", "seed", "eval_split", "selector"},
                     "select");
        if (s.contains("train")) {
            config.select.train = selector_config_from_json(s.at("train"));
        }
        if (s.contains("space")) {
            for (const auto& entry : s.at("space")) {
                config.select.space.push_back(selector_config_from_json(entry));
            }
        }
        config.select.budget = s.value("budget", std::size_t{20});
        config.select.folds = s.value("folds", 5);
        config.select.seed = s.value("seed", std::uint64_t{1});
        config.select.eval_split = s.value("eval_split", std::string("test"));
        if (s.contains("selector") && !s.at("selector").is_null()) {
            config.select.selector_path = s.at("selector").get<std::string>();
        }
    }

    if (doc.contains("simulate")) {
        const auto& sim = doc.at("simulate");
        require_keys(sim, {"sweep", "futility", "oracle_mae"}, "simulate");
        if (sim.contains("sweep")) {
            const auto& s = sim.at("sweep");
            require_keys(s, {"sigma_grid", "k", "n", "trials", "seed"}, "simulate.sweep");
            RunConfig::SimulateSweep sweep;
            sweep.sigma_grid = s.at("sigma_grid").get<std::vector<double>>();
            sweep.k = s.value("k", 8);
            sweep.n = s.value("n", std::size_t{2000});
            sweep.trials = s.value("trials", 20);
            sweep.seed = s.value("seed", std::uint64_t{1});
            config.simulate_sweep = std::move(sweep);
        }
        if (sim.contains("futility")) {
            const auto& s = sim.at("futility");
            require_keys(s, {"rho_grid", "selector", "n", "k", "sigma", "seeds", "seed"},
                         "simulate.futility");
            RunConfig::SimulateFutility fut;
            fut.rho_grid = s.at("rho_grid").get<std::vector<double>>();
            fut.selector = selector_config_from_json(s.at("selector"));
            fut.n = s.value("n", std::size_t{5000});
            fut.k = s.value("k", 8);
            fut.sigma = s.value("sigma", 10.0);
            fut.seeds = s.value("seeds", 10);
            fut.seed = s.value("seed", std::uint64_t{1});
            config.simulate_futility = std::move(fut);
        }
        if (sim.contains("oracle_mae")) {
            const auto& s = sim.at("oracle_mae");
            require_keys(s, {"bias", "sigma", "k", "sigma_scale", "trials", "seed"},
                         "simulate.oracle_mae");
            RunConfig::SimulateOracleMae om;
            om.k = s.value("k", 8);
            om.sigma_scale = s.value("sigma_scale", 1.0);
            if (s.contains("bias")) om.bias = s.at("bias").get<std::vector<double>>();
            if (s.contains("sigma")) om.sigma = s.at("sigma").get<std::vector<double>>();
            om.trials = s.value("trials", std::size_t{1000000});
            om.seed = s.value("seed", std::uint64_t{1});
            config.simulate_oracle_mae = std::move(om);
        }
    }

    if (doc.contains("report")) {
        const auto& r = doc.at("report");
        require_keys(r, {"input", "title"}, "report");
        RunConfig::Report report;
        report.input = r.at("input").get<std::string>();
        report.title = r.value("title", std::string("sweep"));
        config.report = std::move(report);
    }

    if (doc.contains("output")) {
        const auto& o = doc.at("output");
        require_keys(o, {"dir", "formats"}, "output");
        config.output.dir = o.value("dir", std::string("out"));
        if (o.contains("formats")) {
            config.output.json = false;
            config.output.csv = false;
            config.output.svg = false;
            for (const auto& f : o.at("formats")) {
                const std::string fmt = f.get<std::string>();
                if (fmt == "json") config.output.json = true;
                else if (fmt == "csv") config.output.csv = true;
                else if (fmt == "svg") config.output.svg = true;
                else throw ValidationError("config: unknown format '" + fmt + "'");
            }
        }
    }

    std::ostringstream canonical;
    canonical << doc;
    std::ostringstream hash;
    hash << std::hex << fnv1a64(canonical.str());
    config.config_hash = hash.str();
    return config;
}

} // namespace selbench
