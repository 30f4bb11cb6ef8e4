#include "macroq/config.hpp"

#include "macroq/complexity.hpp"
#include "macroq/errors.hpp"
#include "macroq/eval.hpp"
#include "macroq/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

using nlohmann::json;

namespace macroq {

GridProfile parse_grid_profile(const std::string& name) {
    if (name == "table1") return GridProfile::table1;
    if (name == "complexity") return GridProfile::complexity;
    throw ConfigError("unknown grid profile '" + name + "' (expected table1 or complexity)");
}

RunStage parse_run_stage(const std::string& name) {
    if (name == "validate") return RunStage::validate;
    if (name == "test") return RunStage::test;
    if (name == "complexity") return RunStage::complexity;
    if (name == "full") return RunStage::full;
    throw ConfigError("unknown stage '" + name + "' (expected validate, test, complexity or full)");
}

ReportKind parse_report_kind(const std::string& name) {
    if (name == "table") return ReportKind::table;
    if (name == "fanchart") return ReportKind::fanchart;
    if (name == "ledger") return ReportKind::ledger;
    throw ConfigError("unknown report kind '" + name + "' (expected table, fanchart or ledger)");
}

namespace {

const json* find(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

json require(const json& obj, const char* key, const char* where) {
    const json* v = find(obj, key);
    if (!v) throw ConfigError(std::string("config: missing required field ") + where + "." + key);
    return *v;
}

} // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json root;
    try {
        root = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }

    ExperimentConfig cfg;
    try {
        json data = require(root, "data", "");
        cfg.data_path = require(data, "path", "data").get<std::string>();
        cfg.data_format = parse_panel_format(require(data, "format", "data").get<std::string>());
        if (const json* t = find(data, "predictor_transforms")) {
            for (auto it = t->begin(); it != t->end(); ++it) {
                cfg.predictor_transforms[it.key()] = it.value().get<int>();
            }
        }

        json target = require(root, "target", "");
        cfg.target.variable = require(target, "variable", "target").get<std::string>();
        cfg.target.transform = parse_target_transform(require(target, "transform", "target").get<std::string>());
        cfg.target.horizon = require(target, "horizon", "target").get<int>();

        json split = require(root, "split", "");
        cfg.split.t1 = parse_month(require(split, "t1", "split").get<std::string>());
        cfg.split.t2 = parse_month(require(split, "t2", "split").get<std::string>());
        cfg.split.t3 = parse_month(require(split, "t3", "split").get<std::string>());
        cfg.split.horizon = cfg.target.horizon;

        if (const json* grid = find(root, "grid")) {
            if (const json* p = find(*grid, "profile")) cfg.profile = parse_grid_profile(p->get<std::string>());
            if (const json* v = find(*grid, "depths")) cfg.depths = v->get<std::vector<int>>();
            if (const json* v = find(*grid, "widths")) cfg.widths = v->get<std::vector<int>>();
            if (const json* v = find(*grid, "alphas")) cfg.alphas = v->get<std::vector<double>>();
            if (const json* v = find(*grid, "lambdas")) cfg.lambdas = v->get<std::vector<double>>();
        }

        if (const json* train = find(root, "train")) {
            if (const json* v = find(*train, "epochs_initial")) cfg.epochs_initial = v->get<int>();
            if (const json* v = find(*train, "epochs_subsequent")) cfg.epochs_subsequent = v->get<int>();
            if (const json* v = find(*train, "learning_rate")) cfg.learning_rate = v->get<double>();
            if (const json* v = find(*train, "batch_size")) {
                if (v->is_string()) {
                    std::string s = v->get<std::string>();
                    if (s == "full") {
                        cfg.batch_size = 0;
                    } else if (s == "auto") {
                        cfg.batch_size.reset();
                    } else {
                        throw ConfigError("train.batch_size must be a number, \"full\" or \"auto\"");
                    }
                } else {
                    cfg.batch_size = v->get<int>();
                }
            }
            if (const json* v = find(*train, "optimizer")) {
                std::string s = v->get<std::string>();
                if (s != "auto") cfg.optimizer = parse_optimizer(s);
            }
            if (const json* v = find(*train, "lr_decay")) {
                std::string s = v->get<std::string>();
                if (s == "none") cfg.lr_decay = LrDecay::none;
                else if (s == "inv-sqrt") cfg.lr_decay = LrDecay::inv_sqrt;
                else throw ConfigError("train.lr_decay must be none or inv-sqrt");
            }
            if (const json* v = find(*train, "penalty_mode")) {
                std::string s = v->get<std::string>();
                if (s == "prox") cfg.penalty_mode = PenaltyMode::prox;
                else if (s == "gradient") cfg.penalty_mode = PenaltyMode::gradient;
                else throw ConfigError("train.penalty_mode must be prox or gradient");
            }
            if (const json* v = find(*train, "penalize_biases")) cfg.penalize_biases = v->get<bool>();
        }
        if (const json* v = find(root, "seed")) cfg.seed = v->get<std::uint64_t>();

        if (const json* eval = find(root, "eval")) {
            if (const json* v = find(*eval, "quantiles")) cfg.quantiles = v->get<std::vector<double>>();
            if (const json* v = find(*eval, "hac_bandwidth")) {
                if (v->is_string()) {
                    std::string s = v->get<std::string>();
                    if (s == "auto") cfg.hac_auto = true;
                    else if (s == "horizon") cfg.hac_bandwidth.reset();
                    else throw ConfigError("eval.hac_bandwidth must be a number, \"horizon\" or \"auto\"");
                } else {
                    cfg.hac_bandwidth = v->get<int>();
                }
            }
            if (const json* v = find(*eval, "scale")) cfg.scale = v->get<double>();
            if (const json* v = find(*eval, "include_mse")) cfg.include_mse = v->get<bool>();
            if (const json* v = find(*eval, "shared_architecture")) cfg.shared_architecture = v->get<bool>();
        }

        if (const json* v = find(root, "output")) cfg.output_dir = v->get<std::string>();
        if (const json* v = find(root, "jobs")) cfg.jobs = v->get<int>();
        if (const json* v = find(root, "checkpoints")) {
            std::string s = v->get<std::string>();
            if (s == "final") cfg.checkpoint_every_origin = false;
            else if (s == "all") cfg.checkpoint_every_origin = true;
            else throw ConfigError("checkpoints must be final or all");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }

    cfg.validate();
    return cfg;
}

void ExperimentConfig::validate() const {
    if (data_path.empty()) throw ConfigError("data.path must be set");
    target.validate();
    if (split.horizon != target.horizon) throw ConfigError("split horizon must equal target horizon");
    split.validate();

    if (depths.empty()) throw ConfigError("grid.depths must not be empty");
    for (int d : depths)
        if (d < 0 || d > 2) throw ConfigError("grid.depths entries must be 0, 1 or 2");
    bool needs_hidden = std::any_of(depths.begin(), depths.end(), [](int d) { return d > 0; });
    if (needs_hidden && widths.empty()) throw ConfigError("grid.widths must not be empty when depth > 0");
    if (needs_hidden && alphas.empty()) throw ConfigError("grid.alphas must not be empty when depth > 0");
    for (int w : widths)
        if (w <= 0) throw ConfigError("grid.widths entries must be positive");
    for (double a : alphas)
        if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("grid.alphas entries must lie in [0,1]");
    for (double l : lambdas)
        if (l < 0.0) throw ConfigError("grid.lambdas entries must be non-negative");
    if (profile == GridProfile::table1 && !lambdas.empty()) {
        for (double l : lambdas)
            if (l == 0.0) throw ConfigError("table1 profile requires strictly positive lambdas");
    }

    if (epochs_initial <= 0 || epochs_subsequent <= 0) throw ConfigError("epoch counts must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be positive");
    if (batch_size && *batch_size < 0) throw ConfigError("train.batch_size must be >= 0");

    if (quantiles.empty()) throw ConfigError("eval.quantiles must not be empty");
    for (double q : quantiles)
        if (!(q > 0.0 && q < 1.0)) throw ConfigError("eval.quantiles must lie strictly inside (0,1)");
    if (!std::is_sorted(quantiles.begin(), quantiles.end()))
        throw ConfigError("eval.quantiles must be sorted ascending");
    if (hac_bandwidth && *hac_bandwidth < 0) throw ConfigError("eval.hac_bandwidth must be >= 0");
    if (!(scale > 0.0)) throw ConfigError("eval.scale must be positive");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

TrainConfig ExperimentConfig::train_config_for(int depth) const {
    TrainConfig c = TrainConfig::defaults_for(depth);
    c.epochs_initial = epochs_initial;
    c.epochs_subsequent = epochs_subsequent;
    c.learning_rate = learning_rate;
    if (batch_size) c.batch_size = *batch_size;
    if (optimizer) c.optimizer = *optimizer;
    c.lr_decay = lr_decay;
    c.penalty_mode = penalty_mode;
    c.penalize_biases = penalize_biases;
    c.seed = seed;
    return c;
}

std::vector<double> ExperimentConfig::lambda_grid() const {
    if (!lambdas.empty()) return lambdas;
    return profile == GridProfile::table1 ? table1_lambda_grid() : complexity_lambda_grid();
}

int ExperimentConfig::hac_lags(int series_length) const {
    if (hac_auto) return newey_west_auto_bandwidth(series_length);
    if (hac_bandwidth) return *hac_bandwidth;
    return std::max(0, split.horizon - 1);
}

std::string ExperimentConfig::canonical_text() const {
    json j;
    j["data"]["path"] = data_path;
    j["data"]["format"] = data_format == PanelFormat::fredmd_csv ? "fredmd-csv" : "plain-csv";
    j["data"]["predictor_transforms"] = predictor_transforms;
    j["target"] = {{"variable", target.variable},
                   {"transform", target_transform_name(target.transform)},
                   {"horizon", target.horizon}};
    j["split"] = {{"t1", split.t1.str()}, {"t2", split.t2.str()}, {"t3", split.t3.str()}};
    j["grid"] = {{"profile", profile == GridProfile::table1 ? "table1" : "complexity"},
                 {"depths", depths},
                 {"widths", widths},
                 {"alphas", alphas},
                 {"lambdas", lambda_grid()}};
    j["train"] = {{"epochs_initial", epochs_initial},
                  {"epochs_subsequent", epochs_subsequent},
                  {"learning_rate", learning_rate},
                  {"batch_size", batch_size ? json(*batch_size) : json("auto")},
                  {"optimizer", optimizer ? json(optimizer_name(*optimizer)) : json("auto")},
                  {"lr_decay", lr_decay == LrDecay::none ? "none" : "inv-sqrt"},
                  {"penalty_mode", penalty_mode == PenaltyMode::prox ? "prox" : "gradient"},
                  {"penalize_biases", penalize_biases}};
    j["seed"] = seed;
    j["eval"] = {{"quantiles", quantiles},
                 {"hac_bandwidth", hac_auto ? json("auto") : (hac_bandwidth ? json(*hac_bandwidth) : json("horizon"))},
                 {"scale", scale},
                 {"include_mse", include_mse},
                 {"shared_architecture", shared_architecture}};
    return j.dump();
}

std::string ExperimentConfig::hash_hex() const {
    std::uint64_t h = fnv1a(canonical_text());
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

} // namespace macroq
