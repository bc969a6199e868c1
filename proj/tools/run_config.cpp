#include "run_config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "lgl/errors.hpp"

namespace lgl::cli {

namespace {

using nlohmann::json;

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) {
        throw ConfigError(where + ": expected an object");
    }
}

void reject_unknown(const json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
    for (const auto& item : j.items()) {
        bool known = false;
        for (auto key : allowed) {
            known = known || item.key() == key;
        }
        if (!known) {
            throw ConfigError(where + ": unknown key '" + item.key() + "'");
        }
    }
}

template <typename T>
T get(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key)) {
        throw ConfigError(where + ": missing key '" + key + "'");
    }
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

template <typename T>
T get_or(const json& j, const std::string& where, const char* key, T fallback) {
    return j.contains(key) ? get<T>(j, where, key) : fallback;
}

int get_int(const json& j, const std::string& where, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number_integer()) {
        throw ConfigError(where + "." + key + ": expected an integer");
    }
    return j.at(key).get<int>();
}

int get_int_or(const json& j, const std::string& where, const char* key, int fallback) {
    return j.contains(key) ? get_int(j, where, key) : fallback;
}

FamilySpec family_from(const json& j) {
    const std::string where = "task.family";
    require_object(j, where);
    const auto kind = get<std::string>(j, where, "family");
    if (kind == "categorical") {
        reject_unknown(j, where, {"family", "K"});
        return FamilySpec::categorical(get_int(j, where, "K"));
    }
    if (kind == "ksubset") {
        reject_unknown(j, where, {"family", "K", "k"});
        return FamilySpec::k_subset(get_int(j, where, "K"), get_int(j, where, "k"));
    }
    if (kind == "arborescence") {
        reject_unknown(j, where, {"family", "L"});
        return FamilySpec::arborescence(get_int(j, where, "L"));
    }
    throw ConfigError(where + ": unknown family '" + kind + "' (expected categorical, ksubset or arborescence)");
}

EstimatorConfig estimator_from(const json& j, const std::string& where) {
    require_object(j, where);
    reject_unknown(j, where, {"rule", "eta", "steps", "init", "temperature", "schedule"});
    EstimatorConfig e;
    e.rule = parse_rule(get<std::string>(j, where, "rule"));
    e.eta = get_or<double>(j, where, "eta", e.eta);
    e.steps = get_int_or(j, where, "steps", e.steps);
    e.init = parse_init(get_or<std::string>(j, where, "init", std::string(to_string(e.init))));
    e.temperature = get_or<double>(j, where, "temperature", e.temperature);
    e.schedule = parse_schedule(get_or<std::string>(j, where, "schedule", std::string(to_string(e.schedule))));
    e.validate();
    return e;
}

// A grid axis: absent -> {fallback}; present -> non-empty list.
template <typename T, typename Convert>
std::vector<T> axis(const json& grid, const char* key, T fallback, Convert convert) {
    if (!grid.contains(key)) {
        return {fallback};
    }
    const json& values = grid.at(key);
    if (!values.is_array()) {
        throw ConfigError(std::string("grid.") + key + ": expected a list");
    }
    if (values.empty()) {
        throw ConfigError(std::string("grid.") + key + ": axis list is empty");
    }
    std::vector<T> out;
    for (const auto& v : values) {
        try {
            out.push_back(convert(v));
        } catch (const json::exception&) {
            throw ConfigError(std::string("grid.") + key + ": wrong element type");
        }
    }
    return out;
}

std::vector<EstimatorConfig> grid_from(const json& grid) {
    require_object(grid, "grid");
    reject_unknown(grid, "grid", {"rule", "eta", "steps", "init", "temperature", "schedule"});
    const EstimatorConfig defaults;
    const auto rules = axis<Rule>(grid, "rule", defaults.rule, [](const json& v) {
        return parse_rule(v.get<std::string>());
    });
    const auto etas = axis<double>(grid, "eta", defaults.eta, [](const json& v) { return v.get<double>(); });
    const auto steps = axis<int>(grid, "steps", defaults.steps, [](const json& v) {
        if (!v.is_number_integer()) {
            throw ConfigError("grid.steps: expected integers");
        }
        return v.get<int>();
    });
    const auto inits = axis<Init>(grid, "init", defaults.init, [](const json& v) {
        return parse_init(v.get<std::string>());
    });
    const auto temps =
        axis<double>(grid, "temperature", defaults.temperature, [](const json& v) { return v.get<double>(); });
    const auto schedules = axis<StepSchedule>(grid, "schedule", defaults.schedule, [](const json& v) {
        return parse_schedule(v.get<std::string>());
    });
    std::vector<EstimatorConfig> out;
    for (Rule rule : rules) {
        for (double eta : etas) {
            for (int t : steps) {
                for (Init init : inits) {
                    for (double temperature : temps) {
                        for (StepSchedule schedule : schedules) {
                            EstimatorConfig e{rule, eta, t, init, temperature, schedule};
                            e.validate();
                            out.push_back(e);
                        }
                    }
                }
            }
        }
    }
    return out;
}

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
}

} // namespace

RunConfig parse_run_config(std::string_view text, ConfigMode mode) {
    const json root = parse_json(text);
    require_object(root, "config");
    const char* estimator_key = mode == ConfigMode::Train ? "estimators" : "grid";
    reject_unknown(root, "config", {"task", "model", "optimizer", estimator_key, "seeds", "timing"});

    RunConfig config;
    const json& task = root.contains("task") ? root.at("task") : throw ConfigError("config: missing key 'task'");
    require_object(task, "task");
    reject_unknown(task, "task",
                   {"kind", "family", "input_dim", "output_dim", "noise_sigma", "n_train", "n_eval", "seed"});
    config.task.kind = parse_task_kind(get<std::string>(task, "task", "kind"));
    if (!task.contains("family")) {
        throw ConfigError("task: missing key 'family'");
    }
    config.task.family = family_from(task.at("family"));
    config.task.input_dim = get_int(task, "task", "input_dim");
    config.task.output_dim = get_int(task, "task", "output_dim");
    config.task.noise_sigma = get_or<double>(task, "task", "noise_sigma", 0.0);
    config.task.n_train = get_int(task, "task", "n_train");
    config.task.n_eval = get_int(task, "task", "n_eval");
    config.task.seed = get_or<std::uint64_t>(task, "task", "seed", 0);
    config.task.validate();

    const bool categorical = config.task.kind == TaskKind::CategoricalBottleneck;
    config.train.optimizer.lr = categorical ? 0.1 : 0.05;
    if (root.contains("optimizer")) {
        const json& opt = root.at("optimizer");
        require_object(opt, "optimizer");
        reject_unknown(opt, "optimizer", {"kind", "lr", "epochs", "batch"});
        if (get_or<std::string>(opt, "optimizer", "kind", "sgd") != "sgd") {
            throw ConfigError("optimizer.kind: only 'sgd' is supported");
        }
        config.train.optimizer.lr = get_or<double>(opt, "optimizer", "lr", config.train.optimizer.lr);
        config.train.optimizer.epochs = get_int_or(opt, "optimizer", "epochs", config.train.optimizer.epochs);
        config.train.optimizer.batch = get_int_or(opt, "optimizer", "batch", config.train.optimizer.batch);
    }
    config.train.optimizer.validate();

    if (root.contains("model")) {
        const json& model = root.at("model");
        require_object(model, "model");
        reject_unknown(model, "model", {"hidden", "activation", "decoder_uses_x"});
        config.train.model.hidden = get_int_or(model, "model", "hidden", static_cast<int>(config.train.model.hidden));
        if (config.train.model.hidden < 1) {
            throw ConfigError("model.hidden must be >= 1");
        }
        const auto activation = get_or<std::string>(model, "model", "activation", "tanh");
        if (activation == "tanh") {
            config.train.model.activation = Activation::Tanh;
        } else if (activation == "identity") {
            config.train.model.activation = Activation::Identity;
        } else {
            throw ConfigError("model.activation: expected 'tanh' or 'identity'");
        }
        config.train.model.decoder_uses_x = get_or<bool>(model, "model", "decoder_uses_x", false);
    }
    config.train.timing = get_or<bool>(root, "config", "timing", false);

    if (mode == ConfigMode::Train) {
        if (!root.contains("estimators") || !root.at("estimators").is_array() || root.at("estimators").empty()) {
            throw ConfigError("config.estimators: expected a non-empty list");
        }
        int i = 0;
        for (const auto& e : root.at("estimators")) {
            config.estimators.push_back(estimator_from(e, "estimators[" + std::to_string(i++) + "]"));
        }
    } else {
        if (!root.contains("grid")) {
            throw ConfigError("config: missing key 'grid'");
        }
        config.estimators = grid_from(root.at("grid"));
    }

    if (!root.contains("seeds") || !root.at("seeds").is_array() || root.at("seeds").empty()) {
        throw ConfigError("config.seeds: expected a non-empty list of integers");
    }
    for (const auto& s : root.at("seeds")) {
        if (!s.is_number_unsigned()) {
            throw ConfigError("config.seeds: expected non-negative integers");
        }
        config.seeds.push_back(s.get<std::uint64_t>());
    }
    return config;
}

RunConfig load_run_config(const std::string& path, ConfigMode mode) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config file " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_run_config(text.str(), mode);
}

FamilySpec parse_family_json(std::string_view text) {
    return family_from(parse_json(text));
}

EstimatorConfig parse_estimator_json(std::string_view text) {
    return estimator_from(parse_json(text), "estimator");
}

std::string estimator_to_json(const EstimatorConfig& e) {
    json j;
    j["rule"] = std::string(to_string(e.rule));
    j["eta"] = e.eta;
    j["steps"] = e.steps;
    j["init"] = std::string(to_string(e.init));
    j["temperature"] = e.temperature;
    j["schedule"] = std::string(to_string(e.schedule));
    return j.dump();
}

} // namespace lgl::cli
