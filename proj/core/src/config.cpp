#include "masklab/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "masklab/error.hpp"

namespace masklab {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const char* where, const std::set<std::string>& allowed) {
    for (const auto& [key, value] : obj.items()) {
        if (allowed.count(key) == 0) {
            throw ConfigError(std::string("config: unknown key \"") + key + "\" in " + where);
        }
    }
}

const json* field(const json& obj, const char* key) {
    auto it = obj.find(key);
    return it == obj.end() || it->is_null() ? nullptr : &*it;
}

int int_field(const json& v, const char* name) {
    if (!v.is_number_integer()) {
        throw ConfigError(std::string("config: \"") + name + "\" must be an integer");
    }
    return v.get<int>();
}

double number_field(const json& v, const char* name) {
    if (!v.is_number()) {
        throw ConfigError(std::string("config: \"") + name + "\" must be a number");
    }
    return v.get<double>();
}

bool bool_field(const json& v, const char* name) {
    if (!v.is_boolean()) {
        throw ConfigError(std::string("config: \"") + name + "\" must be a boolean");
    }
    return v.get<bool>();
}

std::string string_field(const json& v, const char* name) {
    if (!v.is_string()) {
        throw ConfigError(std::string("config: \"") + name + "\" must be a string");
    }
    return v.get<std::string>();
}

DatasetConfig parse_dataset(const json& obj) {
    reject_unknown(obj, "dataset", {"generator", "path"});
    DatasetConfig cfg;
    const json* generator = field(obj, "generator");
    const json* path = field(obj, "path");
    if (generator != nullptr && path != nullptr) {
        throw ConfigError("config: dataset must set either \"generator\" or \"path\", not both");
    }
    if (path != nullptr) {
        cfg.from_path = true;
        cfg.path = string_field(*path, "dataset.path");
        return cfg;
    }
    if (generator != nullptr) {
        reject_unknown(*generator, "dataset.generator",
                       {"kind", "num_samples", "mean_length", "minority_fraction"});
        if (const json* v = field(*generator, "kind")) {
            cfg.generator.kind = generator_kind_from_string(string_field(*v, "kind"));
            if (cfg.generator.kind == GeneratorKind::imbalanced_toxicity) {
                cfg.generator.minority_fraction = 0.09;
            }
        }
        if (const json* v = field(*generator, "num_samples")) {
            cfg.generator.num_samples = int_field(*v, "num_samples");
        }
        if (const json* v = field(*generator, "mean_length")) {
            cfg.generator.mean_length = int_field(*v, "mean_length");
        }
        if (const json* v = field(*generator, "minority_fraction")) {
            cfg.generator.minority_fraction = number_field(*v, "minority_fraction");
        }
    }
    return cfg;
}

ModelConfig parse_model(const json& obj) {
    reject_unknown(obj, "model", {"embed_dim", "hidden_dim", "train"});
    ModelConfig cfg;
    if (const json* v = field(obj, "embed_dim")) {
        cfg.embed_dim = int_field(*v, "embed_dim");
    }
    if (const json* v = field(obj, "hidden_dim")) {
        cfg.hidden_dim = int_field(*v, "hidden_dim");
    }
    if (const json* train = field(obj, "train")) {
        reject_unknown(*train, "model.train",
                       {"learning_rate", "epochs", "batch_size", "weight_decay", "shuffle"});
        if (const json* v = field(*train, "learning_rate")) {
            cfg.train.learning_rate = number_field(*v, "learning_rate");
        }
        if (const json* v = field(*train, "epochs")) {
            cfg.train.epochs = int_field(*v, "epochs");
        }
        if (const json* v = field(*train, "batch_size")) {
            cfg.train.batch_size = int_field(*v, "batch_size");
        }
        if (const json* v = field(*train, "weight_decay")) {
            cfg.train.weight_decay = number_field(*v, "weight_decay");
        }
        if (const json* v = field(*train, "shuffle")) {
            cfg.train.shuffle = bool_field(*v, "shuffle");
        }
    }
    return cfg;
}

AttributionConfig parse_attribution(const json& obj) {
    reject_unknown(obj, "attribution", {"method", "steps"});
    AttributionConfig cfg;
    if (const json* v = field(obj, "method")) {
        cfg.method = attribution_method_from_string(string_field(*v, "method"));
    }
    if (const json* v = field(obj, "steps")) {
        cfg.steps = int_field(*v, "steps");
    }
    return cfg;
}

MetricsConfig parse_metrics(const json& obj) {
    reject_unknown(obj, "metrics",
                   {"fidelity", "non_pert", "aopc", "aopc_L", "random_baseline", "drift",
                    "drift_fractions"});
    MetricsConfig cfg;
    if (const json* v = field(obj, "fidelity")) {
        cfg.fidelity = bool_field(*v, "fidelity");
    }
    if (const json* v = field(obj, "non_pert")) {
        cfg.non_pert = bool_field(*v, "non_pert");
    }
    if (const json* v = field(obj, "aopc")) {
        cfg.aopc = bool_field(*v, "aopc");
    }
    if (const json* v = field(obj, "aopc_L")) {
        cfg.aopc_L = int_field(*v, "aopc_L");
    }
    if (const json* v = field(obj, "random_baseline")) {
        cfg.random_baseline = bool_field(*v, "random_baseline");
    }
    if (const json* v = field(obj, "drift")) {
        cfg.drift = bool_field(*v, "drift");
    }
    if (const json* v = field(obj, "drift_fractions")) {
        if (!v->is_array()) {
            throw ConfigError("config: \"drift_fractions\" must be an array of numbers");
        }
        cfg.drift_fractions.clear();
        for (const auto& e : *v) {
            cfg.drift_fractions.push_back(number_field(e, "drift_fractions entry"));
        }
    }
    return cfg;
}

AttackConfig parse_attack(const json& obj) {
    reject_unknown(obj, "attack", {"kind", "budget", "table"});
    AttackConfig cfg;
    cfg.enabled = true;
    if (const json* v = field(obj, "kind")) {
        cfg.kind = attack_kind_from_string(string_field(*v, "kind"));
    }
    if (const json* v = field(obj, "budget")) {
        cfg.budget = number_field(*v, "budget");
    }
    if (const json* v = field(obj, "table")) {
        cfg.table_path = string_field(*v, "table");
    }
    return cfg;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ConfigError("config: top level must be a JSON object");
    }
    reject_unknown(doc, "config",
                   {"dataset", "model", "attribution", "metrics", "attack", "adv_training",
                    "seed", "output_dir", "max_samples"});

    ExperimentConfig cfg;
    if (const json* v = field(doc, "dataset")) {
        if (!v->is_object()) {
            throw ConfigError("config: \"dataset\" must be an object");
        }
        cfg.dataset = parse_dataset(*v);
    }
    if (const json* v = field(doc, "model")) {
        if (!v->is_object()) {
            throw ConfigError("config: \"model\" must be an object");
        }
        cfg.model = parse_model(*v);
    }
    if (const json* v = field(doc, "attribution")) {
        if (!v->is_object()) {
            throw ConfigError("config: \"attribution\" must be an object");
        }
        cfg.attribution = parse_attribution(*v);
    }
    if (const json* v = field(doc, "metrics")) {
        if (!v->is_object()) {
            throw ConfigError("config: \"metrics\" must be an object");
        }
        cfg.metrics = parse_metrics(*v);
    }
    if (const json* v = field(doc, "attack")) {
        if (!v->is_object()) {
            throw ConfigError("config: \"attack\" must be an object or null");
        }
        cfg.attack = parse_attack(*v);
    }
    if (const json* v = field(doc, "adv_training")) {
        cfg.adv_training = bool_field(*v, "adv_training");
    }
    if (const json* v = field(doc, "seed")) {
        if (!v->is_number_unsigned() && !v->is_number_integer()) {
            throw ConfigError("config: \"seed\" must be a non-negative integer");
        }
        if (v->is_number_integer() && !v->is_number_unsigned() && v->get<long long>() < 0) {
            throw ConfigError("config: \"seed\" must be non-negative");
        }
        cfg.seed = v->get<std::uint64_t>();
    }
    if (const json* v = field(doc, "output_dir")) {
        cfg.output_dir = string_field(*v, "output_dir");
    }
    if (const json* v = field(doc, "max_samples")) {
        cfg.max_samples = int_field(*v, "max_samples");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("config: cannot open \"" + path + "\"");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return from_json_text(buffer.str());
}

void ExperimentConfig::validate() const {
    if (dataset.from_path && !std::filesystem::exists(dataset.path)) {
        throw ConfigError("config: dataset path \"" + dataset.path + "\" does not exist");
    }
    if (!dataset.from_path) {
        if (dataset.generator.num_samples < 10) {
            throw ConfigError("config: generator num_samples must be >= 10");
        }
        if (dataset.generator.mean_length < 3) {
            throw ConfigError("config: generator mean_length must be >= 3");
        }
        if (!(dataset.generator.minority_fraction > 0.0 &&
              dataset.generator.minority_fraction <= 1.0)) {
            throw ConfigError("config: minority_fraction must be in (0, 1]");
        }
    }
    if (model.embed_dim < 1 || model.hidden_dim < 1) {
        throw ConfigError("config: model dims must be >= 1");
    }
    model.train.validate();
    if (attribution.steps < 1) {
        throw ConfigError("config: attribution steps must be >= 1");
    }
    if (metrics.aopc && metrics.aopc_L < 1) {
        throw ConfigError("config: aopc_L must be >= 1");
    }
    if (metrics.drift) {
        const auto& f = metrics.drift_fractions;
        if (f.empty() || f.front() != 0.0) {
            throw ConfigError("config: drift_fractions must start at 0");
        }
        for (std::size_t i = 1; i < f.size(); ++i) {
            if (!(f[i] > f[i - 1]) || f[i] > 1.0) {
                throw ConfigError(
                    "config: drift_fractions must increase strictly and stay within [0, 1]");
            }
        }
    }
    if (attack.enabled) {
        if (!(attack.budget > 0.0 && attack.budget <= 1.0)) {
            throw ConfigError("config: attack budget must be in (0, 1]");
        }
        if (!attack.table_path.empty() && !std::filesystem::exists(attack.table_path)) {
            throw ConfigError("config: attack table \"" + attack.table_path +
                              "\" does not exist");
        }
    }
    if (adv_training && !attack.enabled) {
        throw ConfigError("config: adv_training requires an attack section");
    }
    if (max_samples < 1) {
        throw ConfigError("config: max_samples must be >= 1");
    }
    if (output_dir.empty()) {
        throw ConfigError("config: output_dir must not be empty");
    }
}

}  // namespace masklab
