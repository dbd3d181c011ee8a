#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "masklab/adversary.hpp"
#include "masklab/attribution.hpp"
#include "masklab/corpus.hpp"
#include "masklab/model.hpp"

namespace masklab {

/// Either a generator recipe or a JSONL file to load.
struct DatasetConfig {
    bool from_path = false;
    std::string path;
    GeneratorSpec generator = GeneratorSpec::balanced(300, 12, 0);
};

struct ModelConfig {
    int embed_dim = 16;
    int hidden_dim = 32;
    TrainConfig train;
};

struct AttributionConfig {
    AttributionMethod method = AttributionMethod::integrated_gradients;
    int steps = 30;
};

struct MetricsConfig {
    bool fidelity = true;
    bool non_pert = true;
    bool aopc = true;
    int aopc_L = 10;
    bool random_baseline = true;
    bool drift = true;
    std::vector<double> drift_fractions = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
};

struct AttackConfig {
    bool enabled = false;
    AttackKind kind = AttackKind::greedy_substitute;
    double budget = 0.5;
    std::string table_path;  // empty: built-in keyword swaps
};

/// Full experiment description. Parsed strictly from a single JSON document:
/// unknown keys anywhere are rejected. All stage randomness is derived from
/// `seed`, never configured per stage.
struct ExperimentConfig {
    DatasetConfig dataset;
    ModelConfig model;
    AttributionConfig attribution;
    MetricsConfig metrics;
    AttackConfig attack;
    bool adv_training = false;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    int max_samples = 400;

    /// ConfigError on out-of-range values, missing referenced files, or an
    /// adv_training flag without an attack stage.
    void validate() const;

    static ExperimentConfig from_json_text(const std::string& text);
    static ExperimentConfig from_json_file(const std::string& path);
};

}  // namespace masklab
