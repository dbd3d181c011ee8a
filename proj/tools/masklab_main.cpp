#include <cstdint>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "masklab/config.hpp"
#include "masklab/error.hpp"
#include "masklab/pipeline.hpp"

namespace {

struct StageCommand {
    const char* name;
    const char* description;
    std::function<void(const masklab::ExperimentConfig&)> run;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Faithfulness evaluation lab for small text classifiers"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<int> max_samples;

    app.add_option("--config", config_path, "Experiment config JSON file")
        ->check(CLI::ExistingFile);
    app.add_option("--seed", seed, "Override the experiment seed");
    app.add_option("--out", out_dir, "Override the output directory");
    app.add_option("--max-samples", max_samples, "Override the per-metric sample cap");

    const std::vector<StageCommand> stages = {
        {"generate", "Generate or load the dataset and vocabulary", masklab::stage_generate},
        {"train", "Train the classifier and score the holdout split", masklab::stage_train},
        {"attribute", "Write per-token attributions for the metric subset",
         masklab::stage_attribute},
        {"fidelity", "Iterative-masking traces, fidelity and non-perturbation frequency",
         masklab::stage_fidelity},
        {"aopc", "Perturbation curves and their area", masklab::stage_aopc},
        {"drift", "Embedding drift across masking fractions", masklab::stage_drift},
        {"attack", "Run the configured adversarial attack", masklab::stage_attack},
        {"advtrain", "Adversarial training and post-training fidelity", masklab::stage_advtrain},
        {"report", "Compose summary.json and render plots",
         [](const masklab::ExperimentConfig& cfg) { std::cout << masklab::stage_report(cfg); }},
        {"run", "Full pipeline: every enabled stage plus the report",
         [](const masklab::ExperimentConfig& cfg) { std::cout << masklab::run_experiment(cfg); }},
    };
    for (const auto& stage : stages) {
        app.add_subcommand(stage.name, stage.description);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        masklab::ExperimentConfig cfg;
        if (!config_path.empty()) {
            cfg = masklab::ExperimentConfig::from_json_file(config_path);
        }
        if (seed) {
            cfg.seed = *seed;
        }
        if (out_dir) {
            cfg.output_dir = *out_dir;
        }
        if (max_samples) {
            cfg.max_samples = *max_samples;
        }
        cfg.validate();

        for (const auto& stage : stages) {
            if (app.got_subcommand(stage.name)) {
                stage.run(cfg);
            }
        }
        return 0;
    } catch (const masklab::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
