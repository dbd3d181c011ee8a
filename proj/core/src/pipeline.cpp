#include "masklab/pipeline.hpp"

#include <algorithm>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "io_util.hpp"
#include "masklab/adversary.hpp"
#include "masklab/attribution.hpp"
#include "masklab/corpus.hpp"
#include "masklab/drift.hpp"
#include "masklab/error.hpp"
#include "masklab/masking.hpp"
#include "masklab/metrics.hpp"
#include "masklab/model.hpp"
#include "masklab/plots.hpp"
#include "masklab/rng.hpp"

namespace masklab {

namespace {

using nlohmann::ordered_json;

std::string join(const std::string& dir, const char* name) {
    return dir + "/" + name;
}

bool exists(const std::string& path) {
    return std::filesystem::exists(path);
}

Vocab load_vocab(const std::string& dir) {
    return Vocab::load(join(dir, "vocab.txt"));
}

GeneratedData load_data(const std::string& dir) {
    const Vocab vocab = load_vocab(dir);
    return load_jsonl(join(dir, "dataset.jsonl"), &vocab);
}

TinyTextClassifier load_model(const std::string& dir) {
    return TinyTextClassifier::load(join(dir, "model.json"));
}

std::vector<TokenSequence> metrics_subset(const Dataset& data, int max_samples) {
    const std::size_t n =
        std::min(data.size(), static_cast<std::size_t>(std::max(max_samples, 0)));
    return {data.samples.begin(), data.samples.begin() + static_cast<std::ptrdiff_t>(n)};
}

Dataset make_dataset(std::vector<TokenSequence> samples, int num_classes, std::string name) {
    Dataset out;
    out.samples = std::move(samples);
    out.num_classes = num_classes;
    out.class_counts.assign(static_cast<std::size_t>(num_classes), 0);
    for (const auto& s : out.samples) {
        if (s.label >= 0 && s.label < num_classes) {
            ++out.class_counts[static_cast<std::size_t>(s.label)];
        }
    }
    out.name = std::move(name);
    return out;
}

std::string dataset_display_name(const ExperimentConfig& cfg) {
    if (cfg.dataset.from_path) {
        return std::filesystem::path(cfg.dataset.path).stem().string();
    }
    return std::string(to_string(cfg.dataset.generator.kind));
}

ordered_json read_json(const std::string& path) {
    auto in = detail::open_in(path, "read_json");
    try {
        return ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error("read_json: \"" + path + "\": " + e.what());
    }
}

void write_json(const std::string& path, const ordered_json& doc, const char* what) {
    auto out = detail::open_out(path, what);
    out << doc.dump(2) << '\n';
}

ordered_json fidelity_fields(const FidelityReport& report, bool with_fidelity,
                             bool with_non_pert) {
    ordered_json out;
    if (with_fidelity) {
        out["fidelity"] = report.fidelity;
        out["mean_masked_fraction"] = report.mean_masked_fraction;
    }
    if (with_non_pert) {
        out["non_perturbation_frequency"] = report.non_perturbation_frequency;
    }
    out["K"] = report.K;
    return out;
}

ordered_json fidelity_fields(const ordered_json& src, bool with_fidelity, bool with_non_pert) {
    ordered_json out;
    if (with_fidelity) {
        out["fidelity"] = src.at("fidelity");
        out["mean_masked_fraction"] = src.at("mean_masked_fraction");
    }
    if (with_non_pert) {
        out["non_perturbation_frequency"] = src.at("non_perturbation_frequency");
    }
    out["K"] = src.at("K");
    return out;
}

ordered_json drift_fields(const DriftCurve& curve) {
    ordered_json out;
    out["fractions"] = curve.mask_fractions;
    out["mean_cos"] = curve.mean_cos_to_clean_centroid;
    out["centroid_cos"] = curve.centroid_cos;
    out["mean_feature_std"] = curve.mean_feature_std;
    out["delta_mu"] = curve.delta_mu();
    out["delta_sigma"] = curve.delta_sigma();
    return out;
}

struct PredictionRows {
    std::vector<int> labels;
    std::vector<int> predictions;
};

PredictionRows read_predictions_csv(const std::string& path) {
    auto in = detail::open_in(path, "read_predictions_csv");
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("read_predictions_csv: empty file");
    }
    PredictionRows rows;
    int line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string id_s, label_s, pred_s;
        if (!std::getline(row, id_s, ',') || !std::getline(row, label_s, ',') ||
            !std::getline(row, pred_s)) {
            throw Error("read_predictions_csv: line " + std::to_string(line_number) +
                        " malformed");
        }
        rows.labels.push_back(std::stoi(label_s));
        rows.predictions.push_back(std::stoi(pred_s));
    }
    return rows;
}

std::vector<AttackResult> rebuild_attacks(const std::vector<AttackRecord>& records,
                                          const Vocab& vocab) {
    std::vector<AttackResult> attacks;
    attacks.reserve(records.size());
    for (const auto& rec : records) {
        AttackResult r;
        r.original = tokenize(rec.original_text, vocab);
        r.original.label = rec.label;
        r.perturbed = tokenize(rec.perturbed_text, vocab);
        r.perturbed.label = rec.label;
        r.success = rec.success;
        r.attack_kind = rec.attack_kind;
        r.perturbed_fraction = rec.perturbed_fraction;
        attacks.push_back(std::move(r));
    }
    return attacks;
}

template <typename Fn>
void run_stage(const char* name, Fn&& fn) {
    try {
        fn();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(name) + ": " + e.what());
    } catch (const std::exception& e) {
        throw Error(std::string(name) + ": " + e.what());
    }
}

}  // namespace

void stage_generate(const ExperimentConfig& cfg) {
    std::filesystem::create_directories(cfg.output_dir);
    GeneratedData gd;
    if (cfg.dataset.from_path) {
        gd = load_jsonl(cfg.dataset.path);
    } else {
        GeneratorSpec spec = cfg.dataset.generator;
        spec.seed = stage_seed(cfg.seed, "generate");
        gd = generate_dataset(spec);
    }
    save_jsonl(gd.dataset, join(cfg.output_dir, "dataset.jsonl"));
    gd.vocab.save(join(cfg.output_dir, "vocab.txt"));
}

void stage_train(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    const GeneratedData gd = load_data(dir);
    const auto& data = gd.dataset;

    TinyTextClassifier model(gd.vocab.size(), cfg.model.embed_dim, cfg.model.hidden_dim,
                             data.num_classes, stage_seed(cfg.seed, "model"));

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    Rng split_rng(stage_seed(cfg.seed, "split"));
    split_rng.shuffle(order);
    const std::size_t train_count = data.size() * 4 / 5;

    std::vector<TokenSequence> train_samples;
    train_samples.reserve(train_count);
    for (std::size_t i = 0; i < train_count; ++i) {
        train_samples.push_back(data.samples[order[i]]);
    }
    std::vector<std::size_t> holdout(order.begin() + static_cast<std::ptrdiff_t>(train_count),
                                     order.end());
    std::sort(holdout.begin(), holdout.end());

    const Dataset train_data =
        make_dataset(std::move(train_samples), data.num_classes, data.name + "_train");
    TrainConfig tc = cfg.model.train;
    tc.seed = stage_seed(cfg.seed, "train");
    const std::vector<double> loss_history = train(model, train_data, tc);
    model.save(join(dir, "model.json"));

    std::vector<int> labels;
    std::vector<int> predictions;
    labels.reserve(holdout.size());
    predictions.reserve(holdout.size());
    {
        auto out = detail::open_out(join(dir, "predictions.csv"), "stage_train");
        out << "sample_id,label,predicted\n";
        for (const std::size_t idx : holdout) {
            const auto& sample = data.samples[idx];
            const int predicted = predicted_class(model, sample);
            labels.push_back(sample.label);
            predictions.push_back(predicted);
            out << idx << ',' << sample.label << ',' << predicted << '\n';
        }
    }

    ordered_json doc;
    doc["loss_history"] = loss_history;
    if (labels.empty()) {
        doc["holdout_accuracy"] = nullptr;
        doc["holdout_macro_f1"] = nullptr;
    } else {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == predictions[i]) {
                ++correct;
            }
        }
        doc["holdout_accuracy"] =
            static_cast<double>(correct) / static_cast<double>(labels.size());
        doc["holdout_macro_f1"] = macro_f1(predictions, labels, data.num_classes).macro_f1;
    }
    write_json(join(dir, "training.json"), doc, "stage_train");
}

void stage_attribute(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    const GeneratedData gd = load_data(dir);
    const TinyTextClassifier model = load_model(dir);
    const auto subset = metrics_subset(gd.dataset, cfg.max_samples);

    std::vector<AttributionVector> attributions;
    attributions.reserve(subset.size());
    for (const auto& sample : subset) {
        const int target = predicted_class(model, sample);
        attributions.push_back(
            attribute(model, sample, target, cfg.attribution.method, cfg.attribution.steps));
    }
    write_attribution_csv(join(dir, "attributions.csv"), attributions, subset);
}

void stage_fidelity(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    const GeneratedData gd = load_data(dir);
    const TinyTextClassifier model = load_model(dir);
    const auto subset = metrics_subset(gd.dataset, cfg.max_samples);

    const auto traces = mask_traces(model, subset, cfg.attribution.method, MaskMode::unk_replace,
                                    false, cfg.attribution.steps);
    write_traces_jsonl(join(dir, "traces.jsonl"), traces);
    const FidelityReport report = fidelity_from_traces(traces);
    write_fidelity_json(join(dir, "fidelity.json"), report);
    write_per_sample_f_csv(join(dir, "per_sample_f.csv"), report);

    if (cfg.metrics.random_baseline) {
        const auto random_traces =
            random_mask_traces(model, subset, stage_seed(cfg.seed, "random_baseline"));
        write_traces_jsonl(join(dir, "random_traces.jsonl"), random_traces);
        const FidelityReport random_report = fidelity_from_traces(random_traces);
        write_fidelity_json(join(dir, "random_fidelity.json"), random_report);
        write_per_sample_f_csv(join(dir, "random_per_sample_f.csv"), random_report);
    }
}

void stage_aopc(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    const GeneratedData gd = load_data(dir);
    const TinyTextClassifier model = load_model(dir);
    const auto subset = metrics_subset(gd.dataset, cfg.max_samples);

    const AopcResult result =
        aopc(model, subset, cfg.attribution.method, cfg.metrics.aopc_L, cfg.attribution.steps);
    write_perturbation_curves_csv(join(dir, "perturbation_curves.csv"), result);

    ordered_json doc;
    doc["aopc"] = result.aopc;
    doc["L"] = result.requested_L;
    write_json(join(dir, "aopc.json"), doc, "stage_aopc");
}

void stage_drift(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    const GeneratedData gd = load_data(dir);
    const TinyTextClassifier model = load_model(dir);
    const auto subset = metrics_subset(gd.dataset, cfg.max_samples);

    const auto sets =
        masked_embedding_sets(model, subset, cfg.attribution.method, cfg.metrics.drift_fractions,
                              cfg.attribution.steps, dataset_display_name(cfg));
    write_embeddings_csv(join(dir, "embeddings.csv"), sets);
    write_drift_csv(join(dir, "drift.csv"), drift_curve_from_sets(sets));
    try {
        write_projection_csv(join(dir, "projection.csv"), pca_projection(sets));
    } catch (const Error&) {
        // Too few vectors or a degenerate covariance: the projection is a
        // visualization aid, the drift metrics stand without it.
    }
}

void stage_attack(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    const GeneratedData gd = load_data(dir);
    const TinyTextClassifier model = load_model(dir);
    const auto subset = metrics_subset(gd.dataset, cfg.max_samples);

    SubstitutionTable table;
    if (cfg.attack.kind == AttackKind::greedy_substitute) {
        table = cfg.attack.table_path.empty()
                    ? SubstitutionTable::keyword_swaps(gd.vocab)
                    : SubstitutionTable::load(cfg.attack.table_path, gd.vocab);
    }
    const std::uint64_t attack_seed = stage_seed(cfg.seed, "attack");

    std::vector<AttackResult> results;
    results.reserve(subset.size());
    for (std::size_t i = 0; i < subset.size(); ++i) {
        const auto& sample = subset[i];
        switch (cfg.attack.kind) {
            case AttackKind::saliency_mask:
                results.push_back(saliency_mask_attack(model, sample, cfg.attribution.method,
                                                       cfg.attack.budget, cfg.attribution.steps));
                break;
            case AttackKind::greedy_substitute:
                results.push_back(greedy_substitute_attack(model, sample, cfg.attribution.method,
                                                           table, cfg.attack.budget, gd.vocab,
                                                           cfg.attribution.steps));
                break;
            case AttackKind::char_noise:
                results.push_back(char_noise_attack(model, sample, cfg.attribution.method,
                                                    cfg.attack.budget, attack_seed ^ i, gd.vocab,
                                                    cfg.attribution.steps));
                break;
        }
        results.back().original.label = sample.label;
        results.back().perturbed.label = sample.label;
    }
    write_attacks_jsonl(join(dir, "attacks.jsonl"), results);

    std::vector<TokenSequence> successful_perturbed;
    std::vector<TokenSequence> successful_clean;
    double fraction_sum = 0.0;
    for (const auto& r : results) {
        if (r.success) {
            successful_perturbed.push_back(r.perturbed);
            successful_clean.push_back(r.original);
            fraction_sum += r.perturbed_fraction;
        }
    }

    ordered_json doc;
    doc["kind"] = std::string(to_string(cfg.attack.kind));
    doc["budget"] = cfg.attack.budget;
    doc["attacked"] = results.size();
    doc["successful"] = successful_perturbed.size();
    doc["success_rate"] = results.empty() ? 0.0
                                          : static_cast<double>(successful_perturbed.size()) /
                                                static_cast<double>(results.size());
    if (successful_perturbed.empty()) {
        doc["mean_perturbed_fraction_successful"] = nullptr;
    } else {
        doc["mean_perturbed_fraction_successful"] =
            fraction_sum / static_cast<double>(successful_perturbed.size());
    }
    write_json(join(dir, "attack.json"), doc, "stage_attack");

    if (!successful_perturbed.empty()) {
        const auto attacked = mask_traces(model, successful_perturbed, cfg.attribution.method,
                                          MaskMode::unk_replace, false, cfg.attribution.steps);
        write_traces_jsonl(join(dir, "traces_attacked.jsonl"), attacked);
        write_fidelity_json(join(dir, "fidelity_attacked.json"), fidelity_from_traces(attacked));

        const auto clean = mask_traces(model, successful_clean, cfg.attribution.method,
                                       MaskMode::unk_replace, false, cfg.attribution.steps);
        write_traces_jsonl(join(dir, "traces_attacked_clean.jsonl"), clean);
        write_fidelity_json(join(dir, "fidelity_attacked_clean.json"),
                            fidelity_from_traces(clean));
    }
}

void stage_advtrain(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    const GeneratedData gd = load_data(dir);
    const TinyTextClassifier model = load_model(dir);
    const auto subset = metrics_subset(gd.dataset, cfg.max_samples);

    const auto records = read_attacks_jsonl(join(dir, "attacks.jsonl"));
    const auto attacks = rebuild_attacks(records, gd.vocab);

    const Dataset clean = make_dataset(subset, gd.dataset.num_classes, "advtrain_clean");
    TrainConfig tc = cfg.model.train;
    tc.seed = stage_seed(cfg.seed, "advtrain");
    const AdvTrainResult adv = adversarial_train(model, clean, attacks, tc);

    adv.model.save(join(dir, "model_adv.json"));
    ordered_json doc;
    doc["validation_accuracy"] = adv.validation_accuracy;
    doc["mixed_size"] = adv.mixed_size;
    doc["loss_history"] = adv.loss_history;
    write_json(join(dir, "advtrain.json"), doc, "stage_advtrain");

    const auto clean_post = mask_traces(adv.model, subset, cfg.attribution.method,
                                        MaskMode::unk_replace, false, cfg.attribution.steps);
    write_traces_jsonl(join(dir, "traces_clean_post.jsonl"), clean_post);
    write_fidelity_json(join(dir, "fidelity_clean_post.json"), fidelity_from_traces(clean_post));

    std::vector<TokenSequence> successful_perturbed;
    for (const auto& a : attacks) {
        if (a.success) {
            successful_perturbed.push_back(a.perturbed);
        }
    }
    if (!successful_perturbed.empty()) {
        const auto attacked_post =
            mask_traces(adv.model, successful_perturbed, cfg.attribution.method,
                        MaskMode::unk_replace, false, cfg.attribution.steps);
        write_traces_jsonl(join(dir, "traces_attacked_post.jsonl"), attacked_post);
        write_fidelity_json(join(dir, "fidelity_attacked_post.json"),
                            fidelity_from_traces(attacked_post));
    }
}

std::string stage_report(const ExperimentConfig& cfg) {
    const auto& dir = cfg.output_dir;
    ordered_json doc;

    {
        const GeneratedData gd = load_data(dir);
        ordered_json ds;
        ds["name"] = dataset_display_name(cfg);
        ds["num_samples"] = gd.dataset.size();
        ds["num_classes"] = gd.dataset.num_classes;
        ds["class_counts"] = gd.dataset.class_counts;
        doc["dataset"] = ds;
        doc["metrics_samples"] =
            std::min(gd.dataset.size(), static_cast<std::size_t>(std::max(cfg.max_samples, 0)));
    }

    if (exists(join(dir, "training.json"))) {
        const ordered_json training = read_json(join(dir, "training.json"));
        ordered_json m;
        const auto& history = training.at("loss_history");
        m["loss_final"] = history.empty() ? ordered_json(nullptr) : history.back();
        m["holdout_accuracy"] = training.at("holdout_accuracy");
        m["holdout_macro_f1"] = training.at("holdout_macro_f1");
        doc["model"] = m;
    }

    if (exists(join(dir, "fidelity.json"))) {
        doc["fidelity"] = fidelity_fields(read_json(join(dir, "fidelity.json")),
                                          cfg.metrics.fidelity, cfg.metrics.non_pert);
    }
    if (exists(join(dir, "random_fidelity.json"))) {
        doc["random_baseline"] = fidelity_fields(read_json(join(dir, "random_fidelity.json")),
                                                 cfg.metrics.fidelity, cfg.metrics.non_pert);
    }
    if (exists(join(dir, "aopc.json"))) {
        const ordered_json a = read_json(join(dir, "aopc.json"));
        ordered_json out;
        out["aopc"] = a.at("aopc");
        out["L"] = a.at("L");
        doc["aopc"] = out;
    }
    if (exists(join(dir, "drift.csv"))) {
        doc["drift"] = drift_fields(read_drift_csv(join(dir, "drift.csv")));
    }
    if (exists(join(dir, "attack.json"))) {
        ordered_json a = read_json(join(dir, "attack.json"));
        if (exists(join(dir, "fidelity_attacked.json"))) {
            a["fidelity_attacked"] =
                fidelity_fields(read_json(join(dir, "fidelity_attacked.json")), true, true);
        }
        if (exists(join(dir, "fidelity_attacked_clean.json"))) {
            a["fidelity_attacked_clean"] =
                fidelity_fields(read_json(join(dir, "fidelity_attacked_clean.json")), true, true);
        }
        doc["attack"] = a;
    }
    if (exists(join(dir, "advtrain.json"))) {
        const ordered_json adv = read_json(join(dir, "advtrain.json"));
        ordered_json a;
        a["validation_accuracy"] = adv.at("validation_accuracy");
        a["mixed_size"] = adv.at("mixed_size");
        if (exists(join(dir, "fidelity_clean_post.json"))) {
            a["fidelity_clean_post"] =
                fidelity_fields(read_json(join(dir, "fidelity_clean_post.json")), true, true);
        }
        if (exists(join(dir, "fidelity_attacked_post.json"))) {
            a["fidelity_attacked_post"] =
                fidelity_fields(read_json(join(dir, "fidelity_attacked_post.json")), true, true);
        }
        doc["adv_training"] = a;
    }

    const std::string text = doc.dump(2) + "\n";
    {
        auto out = detail::open_out(join(dir, "summary.json"), "stage_report");
        out << text;
    }
    render_plots(dir);
    return text;
}

std::string run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    run_stage("generate", [&] { stage_generate(cfg); });
    run_stage("train", [&] { stage_train(cfg); });
    run_stage("attribute", [&] { stage_attribute(cfg); });
    if (cfg.metrics.fidelity || cfg.metrics.non_pert) {
        run_stage("fidelity", [&] { stage_fidelity(cfg); });
    }
    if (cfg.metrics.aopc) {
        run_stage("aopc", [&] { stage_aopc(cfg); });
    }
    if (cfg.metrics.drift) {
        run_stage("drift", [&] { stage_drift(cfg); });
    }
    if (cfg.attack.enabled) {
        run_stage("attack", [&] { stage_attack(cfg); });
    }
    if (cfg.adv_training) {
        run_stage("advtrain", [&] { stage_advtrain(cfg); });
    }
    std::string summary;
    run_stage("report", [&] { summary = stage_report(cfg); });
    return summary;
}

std::string recompute_summary(const std::string& dir) {
    ordered_json doc;

    std::optional<GeneratedData> gd;
    if (exists(join(dir, "dataset.jsonl")) && exists(join(dir, "vocab.txt"))) {
        gd = load_data(dir);
        ordered_json ds;
        ds["num_samples"] = gd->dataset.size();
        ds["num_classes"] = gd->dataset.num_classes;
        ds["class_counts"] = gd->dataset.class_counts;
        doc["dataset"] = ds;
    }

    if (exists(join(dir, "predictions.csv"))) {
        const PredictionRows rows = read_predictions_csv(join(dir, "predictions.csv"));
        ordered_json m;
        if (exists(join(dir, "training.json"))) {
            const ordered_json training = read_json(join(dir, "training.json"));
            const auto& history = training.at("loss_history");
            m["loss_final"] = history.empty() ? ordered_json(nullptr) : history.back();
        }
        if (rows.labels.empty()) {
            m["holdout_accuracy"] = nullptr;
            m["holdout_macro_f1"] = nullptr;
        } else {
            int num_classes = gd ? gd->dataset.num_classes : 2;
            for (std::size_t i = 0; i < rows.labels.size(); ++i) {
                num_classes = std::max({num_classes, rows.labels[i] + 1, rows.predictions[i] + 1});
            }
            std::size_t correct = 0;
            for (std::size_t i = 0; i < rows.labels.size(); ++i) {
                if (rows.labels[i] == rows.predictions[i]) {
                    ++correct;
                }
            }
            m["holdout_accuracy"] =
                static_cast<double>(correct) / static_cast<double>(rows.labels.size());
            m["holdout_macro_f1"] =
                macro_f1(rows.predictions, rows.labels, num_classes).macro_f1;
        }
        doc["model"] = m;
    }

    const auto fidelity_from_file = [&](const char* name) -> std::optional<ordered_json> {
        const std::string path = join(dir, name);
        if (!exists(path)) {
            return std::nullopt;
        }
        return fidelity_fields(fidelity_from_traces(read_traces_jsonl(path)), true, true);
    };

    if (auto f = fidelity_from_file("traces.jsonl")) {
        doc["fidelity"] = *f;
    }
    if (auto f = fidelity_from_file("random_traces.jsonl")) {
        doc["random_baseline"] = *f;
    }
    if (exists(join(dir, "perturbation_curves.csv"))) {
        const AopcResult result =
            read_perturbation_curves_csv(join(dir, "perturbation_curves.csv"));
        ordered_json a;
        a["aopc"] = result.aopc;
        doc["aopc"] = a;
    }
    if (exists(join(dir, "embeddings.csv"))) {
        doc["drift"] =
            drift_fields(drift_curve_from_sets(read_embeddings_csv(join(dir, "embeddings.csv"))));
    }

    if (exists(join(dir, "attacks.jsonl")) && gd && exists(join(dir, "model.json"))) {
        const TinyTextClassifier model = load_model(dir);
        const auto records = read_attacks_jsonl(join(dir, "attacks.jsonl"));
        std::size_t successful = 0;
        double fraction_sum = 0.0;
        for (const auto& rec : records) {
            const TokenSequence original = tokenize(rec.original_text, gd->vocab);
            const TokenSequence perturbed = tokenize(rec.perturbed_text, gd->vocab);
            const bool flipped =
                predicted_class(model, perturbed) != predicted_class(model, original);
            if (flipped) {
                ++successful;
                fraction_sum += rec.perturbed_fraction;
            }
        }
        ordered_json a;
        a["attacked"] = records.size();
        a["successful"] = successful;
        a["success_rate"] = records.empty() ? 0.0
                                            : static_cast<double>(successful) /
                                                  static_cast<double>(records.size());
        if (successful == 0) {
            a["mean_perturbed_fraction_successful"] = nullptr;
        } else {
            a["mean_perturbed_fraction_successful"] =
                fraction_sum / static_cast<double>(successful);
        }
        if (auto f = fidelity_from_file("traces_attacked.jsonl")) {
            a["fidelity_attacked"] = *f;
        }
        if (auto f = fidelity_from_file("traces_attacked_clean.jsonl")) {
            a["fidelity_attacked_clean"] = *f;
        }
        doc["attack"] = a;
    }

    if (exists(join(dir, "advtrain.json"))) {
        const ordered_json adv = read_json(join(dir, "advtrain.json"));
        ordered_json a;
        a["validation_accuracy"] = adv.at("validation_accuracy");
        a["mixed_size"] = adv.at("mixed_size");
        if (auto f = fidelity_from_file("traces_clean_post.jsonl")) {
            a["fidelity_clean_post"] = *f;
        }
        if (auto f = fidelity_from_file("traces_attacked_post.jsonl")) {
            a["fidelity_attacked_post"] = *f;
        }
        doc["adv_training"] = a;
    }

    return doc.dump(2) + "\n";
}

}  // namespace masklab
