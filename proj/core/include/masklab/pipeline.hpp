#pragma once

#include <string>

#include "masklab/config.hpp"

namespace masklab {

// Each stage reads its inputs from cfg.output_dir and writes its artifacts
// there, so every stage can also be run standalone from the CLI against the
// artifacts of earlier stages.
//
// Artifact map (all under output_dir):
//   generate   dataset.jsonl, vocab.txt
//   train      model.json, training.json, predictions.csv
//   attribute  attributions.csv
//   fidelity   traces.jsonl, fidelity.json, per_sample_f.csv
//              (+ random_traces.jsonl, random_fidelity.json,
//                 random_per_sample_f.csv when the random baseline is on)
//   aopc       aopc.json, perturbation_curves.csv
//   drift      embeddings.csv, drift.csv, projection.csv
//   attack     attacks.jsonl, attack.json, traces_attacked.jsonl,
//              fidelity_attacked.json, traces_attacked_clean.jsonl,
//              fidelity_attacked_clean.json
//   advtrain   model_adv.json, advtrain.json, traces_clean_post.jsonl,
//              fidelity_clean_post.json, traces_attacked_post.jsonl,
//              fidelity_attacked_post.json
//   report     summary.json, drift.svg, perturbation.svg,
//              fidelity_bars.svg, plots_manifest.json
void stage_generate(const ExperimentConfig& cfg);
void stage_train(const ExperimentConfig& cfg);
void stage_attribute(const ExperimentConfig& cfg);
void stage_fidelity(const ExperimentConfig& cfg);
void stage_aopc(const ExperimentConfig& cfg);
void stage_drift(const ExperimentConfig& cfg);
void stage_attack(const ExperimentConfig& cfg);
void stage_advtrain(const ExperimentConfig& cfg);

/// Composes summary.json from the artifacts present in cfg.output_dir and
/// renders the plots. Returns the summary JSON text.
std::string stage_report(const ExperimentConfig& cfg);

/// Validates the config, runs every enabled stage in order and returns the
/// summary JSON text. A stage error aborts with the stage name prefixed;
/// artifacts written so far are left in place.
std::string run_experiment(const ExperimentConfig& cfg);

/// Rebuilds the summary metrics from the per-sample artifact files alone
/// (traces, curves, embeddings, predictions, attack records), never from
/// stage aggregates; attack successes are re-verified against the saved
/// model. Returns JSON shaped like summary.json covering every section whose
/// inputs are present.
std::string recompute_summary(const std::string& dir);

}  // namespace masklab
