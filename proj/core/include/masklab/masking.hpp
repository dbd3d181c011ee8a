#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "masklab/attribution.hpp"
#include "masklab/corpus.hpp"
#include "masklab/model.hpp"

namespace masklab {

enum class MaskMode { unk_replace, delete_token };

std::string_view to_string(MaskMode mode);
MaskMode mask_mode_from_string(std::string_view s);

struct TraceStep {
    int masked_index = -1;  // position in the original sequence
    Vec probabilities;
    int predicted_class = -1;
};

/// Step-by-step record of masking one sample until its prediction flips or
/// its maskable tokens run out.
struct MaskingTrace {
    int sample_id = -1;
    std::vector<TraceStep> steps;
    Vec initial_probabilities;
    int initial_class = -1;
    std::optional<int> flip_step;  // 1-based index of the first flipped step
    int maskable_count = 0;
    MaskMode mode = MaskMode::unk_replace;
};

/// Masks tokens of one sample in descending attribution order (attribution of
/// the initially predicted class) until the predicted class changes or every
/// maskable token has been processed. With recompute = true the attribution
/// is recomputed on the current masked sequence before each step. In
/// delete_token mode a step that would empty the sequence is not taken.
MaskingTrace iterative_mask(const ClassifierModel& model, const TokenSequence& sample,
                            AttributionMethod attr_method, MaskMode mode = MaskMode::unk_replace,
                            bool recompute = false, int ig_steps = 30, int sample_id = -1);

/// Same trace loop, but the masking order is given explicitly as original
/// token positions. max_steps < 0 means no cap beyond the order itself.
MaskingTrace iterative_mask_with_order(const ClassifierModel& model, const TokenSequence& sample,
                                       const std::vector<int>& order,
                                       MaskMode mode = MaskMode::unk_replace, int sample_id = -1,
                                       int max_steps = -1);

std::vector<MaskingTrace> mask_traces(const ClassifierModel& model,
                                      const std::vector<TokenSequence>& samples,
                                      AttributionMethod attr_method,
                                      MaskMode mode = MaskMode::unk_replace,
                                      bool recompute = false, int ig_steps = 30);

/// Fidelity = 1 - mean over samples of f, where f = C/N, C the first flip
/// step and N the maskable count; samples that never flip take C = N.
struct FidelityReport {
    double fidelity = 0.0;
    std::vector<double> per_sample_f;
    double non_perturbation_frequency = 0.0;
    double mean_masked_fraction = 0.0;
    std::size_t K = 0;
};

FidelityReport fidelity_from_traces(const std::vector<MaskingTrace>& traces);

FidelityReport fidelity(const ClassifierModel& model, const std::vector<TokenSequence>& samples,
                        AttributionMethod attr_method, MaskMode mode = MaskMode::unk_replace,
                        int ig_steps = 30);

/// Fidelity under a uniformly random masking order per sample instead of an
/// attribution ranking; deterministic in seed.
FidelityReport random_baseline_fidelity(const ClassifierModel& model,
                                        const std::vector<TokenSequence>& samples,
                                        std::uint64_t seed,
                                        MaskMode mode = MaskMode::unk_replace);

std::vector<MaskingTrace> random_mask_traces(const ClassifierModel& model,
                                             const std::vector<TokenSequence>& samples,
                                             std::uint64_t seed,
                                             MaskMode mode = MaskMode::unk_replace);

/// Drop in originally-predicted-class probability as the top-k attributed
/// tokens are masked, k = 0..L; values[0] = 0.
struct PerturbationCurve {
    int sample_id = -1;
    std::vector<double> values;
    int L = 0;          // per-sample, clamped to the maskable count
    bool clamped = false;
};

struct AopcResult {
    double aopc = 0.0;
    int requested_L = 0;
    std::vector<PerturbationCurve> curves;
};

/// Area over the perturbation curve: dataset mean of
/// 1/(L+1) * sum_{k=1..L} (f(x) - f(x_{1..k})), masking with [UNK] in initial
/// attribution-ranking order. L is clamped per sample.
AopcResult aopc(const ClassifierModel& model, const std::vector<TokenSequence>& samples,
                AttributionMethod attr_method, int L, int ig_steps = 30);

/// AOPC with a seeded uniform-random masking order per sample.
AopcResult aopc_random_ranking(const ClassifierModel& model,
                               const std::vector<TokenSequence>& samples, int L,
                               std::uint64_t seed);

// Artifact IO.
void write_traces_jsonl(const std::string& path, const std::vector<MaskingTrace>& traces);
std::vector<MaskingTrace> read_traces_jsonl(const std::string& path);

void write_fidelity_json(const std::string& path, const FidelityReport& report);
void write_per_sample_f_csv(const std::string& path, const FidelityReport& report);

void write_perturbation_curves_csv(const std::string& path, const AopcResult& result);
AopcResult read_perturbation_curves_csv(const std::string& path);

}  // namespace masklab
