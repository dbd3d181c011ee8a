#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "masklab/corpus.hpp"
#include "masklab/linalg.hpp"
#include "masklab/model.hpp"

namespace masklab {

enum class AttributionMethod { integrated_gradients, occlusion };

std::string_view to_string(AttributionMethod method);
AttributionMethod attribution_method_from_string(std::string_view s);

/// Per-token saliency scores for one sample and one target class.
struct AttributionVector {
    Vec scores;
    int target_class = 0;
    AttributionMethod method = AttributionMethod::integrated_gradients;
    int steps = 0;                  // integrated gradients only
    double completeness_gap = 0.0;  // integrated gradients only
};

/// Path integral of model gradients from the zero-embedding baseline to the
/// input, right-endpoint Riemann sum over `steps` points. Each token's score
/// is the signed sum of its per-dimension attributions, so scores add up to
/// F(input) - F(baseline) up to the recorded completeness_gap.
AttributionVector integrated_gradients(const ClassifierModel& model, const TokenSequence& sample,
                                       int target_class, int steps = 30);

/// score_i = F(sample) - F(sample with token i replaced by [UNK]). Needs no
/// gradients, so it works against any classifier.
AttributionVector occlusion(const ClassifierModel& model, const TokenSequence& sample,
                            int target_class);

AttributionVector attribute(const ClassifierModel& model, const TokenSequence& sample,
                            int target_class, AttributionMethod method, int steps = 30);

/// Maskable token indices sorted by score descending; ties break toward the
/// lower index; non-maskable indices are dropped.
std::vector<int> rank_tokens(const AttributionVector& attr, const std::vector<bool>& maskable);

/// CSV dump, one row per token: sample_id, token_index, raw_token, score,
/// method, target_class. sample_id is the position in the parallel lists.
void write_attribution_csv(const std::string& path,
                           const std::vector<AttributionVector>& attributions,
                           const std::vector<TokenSequence>& samples);

}  // namespace masklab
