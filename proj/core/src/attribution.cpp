#include "masklab/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "io_util.hpp"
#include "masklab/error.hpp"

namespace masklab {

std::string_view to_string(AttributionMethod method) {
    switch (method) {
        case AttributionMethod::integrated_gradients:
            return "integrated_gradients";
        case AttributionMethod::occlusion:
            return "occlusion";
    }
    throw Error("unknown attribution method");
}

AttributionMethod attribution_method_from_string(std::string_view s) {
    if (s == "integrated_gradients") {
        return AttributionMethod::integrated_gradients;
    }
    if (s == "occlusion") {
        return AttributionMethod::occlusion;
    }
    throw ConfigError("unknown attribution method \"" + std::string(s) + "\"");
}

AttributionVector integrated_gradients(const ClassifierModel& model, const TokenSequence& sample,
                                       int target_class, int steps) {
    if (steps < 1) {
        throw Error("integrated_gradients: steps must be >= 1");
    }
    if (!model.capabilities().differentiable) {
        throw Error("integrated_gradients: model is not differentiable");
    }
    const Matrix x = model.input_embeddings(sample);
    const std::size_t n = x.rows();
    const std::size_t d = x.cols();
    const auto t = static_cast<std::size_t>(target_class);

    Matrix grad_sum(n, d);
    Matrix point(n, d);
    for (int k = 1; k <= steps; ++k) {
        const double alpha = static_cast<double>(k) / static_cast<double>(steps);
        for (std::size_t i = 0; i < n * d; ++i) {
            point.data()[i] = alpha * x.data()[i];
        }
        const Matrix g = model.grad_wrt_inputs(point, target_class);
        for (std::size_t i = 0; i < n * d; ++i) {
            grad_sum.data()[i] += g.data()[i];
        }
    }

    AttributionVector attr;
    attr.method = AttributionMethod::integrated_gradients;
    attr.target_class = target_class;
    attr.steps = steps;
    attr.scores.assign(n, 0.0);
    const double inv_steps = 1.0 / static_cast<double>(steps);
    for (std::size_t i = 0; i < n; ++i) {
        double score = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
            score += x(i, j) * grad_sum(i, j) * inv_steps;
        }
        attr.scores[i] = score;
    }
    if (!all_finite(attr.scores)) {
        throw Error("integrated_gradients: non-finite attribution");
    }

    const double f_input = model.predict_from_embeddings(x)[t];
    const double f_baseline = model.predict_from_embeddings(Matrix(n, d))[t];
    const double total = std::accumulate(attr.scores.begin(), attr.scores.end(), 0.0);
    attr.completeness_gap = std::abs(total - (f_input - f_baseline));
    return attr;
}

AttributionVector occlusion(const ClassifierModel& model, const TokenSequence& sample,
                            int target_class) {
    if (sample.size() == 0) {
        throw Error("empty input");
    }
    const auto t = static_cast<std::size_t>(target_class);
    const double f_full = model.predict(sample)[t];

    AttributionVector attr;
    attr.method = AttributionMethod::occlusion;
    attr.target_class = target_class;
    attr.scores.assign(sample.size(), 0.0);
    TokenSequence masked = sample;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const int saved_id = masked.ids[i];
        std::string saved_raw = std::move(masked.raw[i]);
        masked.ids[i] = Vocab::kUnkId;
        masked.raw[i] = Vocab::kUnkToken;
        attr.scores[i] = f_full - model.predict(masked)[t];
        masked.ids[i] = saved_id;
        masked.raw[i] = std::move(saved_raw);
    }
    return attr;
}

AttributionVector attribute(const ClassifierModel& model, const TokenSequence& sample,
                            int target_class, AttributionMethod method, int steps) {
    switch (method) {
        case AttributionMethod::integrated_gradients:
            return integrated_gradients(model, sample, target_class, steps);
        case AttributionMethod::occlusion:
            return occlusion(model, sample, target_class);
    }
    throw Error("unknown attribution method");
}

std::vector<int> rank_tokens(const AttributionVector& attr, const std::vector<bool>& maskable) {
    if (attr.scores.size() != maskable.size()) {
        throw Error("rank_tokens: " + std::to_string(attr.scores.size()) + " scores vs " +
                    std::to_string(maskable.size()) + " maskable flags");
    }
    std::vector<int> order;
    for (std::size_t i = 0; i < maskable.size(); ++i) {
        if (maskable[i]) {
            order.push_back(static_cast<int>(i));
        }
    }
    if (order.empty()) {
        throw Error("rank_tokens: no maskable tokens");
    }
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return attr.scores[static_cast<std::size_t>(a)] > attr.scores[static_cast<std::size_t>(b)];
    });
    return order;
}

void write_attribution_csv(const std::string& path,
                           const std::vector<AttributionVector>& attributions,
                           const std::vector<TokenSequence>& samples) {
    if (attributions.size() != samples.size()) {
        throw Error("write_attribution_csv: " + std::to_string(attributions.size()) +
                    " attributions vs " + std::to_string(samples.size()) + " samples");
    }
    auto out = detail::open_out(path, "write_attribution_csv");
    out << "sample_id,token_index,raw_token,score,method,target_class\n";
    for (std::size_t s = 0; s < samples.size(); ++s) {
        const auto& attr = attributions[s];
        if (attr.scores.size() != samples[s].size()) {
            throw Error("write_attribution_csv: sample " + std::to_string(s) +
                        " length mismatch");
        }
        for (std::size_t i = 0; i < attr.scores.size(); ++i) {
            out << s << ',' << i << ',' << samples[s].raw[i] << ','
                << detail::fmt_double(attr.scores[i]) << ',' << to_string(attr.method) << ','
                << attr.target_class << '\n';
        }
    }
}

}  // namespace masklab
