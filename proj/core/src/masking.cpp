#include "masklab/masking.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "io_util.hpp"
#include "masklab/error.hpp"
#include "masklab/rng.hpp"

namespace masklab {

std::string_view to_string(MaskMode mode) {
    switch (mode) {
        case MaskMode::unk_replace:
            return "unk_replace";
        case MaskMode::delete_token:
            return "delete";
    }
    throw Error("unknown mask mode");
}

MaskMode mask_mode_from_string(std::string_view s) {
    if (s == "unk_replace") {
        return MaskMode::unk_replace;
    }
    if (s == "delete") {
        return MaskMode::delete_token;
    }
    throw ConfigError("unknown mask mode \"" + std::string(s) + "\"");
}

namespace {

void validate_order(const TokenSequence& sample, const std::vector<int>& order) {
    std::vector<bool> seen(sample.size(), false);
    for (int idx : order) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= sample.size()) {
            throw Error("masking order index " + std::to_string(idx) + " out of range");
        }
        if (!sample.maskable[static_cast<std::size_t>(idx)]) {
            throw Error("masking order index " + std::to_string(idx) + " is not maskable");
        }
        if (seen[static_cast<std::size_t>(idx)]) {
            throw Error("masking order repeats index " + std::to_string(idx));
        }
        seen[static_cast<std::size_t>(idx)] = true;
    }
}

void apply_unk(TokenSequence& seq, int pos) {
    seq.ids[static_cast<std::size_t>(pos)] = Vocab::kUnkId;
    seq.raw[static_cast<std::size_t>(pos)] = Vocab::kUnkToken;
}

void apply_delete(TokenSequence& seq, int pos) {
    const auto p = static_cast<std::size_t>(pos);
    seq.ids.erase(seq.ids.begin() + static_cast<std::ptrdiff_t>(p));
    seq.raw.erase(seq.raw.begin() + static_cast<std::ptrdiff_t>(p));
    seq.maskable.erase(seq.maskable.begin() + static_cast<std::ptrdiff_t>(p));
}

/// Follows `order` (original positions) through the masking loop. probs0/y0
/// are the already-computed initial prediction, so every path issues exactly
/// one model call per evaluated sequence.
MaskingTrace run_trace(const ClassifierModel& model, const TokenSequence& sample,
                       const std::vector<int>& order, MaskMode mode, int sample_id,
                       int max_steps, Vec probs0, int y0) {
    MaskingTrace trace;
    trace.sample_id = sample_id;
    trace.mode = mode;
    trace.maskable_count = static_cast<int>(sample.maskable_count());
    trace.initial_probabilities = std::move(probs0);
    trace.initial_class = y0;

    TokenSequence current = sample;
    // current position of each original index; -1 once deleted
    std::vector<int> pos_of(sample.size());
    for (std::size_t i = 0; i < pos_of.size(); ++i) {
        pos_of[i] = static_cast<int>(i);
    }

    int taken = 0;
    for (int idx : order) {
        if (max_steps >= 0 && taken >= max_steps) {
            break;
        }
        const int pos = pos_of[static_cast<std::size_t>(idx)];
        if (mode == MaskMode::delete_token && current.size() == 1) {
            break;  // deleting the last token would leave nothing to evaluate
        }
        if (mode == MaskMode::unk_replace) {
            apply_unk(current, pos);
        } else {
            apply_delete(current, pos);
            pos_of[static_cast<std::size_t>(idx)] = -1;
            for (int& p : pos_of) {
                if (p > pos) {
                    --p;
                }
            }
        }
        TraceStep step;
        step.masked_index = idx;
        step.probabilities = model.predict(current);
        step.predicted_class = argmax(step.probabilities);
        trace.steps.push_back(std::move(step));
        ++taken;
        if (trace.steps.back().predicted_class != y0) {
            trace.flip_step = taken;
            break;
        }
    }
    return trace;
}

}  // namespace

MaskingTrace iterative_mask_with_order(const ClassifierModel& model, const TokenSequence& sample,
                                       const std::vector<int>& order, MaskMode mode,
                                       int sample_id, int max_steps) {
    if (sample.maskable_count() == 0) {
        throw Error("iterative_mask: no maskable tokens");
    }
    validate_order(sample, order);
    Vec probs0 = model.predict(sample);
    const int y0 = argmax(probs0);
    return run_trace(model, sample, order, mode, sample_id, max_steps, std::move(probs0), y0);
}

MaskingTrace iterative_mask(const ClassifierModel& model, const TokenSequence& sample,
                            AttributionMethod attr_method, MaskMode mode, bool recompute,
                            int ig_steps, int sample_id) {
    if (sample.maskable_count() == 0) {
        throw Error("iterative_mask: no maskable tokens");
    }
    Vec probs0 = model.predict(sample);
    const int y0 = argmax(probs0);

    if (!recompute) {
        const AttributionVector attr = attribute(model, sample, y0, attr_method, ig_steps);
        const std::vector<int> order = rank_tokens(attr, sample.maskable);
        return run_trace(model, sample, order, mode, sample_id, -1, std::move(probs0), y0);
    }

    MaskingTrace trace;
    trace.sample_id = sample_id;
    trace.mode = mode;
    trace.maskable_count = static_cast<int>(sample.maskable_count());
    trace.initial_probabilities = std::move(probs0);
    trace.initial_class = y0;

    TokenSequence current = sample;
    std::vector<int> original_of(sample.size());  // current position -> original index
    for (std::size_t i = 0; i < original_of.size(); ++i) {
        original_of[i] = static_cast<int>(i);
    }

    int taken = 0;
    while (current.maskable_count() > 0) {
        if (mode == MaskMode::delete_token && current.size() == 1) {
            break;
        }
        const AttributionVector attr = attribute(model, current, y0, attr_method, ig_steps);
        const int pos = rank_tokens(attr, current.maskable).front();
        const int original_index = original_of[static_cast<std::size_t>(pos)];
        if (mode == MaskMode::unk_replace) {
            apply_unk(current, pos);
            current.maskable[static_cast<std::size_t>(pos)] = false;
        } else {
            apply_delete(current, pos);
            original_of.erase(original_of.begin() + pos);
        }
        TraceStep step;
        step.masked_index = original_index;
        step.probabilities = model.predict(current);
        step.predicted_class = argmax(step.probabilities);
        trace.steps.push_back(std::move(step));
        ++taken;
        if (trace.steps.back().predicted_class != y0) {
            trace.flip_step = taken;
            break;
        }
    }
    return trace;
}

std::vector<MaskingTrace> mask_traces(const ClassifierModel& model,
                                      const std::vector<TokenSequence>& samples,
                                      AttributionMethod attr_method, MaskMode mode,
                                      bool recompute, int ig_steps) {
    std::vector<MaskingTrace> traces;
    traces.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        traces.push_back(iterative_mask(model, samples[i], attr_method, mode, recompute,
                                        ig_steps, static_cast<int>(i)));
    }
    return traces;
}

std::vector<MaskingTrace> random_mask_traces(const ClassifierModel& model,
                                             const std::vector<TokenSequence>& samples,
                                             std::uint64_t seed, MaskMode mode) {
    Rng rng(stage_seed(seed, "masking.random_order"));
    std::vector<MaskingTrace> traces;
    traces.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& sample = samples[i];
        std::vector<int> order;
        for (std::size_t p = 0; p < sample.size(); ++p) {
            if (sample.maskable[p]) {
                order.push_back(static_cast<int>(p));
            }
        }
        rng.shuffle(order);
        traces.push_back(
            iterative_mask_with_order(model, sample, order, mode, static_cast<int>(i)));
    }
    return traces;
}

FidelityReport fidelity_from_traces(const std::vector<MaskingTrace>& traces) {
    if (traces.empty()) {
        throw Error("fidelity: no traces");
    }
    FidelityReport report;
    report.K = traces.size();
    report.per_sample_f.reserve(traces.size());
    std::size_t no_flip = 0;
    double total = 0.0;
    for (const auto& trace : traces) {
        if (trace.maskable_count < 1) {
            throw Error("fidelity: trace with no maskable tokens");
        }
        double f = 1.0;
        if (trace.flip_step.has_value()) {
            f = static_cast<double>(*trace.flip_step) / static_cast<double>(trace.maskable_count);
        } else {
            ++no_flip;
        }
        report.per_sample_f.push_back(f);
        total += f;
    }
    report.fidelity = 1.0 - total / static_cast<double>(traces.size());
    report.mean_masked_fraction = 1.0 - report.fidelity;
    report.non_perturbation_frequency =
        static_cast<double>(no_flip) / static_cast<double>(traces.size());
    return report;
}

FidelityReport fidelity(const ClassifierModel& model, const std::vector<TokenSequence>& samples,
                        AttributionMethod attr_method, MaskMode mode, int ig_steps) {
    return fidelity_from_traces(mask_traces(model, samples, attr_method, mode, false, ig_steps));
}

FidelityReport random_baseline_fidelity(const ClassifierModel& model,
                                        const std::vector<TokenSequence>& samples,
                                        std::uint64_t seed, MaskMode mode) {
    return fidelity_from_traces(random_mask_traces(model, samples, seed, mode));
}

namespace {

PerturbationCurve perturbation_curve(const ClassifierModel& model, const TokenSequence& sample,
                                     const std::vector<int>& order, int L, int sample_id) {
    const Vec probs0 = model.predict(sample);
    const auto y0 = static_cast<std::size_t>(argmax(probs0));
    const double fx = probs0[y0];

    PerturbationCurve curve;
    curve.sample_id = sample_id;
    curve.L = std::min(L, static_cast<int>(order.size()));
    curve.clamped = curve.L < L;
    curve.values.push_back(0.0);

    TokenSequence current = sample;
    for (int k = 1; k <= curve.L; ++k) {
        apply_unk(current, order[static_cast<std::size_t>(k - 1)]);
        curve.values.push_back(fx - model.predict(current)[y0]);
    }
    return curve;
}

double curve_aopc(const PerturbationCurve& curve) {
    double sum = 0.0;
    for (std::size_t k = 1; k < curve.values.size(); ++k) {
        sum += curve.values[k];
    }
    return sum / static_cast<double>(curve.L + 1);
}

AopcResult aggregate_curves(std::vector<PerturbationCurve> curves, int requested_L) {
    AopcResult result;
    result.requested_L = requested_L;
    double total = 0.0;
    for (const auto& curve : curves) {
        total += curve_aopc(curve);
    }
    result.aopc = total / static_cast<double>(curves.size());
    result.curves = std::move(curves);
    return result;
}

}  // namespace

AopcResult aopc(const ClassifierModel& model, const std::vector<TokenSequence>& samples,
                AttributionMethod attr_method, int L, int ig_steps) {
    if (samples.empty()) {
        throw Error("aopc: empty dataset");
    }
    if (L < 1) {
        throw Error("aopc: L must be >= 1");
    }
    std::vector<PerturbationCurve> curves;
    curves.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& sample = samples[i];
        const int y0 = predicted_class(model, sample);
        const AttributionVector attr = attribute(model, sample, y0, attr_method, ig_steps);
        const std::vector<int> order = rank_tokens(attr, sample.maskable);
        curves.push_back(perturbation_curve(model, sample, order, L, static_cast<int>(i)));
    }
    return aggregate_curves(std::move(curves), L);
}

AopcResult aopc_random_ranking(const ClassifierModel& model,
                               const std::vector<TokenSequence>& samples, int L,
                               std::uint64_t seed) {
    if (samples.empty()) {
        throw Error("aopc: empty dataset");
    }
    if (L < 1) {
        throw Error("aopc: L must be >= 1");
    }
    Rng rng(stage_seed(seed, "aopc.random_order"));
    std::vector<PerturbationCurve> curves;
    curves.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& sample = samples[i];
        std::vector<int> order;
        for (std::size_t p = 0; p < sample.size(); ++p) {
            if (sample.maskable[p]) {
                order.push_back(static_cast<int>(p));
            }
        }
        rng.shuffle(order);
        curves.push_back(perturbation_curve(model, sample, order, L, static_cast<int>(i)));
    }
    return aggregate_curves(std::move(curves), L);
}

void write_traces_jsonl(const std::string& path, const std::vector<MaskingTrace>& traces) {
    auto out = detail::open_out(path, "write_traces_jsonl");
    for (const auto& trace : traces) {
        nlohmann::ordered_json obj;
        obj["sample_id"] = trace.sample_id;
        auto& steps = obj["steps"] = nlohmann::ordered_json::array();
        for (const auto& step : trace.steps) {
            nlohmann::ordered_json s;
            s["masked_index"] = step.masked_index;
            s["probabilities"] = step.probabilities;
            s["predicted_class"] = step.predicted_class;
            steps.push_back(std::move(s));
        }
        obj["initial_probabilities"] = trace.initial_probabilities;
        obj["initial_class"] = trace.initial_class;
        if (trace.flip_step.has_value()) {
            obj["flip_step"] = *trace.flip_step;
        } else {
            obj["flip_step"] = nullptr;
        }
        obj["maskable_count"] = trace.maskable_count;
        obj["mode"] = to_string(trace.mode);
        out << obj.dump() << '\n';
    }
}

std::vector<MaskingTrace> read_traces_jsonl(const std::string& path) {
    auto in = detail::open_in(path, "read_traces_jsonl");
    std::vector<MaskingTrace> traces;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("read_traces_jsonl: line " + std::to_string(line_number) + ": " +
                        e.what());
        }
        MaskingTrace trace;
        trace.sample_id = obj.at("sample_id").get<int>();
        for (const auto& s : obj.at("steps")) {
            TraceStep step;
            step.masked_index = s.at("masked_index").get<int>();
            step.probabilities = s.at("probabilities").get<Vec>();
            step.predicted_class = s.at("predicted_class").get<int>();
            trace.steps.push_back(std::move(step));
        }
        trace.initial_probabilities = obj.at("initial_probabilities").get<Vec>();
        trace.initial_class = obj.at("initial_class").get<int>();
        if (!obj.at("flip_step").is_null()) {
            trace.flip_step = obj.at("flip_step").get<int>();
        }
        trace.maskable_count = obj.at("maskable_count").get<int>();
        trace.mode = mask_mode_from_string(obj.at("mode").get<std::string>());
        traces.push_back(std::move(trace));
    }
    return traces;
}

void write_fidelity_json(const std::string& path, const FidelityReport& report) {
    nlohmann::ordered_json obj;
    obj["fidelity"] = report.fidelity;
    obj["non_perturbation_frequency"] = report.non_perturbation_frequency;
    obj["mean_masked_fraction"] = report.mean_masked_fraction;
    obj["K"] = report.K;
    auto out = detail::open_out(path, "write_fidelity_json");
    out << obj.dump(2) << '\n';
}

void write_per_sample_f_csv(const std::string& path, const FidelityReport& report) {
    auto out = detail::open_out(path, "write_per_sample_f_csv");
    out << "sample_id,f\n";
    for (std::size_t i = 0; i < report.per_sample_f.size(); ++i) {
        out << i << ',' << detail::fmt_double(report.per_sample_f[i]) << '\n';
    }
}

void write_perturbation_curves_csv(const std::string& path, const AopcResult& result) {
    auto out = detail::open_out(path, "write_perturbation_curves_csv");
    out << "sample_id,k,value\n";
    for (const auto& curve : result.curves) {
        for (std::size_t k = 0; k < curve.values.size(); ++k) {
            out << curve.sample_id << ',' << k << ',' << detail::fmt_double(curve.values[k])
                << '\n';
        }
    }
}

AopcResult read_perturbation_curves_csv(const std::string& path) {
    auto in = detail::open_in(path, "read_perturbation_curves_csv");
    std::string line;
    if (!std::getline(in, line)) {
        throw Error("read_perturbation_curves_csv: empty file");
    }
    std::vector<PerturbationCurve> curves;
    int current_id = -1;
    int line_number = 1;
    while (std::getline(in, line)) {
        ++line_number;
        if (line.empty()) {
            continue;
        }
        std::istringstream row(line);
        std::string id_s, k_s, value_s;
        if (!std::getline(row, id_s, ',') || !std::getline(row, k_s, ',') ||
            !std::getline(row, value_s)) {
            throw Error("read_perturbation_curves_csv: line " + std::to_string(line_number) +
                        " malformed");
        }
        const int id = std::stoi(id_s);
        const int k = std::stoi(k_s);
        const double value = std::stod(value_s);
        if (id != current_id) {
            curves.emplace_back();
            curves.back().sample_id = id;
            current_id = id;
        }
        auto& curve = curves.back();
        if (static_cast<int>(curve.values.size()) != k) {
            throw Error("read_perturbation_curves_csv: line " + std::to_string(line_number) +
                        " has k out of order");
        }
        curve.values.push_back(value);
        curve.L = static_cast<int>(curve.values.size()) - 1;
    }
    if (curves.empty()) {
        throw Error("read_perturbation_curves_csv: no curves");
    }
    int requested = 0;
    for (const auto& c : curves) {
        requested = std::max(requested, c.L);
    }
    return aggregate_curves(std::move(curves), requested);
}

}  // namespace masklab
