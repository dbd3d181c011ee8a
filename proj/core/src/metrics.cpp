#include "masklab/metrics.hpp"

#include <string>

#include "masklab/error.hpp"

namespace masklab {

MacroF1 macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                 int num_classes) {
    if (predictions.size() != labels.size()) {
        throw Error("macro_f1: " + std::to_string(predictions.size()) + " predictions vs " +
                    std::to_string(labels.size()) + " labels");
    }
    if (predictions.empty()) {
        throw Error("macro_f1: empty input");
    }
    if (num_classes < 2) {
        throw Error("macro_f1: num_classes must be >= 2");
    }

    const auto classes = static_cast<std::size_t>(num_classes);
    std::vector<std::size_t> tp(classes, 0), fp(classes, 0), fn(classes, 0);
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int pred = predictions[i];
        const int label = labels[i];
        if (pred < 0 || pred >= num_classes || label < 0 || label >= num_classes) {
            throw Error("macro_f1: class index out of range at position " + std::to_string(i));
        }
        if (pred == label) {
            ++tp[static_cast<std::size_t>(pred)];
        } else {
            ++fp[static_cast<std::size_t>(pred)];
            ++fn[static_cast<std::size_t>(label)];
        }
    }

    MacroF1 result;
    result.precision.resize(classes);
    result.recall.resize(classes);
    result.f1.resize(classes);
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        const double p = tp[c] + fp[c] == 0
                             ? 0.0
                             : static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]);
        const double r = tp[c] + fn[c] == 0
                             ? 0.0
                             : static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]);
        result.precision[c] = p;
        result.recall[c] = r;
        result.f1[c] = p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
        total += result.f1[c];
    }
    result.macro_f1 = total / static_cast<double>(classes);
    return result;
}

}  // namespace masklab
