#pragma once

#include <vector>

namespace masklab {

/// One-vs-rest precision/recall/F1 per class plus their unweighted mean.
/// A class with no predicted and no actual positives contributes F1 = 0.
struct MacroF1 {
    std::vector<double> precision;
    std::vector<double> recall;
    std::vector<double> f1;
    double macro_f1 = 0.0;
};

MacroF1 macro_f1(const std::vector<int>& predictions, const std::vector<int>& labels,
                 int num_classes);

}  // namespace masklab
