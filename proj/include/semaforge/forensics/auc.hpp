#pragma once

#include <span>
#include <vector>

namespace semaforge::forensics {

/// Area under the ROC curve as the Mann-Whitney statistic, ties counted
/// half. Labels: 1 positive (generated), 0 negative. Throws
/// InsufficientSamplesError when either class is missing.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// Best accuracy over all thresholds (predict positive when score >= t).
double max_accuracy(std::span<const double> scores, std::span<const int> labels);

double accuracy_at(std::span<const double> scores, std::span<const int> labels, double threshold = 0.5);

}  // namespace semaforge::forensics
