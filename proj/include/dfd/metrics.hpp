#pragma once

#include <span>

#include "dfd/tensor.hpp"

namespace dfd {

// Probability that a random positive outscores a random negative, ties counting
// one half (normalised Mann–Whitney U). Labels are 0/1; both must be present.
double auc_roc(std::span<const double> scores, std::span<const int> labels);

// Average precision: mean over positives of the precision at that positive's
// rank, ranking by (score descending, index ascending). Needs ≥ 1 positive.
double auc_prc(std::span<const double> scores, std::span<const int> labels);

double accuracy(std::span<const int> predictions, std::span<const int> labels);

// Binary tasks score class 1; K > 2 averages one-vs-rest over classes present
// with both outcomes.
double auc_roc_multiclass(const Matrix& probs, std::span<const int> labels);
double auc_prc_multiclass(const Matrix& probs, std::span<const int> labels);

}  // namespace dfd
