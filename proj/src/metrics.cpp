#include "dfd/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

#include "dfd/error.hpp"

namespace dfd {
namespace {

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw ValidationError(std::string(what) + ": scores and labels differ in length");
}

// Stable descending order by score.
std::vector<std::size_t> rank_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

double auc_roc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "auc_roc");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups in ascending score; every pair is counted with integer
  // arithmetic (halves are exact in binary), so the only rounding is the
  // final division.
  double concordant2 = 0.0;  // 2 × (wins + ties/2)
  double neg_below = 0.0, pos_total = 0.0, neg_total = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      const int y = labels[order[j]];
      if (y != 0 && y != 1) throw ValidationError("auc_roc: labels must be 0 or 1");
      (y == 1 ? pos : neg) += 1.0;
      ++j;
    }
    concordant2 += pos * (2.0 * neg_below + neg);
    neg_below += neg;
    pos_total += pos;
    neg_total += neg;
    i = j;
  }
  if (pos_total == 0.0 || neg_total == 0.0) throw ValidationError("auc_roc: both classes must be present");
  return concordant2 / (2.0 * pos_total * neg_total);
}

double auc_prc(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "auc_prc");
  const auto order = rank_order(scores);
  double hits = 0.0, sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    const int y = labels[order[r]];
    if (y != 0 && y != 1) throw ValidationError("auc_prc: labels must be 0 or 1");
    if (y == 1) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  if (hits == 0.0) throw ValidationError("auc_prc: at least one positive is required");
  return sum / hits;
}

double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw ValidationError("accuracy: length mismatch");
  if (labels.empty()) throw ValidationError("accuracy: empty input");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predictions[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

namespace {

template <typename F>
double one_vs_rest(const Matrix& probs, std::span<const int> labels, F&& metric) {
  if (probs.rows() != labels.size()) throw ValidationError("metric: probability rows differ from label count");
  if (probs.cols() < 2) throw ValidationError("metric: need at least two classes");
  auto column = [&](std::size_t k, std::vector<double>& s, std::vector<int>& y) {
    s.resize(labels.size());
    y.resize(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      s[i] = probs(i, k);
      y[i] = labels[i] == static_cast<int>(k) ? 1 : 0;
    }
  };
  std::vector<double> s;
  std::vector<int> y;
  if (probs.cols() == 2) {
    column(1, s, y);
    return metric(s, y);
  }
  double total = 0.0;
  int used = 0;
  for (std::size_t k = 0; k < probs.cols(); ++k) {
    column(k, s, y);
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos == 0 || pos == static_cast<long>(y.size())) continue;
    total += metric(s, y);
    ++used;
  }
  if (used == 0) throw ValidationError("metric: no class has both outcomes present");
  return total / used;
}

}  // namespace

double auc_roc_multiclass(const Matrix& probs, std::span<const int> labels) {
  return one_vs_rest(probs, labels, [](const auto& s, const auto& y) { return auc_roc(s, y); });
}

double auc_prc_multiclass(const Matrix& probs, std::span<const int> labels) {
  return one_vs_rest(probs, labels, [](const auto& s, const auto& y) { return auc_prc(s, y); });
}

}  // namespace dfd
