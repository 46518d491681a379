#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfd/model.hpp"
#include "dfd/synthdata.hpp"

namespace dfd {

inline constexpr const char* kMetricsSchema = "dfd/1";

struct SplitMetrics {
  double auc_roc = 0.0;
  double auc_prc = 0.0;
  double accuracy = 0.0;
  std::vector<std::size_t> class_counts;
  std::optional<double> probe_acc_hc;  // bias-attribute probes; synthetic data only
  std::optional<double> probe_acc_hb;
};

struct MetricsReport {
  std::map<std::string, SplitMetrics> splits;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  // Sorted keys, numbers rounded to 10 significant digits.
  std::string dump() const;
};

double round_significant(double v, int digits = 10);

// Metrics of the causal-head predictions plus, when the split carries bias
// attributes, linear-probe accuracies on H_c and H_b.
SplitMetrics compute_split_metrics(const MultimodalDataset& ds, const DfdModel::Evaluation& ev,
                                   std::uint64_t probe_seed);

}  // namespace dfd
