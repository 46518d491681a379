#include "dfd/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "dfd/metrics.hpp"
#include "dfd/probe.hpp"

namespace dfd {
using nlohmann::json;

double round_significant(double v, int digits) {
  if (!std::isfinite(v) || v == 0.0) return v;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return std::strtod(buf, nullptr);
}

namespace {

json rounded(const json& j) {
  if (j.is_number_float()) return round_significant(j.get<double>());
  if (j.is_object()) {
    json out = json::object();
    for (const auto& [k, v] : j.items()) out[k] = rounded(v);
    return out;
  }
  if (j.is_array()) {
    json out = json::array();
    for (const auto& v : j) out.push_back(rounded(v));
    return out;
  }
  return j;
}

}  // namespace

json MetricsReport::to_json() const {
  json splits_json = json::object();
  for (const auto& [name, m] : splits) {
    json s{{"auc_roc", m.auc_roc}, {"auc_prc", m.auc_prc}, {"accuracy", m.accuracy}, {"class_counts", m.class_counts}};
    s["probe_acc_Hc"] = m.probe_acc_hc ? json(*m.probe_acc_hc) : json(nullptr);
    s["probe_acc_Hb"] = m.probe_acc_hb ? json(*m.probe_acc_hb) : json(nullptr);
    splits_json[name] = s;
  }
  return rounded(json{{"schema", kMetricsSchema}, {"seed", seed}, {"config", config}, {"splits", splits_json}});
}

std::string MetricsReport::dump() const { return to_json().dump(2) + "\n"; }

SplitMetrics compute_split_metrics(const MultimodalDataset& ds, const DfdModel::Evaluation& ev,
                                   std::uint64_t probe_seed) {
  SplitMetrics m;
  const Matrix& probs = ev.predictions.probs;
  m.auc_roc = auc_roc_multiclass(probs, ds.labels);
  m.auc_prc = auc_prc_multiclass(probs, ds.labels);
  m.accuracy = accuracy(ev.predictions.classes, ds.labels);
  m.class_counts.assign(static_cast<std::size_t>(ds.num_classes), 0);
  for (int y : ds.labels) ++m.class_counts[static_cast<std::size_t>(y)];
  if (ds.bias_attr && ds.num_patients() >= 4) {
    ProbeOptions po;
    po.seed = probe_seed;
    m.probe_acc_hc = linear_probe(ev.reps.causal, *ds.bias_attr, ds.num_classes, po);
    if (!ev.reps.bias.empty()) m.probe_acc_hb = linear_probe(ev.reps.bias, *ds.bias_attr, ds.num_classes, po);
  }
  return m;
}

}  // namespace dfd
