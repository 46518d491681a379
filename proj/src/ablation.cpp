#include "dfd/ablation.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "dfd/io.hpp"

namespace dfd {
namespace fs = std::filesystem;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::without_gce: return "wo_gce";
    case Variant::without_mi: return "wo_mi";
    case Variant::single_stream: return "single_stream";
  }
  return "?";
}

TrainConfig apply_variant(TrainConfig cfg, Variant v) {
  cfg.disable_gce = v == Variant::without_gce;
  cfg.disable_mi = v == Variant::without_mi;
  cfg.single_stream = v == Variant::single_stream;
  return cfg;
}

std::vector<VariantSummary> AblationResult::summarize() const {
  std::vector<VariantSummary> out;
  for (Variant v : kAllVariants) {
    VariantSummary s;
    s.variant = v;
    double sum = 0.0, sum_prc = 0.0, gap = 0.0;
    for (const auto& r : runs) {
      if (r.variant != v) continue;
      ++s.runs;
      sum += r.test_auc_roc;
      sum_prc += r.test_auc_prc;
      gap += r.probe_hb - r.probe_hc;
    }
    if (s.runs == 0) continue;
    const double n = static_cast<double>(s.runs);
    s.mean_auc_roc = sum / n;
    s.mean_auc_prc = sum_prc / n;
    s.mean_probe_gap = v == Variant::single_stream ? std::numeric_limits<double>::quiet_NaN() : gap / n;
    double ss = 0.0;
    for (const auto& r : runs)
      if (r.variant == v) ss += (r.test_auc_roc - s.mean_auc_roc) * (r.test_auc_roc - s.mean_auc_roc);
    s.std_auc_roc = s.runs > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    out.push_back(s);
  }
  return out;
}

const VariantSummary AblationResult::summary(Variant v) const {
  for (const auto& s : summarize())
    if (s.variant == v) return s;
  return VariantSummary{v};
}

std::string AblationResult::csv() const {
  std::string out = "variant,runs,mean_auc_roc,std_auc_roc,mean_auc_prc,mean_probe_gap\n";
  for (const auto& s : summarize()) {
    out += to_string(s.variant) + "," + std::to_string(s.runs) + "," + io::format_double(s.mean_auc_roc) + "," +
           io::format_double(s.std_auc_roc) + "," + io::format_double(s.mean_auc_prc) + "," +
           (std::isnan(s.mean_probe_gap) ? std::string("") : io::format_double(s.mean_probe_gap)) + "\n";
  }
  return out;
}

std::string AblationResult::text() const {
  std::string out;
  char line[160];
  std::snprintf(line, sizeof line, "%-14s %4s %10s %10s %10s %10s\n", "variant", "runs", "AUC-ROC", "std", "AUC-PRC",
                "probe gap");
  out += line;
  for (const auto& s : summarize()) {
    if (std::isnan(s.mean_probe_gap))
      std::snprintf(line, sizeof line, "%-14s %4zu %10.4f %10.4f %10.4f %10s\n", to_string(s.variant).c_str(), s.runs,
                    s.mean_auc_roc, s.std_auc_roc, s.mean_auc_prc, "-");
    else
      std::snprintf(line, sizeof line, "%-14s %4zu %10.4f %10.4f %10.4f %10.4f\n", to_string(s.variant).c_str(),
                    s.runs, s.mean_auc_roc, s.std_auc_roc, s.mean_auc_prc, s.mean_probe_gap);
    out += line;
  }
  return out;
}

void append_runs(AblationResult& into, const AblationResult& more) {
  into.runs.insert(into.runs.end(), more.runs.begin(), more.runs.end());
}

AblationResult run_ablation(const AblationOptions& opts) {
  AblationResult result;
  fs::create_directories(opts.out_dir);
  for (std::uint64_t seed : opts.seeds) {
    SyntheticSpec spec = opts.spec;
    spec.seed = seed;
    const SyntheticSplits splits = generate(spec);
    const fs::path seed_dir = opts.out_dir / ("seed_" + std::to_string(seed));
    write_splits(splits, seed_dir / "data");
    const Datasets data{splits.train, splits.val, splits.test};
    for (Variant v : opts.variants) {
      TrainConfig cfg = apply_variant(opts.base, v);
      cfg.seed = seed;
      cfg.shuffle_seed.reset();
      const RunArtifacts art = train(cfg, data, seed_dir / to_string(v));
      const SplitMetrics& t = art.report.splits.at("test");
      VariantRun r;
      r.variant = v;
      r.seed = seed;
      r.test_auc_roc = t.auc_roc;
      r.test_auc_prc = t.auc_prc;
      r.test_accuracy = t.accuracy;
      r.probe_hc = t.probe_acc_hc.value_or(std::numeric_limits<double>::quiet_NaN());
      r.probe_hb = t.probe_acc_hb.value_or(std::numeric_limits<double>::quiet_NaN());
      result.runs.push_back(r);
      if (opts.base.verbose)
        std::fprintf(stderr, "seed %llu %-14s test AUC-ROC %.4f  probe Hc %.3f Hb %.3f  (%.0fs)\n",
                     static_cast<unsigned long long>(seed), to_string(v).c_str(), r.test_auc_roc, r.probe_hc,
                     r.probe_hb, art.seconds);
    }
  }
  io::write_file_atomic(opts.out_dir / "ablation.csv", result.csv());
  io::write_file_atomic(opts.out_dir / "ablation.txt", result.text());
  return result;
}

}  // namespace dfd
