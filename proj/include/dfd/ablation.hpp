#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dfd/synthdata.hpp"
#include "dfd/trainer.hpp"

namespace dfd {

enum class Variant { full, without_gce, without_mi, single_stream };
inline constexpr Variant kAllVariants[] = {Variant::full, Variant::without_gce, Variant::without_mi,
                                           Variant::single_stream};

std::string to_string(Variant v);
TrainConfig apply_variant(TrainConfig cfg, Variant v);

struct VariantRun {
  Variant variant = Variant::full;
  std::uint64_t seed = 0;
  double test_auc_roc = 0.0;
  double test_auc_prc = 0.0;
  double test_accuracy = 0.0;
  double probe_hc = 0.0;
  double probe_hb = 0.0;  // NaN for the single-stream model
};

struct VariantSummary {
  Variant variant = Variant::full;
  std::size_t runs = 0;
  double mean_auc_roc = 0.0;
  double std_auc_roc = 0.0;  // sample standard deviation
  double mean_auc_prc = 0.0;
  double mean_probe_gap = 0.0;  // probe(H_b) − probe(H_c), dual-stream only
};

struct AblationResult {
  std::vector<VariantRun> runs;

  std::vector<VariantSummary> summarize() const;
  const VariantSummary summary(Variant v) const;
  std::string csv() const;
  std::string text() const;
};

struct AblationOptions {
  SyntheticSpec spec;
  TrainConfig base;
  std::vector<std::uint64_t> seeds;
  std::vector<Variant> variants{std::begin(kAllVariants), std::end(kAllVariants)};
  std::filesystem::path out_dir;
};

// For every seed: generates the dataset with that seed, trains each variant with
// that seed under out_dir/seed_<s>/<variant>, and collects test metrics.
// Writes out_dir/ablation.csv and out_dir/ablation.txt.
AblationResult run_ablation(const AblationOptions& opts);
void append_runs(AblationResult& into, const AblationResult& more);

}  // namespace dfd
