#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfd/model.hpp"
#include "dfd/objectives.hpp"
#include "dfd/report.hpp"
#include "dfd/synthdata.hpp"

namespace dfd {

struct TrainConfig {
  std::size_t epochs_total = 100;
  // Defaults to round(0.15 × epochs_total) when not given.
  std::optional<std::size_t> epochs_stage1;
  std::size_t batch_size = 128;
  double learning_rate = 1e-3;
  std::string optimizer = "adam";
  double g = 0.7;
  std::size_t negatives = 10;
  std::size_t inner_steps = 1;
  // Statistics-network step size; defaults to learning_rate.
  std::optional<double> stats_learning_rate;
  // "different_label" or "shuffle".
  std::string negative_sampler = "different_label";
  // Floors the bound the model minimises at 0.
  bool mi_floor = true;
  std::size_t stats_hidden = 128;
  std::size_t layers = 3;
  std::size_t edge_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t encoder_depth = 1;
  std::size_t head_depth = 1;
  bool message_includes_neighbor = false;
  GradientRouting routing = GradientRouting::stop_gradient;
  bool disable_gce = false;
  bool disable_mi = false;
  bool single_stream = false;
  std::uint64_t seed = 0;
  // Batch-order stream; defaults to seed.
  std::optional<std::uint64_t> shuffle_seed;
  bool verbose = false;

  std::size_t stage1_epochs() const;
  double stats_lr() const { return stats_learning_rate.value_or(learning_rate); }
  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
  ModelConfig model_config(const MultimodalDataset& ds) const;
};

// Stage 1 optimises L_d alone; stage 2 adds the MI term unless disabled.
double total_loss(double l_d, double l_mi, int stage, bool disable_mi = false);

struct EpochLog {
  std::size_t epoch = 0;
  int stage = 1;
  double ce = 0.0;
  double gce = 0.0;
  double mi = 0.0;
  double total = 0.0;
  std::size_t mi_skips = 0;
  double val_auc_roc = 0.0;
};

struct RunArtifacts {
  std::filesystem::path checkpoint;
  std::filesystem::path loss_log;
  std::filesystem::path metrics;
  std::filesystem::path config;
  std::filesystem::path run_stats;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;
  double best_val_auc_roc = 0.0;
  MetricsReport report;
  double seconds = 0.0;
  // Statistics-network parameters at construction and when stage 2 begins;
  // empty when the run has no MI term.
  std::vector<Matrix> stats_at_init;
  std::vector<Matrix> stats_at_stage2;
};

struct Datasets {
  MultimodalDataset train, val, test;
};
Datasets read_datasets(const std::filesystem::path& data_dir);

// Writes checkpoint/, loss_log.csv, metrics.json, config.json and
// run_stats.json under out_dir.
RunArtifacts train(const TrainConfig& cfg, const Datasets& data, const std::filesystem::path& out_dir);
RunArtifacts train(const TrainConfig& cfg, const std::filesystem::path& data_dir, const std::filesystem::path& out_dir);

std::string loss_log_header();
std::string format_loss_row(const EpochLog& e);

// Loads the checkpoint, runs f_c on E_concat for the split, and writes the
// embedding exports when export_dir is given. Probes use the training seed
// recorded in the checkpoint.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint, const std::filesystem::path& data_dir,
                                  Split split, const std::optional<std::filesystem::path>& export_dir = std::nullopt);

// embeddings_c.csv, embeddings_b.csv, proj_c.csv, proj_b.csv (the *_b files
// are omitted for the single-stream model).
void export_embeddings(const PatientRepresentations& reps, const std::filesystem::path& dir);

}  // namespace dfd
