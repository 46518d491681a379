#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfd/tensor.hpp"

namespace dfd {

enum class Split { train, val, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

// Generator for datasets with a known causal latent c, a bias latent b that is
// aligned with the label at a controllable rate, and random modality dropout.
struct SyntheticSpec {
  std::size_t num_train = 4000;
  std::size_t num_val = 1000;
  std::size_t num_test = 2000;
  std::size_t num_modalities = 4;
  std::vector<std::size_t> modality_dims{16, 16, 16, 16};
  int num_classes = 2;
  std::size_t causal_dim = 8;
  std::size_t bias_dim = 8;
  double bias_align_train = 0.95;
  double bias_align_test = 0.5;
  std::vector<double> bias_weight_per_modality{1.0, 1.0, 1.0, 1.0};
  double observe_prob = 0.7;
  double noise_std = 0.5;
  std::uint64_t seed = 0;

  // Distance scale of the class means (causal) and bias means.
  static constexpr double kCausalSeparation = 2.0;
  static constexpr double kBiasSeparation = 3.0;

  // Throws ValidationError on any violated invariant.
  void validate() const;
  nlohmann::json to_json() const;
  static SyntheticSpec from_json(const nlohmann::json& j);
};

struct MultimodalDataset {
  Split split = Split::train;
  int num_classes = 2;
  std::vector<Matrix> features;     // one N × d_j matrix per modality
  std::vector<std::uint8_t> mask;   // N × M, row-major, 0/1
  std::vector<int> labels;
  std::optional<std::vector<int>> bias_attr;
  std::optional<nlohmann::json> spec_echo;

  std::size_t num_patients() const { return labels.size(); }
  std::size_t num_modalities() const { return features.size(); }
  std::vector<std::size_t> modality_dims() const;
  bool observed(std::size_t patient, std::size_t modality) const {
    return mask[patient * num_modalities() + modality] != 0;
  }
  std::size_t observed_count() const;

  // Throws ValidationError naming the first violation.
  void validate() const;
};

struct SyntheticSplits {
  MultimodalDataset train, val, test;
};

SyntheticSplits generate(const SyntheticSpec& spec);

// Layout: meta.json, features_<j>.csv, mask.csv, labels.csv, optional bias_attr.csv.
void write_dataset(const MultimodalDataset& ds, const std::filesystem::path& dir);
MultimodalDataset read_dataset(const std::filesystem::path& dir);

// Writes <root>/train, <root>/val, <root>/test.
void write_splits(const SyntheticSplits& splits, const std::filesystem::path& root);

}  // namespace dfd
