#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dfd/dualstream.hpp"
#include "dfd/graph.hpp"
#include "dfd/objectives.hpp"

namespace dfd {

struct ModelConfig {
  std::vector<std::size_t> modality_dims;
  int num_classes = 2;
  std::size_t edge_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t layers = 3;
  std::size_t encoder_depth = 1;
  std::size_t head_depth = 1;
  bool message_includes_neighbor = false;
  // Baseline: one ungated stream and a CE-trained head on H alone.
  bool single_stream = false;

  std::size_t num_modalities() const { return modality_dims.size(); }
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Encoders, gate, the two streams and both classifier heads.
class DfdModel {
 public:
  DfdModel(const ModelConfig& cfg, std::uint64_t seed);
  DfdModel(const DfdModel&) = delete;
  DfdModel& operator=(const DfdModel&) = delete;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }

  const ModalityEncoderBank& encoders() const { return encoders_; }
  const EdgeGate& gate() const { return gate_; }
  const StreamBank& causal_stream() const { return causal_; }
  const StreamBank& bias_stream() const { return bias_; }
  const ClassifierHead& causal_head() const { return head_c_; }
  const ClassifierHead& bias_head() const { return head_b_; }

  struct Forward {
    ad::Var edge_features;
    std::optional<ad::Var> tau;    // E × 1, dual-stream only
    std::optional<ad::Var> omega;  // E × 1
    StreamState causal;
    std::optional<StreamState> bias;
    ad::Var h_causal() const { return causal.patients; }
    ad::Var h_bias() const { return bias->patients; }
  };

  Forward forward(ad::Tape& tape, const BipartiteGraph& g, const MultimodalDataset& ds) const;
  // Logits used for inference: f_c on E_concat (or on H for the baseline).
  ad::Var inference_logits(ad::Tape& tape, const Forward& f) const;

  struct Evaluation {
    PatientRepresentations reps;
    Predictions predictions;
  };
  // Full-graph inference over every patient of ds.
  Evaluation evaluate(const MultimodalDataset& ds) const;

 private:
  ModelConfig cfg_;
  ParameterSet params_;
  ModalityEncoderBank encoders_;
  EdgeGate gate_;
  StreamBank causal_, bias_;
  ClassifierHead head_c_, head_b_;
};

// Manifest (names, shapes, layer indices, model config) plus one flat
// little-endian float64 file per tensor.
void save_checkpoint(const std::filesystem::path& dir, const ModelConfig& cfg, const ParameterSet& params,
                     const nlohmann::json& extra = nlohmann::json::object());
struct CheckpointManifest {
  ModelConfig model;
  nlohmann::json extra;
};
CheckpointManifest read_checkpoint_manifest(const std::filesystem::path& dir);
// Loads tensors into params, validating every name and shape.
void load_checkpoint_tensors(const std::filesystem::path& dir, ParameterSet& params);

}  // namespace dfd
