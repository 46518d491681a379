#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <json.hpp>

#include "dfd/autodiff.hpp"
#include "dfd/graph.hpp"
#include "dfd/nn.hpp"

namespace dfd {

// Pre-activation clamp applied to gate logits before the sigmoid.
inline constexpr double kGateLogitClamp = 38.0;

struct GateWeights {
  double logit = 0.0;   // β
  double causal = 0.5;  // τ = σ(β)
  double bias = 0.5;    // ω = 1 − τ
};

// τ = σ(clamp(β)), ω = 1 − τ.
GateWeights gate_from_logit(double beta);

// Two-layer gate MLP on Concat[h_u^(0), h_v^(0)] producing one logit per edge.
class EdgeGate {
 public:
  EdgeGate() = default;
  EdgeGate(ParameterSet& params, std::size_t node_dim, std::size_t hidden, Rng& rng);

  // Per-edge logits β (E × 1), already clamped.
  ad::Var logits(ad::Tape& tape, const BipartiteGraph& g) const;
  // Single-pair evaluation.
  GateWeights operator()(std::span<const double> h_patient, std::span<const double> h_modality) const;

  const nn::Mlp& mlp() const { return mlp_; }

 private:
  nn::Mlp mlp_;
};

// Node and edge embeddings of one stream after some layer.
struct StreamState {
  std::size_t layer = 0;
  ad::Var patients;    // N × d
  ad::Var modalities;  // M × d
  ad::Var edges;       // E × d_e
};

// Parameters of one message-passing layer of one stream.
struct StreamLayer {
  nn::Mlp message;                // W^(l): message input → d_h
  nn::Mlp update;                 // U^(l): Concat(h_u, aggregated) → d_h
  std::optional<nn::Mlp> edge;    // edge update, absent on the last layer
};

struct StreamConfig {
  std::size_t node_init_dim = 0;  // M
  std::size_t edge_dim = 64;
  std::size_t hidden_dim = 64;
  std::size_t layers = 3;
  bool message_includes_neighbor = false;
};

class StreamBank {
 public:
  StreamBank() = default;
  StreamBank(ParameterSet& params, const std::string& name, const StreamConfig& cfg, Rng& rng);

  const StreamConfig& config() const { return cfg_; }
  std::size_t num_layers() const { return layers_.size(); }
  const StreamLayer& layer(std::size_t l) const { return layers_.at(l - 1); }

  // Runs every layer. weights (E × 1) modulate layer-1 messages only.
  StreamState run(ad::Tape& tape, const BipartiteGraph& g, ad::Var edge_features,
                  std::optional<ad::Var> weights) const;

 private:
  StreamConfig cfg_;
  std::vector<StreamLayer> layers_;
};

// Layer-0 state: constant node initialisations and the encoded edge features.
StreamState initial_state(ad::Tape& tape, const BipartiteGraph& g, ad::Var edge_features);

// One layer l ≥ 1:
//   h_u^(l) = U(Concat(h_u^(l−1), Mean_v w_uv · W m_uv))
// for patient and modality nodes alike, with w_uv the supplied edge weights when
// l = 1 and 1 otherwise; weights passed for l > 1 are ignored. A node with no
// incident edges receives a zero aggregate. When the layer has an edge MLP the
// edge embeddings become MLP_edge(Concat(h_u^(l), h_v^(l), h_uv^(l−1))).
StreamState propagate(ad::Tape& tape, const StreamLayer& layer, const StreamState& prev, const BipartiteGraph& g,
                      std::optional<ad::Var> weights, bool message_includes_neighbor);

struct PatientRepresentations {
  Matrix causal;   // H_c, N × d_h
  Matrix bias;     // H_b, N × d_h; empty for the single-stream model
  Matrix concat;   // E_concat, N × 2d_h (equals H_c for the single-stream model)
};

// Patient rows of the final states; modality nodes never appear.
PatientRepresentations readout(const StreamState& causal, const std::optional<StreamState>& bias);

}  // namespace dfd
