#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dfd/autodiff.hpp"
#include "dfd/kernels.hpp"
#include "dfd/nn.hpp"
#include "dfd/synthdata.hpp"

namespace dfd {

struct Edge {
  std::size_t patient;   // local patient index
  std::size_t modality;
  friend bool operator==(const Edge&, const Edge&) = default;
};

// Bipartite patient–modality graph. Edges exist only where the modality is
// observed and are stored modality-major (all edges of modality 0 in ascending
// patient order, then modality 1, ...).
class BipartiteGraph {
 public:
  std::size_t num_patients() const { return patient_ids_.size(); }
  std::size_t num_modalities() const { return num_modalities_; }
  std::size_t num_edges() const { return edges_.size(); }

  // Dataset row of each local patient.
  std::span<const std::size_t> patient_ids() const { return patient_ids_; }
  std::span<const Edge> edges() const { return edges_; }
  std::span<const std::size_t> edge_patients() const { return edge_patient_; }
  std::span<const std::size_t> edge_modalities() const { return edge_modality_; }

  // Edges [begin, end) that belong to modality j.
  std::size_t modality_edge_begin(std::size_t j) const { return modality_offsets_[j]; }
  std::size_t modality_edge_end(std::size_t j) const { return modality_offsets_[j + 1]; }

  // Incident edge lists, usable as mean-aggregation segments.
  kernels::Segments patient_segments() const { return {patient_offsets_, patient_incidence_}; }
  kernels::Segments modality_segments() const { return {modality_offsets_, modality_incidence_}; }
  std::size_t patient_degree(std::size_t p) const { return patient_offsets_[p + 1] - patient_offsets_[p]; }
  std::size_t modality_degree(std::size_t j) const { return modality_offsets_[j + 1] - modality_offsets_[j]; }

  std::optional<std::size_t> find_edge(std::size_t patient, std::size_t modality) const;

  // Initial node vectors: patients all-ones of length M, modalities one-hot.
  const Matrix& patient_init() const { return patient_init_; }
  const Matrix& modality_init() const { return modality_init_; }

  friend BipartiteGraph build_subgraph(const MultimodalDataset& ds, std::span<const std::size_t> patients);

 private:
  std::size_t num_modalities_ = 0;
  std::vector<std::size_t> patient_ids_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> edge_patient_, edge_modality_;
  std::vector<std::size_t> patient_offsets_, patient_incidence_;
  std::vector<std::size_t> modality_offsets_, modality_incidence_;
  Matrix patient_init_, modality_init_;
};

// Graph over every patient of the dataset.
BipartiteGraph build_graph(const MultimodalDataset& ds);
// Graph induced by a subset of patients plus all modality nodes.
BipartiteGraph build_subgraph(const MultimodalDataset& ds, std::span<const std::size_t> patients);

// One encoder per modality mapping d_j → d_e; encoder j only sees modality j.
class ModalityEncoderBank {
 public:
  ModalityEncoderBank() = default;
  ModalityEncoderBank(ParameterSet& params, std::span<const std::size_t> modality_dims, std::size_t edge_dim,
                      std::size_t depth, Rng& rng);

  std::size_t num_modalities() const { return encoders_.size(); }
  std::size_t edge_dim() const { return edge_dim_; }
  const nn::Mlp& encoder(std::size_t j) const { return encoders_[j]; }

  // Edge features e_ij^(0) for every edge of g, in edge order (E × d_e).
  ad::Var encode(ad::Tape& tape, const BipartiteGraph& g, const MultimodalDataset& ds) const;

 private:
  std::vector<nn::Mlp> encoders_;
  std::size_t edge_dim_ = 0;
};

// Materialised initial edge features for inspection.
class EncodedEdges {
 public:
  EncodedEdges(const BipartiteGraph& g, Matrix features) : graph_(&g), features_(std::move(features)) {}
  const Matrix& features() const { return features_; }
  // Throws std::out_of_range when (patient, modality) is not an edge.
  std::span<const double> at(std::size_t patient, std::size_t modality) const;

 private:
  const BipartiteGraph* graph_;
  Matrix features_;
};

EncodedEdges encode_edges(const ModalityEncoderBank& bank, const BipartiteGraph& g, const MultimodalDataset& ds);

}  // namespace dfd
