#include "dfd/graph.hpp"

#include <numeric>
#include <stdexcept>
#include <string>

#include "dfd/error.hpp"

namespace dfd {

std::optional<std::size_t> BipartiteGraph::find_edge(std::size_t patient, std::size_t modality) const {
  if (patient >= num_patients() || modality >= num_modalities_) return std::nullopt;
  for (std::size_t p = patient_offsets_[patient]; p < patient_offsets_[patient + 1]; ++p) {
    const std::size_t e = patient_incidence_[p];
    if (edge_modality_[e] == modality) return e;
  }
  return std::nullopt;
}

BipartiteGraph build_graph(const MultimodalDataset& ds) {
  std::vector<std::size_t> all(ds.num_patients());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return build_subgraph(ds, all);
}

BipartiteGraph build_subgraph(const MultimodalDataset& ds, std::span<const std::size_t> patients) {
  const std::size_t m = ds.num_modalities();
  BipartiteGraph g;
  g.num_modalities_ = m;
  g.patient_ids_.assign(patients.begin(), patients.end());
  for (std::size_t id : g.patient_ids_)
    if (id >= ds.num_patients()) throw std::out_of_range("build_subgraph: patient index out of range");

  const std::size_t n = patients.size();
  g.modality_offsets_.assign(m + 1, 0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t p = 0; p < n; ++p) {
      if (!ds.observed(patients[p], j)) continue;
      g.edges_.push_back({p, j});
      g.edge_patient_.push_back(p);
      g.edge_modality_.push_back(j);
    }
    g.modality_offsets_[j + 1] = g.edges_.size();
  }
  g.modality_incidence_.resize(g.edges_.size());
  std::iota(g.modality_incidence_.begin(), g.modality_incidence_.end(), std::size_t{0});

  g.patient_offsets_.assign(n + 1, 0);
  for (const Edge& e : g.edges_) ++g.patient_offsets_[e.patient + 1];
  for (std::size_t p = 0; p < n; ++p) g.patient_offsets_[p + 1] += g.patient_offsets_[p];
  g.patient_incidence_.resize(g.edges_.size());
  std::vector<std::size_t> fill(g.patient_offsets_.begin(), g.patient_offsets_.end() - 1);
  for (std::size_t e = 0; e < g.edges_.size(); ++e) g.patient_incidence_[fill[g.edges_[e].patient]++] = e;
  for (std::size_t p = 0; p < n; ++p)
    if (g.patient_degree(p) == 0)
      throw ValidationError("build_graph: patient " + std::to_string(patients[p]) + " has no observed modality");

  g.patient_init_ = Matrix(n, m, 1.0);
  g.modality_init_ = Matrix::identity(m);
  return g;
}

ModalityEncoderBank::ModalityEncoderBank(ParameterSet& params, std::span<const std::size_t> modality_dims,
                                         std::size_t edge_dim, std::size_t depth, Rng& rng)
    : edge_dim_(edge_dim) {
  if (depth < 1) throw ValidationError("encoder depth must be at least 1");
  for (std::size_t j = 0; j < modality_dims.size(); ++j) {
    std::vector<std::size_t> widths{modality_dims[j]};
    for (std::size_t l = 0; l < depth; ++l) widths.push_back(edge_dim);
    encoders_.push_back(nn::Mlp::create(params, "encoder." + std::to_string(j), widths, true, rng));
  }
}

ad::Var ModalityEncoderBank::encode(ad::Tape& tape, const BipartiteGraph& g, const MultimodalDataset& ds) const {
  if (ds.num_modalities() != encoders_.size())
    throw ValidationError("encoder bank has " + std::to_string(encoders_.size()) + " encoders but dataset has " +
                          std::to_string(ds.num_modalities()) + " modalities");
  std::vector<ad::Var> parts;
  for (std::size_t j = 0; j < encoders_.size(); ++j) {
    if (ds.features[j].cols() != encoders_[j].in_dim())
      throw ValidationError("modality " + std::to_string(j) + " has dimension " + std::to_string(ds.features[j].cols()) +
                            " but its encoder expects " + std::to_string(encoders_[j].in_dim()));
    const std::size_t begin = g.modality_edge_begin(j), end = g.modality_edge_end(j);
    if (begin == end) continue;
    Matrix x(end - begin, ds.features[j].cols());
    for (std::size_t e = begin; e < end; ++e) {
      auto src = ds.features[j].row(g.patient_ids()[g.edge_patients()[e]]);
      std::copy(src.begin(), src.end(), x.row(e - begin).begin());
    }
    parts.push_back(encoders_[j](tape, tape.constant(std::move(x))));
  }
  if (parts.empty()) throw ValidationError("encode: graph has no edges");
  return parts.size() == 1 ? parts[0] : ad::concat_rows(parts);
}

std::span<const double> EncodedEdges::at(std::size_t patient, std::size_t modality) const {
  auto e = graph_->find_edge(patient, modality);
  if (!e)
    throw std::out_of_range("no edge between patient " + std::to_string(patient) + " and modality " +
                            std::to_string(modality) + " (modality not observed)");
  return features_.row(*e);
}

EncodedEdges encode_edges(const ModalityEncoderBank& bank, const BipartiteGraph& g, const MultimodalDataset& ds) {
  ad::Tape tape;
  ad::Var v = bank.encode(tape, g, ds);
  return EncodedEdges(g, v.value());
}

}  // namespace dfd
