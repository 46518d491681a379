#include "dfd/dualstream.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dfd/error.hpp"

namespace dfd {

GateWeights gate_from_logit(double beta) {
  GateWeights w;
  w.logit = std::clamp(beta, -kGateLogitClamp, kGateLogitClamp);
  w.causal = w.logit >= 0 ? 1.0 / (1.0 + std::exp(-w.logit)) : std::exp(w.logit) / (1.0 + std::exp(w.logit));
  w.bias = 1.0 - w.causal;
  return w;
}

EdgeGate::EdgeGate(ParameterSet& params, std::size_t node_dim, std::size_t hidden, Rng& rng) {
  const std::size_t widths[] = {2 * node_dim, hidden, 1};
  mlp_ = nn::Mlp::create(params, "gate", widths, false, rng);
}

ad::Var EdgeGate::logits(ad::Tape& tape, const BipartiteGraph& g) const {
  const ad::Var hp = ad::gather_rows(tape.constant(g.patient_init()), g.edge_patients());
  const ad::Var hm = ad::gather_rows(tape.constant(g.modality_init()), g.edge_modalities());
  const ad::Var in[] = {hp, hm};
  return ad::clamp(mlp_(tape, ad::concat_cols(in)), -kGateLogitClamp, kGateLogitClamp);
}

GateWeights EdgeGate::operator()(std::span<const double> h_patient, std::span<const double> h_modality) const {
  ad::Tape tape;
  Matrix x(1, h_patient.size() + h_modality.size());
  std::copy(h_patient.begin(), h_patient.end(), x.row(0).begin());
  std::copy(h_modality.begin(), h_modality.end(), x.row(0).begin() + h_patient.size());
  const ad::Var beta = mlp_(tape, tape.constant(std::move(x)));
  return gate_from_logit(beta.value()(0, 0));
}

StreamBank::StreamBank(ParameterSet& params, const std::string& name, const StreamConfig& cfg, Rng& rng)
    : cfg_(cfg) {
  if (cfg.layers < 1 || cfg.hidden_dim < 1 || cfg.edge_dim < 1 || cfg.node_init_dim < 1)
    throw ValidationError("stream " + name + ": all dimensions and the layer count must be at least 1");
  for (std::size_t l = 1; l <= cfg.layers; ++l) {
    const std::size_t node_dim = l == 1 ? cfg.node_init_dim : cfg.hidden_dim;
    const std::string prefix = name + ".layer" + std::to_string(l);
    StreamLayer layer;
    const std::size_t msg[] = {cfg.edge_dim + (cfg.message_includes_neighbor ? node_dim : 0), cfg.hidden_dim};
    layer.message = nn::Mlp::create(params, prefix + ".message", msg, true, rng);
    const std::size_t upd[] = {node_dim + cfg.hidden_dim, cfg.hidden_dim};
    layer.update = nn::Mlp::create(params, prefix + ".update", upd, true, rng);
    if (l < cfg.layers) {
      const std::size_t edge[] = {2 * cfg.hidden_dim + cfg.edge_dim, cfg.edge_dim};
      layer.edge = nn::Mlp::create(params, prefix + ".edge", edge, true, rng);
    }
    layers_.push_back(std::move(layer));
  }
}

StreamState StreamBank::run(ad::Tape& tape, const BipartiteGraph& g, ad::Var edge_features,
                            std::optional<ad::Var> weights) const {
  StreamState s = initial_state(tape, g, edge_features);
  for (const StreamLayer& layer : layers_) s = propagate(tape, layer, s, g, weights, cfg_.message_includes_neighbor);
  return s;
}

StreamState initial_state(ad::Tape& tape, const BipartiteGraph& g, ad::Var edge_features) {
  if (edge_features.rows() != g.num_edges()) throw std::invalid_argument("initial_state: edge feature count mismatch");
  return StreamState{0, tape.constant(g.patient_init()), tape.constant(g.modality_init()), edge_features};
}

StreamState propagate(ad::Tape& tape, const StreamLayer& layer, const StreamState& prev, const BipartiteGraph& g,
                      std::optional<ad::Var> weights, bool message_includes_neighbor) {
  const std::size_t l = prev.layer + 1;
  if (l > 1) weights.reset();
  if (weights && (weights->rows() != g.num_edges() || weights->cols() != 1))
    throw std::invalid_argument("propagate: edge weights must be E × 1");
  for (std::size_t p = 0; p < g.num_patients(); ++p)
    if (g.patient_degree(p) == 0) throw std::logic_error("propagate: isolated patient node");

  auto weighted = [&](ad::Var m) { return weights ? ad::scale_rows(m, *weights) : m; };

  ad::Var to_patients, to_modalities;
  if (message_includes_neighbor) {
    const ad::Var hm_e = ad::gather_rows(prev.modalities, g.edge_modalities());
    const ad::Var hp_e = ad::gather_rows(prev.patients, g.edge_patients());
    const ad::Var in_p[] = {hm_e, prev.edges};
    const ad::Var in_m[] = {hp_e, prev.edges};
    to_patients = weighted(layer.message(tape, ad::concat_cols(in_p)));
    to_modalities = weighted(layer.message(tape, ad::concat_cols(in_m)));
  } else {
    // Without the neighbour term both directions carry the same message.
    to_patients = to_modalities = weighted(layer.message(tape, prev.edges));
  }

  const ad::Var agg_p = ad::segment_mean(to_patients, g.patient_segments());
  const ad::Var agg_m = ad::segment_mean(to_modalities, g.modality_segments());
  const ad::Var cat_p[] = {prev.patients, agg_p};
  const ad::Var cat_m[] = {prev.modalities, agg_m};

  StreamState next;
  next.layer = l;
  next.patients = layer.update(tape, ad::concat_cols(cat_p));
  next.modalities = layer.update(tape, ad::concat_cols(cat_m));
  if (layer.edge) {
    const ad::Var in[] = {ad::gather_rows(next.patients, g.edge_patients()),
                          ad::gather_rows(next.modalities, g.edge_modalities()), prev.edges};
    next.edges = (*layer.edge)(tape, ad::concat_cols(in));
  } else {
    next.edges = prev.edges;
  }
  return next;
}

PatientRepresentations readout(const StreamState& causal, const std::optional<StreamState>& bias) {
  PatientRepresentations r;
  r.causal = causal.patients.value();
  if (!bias) {
    r.concat = r.causal;
    return r;
  }
  r.bias = bias->patients.value();
  if (r.bias.rows() != r.causal.rows()) throw std::invalid_argument("readout: stream row counts differ");
  const std::size_t d = r.causal.cols();
  r.concat = Matrix(r.causal.rows(), d + r.bias.cols());
  for (std::size_t i = 0; i < r.causal.rows(); ++i) {
    std::copy(r.causal.row(i).begin(), r.causal.row(i).end(), r.concat.row(i).begin());
    std::copy(r.bias.row(i).begin(), r.bias.row(i).end(), r.concat.row(i).begin() + d);
  }
  return r;
}

}  // namespace dfd
