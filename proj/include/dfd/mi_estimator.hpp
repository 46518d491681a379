#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "dfd/autodiff.hpp"
#include "dfd/nn.hpp"
#include "dfd/optim.hpp"

namespace dfd {

// Clamp applied to statistics-network scores before exponentiation.
inline constexpr double kScoreClamp = 30.0;

// ψ_ω(h_c, h_b) = w2ᵀ SiLU(W_c h_c + W_b h_b + b1) + b2: a two-layer MLP on
// Concat[h_c, h_b] with its first weight stored as two blocks, so that
// pair scores can reuse per-row projections.
class StatsNet {
 public:
  StatsNet(std::size_t causal_dim, std::size_t bias_dim, std::size_t hidden, Rng& rng);

  ParameterSet& parameters() { return params_; }
  const ParameterSet& parameters() const { return params_; }
  std::size_t causal_dim() const;
  std::size_t bias_dim() const;

  // Scores ψ(h_c[causal_rows[i]], h_b[bias_rows[i]]) as a column vector.
  // When frozen, the parameters enter the tape as constants.
  ad::Var scores(ad::Tape& tape, ad::Var h_causal, ad::Var h_bias, std::span<const std::size_t> causal_rows,
                 std::span<const std::size_t> bias_rows, bool frozen) const;
  // Joint scores ψ(h_c^i, h_b^i).
  ad::Var joint_scores(ad::Tape& tape, ad::Var h_causal, ad::Var h_bias, bool frozen) const;

 private:
  ParameterSet params_;
  Parameter* w_causal_;
  Parameter* w_bias_;
  Parameter* b1_;
  nn::Linear out_;
};

// k partners per anchor, row-major (anchor i owns partners[i*k .. i*k+k)).
struct NegativePairBatch {
  std::size_t k = 0;
  std::vector<std::size_t> partners;

  std::size_t num_anchors() const { return k == 0 ? 0 : partners.size() / k; }
  std::vector<std::size_t> anchors() const;  // i repeated k times
};

// Partners with a label different from the anchor's: without replacement when
// at least k candidates exist, with replacement otherwise. nullopt when the
// batch holds a single class.
std::optional<NegativePairBatch> sample_negatives(std::span<const int> labels, std::size_t k, Rng& rng);
// Partners drawn uniformly from the other rows (marginal shuffle).
NegativePairBatch sample_marginal_negatives(std::size_t n, std::size_t k, Rng& rng);

// (1/n) Σ ψ(joint) − log((1/(n·k)) Σ exp ψ(negatives)). Requires n ≥ 2.
ad::Var dv_bound(ad::Tape& tape, const StatsNet& net, ad::Var h_causal, ad::Var h_bias,
                 const NegativePairBatch& negatives, bool frozen);
double dv_bound_value(const StatsNet& net, const Matrix& h_causal, const Matrix& h_bias,
                      const NegativePairBatch& negatives);

// Runs `inner_steps` ascent steps of the statistics network on the current
// (detached) representations, then returns the bound recomputed with the
// network frozen, recorded on the model tape so its gradient reaches H_c/H_b
// and nothing else.
ad::Var mi_adversarial_step(StatsNet& net, Adam& net_optimizer, ad::Var h_causal, ad::Var h_bias,
                            const NegativePairBatch& negatives, std::size_t inner_steps);

struct MiEstimateOptions {
  std::size_t hidden = 128;
  std::size_t steps = 3000;
  std::size_t batch_size = 256;
  std::size_t negatives = 10;
  double learning_rate = 1e-3;
  // Rows kept out of training and used for the reported bound.
  double holdout_fraction = 0.2;
  std::size_t holdout_negatives = 100;
  std::uint64_t seed = 0;
};

struct MiEstimate {
  double bound = 0.0;          // DV bound on the held-out rows
  std::vector<double> trace;   // training-batch bound after each step
};

// Fits a fresh statistics network to paired rows (x_i, y_i) with
// marginal-shuffle negatives and reports its bound on held-out rows.
MiEstimate estimate_mi(const Matrix& x, const Matrix& y, const MiEstimateOptions& opts = {});

}  // namespace dfd
