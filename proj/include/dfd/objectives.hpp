#pragma once

#include <span>
#include <vector>

#include "dfd/autodiff.hpp"
#include "dfd/nn.hpp"

namespace dfd {

// Probabilities are clamped to [kProbFloor, 1] before log/power.
inline constexpr double kProbFloor = 1e-12;

// Which half of E_concat each head may send gradients into.
enum class GradientRouting {
  // f_c trains H_c only, f_b trains H_b only; the opposite half is detached.
  stop_gradient,
  // Both heads backpropagate into both halves.
  off,
};

// Affine (or deeper) map from an embedding to K class logits.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  // depth = number of affine layers; hidden layers have width `hidden`.
  ClassifierHead(ParameterSet& params, const std::string& name, std::size_t in_dim, std::size_t num_classes,
                 std::size_t depth, std::size_t hidden, Rng& rng);

  ad::Var logits(ad::Tape& tape, ad::Var x) const { return mlp_(tape, x); }
  std::size_t in_dim() const { return mlp_.in_dim(); }
  std::size_t num_classes() const { return mlp_.out_dim(); }

 private:
  nn::Mlp mlp_;
};

std::vector<double> softmax(std::span<const double> logits);
Matrix softmax_rows(const Matrix& logits);

// −log softmax(logits)[y]
double cross_entropy(std::span<const double> logits, int y);
// (1 − p_y^g)/g with p_y clamped to [kProbFloor, 1]; requires g ∈ (0, 1].
double gce(std::span<const double> probs, int y, double g);
// d gce / d p_y = −p_y^(g−1)
double gce_grad(double p_y, double g);

struct DisentangleLoss {
  ad::Var total;  // L_ce + L_gce (or L_ce + L_ce when GCE is disabled)
  ad::Var ce;     // causal head term
  ad::Var gce;    // bias head term
};

struct DisentangleOptions {
  double g = 0.7;
  GradientRouting routing = GradientRouting::stop_gradient;
  bool disable_gce = false;  // bias head trained with plain cross-entropy
};

DisentangleLoss disentangle_loss(ad::Var h_causal, ad::Var h_bias, std::span<const int> labels,
                                 const ClassifierHead& causal_head, const ClassifierHead& bias_head,
                                 const DisentangleOptions& opts);

// Logits of f_c on E_concat = Concat[H_c, H_b].
ad::Var causal_logits(ad::Tape& tape, ad::Var h_causal, ad::Var h_bias, const ClassifierHead& causal_head);

struct Predictions {
  std::vector<int> classes;
  Matrix probs;  // N × K
};

// Argmax per row; ties go to the lowest class index.
Predictions predict_from_probs(Matrix probs);
Predictions predict(const Matrix& e_concat, const ClassifierHead& causal_head);

}  // namespace dfd
