#include "dfd/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dfd/error.hpp"

namespace dfd {

ClassifierHead::ClassifierHead(ParameterSet& params, const std::string& name, std::size_t in_dim,
                               std::size_t num_classes, std::size_t depth, std::size_t hidden, Rng& rng) {
  if (depth < 1) throw ValidationError("head depth must be at least 1");
  std::vector<std::size_t> widths{in_dim};
  for (std::size_t l = 1; l < depth; ++l) widths.push_back(hidden);
  widths.push_back(num_classes);
  mlp_ = nn::Mlp::create(params, name, widths, false, rng);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += (p[k] = std::exp(logits[k] - m));
  for (double& v : p) v /= s;
  return p;
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto r = softmax(logits.row(i));
    std::copy(r.begin(), r.end(), p.row(i).begin());
  }
  return p;
}

double cross_entropy(std::span<const double> logits, int y) {
  if (y < 0 || static_cast<std::size_t>(y) >= logits.size()) throw std::out_of_range("cross_entropy: class out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s) - logits[y];
}

double gce(std::span<const double> probs, int y, double g) {
  if (!(g > 0.0 && g <= 1.0)) throw std::invalid_argument("gce: g must lie in (0, 1]");
  if (y < 0 || static_cast<std::size_t>(y) >= probs.size()) throw std::out_of_range("gce: class out of range");
  const double py = std::clamp(probs[y], kProbFloor, 1.0);
  return (1.0 - std::pow(py, g)) / g;
}

double gce_grad(double p_y, double g) { return -std::pow(std::clamp(p_y, kProbFloor, 1.0), g - 1.0); }

ad::Var causal_logits(ad::Tape& tape, ad::Var h_causal, ad::Var h_bias, const ClassifierHead& causal_head) {
  const ad::Var cat[] = {h_causal, h_bias};
  return causal_head.logits(tape, ad::concat_cols(cat));
}

DisentangleLoss disentangle_loss(ad::Var h_causal, ad::Var h_bias, std::span<const int> labels,
                                 const ClassifierHead& causal_head, const ClassifierHead& bias_head,
                                 const DisentangleOptions& opts) {
  ad::Tape& tape = *h_causal.tape;
  const bool stop = opts.routing == GradientRouting::stop_gradient;
  const ad::Var for_c[] = {h_causal, stop ? ad::detach(h_bias) : h_bias};
  const ad::Var for_b[] = {stop ? ad::detach(h_causal) : h_causal, h_bias};
  const ad::Var logits_c = causal_head.logits(tape, ad::concat_cols(for_c));
  const ad::Var logits_b = bias_head.logits(tape, ad::concat_cols(for_b));

  DisentangleLoss out;
  out.ce = ad::softmax_cross_entropy(logits_c, labels);
  out.gce = opts.disable_gce ? ad::softmax_cross_entropy(logits_b, labels)
                             : ad::generalized_cross_entropy(logits_b, labels, opts.g, kProbFloor);
  out.total = ad::add(out.ce, out.gce);
  return out;
}

Predictions predict_from_probs(Matrix probs) {
  Predictions p;
  p.classes.resize(probs.rows());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    auto r = probs.row(i);
    // max_element returns the first maximum.
    p.classes[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  p.probs = std::move(probs);
  return p;
}

Predictions predict(const Matrix& e_concat, const ClassifierHead& causal_head) {
  if (e_concat.cols() != causal_head.in_dim()) throw ValidationError("predict: embedding width does not match head");
  ad::Tape tape;
  const ad::Var z = causal_head.logits(tape, tape.constant(e_concat));
  return predict_from_probs(softmax_rows(z.value()));
}

}  // namespace dfd
