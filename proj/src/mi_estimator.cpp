#include "dfd/mi_estimator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dfd/error.hpp"
#include "dfd/rng.hpp"

namespace dfd {

StatsNet::StatsNet(std::size_t causal_dim, std::size_t bias_dim, std::size_t hidden, Rng& rng) {
  // Initialise the first layer as one Glorot block over the concatenated input.
  const double limit = std::sqrt(6.0 / static_cast<double>(causal_dim + bias_dim + hidden));
  std::uniform_real_distribution<double> u(-limit, limit);
  w_causal_ = &params_.add("stats.0.weight_causal", causal_dim, hidden);
  w_bias_ = &params_.add("stats.0.weight_bias", bias_dim, hidden);
  b1_ = &params_.add("stats.0.bias", 1, hidden);
  for (double& w : w_causal_->value.storage()) w = u(rng);
  for (double& w : w_bias_->value.storage()) w = u(rng);
  out_ = nn::Linear::create(params_, "stats.1", hidden, 1, rng);
}

std::size_t StatsNet::causal_dim() const { return w_causal_->value.rows(); }
std::size_t StatsNet::bias_dim() const { return w_bias_->value.rows(); }

ad::Var StatsNet::scores(ad::Tape& tape, ad::Var h_causal, ad::Var h_bias, std::span<const std::size_t> causal_rows,
                         std::span<const std::size_t> bias_rows, bool frozen) const {
  if (causal_rows.size() != bias_rows.size()) throw std::invalid_argument("StatsNet::scores: pair index mismatch");
  if (h_causal.cols() != causal_dim() || h_bias.cols() != bias_dim())
    throw std::invalid_argument("StatsNet::scores: input width mismatch");
  auto use = [&](Parameter& p) { return frozen ? tape.constant(p.value) : tape.parameter(p); };
  const ad::Var pc = ad::matmul(h_causal, use(*w_causal_));
  const ad::Var pb = ad::matmul(h_bias, use(*w_bias_));
  const ad::Var pre = ad::add_row(ad::add(ad::gather_rows(pc, causal_rows), ad::gather_rows(pb, bias_rows)), use(*b1_));
  return ad::affine(ad::silu(pre), use(*out_.weight), use(*out_.bias));
}

ad::Var StatsNet::joint_scores(ad::Tape& tape, ad::Var h_causal, ad::Var h_bias, bool frozen) const {
  std::vector<std::size_t> idx(h_causal.rows());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return scores(tape, h_causal, h_bias, idx, idx, frozen);
}

std::vector<std::size_t> NegativePairBatch::anchors() const {
  std::vector<std::size_t> a(partners.size());
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = i / k;
  return a;
}

std::optional<NegativePairBatch> sample_negatives(std::span<const int> labels, std::size_t k, Rng& rng) {
  if (k == 0) throw std::invalid_argument("sample_negatives: k must be positive");
  const std::size_t n = labels.size();
  NegativePairBatch out;
  out.k = k;
  out.partners.reserve(n * k);
  std::vector<std::size_t> candidates;
  candidates.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    candidates.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (labels[j] != labels[i]) candidates.push_back(j);
    if (candidates.empty()) return std::nullopt;
    if (candidates.size() >= k) {
      // Partial Fisher–Yates.
      for (std::size_t t = 0; t < k; ++t) {
        std::uniform_int_distribution<std::size_t> pick(t, candidates.size() - 1);
        std::swap(candidates[t], candidates[pick(rng)]);
        out.partners.push_back(candidates[t]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
      for (std::size_t t = 0; t < k; ++t) out.partners.push_back(candidates[pick(rng)]);
    }
  }
  return out;
}

NegativePairBatch sample_marginal_negatives(std::size_t n, std::size_t k, Rng& rng) {
  if (n < 2 || k == 0) throw std::invalid_argument("sample_marginal_negatives: need n ≥ 2 and k ≥ 1");
  NegativePairBatch out;
  out.k = k;
  out.partners.reserve(n * k);
  std::uniform_int_distribution<std::size_t> pick(0, n - 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < k; ++t) {
      std::size_t j = pick(rng);
      out.partners.push_back(j >= i ? j + 1 : j);
    }
  return out;
}

ad::Var dv_bound(ad::Tape& tape, const StatsNet& net, ad::Var h_causal, ad::Var h_bias,
                 const NegativePairBatch& negatives, bool frozen) {
  const std::size_t n = h_causal.rows();
  if (n < 2) throw std::invalid_argument("dv_bound: need at least two anchors");
  if (h_bias.rows() != n || negatives.num_anchors() != n)
    throw std::invalid_argument("dv_bound: negatives do not match the batch");
  const ad::Var joint = net.joint_scores(tape, h_causal, h_bias, frozen);
  const ad::Var neg = net.scores(tape, h_causal, h_bias, negatives.anchors(), negatives.partners, frozen);
  return ad::donsker_varadhan(joint, neg, kScoreClamp);
}

double dv_bound_value(const StatsNet& net, const Matrix& h_causal, const Matrix& h_bias,
                      const NegativePairBatch& negatives) {
  ad::Tape tape;
  return dv_bound(tape, net, tape.constant(h_causal), tape.constant(h_bias), negatives, true).value()(0, 0);
}

ad::Var mi_adversarial_step(StatsNet& net, Adam& net_optimizer, ad::Var h_causal, ad::Var h_bias,
                            const NegativePairBatch& negatives, std::size_t inner_steps) {
  for (std::size_t s = 0; s < inner_steps; ++s) {
    ad::Tape inner;
    const ad::Var bound = dv_bound(inner, net, inner.constant(h_causal.value()), inner.constant(h_bias.value()),
                                   negatives, false);
    inner.backward(bound);
    net_optimizer.ascend();
  }
  return dv_bound(*h_causal.tape, net, h_causal, h_bias, negatives, true);
}

MiEstimate estimate_mi(const Matrix& x, const Matrix& y, const MiEstimateOptions& opts) {
  const std::size_t n = x.rows();
  if (y.rows() != n) throw std::invalid_argument("estimate_mi: x and y row counts differ");
  const auto holdout = static_cast<std::size_t>(std::llround(opts.holdout_fraction * static_cast<double>(n)));
  if (holdout < 2 || n - holdout < 2) throw std::invalid_argument("estimate_mi: too few rows for the split");

  Rng rng = make_rng(opts.seed, "mi-estimate");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> train_rows(order.data(), n - holdout);
  const std::span<const std::size_t> test_rows(order.data() + (n - holdout), holdout);

  auto gather = [](const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
    return out;
  };

  Rng init = make_rng(opts.seed, "stats-init");
  StatsNet net(x.cols(), y.cols(), opts.hidden, init);
  Adam adam(net.parameters(), AdamOptions{opts.learning_rate});
  const std::size_t batch = std::min(opts.batch_size, train_rows.size());
  std::vector<std::size_t> pick(batch);
  std::uniform_int_distribution<std::size_t> row(0, train_rows.size() - 1);

  MiEstimate out;
  out.trace.reserve(opts.steps);
  for (std::size_t step = 0; step < opts.steps; ++step) {
    for (auto& r : pick) r = train_rows[row(rng)];
    const NegativePairBatch negs = sample_marginal_negatives(batch, opts.negatives, rng);
    ad::Tape tape;
    const ad::Var bound = dv_bound(tape, net, tape.constant(gather(x, pick)), tape.constant(gather(y, pick)), negs, false);
    out.trace.push_back(bound.value()(0, 0));
    tape.backward(bound);
    adam.ascend();
  }
  const NegativePairBatch negs = sample_marginal_negatives(holdout, opts.holdout_negatives, rng);
  out.bound = dv_bound_value(net, gather(x, test_rows), gather(y, test_rows), negs);
  return out;
}

}  // namespace dfd
