#include "dfd/probe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dfd/error.hpp"
#include "dfd/kernels.hpp"
#include "dfd/rng.hpp"

namespace dfd {
namespace {

Matrix take_rows(const Matrix& h, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), h.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) std::copy(h.row(idx[i]).begin(), h.row(idx[i]).end(), out.row(i).begin());
  return out;
}

// Appends a constant column for the intercept.
Matrix with_bias_column(const Matrix& x) {
  Matrix out(x.rows(), x.cols() + 1, 1.0);
  for (std::size_t i = 0; i < x.rows(); ++i) std::copy(x.row(i).begin(), x.row(i).end(), out.row(i).begin());
  return out;
}

}  // namespace

double linear_probe(const Matrix& h, std::span<const int> attr, int num_classes, const ProbeOptions& opts) {
  const std::size_t n = h.rows();
  if (attr.size() != n) throw ValidationError("linear_probe: attribute count differs from rows");
  if (num_classes < 2) throw ValidationError("linear_probe: need at least two classes");
  for (int a : attr)
    if (a < 0 || a >= num_classes) throw ValidationError("linear_probe: attribute out of range");
  const std::size_t n_train = static_cast<std::size_t>(std::floor(opts.train_fraction * static_cast<double>(n)));
  if (n_train < 1 || n_train >= n) throw ValidationError("linear_probe: too few rows for a held-out split");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(opts.seed, "probe");
  std::shuffle(order.begin(), order.end(), rng);
  const std::span<const std::size_t> train_idx(order.data(), n_train);
  const std::span<const std::size_t> test_idx(order.data() + n_train, n - n_train);

  // Standardise with training statistics.
  Matrix xtr = take_rows(h, train_idx);
  Matrix xte = take_rows(h, test_idx);
  for (std::size_t j = 0; j < h.cols(); ++j) {
    double mean = 0.0, var = 0.0;
    for (std::size_t i = 0; i < xtr.rows(); ++i) mean += xtr(i, j);
    mean /= static_cast<double>(xtr.rows());
    for (std::size_t i = 0; i < xtr.rows(); ++i) var += (xtr(i, j) - mean) * (xtr(i, j) - mean);
    const double sd = std::sqrt(var / static_cast<double>(xtr.rows()));
    const double inv = sd > 1e-12 ? 1.0 / sd : 0.0;
    for (std::size_t i = 0; i < xtr.rows(); ++i) xtr(i, j) = (xtr(i, j) - mean) * inv;
    for (std::size_t i = 0; i < xte.rows(); ++i) xte(i, j) = (xte(i, j) - mean) * inv;
  }
  xtr = with_bias_column(xtr);
  xte = with_bias_column(xte);

  const std::size_t k = static_cast<std::size_t>(num_classes);
  const std::size_t d = xtr.cols();
  Matrix w(d, k), m(d, k), v(d, k), logits, grad;
  const double inv_n = 1.0 / static_cast<double>(xtr.rows());
  for (std::size_t it = 1; it <= opts.iterations; ++it) {
    kernels::gemm_nn(xtr, w, logits);
    for (std::size_t i = 0; i < logits.rows(); ++i) {
      auto r = logits.row(i);
      const double mx = *std::max_element(r.begin(), r.end());
      double s = 0.0;
      for (double& z : r) s += (z = std::exp(z - mx));
      for (double& z : r) z /= s;
      r[attr[train_idx[i]]] -= 1.0;
      for (double& z : r) z *= inv_n;
    }
    kernels::gemm_tn(xtr, logits, grad);
    // Adam with weight decay on the non-intercept rows.
    const double c1 = 1.0 - std::pow(0.9, static_cast<double>(it));
    const double c2 = 1.0 - std::pow(0.999, static_cast<double>(it));
    for (std::size_t p = 0; p < w.size(); ++p) {
      const bool intercept = p / k == d - 1;
      const double g = grad.data()[p] + (intercept ? 0.0 : opts.l2 * w.data()[p]);
      m.data()[p] = 0.9 * m.data()[p] + 0.1 * g;
      v.data()[p] = 0.999 * v.data()[p] + 0.001 * g * g;
      w.data()[p] -= opts.learning_rate * (m.data()[p] / c1) / (std::sqrt(v.data()[p] / c2) + 1e-8);
    }
  }

  kernels::gemm_nn(xte, w, logits);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const int pred = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    hit += pred == attr[test_idx[i]];
  }
  return static_cast<double>(hit) / static_cast<double>(logits.rows());
}

}  // namespace dfd
