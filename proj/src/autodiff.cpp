#include "dfd/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dfd/error.hpp"

namespace dfd {

Parameter& ParameterSet::add(std::string name, std::size_t rows, std::size_t cols) {
  if (find(name) != nullptr) throw std::invalid_argument("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = std::move(name);
  p->value = Matrix(rows, cols);
  p->grad = Matrix(rows, cols);
  params_.push_back(std::move(p));
  return *params_.back();
}

Parameter* ParameterSet::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

const Parameter* ParameterSet::find(std::string_view name) const {
  for (const auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p->zero_grad();
}

std::vector<Matrix> ParameterSet::snapshot() const {
  std::vector<Matrix> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p->value);
  return out;
}

void ParameterSet::restore(const std::vector<Matrix>& values) {
  if (values.size() != params_.size()) throw std::invalid_argument("restore: parameter count mismatch");
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i].rows() != params_[i]->value.rows() || values[i].cols() != params_[i]->value.cols())
      throw std::invalid_argument("restore: shape mismatch for " + params_[i]->name);
    params_[i]->value = values[i];
  }
}

namespace ad {

const Matrix& Var::value() const { return tape->value(id); }
const Matrix& Var::grad() const { return tape->grad(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Parameter& p) {
  Parameter* target = &p;
  return push(p.value, true, [target](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    if (target->grad.rows() != g.rows() || target->grad.cols() != g.cols()) target->zero_grad();
    for (std::size_t i = 0; i < g.size(); ++i) target->grad.data()[i] += g.data()[i];
  });
}

Matrix& Tape::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Matrix(n.value.rows(), n.value.cols());
  return n.grad;
}

Var Tape::push(Matrix value, bool requires_grad, BackwardFn fn) {
  nodes_.push_back(Node{std::move(value), Matrix{}, requires_grad, requires_grad ? std::move(fn) : nullptr});
  return Var{this, nodes_.size() - 1};
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw std::invalid_argument("backward: variable from another tape");
  if (value(loss.id).size() != 1) throw std::invalid_argument("backward: loss must be a scalar");
  if (!requires_grad(loss.id)) return;
  grad_mut(loss.id).data()[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Tape& tape_of(Var a) {
  require(a.tape != nullptr, "autodiff: null variable");
  return *a.tape;
}

void same_tape(Var a, Var b) { require(a.tape == b.tape, "autodiff: variables on different tapes"); }

template <typename F>
Var unary_map(Var x, F&& f, std::function<void(const Matrix& x, const Matrix& y, const Matrix& gy, Matrix& gx)> back) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  for (std::size_t i = 0; i < xv.size(); ++i) y.data()[i] = f(xv.data()[i]);
  const std::size_t xi = x.id;
  return t.push(std::move(y), x.requires_grad(), [xi, back](Tape& tp, std::size_t self) {
    back(tp.value(xi), tp.value(self), tp.grad(self), tp.grad_mut(xi));
  });
}

double stable_sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

// Row-wise softmax of logits.
Matrix softmax_rows(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zr = z.row(i);
    auto pr = p.row(i);
    const double m = *std::max_element(zr.begin(), zr.end());
    double s = 0.0;
    for (std::size_t k = 0; k < zr.size(); ++k) s += (pr[k] = std::exp(zr[k] - m));
    for (double& v : pr) v /= s;
  }
  return p;
}

void check_labels(const Matrix& logits, std::span<const int> labels) {
  require(labels.size() == logits.rows(), "loss: label count does not match rows");
  for (int y : labels)
    require(y >= 0 && static_cast<std::size_t>(y) < logits.cols(), "loss: label out of range");
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  Matrix y;
  kernels::gemm_nn(a.value(), b.value(), y);
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(y), a.requires_grad() || b.requires_grad(), [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(self);
    if (tp.requires_grad(ai)) kernels::gemm_nt(gy, tp.value(bi), tp.grad_mut(ai), true);
    if (tp.requires_grad(bi)) kernels::gemm_tn(tp.value(ai), gy, tp.grad_mut(bi), true);
  });
}

Var add_row(Var x, Var bias) {
  same_tape(x, bias);
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  const Matrix& bv = bias.value();
  require(bv.rows() == 1 && bv.cols() == xv.cols(), "add_row: bias shape mismatch");
  Matrix y = xv;
  for (std::size_t i = 0; i < y.rows(); ++i) {
    auto r = y.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bv(0, j);
  }
  const std::size_t xi = x.id, bi = bias.id;
  return t.push(std::move(y), x.requires_grad() || bias.requires_grad(), [xi, bi](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(self);
    if (tp.requires_grad(xi)) {
      Matrix& gx = tp.grad_mut(xi);
      for (std::size_t i = 0; i < gy.size(); ++i) gx.data()[i] += gy.data()[i];
    }
    if (tp.requires_grad(bi)) {
      Matrix& gb = tp.grad_mut(bi);
      for (std::size_t i = 0; i < gy.rows(); ++i) {
        auto r = gy.row(i);
        for (std::size_t j = 0; j < r.size(); ++j) gb(0, j) += r[j];
      }
    }
  });
}

Var affine(Var x, Var weight, Var bias) { return add_row(matmul(x, weight), bias); }

Var add(Var a, Var b) {
  same_tape(a, b);
  Tape& t = tape_of(a);
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += b.value().data()[i];
  const std::size_t ai = a.id, bi = b.id;
  return t.push(std::move(y), a.requires_grad() || b.requires_grad(), [ai, bi](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(self);
    for (std::size_t id : {ai, bi}) {
      if (!tp.requires_grad(id)) continue;
      Matrix& g = tp.grad_mut(id);
      for (std::size_t i = 0; i < gy.size(); ++i) g.data()[i] += gy.data()[i];
    }
  });
}

Var sub(Var a, Var b) { return add(a, scale(b, -1.0)); }

Var scale(Var x, double c) {
  return unary_map(
      x, [c](double v) { return c * v; },
      [c](const Matrix&, const Matrix&, const Matrix& gy, Matrix& gx) {
        for (std::size_t i = 0; i < gy.size(); ++i) gx.data()[i] += c * gy.data()[i];
      });
}

Var one_minus(Var x) {
  return unary_map(
      x, [](double v) { return 1.0 - v; },
      [](const Matrix&, const Matrix&, const Matrix& gy, Matrix& gx) {
        for (std::size_t i = 0; i < gy.size(); ++i) gx.data()[i] -= gy.data()[i];
      });
}

Var silu(Var x) {
  return unary_map(
      x, [](double v) { return v * stable_sigmoid(v); },
      [](const Matrix& xv, const Matrix&, const Matrix& gy, Matrix& gx) {
        for (std::size_t i = 0; i < gy.size(); ++i) {
          const double v = xv.data()[i];
          const double s = stable_sigmoid(v);
          gx.data()[i] += gy.data()[i] * s * (1.0 + v * (1.0 - s));
        }
      });
}

Var sigmoid(Var x) {
  return unary_map(
      x, [](double v) { return stable_sigmoid(v); },
      [](const Matrix&, const Matrix& y, const Matrix& gy, Matrix& gx) {
        for (std::size_t i = 0; i < gy.size(); ++i) {
          const double s = y.data()[i];
          gx.data()[i] += gy.data()[i] * s * (1.0 - s);
        }
      });
}

Var clamp(Var x, double lo, double hi) {
  return unary_map(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](const Matrix& xv, const Matrix&, const Matrix& gy, Matrix& gx) {
        for (std::size_t i = 0; i < gy.size(); ++i) {
          const double v = xv.data()[i];
          if (v >= lo && v <= hi) gx.data()[i] += gy.data()[i];
        }
      });
}

Var detach(Var x) { return tape_of(x).push(x.value(), false, nullptr); }

Var concat_cols(std::span<const Var> parts) {
  require(!parts.empty(), "concat_cols: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t rows = parts[0].rows();
  std::size_t cols = 0;
  bool rg = false;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    require(p.rows() == rows, "concat_cols: row count mismatch");
    ids.push_back(p.id);
    offsets.push_back(cols);
    cols += p.cols();
    rg = rg || p.requires_grad();
  }
  Matrix y(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Matrix& v = parts[k].value();
    for (std::size_t i = 0; i < rows; ++i) std::copy(v.row(i).begin(), v.row(i).end(), y.row(i).begin() + offsets[k]);
  }
  return t.push(std::move(y), rg, [ids, offsets](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Matrix& g = tp.grad_mut(ids[k]);
      for (std::size_t i = 0; i < g.rows(); ++i)
        for (std::size_t j = 0; j < g.cols(); ++j) g(i, j) += gy(i, offsets[k] + j);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  require(!parts.empty(), "concat_rows: no inputs");
  Tape& t = tape_of(parts[0]);
  const std::size_t cols = parts[0].cols();
  std::size_t rows = 0;
  bool rg = false;
  std::vector<std::size_t> ids, offsets;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    require(p.cols() == cols, "concat_rows: column count mismatch");
    ids.push_back(p.id);
    offsets.push_back(rows);
    rows += p.rows();
    rg = rg || p.requires_grad();
  }
  Matrix y(rows, cols);
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& s = parts[k].value().storage();
    std::copy(s.begin(), s.end(), y.storage().begin() + offsets[k] * cols);
  }
  return t.push(std::move(y), rg, [ids, offsets, cols](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(self);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (!tp.requires_grad(ids[k])) continue;
      Matrix& g = tp.grad_mut(ids[k]);
      const double* src = gy.data() + offsets[k] * cols;
      for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += src[i];
    }
  });
}

Var gather_rows(Var x, std::span<const std::size_t> index) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  Matrix y(index.size(), xv.cols());
  for (std::size_t e = 0; e < index.size(); ++e) {
    require(index[e] < xv.rows(), "gather_rows: index out of range");
    std::copy(xv.row(index[e]).begin(), xv.row(index[e]).end(), y.row(e).begin());
  }
  std::vector<std::size_t> idx(index.begin(), index.end());
  const std::size_t xi = x.id;
  const std::size_t n = xv.rows();
  return t.push(std::move(y), x.requires_grad(), [xi, n, idx = std::move(idx)](Tape& tp, std::size_t self) {
    // Invert the index into per-source segments (stable), then reduce in order.
    std::vector<std::size_t> offsets(n + 1, 0);
    for (std::size_t s : idx) ++offsets[s + 1];
    for (std::size_t s = 0; s < n; ++s) offsets[s + 1] += offsets[s];
    std::vector<std::size_t> order(idx.size());
    std::vector<std::size_t> fill(offsets.begin(), offsets.end() - 1);
    for (std::size_t e = 0; e < idx.size(); ++e) order[fill[idx[e]]++] = e;
    kernels::segment_sum(tp.grad(self), kernels::Segments{offsets, order}, {}, tp.grad_mut(xi), true);
  });
}

Var scale_rows(Var x, Var weights) {
  same_tape(x, weights);
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  const Matrix& wv = weights.value();
  require(wv.rows() == xv.rows() && wv.cols() == 1, "scale_rows: weights must be rows×1");
  Matrix y = xv;
  for (std::size_t i = 0; i < y.rows(); ++i)
    for (double& v : y.row(i)) v *= wv(i, 0);
  const std::size_t xi = x.id, wi = weights.id;
  return t.push(std::move(y), x.requires_grad() || weights.requires_grad(), [xi, wi](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(self);
    const Matrix& xv = tp.value(xi);
    const Matrix& wv = tp.value(wi);
    if (tp.requires_grad(xi)) {
      Matrix& gx = tp.grad_mut(xi);
      for (std::size_t i = 0; i < gy.rows(); ++i)
        for (std::size_t j = 0; j < gy.cols(); ++j) gx(i, j) += wv(i, 0) * gy(i, j);
    }
    if (tp.requires_grad(wi)) {
      Matrix& gw = tp.grad_mut(wi);
      for (std::size_t i = 0; i < gy.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < gy.cols(); ++j) s += gy(i, j) * xv(i, j);
        gw(i, 0) += s;
      }
    }
  });
}

Var segment_mean(Var x, kernels::Segments segments) {
  Tape& t = tape_of(x);
  const std::size_t n = segments.count();
  std::vector<double> inv(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t deg = segments.offsets[s + 1] - segments.offsets[s];
    inv[s] = deg == 0 ? 0.0 : 1.0 / static_cast<double>(deg);
  }
  for (std::size_t e : segments.indices) require(e < x.rows(), "segment_mean: index out of range");
  Matrix y;
  kernels::segment_sum(x.value(), segments, inv, y);
  const std::size_t xi = x.id;
  return t.push(std::move(y), x.requires_grad(), [xi, segments, inv = std::move(inv)](Tape& tp, std::size_t self) {
    const Matrix& gy = tp.grad(self);
    Matrix& gx = tp.grad_mut(xi);
    for (std::size_t s = 0; s < segments.count(); ++s)
      for (std::size_t p = segments.offsets[s]; p < segments.offsets[s + 1]; ++p) {
        auto dst = gx.row(segments.indices[p]);
        auto src = gy.row(s);
        for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += inv[s] * src[j];
      }
  });
}

Var mean_all(Var x) {
  Tape& t = tape_of(x);
  const Matrix& xv = x.value();
  require(xv.size() > 0, "mean_all: empty input");
  double s = 0.0;
  for (double v : xv.storage()) s += v;
  const double n = static_cast<double>(xv.size());
  Matrix y(1, 1, s / n);
  const std::size_t xi = x.id;
  return t.push(std::move(y), x.requires_grad(), [xi, n](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)(0, 0) / n;
    for (double& v : tp.grad_mut(xi).storage()) v += g;
  });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  check_labels(z, labels);
  require(z.rows() > 0, "cross entropy: empty batch");
  double total = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zr = z.row(i);
    const double m = *std::max_element(zr.begin(), zr.end());
    double s = 0.0;
    for (double v : zr) s += std::exp(v - m);
    total += (m + std::log(s)) - zr[labels[i]];
  }
  const double n = static_cast<double>(z.rows());
  std::vector<int> y(labels.begin(), labels.end());
  const std::size_t zi = logits.id;
  return t.push(Matrix(1, 1, total / n), logits.requires_grad(), [zi, n, y = std::move(y)](Tape& tp, std::size_t self) {
    const double g = tp.grad(self)(0, 0) / n;
    Matrix p = softmax_rows(tp.value(zi));
    Matrix& gz = tp.grad_mut(zi);
    for (std::size_t i = 0; i < p.rows(); ++i)
      for (std::size_t k = 0; k < p.cols(); ++k)
        gz(i, k) += g * (p(i, k) - (static_cast<int>(k) == y[i] ? 1.0 : 0.0));
  });
}

Var generalized_cross_entropy(Var logits, std::span<const int> labels, double g, double prob_floor) {
  require(g > 0.0 && g <= 1.0, "generalized cross entropy: g must lie in (0, 1]");
  Tape& t = tape_of(logits);
  const Matrix& z = logits.value();
  check_labels(z, labels);
  require(z.rows() > 0, "generalized cross entropy: empty batch");
  Matrix p = softmax_rows(z);
  double total = 0.0;
  for (std::size_t i = 0; i < p.rows(); ++i) {
    const double py = std::clamp(p(i, labels[i]), prob_floor, 1.0);
    total += (1.0 - std::pow(py, g)) / g;
  }
  const double n = static_cast<double>(z.rows());
  std::vector<int> y(labels.begin(), labels.end());
  const std::size_t zi = logits.id;
  return t.push(Matrix(1, 1, total / n), logits.requires_grad(),
                [zi, n, g, prob_floor, p = std::move(p), y = std::move(y)](Tape& tp, std::size_t self) {
                  const double scale = tp.grad(self)(0, 0) / n;
                  Matrix& gz = tp.grad_mut(zi);
                  for (std::size_t i = 0; i < p.rows(); ++i) {
                    const double py = p(i, y[i]);
                    if (py < prob_floor) continue;  // clamped: flat
                    // d/dz_k of −p_y^g/g = −p_y^g (δ_yk − p_k)
                    const double c = std::pow(py, g);
                    for (std::size_t k = 0; k < p.cols(); ++k)
                      gz(i, k) -= scale * c * ((static_cast<int>(k) == y[i] ? 1.0 : 0.0) - p(i, k));
                  }
                });
}

Var donsker_varadhan(Var joint, Var negative, double clip) {
  same_tape(joint, negative);
  Tape& t = tape_of(joint);
  const Matrix& jv = joint.value();
  const Matrix& nv = negative.value();
  require(jv.size() > 0 && nv.size() > 0, "donsker_varadhan: empty score set");
  for (double v : jv.storage())
    if (!std::isfinite(v)) throw NumericError("donsker_varadhan: non-finite joint score");
  for (double v : nv.storage())
    if (!std::isfinite(v)) throw NumericError("donsker_varadhan: non-finite negative score");

  double jmean = 0.0;
  for (double v : jv.storage()) jmean += v;
  jmean /= static_cast<double>(jv.size());

  std::vector<double> c(nv.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::clamp(nv.data()[i], -clip, clip);
  const double m = *std::max_element(c.begin(), c.end());
  std::vector<double> w(c.size());
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += (w[i] = std::exp(c[i] - m));
  const double log_mean_exp = m + std::log(s / static_cast<double>(c.size()));
  for (double& v : w) v /= s;

  const std::size_t ji = joint.id, ni = negative.id;
  const double nj = static_cast<double>(jv.size());
  return t.push(Matrix(1, 1, jmean - log_mean_exp), joint.requires_grad() || negative.requires_grad(),
                [ji, ni, nj, clip, w = std::move(w)](Tape& tp, std::size_t self) {
                  const double g = tp.grad(self)(0, 0);
                  if (tp.requires_grad(ji))
                    for (double& v : tp.grad_mut(ji).storage()) v += g / nj;
                  if (tp.requires_grad(ni)) {
                    const Matrix& nv = tp.value(ni);
                    Matrix& gn = tp.grad_mut(ni);
                    for (std::size_t i = 0; i < w.size(); ++i) {
                      const double v = nv.data()[i];
                      if (v >= -clip && v <= clip) gn.data()[i] -= g * w[i];
                    }
                  }
                });
}

}  // namespace ad
}  // namespace dfd
