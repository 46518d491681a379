#include "dfd/optim.hpp"

#include <cmath>

namespace dfd {

Adam::Adam(ParameterSet& params, AdamOptions opts) : params_(&params), opts_(opts) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].value.rows(), params[i].value.cols());
    v_.emplace_back(params[i].value.rows(), params[i].value.cols());
  }
}

void Adam::step() { update(1.0); }
void Adam::ascend() { update(-1.0); }

void Adam::update(double sign) {
  ++t_;
  const double c1 = 1.0 - std::pow(opts_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(opts_.beta2, static_cast<double>(t_));
  const double step = opts_.learning_rate * std::sqrt(c2) / c1;
  for (std::size_t i = 0; i < params_->size(); ++i) {
    Parameter& p = (*params_)[i];
    if (p.grad.size() != p.value.size()) p.zero_grad();
    double* w = p.value.data();
    double* g = p.grad.data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double gk = sign * g[k];
      m[k] = opts_.beta1 * m[k] + (1.0 - opts_.beta1) * gk;
      v[k] = opts_.beta2 * v[k] + (1.0 - opts_.beta2) * gk * gk;
      w[k] -= step * m[k] / (std::sqrt(v[k]) + opts_.epsilon * std::sqrt(c2));
      g[k] = 0.0;
    }
  }
}

}  // namespace dfd
