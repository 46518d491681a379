#include "dfd/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace dfd::nn {

Linear Linear::create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  if (in == 0 || out == 0) throw std::invalid_argument("Linear " + name + ": zero dimension");
  Linear l;
  l.weight = &params.add(name + ".weight", in, out);
  l.bias = &params.add(name + ".bias", 1, out);
  // Glorot uniform.
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  for (double& w : l.weight->value.storage()) w = u(rng);
  return l;
}

ad::Var Linear::operator()(ad::Tape& tape, ad::Var x) const {
  if (x.cols() != in_dim())
    throw std::invalid_argument(weight->name + ": expected " + std::to_string(in_dim()) + " input columns, got " +
                                std::to_string(x.cols()));
  return ad::affine(x, tape.parameter(*weight), tape.parameter(*bias));
}

Mlp Mlp::create(ParameterSet& params, const std::string& name, std::span<const std::size_t> widths,
                bool activate_output, Rng& rng) {
  if (widths.size() < 2) throw std::invalid_argument("Mlp " + name + ": need at least input and output width");
  Mlp m;
  m.activate_output = activate_output;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i)
    m.layers.push_back(Linear::create(params, name + "." + std::to_string(i), widths[i], widths[i + 1], rng));
  return m;
}

ad::Var Mlp::operator()(ad::Tape& tape, ad::Var x) const {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    x = layers[i](tape, x);
    if (i + 1 < layers.size() || activate_output) x = ad::silu(x);
  }
  return x;
}

}  // namespace dfd::nn
