#pragma once

#include <string>
#include <vector>

#include "dfd/autodiff.hpp"
#include "dfd/rng.hpp"

namespace dfd::nn {

// y = x·W + b with W stored in×out.
struct Linear {
  Parameter* weight = nullptr;
  Parameter* bias = nullptr;

  static Linear create(ParameterSet& params, const std::string& name, std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight->value.rows(); }
  std::size_t out_dim() const { return weight->value.cols(); }
  ad::Var operator()(ad::Tape& tape, ad::Var x) const;
};

// Stack of Linear layers with SiLU between them. When activate_output is set
// the last layer is followed by SiLU as well.
struct Mlp {
  std::vector<Linear> layers;
  bool activate_output = false;

  static Mlp create(ParameterSet& params, const std::string& name, std::span<const std::size_t> widths,
                    bool activate_output, Rng& rng);
  std::size_t in_dim() const { return layers.front().in_dim(); }
  std::size_t out_dim() const { return layers.back().out_dim(); }
  ad::Var operator()(ad::Tape& tape, ad::Var x) const;
};

}  // namespace dfd::nn
