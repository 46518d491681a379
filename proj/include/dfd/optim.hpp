#pragma once

#include <vector>

#include "dfd/autodiff.hpp"

namespace dfd {

struct AdamOptions {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam over every parameter of a set. step() consumes and clears the gradients.
class Adam {
 public:
  Adam(ParameterSet& params, AdamOptions opts = {});

  void step();
  // Gradient ascent: negates gradients before the update.
  void ascend();
  long long steps() const { return t_; }

 private:
  void update(double sign);

  ParameterSet* params_;
  AdamOptions opts_;
  std::vector<Matrix> m_, v_;
  long long t_ = 0;
};

}  // namespace dfd
