#pragma once

#include <cstdint>
#include <span>

#include "dfd/tensor.hpp"

namespace dfd {

struct ProbeOptions {
  double train_fraction = 0.7;
  std::size_t iterations = 300;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  std::uint64_t seed = 0;
};

// Multinomial logistic-regression probe: fits attr from the rows of H on a
// seeded 70% split and returns accuracy on the held-out 30%.
double linear_probe(const Matrix& h, std::span<const int> attr, int num_classes, const ProbeOptions& opts = {});

}  // namespace dfd
