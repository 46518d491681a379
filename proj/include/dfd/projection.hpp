#pragma once

#include "dfd/tensor.hpp"

namespace dfd {

struct Projection {
  Matrix coords;      // N × 2
  Matrix components;  // d × 2, orthonormal columns
  bool degenerate = false;  // fewer than two non-zero-variance directions
};

// Projects mean-centred rows onto the top two principal axes. Each axis is
// sign-fixed so its largest-magnitude loading is positive; axes with
// (numerically) zero variance yield zero coordinates.
Projection project_2d(const Matrix& h);

}  // namespace dfd
