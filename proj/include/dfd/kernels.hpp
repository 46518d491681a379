#pragma once

#include <cstddef>
#include <span>

#include "dfd/tensor.hpp"

// Dense and segmented kernels used by the autodiff tape.
//
// dfd::kernels::* are the production kernels, parallelised over output rows with
// OpenMP. Every output row is produced by a single thread in a fixed reduction
// order, so results are bitwise independent of the thread count.
//
// dfd::kernels::reference::* are plain serial loops kept as the test oracle and
// as the benchmark baseline.
namespace dfd::kernels {

// Compressed list of row groups: group s owns indices[offsets[s] .. offsets[s+1]).
struct Segments {
  std::span<const std::size_t> offsets;
  std::span<const std::size_t> indices;
  std::size_t count() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
};

// c (+)= a · b
void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c (+)= a · bᵀ
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
// c (+)= aᵀ · b
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);

// out row s (+)= scale[s] · Σ_{e in segment s} src row e. Empty segments give 0.
// An empty scale span means scale 1.
void segment_sum(const Matrix& src, const Segments& seg, std::span<const double> scale,
                 Matrix& out, bool accumulate = false);

// Threads available to the kernels (1 when built without OpenMP).
int max_threads();
// Limits the kernels to n threads; n <= 0 restores the runtime default.
void set_threads(int n);

namespace reference {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate = false);
void segment_sum(const Matrix& src, const Segments& seg, std::span<const double> scale,
                 Matrix& out, bool accumulate = false);

}  // namespace reference
}  // namespace dfd::kernels
