#include "dfd/kernels.hpp"

#define EIGEN_DONT_PARALLELIZE
#include <Eigen/Core>

#include <algorithm>
#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dfd::kernels {
namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

// Output rows are split into blocks of this fixed size, so the summation order
// inside each block never depends on the thread count.
constexpr std::size_t kRowBlock = 64;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor, 0, Eigen::OuterStride<>>;
using Map = Eigen::Map<RowMajor, 0, Eigen::OuterStride<>>;

ConstMap view(const Matrix& m, std::size_t r0, std::size_t nr, std::size_t c0, std::size_t nc) {
  return ConstMap(m.data() + r0 * m.cols() + c0, static_cast<Eigen::Index>(nr),
                  static_cast<Eigen::Index>(nc), Eigen::OuterStride<>(static_cast<Eigen::Index>(m.cols())));
}

Map view(Matrix& m, std::size_t r0, std::size_t nr) {
  return Map(m.data() + r0 * m.cols(), static_cast<Eigen::Index>(nr),
             static_cast<Eigen::Index>(m.cols()), Eigen::OuterStride<>(static_cast<Eigen::Index>(m.cols())));
}

std::size_t block_count(std::size_t rows) { return (rows + kRowBlock - 1) / kRowBlock; }

void check(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

void prepare(Matrix& c, std::size_t rows, std::size_t cols, bool accumulate) {
  if (accumulate) {
    check(c.rows() == rows && c.cols() == cols, "kernel: accumulate target has wrong shape");
  } else if (c.rows() != rows || c.cols() != cols) {
    c.resize(rows, cols);
  } else {
    c.fill(0.0);
  }
}

inline void axpy_row(double alpha, const double* __restrict x, double* __restrict y,
                     std::size_t n) {
  for (std::size_t j = 0; j < n; ++j) y[j] += alpha * x[j];
}

inline void segment_row(const Matrix& src, const Segments& seg, std::span<const double> scale,
                        Matrix& out, std::size_t s) {
  const std::size_t n = src.cols();
  double* orow = out.row(s).data();
  const std::size_t begin = seg.offsets[s];
  const std::size_t end = seg.offsets[s + 1];
  if (scale.empty()) {
    for (std::size_t p = begin; p < end; ++p) axpy_row(1.0, src.row(seg.indices[p]).data(), orow, n);
    return;
  }
  // Sum first, then scale, so a weight of exactly 1 is bit-identical to no weight.
  thread_local std::vector<double> acc;
  acc.assign(n, 0.0);
  for (std::size_t p = begin; p < end; ++p) axpy_row(1.0, src.row(seg.indices[p]).data(), acc.data(), n);
  const double w = scale[s];
  for (std::size_t j = 0; j < n; ++j) orow[j] += w * acc[j];
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_threads(int n) {
#ifdef _OPENMP
  if (n <= 0) n = omp_get_num_procs();
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check(a.cols() == b.rows(), "gemm_nn: inner dimension mismatch");
  prepare(c, a.rows(), b.cols(), accumulate);
  const std::size_t rows = a.rows();
  if (rows == 0 || b.cols() == 0 || a.cols() == 0) return;
  const bool par = rows * a.cols() * b.cols() >= kParallelWork;
  const auto bm = view(b, 0, b.rows(), 0, b.cols());
  const std::size_t blocks = block_count(rows);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t k = 0; k < blocks; ++k) {
    const std::size_t r0 = k * kRowBlock;
    const std::size_t nr = std::min(kRowBlock, rows - r0);
    view(c, r0, nr).noalias() += view(a, r0, nr, 0, a.cols()) * bm;
  }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check(a.cols() == b.cols(), "gemm_nt: inner dimension mismatch");
  const Matrix bt = transpose(b);
  gemm_nn(a, bt, c, accumulate);
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check(a.rows() == b.rows(), "gemm_tn: inner dimension mismatch");
  prepare(c, a.cols(), b.cols(), accumulate);
  const std::size_t rows = a.cols();
  if (rows == 0 || b.cols() == 0 || a.rows() == 0) return;
  const bool par = rows * a.rows() * b.cols() >= kParallelWork;
  const auto bm = view(b, 0, b.rows(), 0, b.cols());
  const std::size_t blocks = block_count(rows);
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t k = 0; k < blocks; ++k) {
    const std::size_t c0 = k * kRowBlock;
    const std::size_t nc = std::min(kRowBlock, rows - c0);
    view(c, c0, nc).noalias() += view(a, 0, a.rows(), c0, nc).transpose() * bm;
  }
}

void segment_sum(const Matrix& src, const Segments& seg, std::span<const double> scale,
                 Matrix& out, bool accumulate) {
  check(scale.empty() || scale.size() == seg.count(), "segment_sum: scale length mismatch");
  prepare(out, seg.count(), src.cols(), accumulate);
  const std::size_t n = seg.count();
  const bool par = seg.indices.size() * src.cols() >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::size_t s = 0; s < n; ++s) segment_row(src, seg, scale, out, s);
}

namespace reference {

void gemm_nn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check(a.cols() == b.rows(), "gemm_nn: inner dimension mismatch");
  prepare(c, a.rows(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) += s;
    }
}

void gemm_nt(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check(a.cols() == b.cols(), "gemm_nt: inner dimension mismatch");
  prepare(c, a.rows(), b.rows(), accumulate);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) += s;
    }
}

void gemm_tn(const Matrix& a, const Matrix& b, Matrix& c, bool accumulate) {
  check(a.rows() == b.rows(), "gemm_tn: inner dimension mismatch");
  prepare(c, a.cols(), b.cols(), accumulate);
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t r = 0; r < a.rows(); ++r) s += a(r, i) * b(r, j);
      c(i, j) += s;
    }
}

void segment_sum(const Matrix& src, const Segments& seg, std::span<const double> scale,
                 Matrix& out, bool accumulate) {
  check(scale.empty() || scale.size() == seg.count(), "segment_sum: scale length mismatch");
  prepare(out, seg.count(), src.cols(), accumulate);
  for (std::size_t s = 0; s < seg.count(); ++s)
    for (std::size_t j = 0; j < src.cols(); ++j) {
      double acc = 0.0;
      for (std::size_t p = seg.offsets[s]; p < seg.offsets[s + 1]; ++p) acc += src(seg.indices[p], j);
      out(s, j) += scale.empty() ? acc : scale[s] * acc;
    }
}

}  // namespace reference
}  // namespace dfd::kernels
