#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "dfd/kernels.hpp"
#include "dfd/rng.hpp"

namespace {

using dfd::Matrix;
namespace k = dfd::kernels;

Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  dfd::Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.storage()) v = n(rng);
  return m;
}

// Edge rows of a bipartite graph with `patients` nodes of degree ~deg, grouped by patient.
struct SegmentData {
  std::vector<std::size_t> offsets, indices;
  std::vector<double> scale;
};

SegmentData make_segments(std::size_t patients, std::size_t deg) {
  SegmentData s;
  s.offsets.push_back(0);
  for (std::size_t p = 0; p < patients; ++p) {
    for (std::size_t j = 0; j < deg; ++j) s.indices.push_back(j * patients + p);
    s.offsets.push_back(s.indices.size());
    s.scale.push_back(1.0 / static_cast<double>(deg));
  }
  return s;
}

// nn and nt multiply an n × d activation by a d × d weight; tn forms the d × d
// weight gradient aᵀ·a.
template <void (*Gemm)(const Matrix&, const Matrix&, Matrix&, bool)>
void gemm(benchmark::State& state, bool weight_grad) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const Matrix a = random_matrix(n, d, 1);
  const Matrix b = weight_grad ? a : random_matrix(d, d, 2);
  Matrix c = weight_grad ? Matrix(d, d) : Matrix(n, d);
  for (auto _ : state) {
    Gemm(a, b, c, false);
    benchmark::DoNotOptimize(c.data());
  }
  const double flops = 2.0 * static_cast<double>(n) * static_cast<double>(d) * static_cast<double>(d);
  state.counters["GFLOP/s"] = benchmark::Counter(flops, benchmark::Counter::kIsIterationInvariantRate,
                                                 benchmark::Counter::kIs1000);
}

void BM_gemm_nn(benchmark::State& s) { gemm<k::gemm_nn>(s, false); }
void BM_gemm_nn_reference(benchmark::State& s) { gemm<k::reference::gemm_nn>(s, false); }
void BM_gemm_nt(benchmark::State& s) { gemm<k::gemm_nt>(s, false); }
void BM_gemm_nt_reference(benchmark::State& s) { gemm<k::reference::gemm_nt>(s, false); }
void BM_gemm_tn(benchmark::State& s) { gemm<k::gemm_tn>(s, true); }
void BM_gemm_tn_reference(benchmark::State& s) { gemm<k::reference::gemm_tn>(s, true); }

template <void (*Seg)(const Matrix&, const k::Segments&, std::span<const double>, Matrix&, bool)>
void segment(benchmark::State& state) {
  const auto patients = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  const std::size_t deg = 3;
  const SegmentData sd = make_segments(patients, deg);
  const Matrix src = random_matrix(patients * deg, d, 3);
  Matrix out(patients, d);
  const k::Segments seg{sd.offsets, sd.indices};
  for (auto _ : state) {
    Seg(src, seg, sd.scale, out, false);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations() * src.size() * sizeof(double)));
}

void BM_segment_mean(benchmark::State& s) { segment<k::segment_sum>(s); }
void BM_segment_mean_reference(benchmark::State& s) { segment<k::reference::segment_sum>(s); }

// Shapes seen in training: a batch of 128 patients (~360 edges) and full-graph evaluation.
#define DFD_GEMM_SHAPES ->Args({360, 64})->Args({4000, 64})->Args({11200, 64})->Args({4000, 128})
#define DFD_SEG_SHAPES ->Args({128, 64})->Args({4000, 64})

BENCHMARK(BM_gemm_nn) DFD_GEMM_SHAPES;
BENCHMARK(BM_gemm_nn_reference) DFD_GEMM_SHAPES;
BENCHMARK(BM_gemm_nt) DFD_GEMM_SHAPES;
BENCHMARK(BM_gemm_nt_reference) DFD_GEMM_SHAPES;
BENCHMARK(BM_gemm_tn) DFD_GEMM_SHAPES;
BENCHMARK(BM_gemm_tn_reference) DFD_GEMM_SHAPES;
BENCHMARK(BM_segment_mean) DFD_SEG_SHAPES;
BENCHMARK(BM_segment_mean_reference) DFD_SEG_SHAPES;

}  // namespace

BENCHMARK_MAIN();
