#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

#include <unistd.h>

#include "dfd/autodiff.hpp"
#include "dfd/rng.hpp"
#include "dfd/synthdata.hpp"
#include "dfd/tensor.hpp"

namespace testing {

inline dfd::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double scale = 1.0) {
  dfd::Rng rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  dfd::Matrix m(rows, cols);
  for (double& v : m.storage()) v = n(rng);
  return m;
}

struct FdReport {
  double max_rel_error = 0.0;
  std::string worst;  // "param[index] analytic a numeric n"
  std::size_t checked = 0;
};

// |analytic − numeric| / max(|analytic|, |numeric|, floor). The floor keeps
// near-zero gradients from turning finite-difference noise into large ratios.
inline double rel_error(double a, double n, double floor = 1e-6) {
  return std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
}

// Compares the tape gradient of loss() against central differences for every
// entry of every parameter in ps. loss must build a fresh graph on the tape.
inline FdReport check_gradients(dfd::ParameterSet& ps, const std::function<dfd::ad::Var(dfd::ad::Tape&)>& loss,
                                double h = 1e-5) {
  ps.zero_grad();
  {
    dfd::ad::Tape tape;
    tape.backward(loss(tape));
  }
  auto value = [&] {
    dfd::ad::Tape tape;
    return loss(tape).value()(0, 0);
  };
  FdReport rep;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    dfd::Parameter& par = ps[p];
    for (std::size_t i = 0; i < par.value.size(); ++i) {
      double& x = par.value.data()[i];
      const double x0 = x;
      x = x0 + h;
      const double up = value();
      x = x0 - h;
      const double down = value();
      x = x0;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = par.grad.data()[i];
      const double e = rel_error(analytic, numeric);
      ++rep.checked;
      if (e > rep.max_rel_error) {
        rep.max_rel_error = e;
        rep.worst = par.name + "[" + std::to_string(i) + "] analytic " + std::to_string(analytic) +
                    " numeric " + std::to_string(numeric);
      }
    }
  }
  return rep;
}

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::uint64_t counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("dfd_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

// Small dataset with hand-picked masks; features are random.
inline dfd::MultimodalDataset tiny_dataset(std::size_t n, std::vector<std::size_t> dims,
                                           std::vector<std::uint8_t> mask, std::uint64_t seed = 1,
                                           int num_classes = 2) {
  dfd::MultimodalDataset ds;
  ds.num_classes = num_classes;
  for (std::size_t j = 0; j < dims.size(); ++j) ds.features.push_back(random_matrix(n, dims[j], seed + 17 * j));
  ds.mask = std::move(mask);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) ds.labels[i] = static_cast<int>(i % static_cast<std::size_t>(num_classes));
  return ds;
}

inline dfd::SyntheticSpec small_spec(std::uint64_t seed = 3) {
  dfd::SyntheticSpec s;
  s.num_train = 160;
  s.num_val = 60;
  s.num_test = 80;
  s.num_modalities = 3;
  s.modality_dims = {5, 4, 6};
  s.bias_weight_per_modality = {1.0, 0.5, 1.0};
  s.causal_dim = 3;
  s.bias_dim = 3;
  s.seed = seed;
  return s;
}

}  // namespace testing
