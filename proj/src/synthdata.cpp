#include "dfd/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dfd/error.hpp"
#include "dfd/io.hpp"
#include "dfd/rng.hpp"

namespace dfd {
namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ValidationError("unknown split '" + s + "' (expected train, val or test)");
}

void SyntheticSpec::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("synthetic spec: " + m); };
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (num_modalities < 1) fail("num_modalities must be at least 1");
  if (modality_dims.size() != num_modalities) fail("modality_dims length must equal num_modalities");
  if (bias_weight_per_modality.size() != num_modalities)
    fail("bias_weight_per_modality length must equal num_modalities");
  for (std::size_t d : modality_dims)
    if (d < 1) fail("every modality dimension must be at least 1");
  for (double w : bias_weight_per_modality)
    if (!(w >= 0.0 && w <= 1.0)) fail("bias weights must lie in [0, 1]");
  if (causal_dim < static_cast<std::size_t>(num_classes) || bias_dim < static_cast<std::size_t>(num_classes))
    fail("causal_dim and bias_dim must be at least num_classes");
  for (double p : {bias_align_train, bias_align_test})
    if (!(p >= 0.0 && p <= 1.0)) fail("alignment probabilities must lie in [0, 1]");
  if (!(observe_prob > 0.0 && observe_prob <= 1.0)) fail("observe_prob must lie in (0, 1]");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) fail("noise_std must be a finite nonnegative number");
}

json SyntheticSpec::to_json() const {
  return json{{"num_train", num_train},
              {"num_val", num_val},
              {"num_test", num_test},
              {"num_modalities", num_modalities},
              {"modality_dims", modality_dims},
              {"num_classes", num_classes},
              {"causal_dim", causal_dim},
              {"bias_dim", bias_dim},
              {"bias_align_train", bias_align_train},
              {"bias_align_test", bias_align_test},
              {"bias_weight_per_modality", bias_weight_per_modality},
              {"observe_prob", observe_prob},
              {"noise_std", noise_std},
              {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const json& j) {
  SyntheticSpec s;
  try {
    for (const auto& [key, _] : j.items()) {
      static const char* known[] = {"num_train",        "num_val",         "num_test",   "num_modalities",
                                    "modality_dims",    "num_classes",     "causal_dim", "bias_dim",
                                    "bias_align_train", "bias_align_test", "bias_weight_per_modality",
                                    "observe_prob",     "noise_std",       "seed"};
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
        throw ValidationError("synthetic spec: unknown key '" + key + "'");
    }
    s.num_train = j.value("num_train", s.num_train);
    s.num_val = j.value("num_val", s.num_val);
    s.num_test = j.value("num_test", s.num_test);
    s.num_modalities = j.value("num_modalities", s.num_modalities);
    s.num_classes = j.value("num_classes", s.num_classes);
    s.causal_dim = j.value("causal_dim", s.causal_dim);
    s.bias_dim = j.value("bias_dim", s.bias_dim);
    s.bias_align_train = j.value("bias_align_train", s.bias_align_train);
    s.bias_align_test = j.value("bias_align_test", s.bias_align_test);
    s.observe_prob = j.value("observe_prob", s.observe_prob);
    s.noise_std = j.value("noise_std", s.noise_std);
    s.seed = j.value("seed", s.seed);
    // Per-modality lists default to uniform values matching num_modalities.
    s.modality_dims = j.contains("modality_dims") ? j.at("modality_dims").get<std::vector<std::size_t>>()
                                                  : std::vector<std::size_t>(s.num_modalities, 16);
    s.bias_weight_per_modality = j.contains("bias_weight_per_modality")
                                     ? j.at("bias_weight_per_modality").get<std::vector<double>>()
                                     : std::vector<double>(s.num_modalities, 1.0);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("synthetic spec: ") + e.what());
  }
  s.validate();
  return s;
}

std::vector<std::size_t> MultimodalDataset::modality_dims() const {
  std::vector<std::size_t> d;
  for (const auto& f : features) d.push_back(f.cols());
  return d;
}

std::size_t MultimodalDataset::observed_count() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

void MultimodalDataset::validate() const {
  const std::size_t n = num_patients();
  const std::size_t m = num_modalities();
  if (num_classes < 2) throw ValidationError("dataset: num_classes must be at least 2");
  if (m == 0) throw ValidationError("dataset: no modalities");
  for (std::size_t j = 0; j < m; ++j) {
    if (features[j].rows() != n)
      throw ValidationError("dataset: features_" + std::to_string(j) + " has " + std::to_string(features[j].rows()) +
                            " rows, expected " + std::to_string(n));
    if (features[j].cols() == 0) throw ValidationError("dataset: modality " + std::to_string(j) + " has dimension 0");
  }
  if (mask.size() != n * m) throw ValidationError("dataset: mask shape does not match N × M");
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) {
      const auto v = mask[i * m + j];
      if (v > 1) throw ValidationError("dataset: mask entry for patient " + std::to_string(i) + " is not 0/1");
      any = any || v == 1;
    }
    if (!any) throw ValidationError("dataset: patient " + std::to_string(i) + " has no observed modality");
  }
  for (std::size_t i = 0; i < n; ++i)
    if (labels[i] < 0 || labels[i] >= num_classes)
      throw ValidationError("dataset: label of patient " + std::to_string(i) + " out of range");
  if (bias_attr) {
    if (bias_attr->size() != n) throw ValidationError("dataset: bias_attr length does not match N");
    for (std::size_t i = 0; i < n; ++i)
      if ((*bias_attr)[i] < 0 || (*bias_attr)[i] >= num_classes)
        throw ValidationError("dataset: bias attribute of patient " + std::to_string(i) + " out of range");
  }
}

namespace {

MultimodalDataset generate_split(const SyntheticSpec& spec, Split split, std::size_t n, double align,
                                 const std::vector<Matrix>& mixing) {
  const std::size_t m = spec.num_modalities;
  const std::size_t latent = spec.causal_dim + spec.bias_dim;
  const int k = spec.num_classes;

  MultimodalDataset ds;
  ds.split = split;
  ds.num_classes = k;
  for (std::size_t j = 0; j < m; ++j) ds.features.emplace_back(n, spec.modality_dims[j]);
  ds.mask.assign(n * m, 0);
  ds.labels.assign(n, 0);
  ds.bias_attr = std::vector<int>(n, 0);
  ds.spec_echo = spec.to_json();

  // Each patient draws from its own stream, so the result does not depend on
  // iteration order.
  const std::string role = "synth/" + to_string(split);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = make_rng(spec.seed, role, i);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    const int y = std::uniform_int_distribution<int>(0, k - 1)(rng);
    int a = y;
    if (unit(rng) >= align) {
      a = std::uniform_int_distribution<int>(0, k - 2)(rng);
      if (a >= y) ++a;
    }
    std::vector<double> z(latent);
    for (std::size_t d = 0; d < spec.causal_dim; ++d)
      z[d] = normal(rng) + (d == static_cast<std::size_t>(y) ? SyntheticSpec::kCausalSeparation : 0.0);
    for (std::size_t d = 0; d < spec.bias_dim; ++d)
      z[spec.causal_dim + d] = normal(rng) + (d == static_cast<std::size_t>(a) ? SyntheticSpec::kBiasSeparation : 0.0);

    for (std::size_t j = 0; j < m; ++j) {
      const Matrix& mix = mixing[j];
      const double wb = spec.bias_weight_per_modality[j];
      auto row = ds.features[j].row(i);
      for (std::size_t r = 0; r < row.size(); ++r) {
        double v = 0.0;
        for (std::size_t d = 0; d < spec.causal_dim; ++d) v += mix(r, d) * z[d];
        for (std::size_t d = spec.causal_dim; d < latent; ++d) v += mix(r, d) * wb * z[d];
        row[r] = v + spec.noise_std * normal(rng);
      }
    }

    std::uint8_t* mrow = ds.mask.data() + i * m;
    bool any = false;
    while (!any) {
      for (std::size_t j = 0; j < m; ++j) {
        mrow[j] = unit(rng) < spec.observe_prob ? 1 : 0;
        any = any || mrow[j];
      }
    }
    ds.labels[i] = y;
    (*ds.bias_attr)[i] = a;
  }
  return ds;
}

}  // namespace

SyntheticSplits generate(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t latent = spec.causal_dim + spec.bias_dim;
  std::vector<Matrix> mixing;
  for (std::size_t j = 0; j < spec.num_modalities; ++j) {
    Rng rng = make_rng(spec.seed, "synth/mixing", j);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(latent)));
    Matrix a(spec.modality_dims[j], latent);
    for (double& v : a.storage()) v = normal(rng);
    mixing.push_back(std::move(a));
  }
  return SyntheticSplits{
      generate_split(spec, Split::train, spec.num_train, spec.bias_align_train, mixing),
      generate_split(spec, Split::val, spec.num_val, spec.bias_align_train, mixing),
      generate_split(spec, Split::test, spec.num_test, spec.bias_align_test, mixing),
  };
}

void write_dataset(const MultimodalDataset& ds, const fs::path& dir) {
  if (ds.num_patients() == 0) throw ValidationError("write_dataset: refusing to write an empty dataset to " + dir.string());
  ds.validate();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  const std::size_t m = ds.num_modalities();
  json meta{{"schema", "dfd-dataset/1"},
            {"split", to_string(ds.split)},
            {"num_patients", ds.num_patients()},
            {"num_modalities", m},
            {"modality_dims", ds.modality_dims()},
            {"num_classes", ds.num_classes},
            {"has_bias_attr", ds.bias_attr.has_value()}};
  if (ds.spec_echo) meta["spec"] = *ds.spec_echo;
  io::write_file_atomic(dir / "meta.json", meta.dump(2) + "\n");

  for (std::size_t j = 0; j < m; ++j)
    io::write_file_atomic(dir / ("features_" + std::to_string(j) + ".csv"), io::matrix_to_csv(ds.features[j]));

  std::string mask;
  mask.reserve(ds.mask.size() * 2);
  for (std::size_t i = 0; i < ds.num_patients(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (j) mask += ',';
      mask += ds.observed(i, j) ? '1' : '0';
    }
    mask += '\n';
  }
  io::write_file_atomic(dir / "mask.csv", mask);
  io::write_file_atomic(dir / "labels.csv", io::ints_to_csv(ds.labels));
  const fs::path bias_path = dir / "bias_attr.csv";
  if (ds.bias_attr) {
    io::write_file_atomic(bias_path, io::ints_to_csv(*ds.bias_attr));
  } else if (fs::exists(bias_path)) {
    fs::remove(bias_path, ec);
    if (ec) throw IoError("cannot remove stale " + bias_path.string());
  }
}

MultimodalDataset read_dataset(const fs::path& dir) {
  const fs::path meta_path = dir / "meta.json";
  json meta;
  try {
    meta = json::parse(io::read_file(meta_path));
  } catch (const json::parse_error& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }

  MultimodalDataset ds;
  std::size_t n = 0, m = 0;
  std::vector<std::size_t> dims;
  bool has_bias = false;
  try {
    ds.split = split_from_string(meta.at("split").get<std::string>());
    n = meta.at("num_patients").get<std::size_t>();
    m = meta.at("num_modalities").get<std::size_t>();
    dims = meta.at("modality_dims").get<std::vector<std::size_t>>();
    ds.num_classes = meta.at("num_classes").get<int>();
    has_bias = meta.at("has_bias_attr").get<bool>();
    if (meta.contains("spec")) ds.spec_echo = meta.at("spec");
  } catch (const json::exception& e) {
    throw ValidationError(meta_path.string() + ": " + e.what());
  }
  if (dims.size() != m) throw ValidationError(meta_path.string() + ": modality_dims length differs from num_modalities");

  for (std::size_t j = 0; j < m; ++j) {
    const fs::path p = dir / ("features_" + std::to_string(j) + ".csv");
    Matrix f = io::matrix_from_csv(io::read_file(p), p);
    if (f.rows() != n)
      throw ValidationError(p.string() + ": " + std::to_string(f.rows()) + " rows, meta says " + std::to_string(n));
    if (f.cols() != dims[j])
      throw ValidationError(p.string() + ": " + std::to_string(f.cols()) + " columns, meta says " +
                            std::to_string(dims[j]));
    ds.features.push_back(std::move(f));
  }

  const fs::path mask_path = dir / "mask.csv";
  const Matrix mask = io::matrix_from_csv(io::read_file(mask_path), mask_path);
  if (mask.rows() != n || (n > 0 && mask.cols() != m))
    throw ValidationError(mask_path.string() + ": shape does not match N × M from meta");
  ds.mask.resize(n * m);
  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t j = 0; j < m; ++j) {
      const double v = mask(i, j);
      if (v != 0.0 && v != 1.0)
        throw ValidationError(mask_path.string() + ": patient " + std::to_string(i) + " has a non-binary mask entry");
      ds.mask[i * m + j] = v == 1.0 ? 1 : 0;
      any = any || v == 1.0;
    }
    if (!any) throw ValidationError(mask_path.string() + ": patient " + std::to_string(i) + " has no observed modality");
  }

  const fs::path labels_path = dir / "labels.csv";
  ds.labels = io::ints_from_csv(io::read_file(labels_path), labels_path);
  if (ds.labels.size() != n)
    throw ValidationError(labels_path.string() + ": " + std::to_string(ds.labels.size()) + " labels, meta says " +
                          std::to_string(n));
  if (has_bias) {
    const fs::path bias_path = dir / "bias_attr.csv";
    ds.bias_attr = io::ints_from_csv(io::read_file(bias_path), bias_path);
  }
  ds.validate();
  return ds;
}

void write_splits(const SyntheticSplits& splits, const fs::path& root) {
  write_dataset(splits.train, root / "train");
  write_dataset(splits.val, root / "val");
  write_dataset(splits.test, root / "test");
}

}  // namespace dfd
