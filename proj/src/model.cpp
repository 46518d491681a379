#include "dfd/model.hpp"

#include <bit>
#include <cstring>
#include <regex>

#include "dfd/error.hpp"
#include "dfd/io.hpp"
#include "dfd/rng.hpp"

namespace dfd {
namespace fs = std::filesystem;
using nlohmann::json;

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("model config: " + m); };
  if (modality_dims.empty()) fail("at least one modality is required");
  for (std::size_t d : modality_dims)
    if (d < 1) fail("modality dimensions must be at least 1");
  if (num_classes < 2) fail("num_classes must be at least 2");
  if (edge_dim < 1 || hidden_dim < 1 || layers < 1 || encoder_depth < 1 || head_depth < 1)
    fail("dimensions, layer count and depths must be at least 1");
}

json ModelConfig::to_json() const {
  return json{{"modality_dims", modality_dims},
              {"num_classes", num_classes},
              {"edge_dim", edge_dim},
              {"hidden_dim", hidden_dim},
              {"layers", layers},
              {"encoder_depth", encoder_depth},
              {"head_depth", head_depth},
              {"message_includes_neighbor", message_includes_neighbor},
              {"single_stream", single_stream}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig c;
  try {
    c.modality_dims = j.at("modality_dims").get<std::vector<std::size_t>>();
    c.num_classes = j.at("num_classes").get<int>();
    c.edge_dim = j.at("edge_dim").get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
    c.layers = j.at("layers").get<std::size_t>();
    c.encoder_depth = j.at("encoder_depth").get<std::size_t>();
    c.head_depth = j.at("head_depth").get<std::size_t>();
    c.message_includes_neighbor = j.at("message_includes_neighbor").get<bool>();
    c.single_stream = j.at("single_stream").get<bool>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

DfdModel::DfdModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = make_rng(seed, "init");
  const std::size_t m = cfg_.num_modalities();
  encoders_ = ModalityEncoderBank(params_, cfg_.modality_dims, cfg_.edge_dim, cfg_.encoder_depth, rng);
  const StreamConfig sc{m, cfg_.edge_dim, cfg_.hidden_dim, cfg_.layers, cfg_.message_includes_neighbor};
  const std::size_t k = static_cast<std::size_t>(cfg_.num_classes);
  if (cfg_.single_stream) {
    causal_ = StreamBank(params_, "causal", sc, rng);
    head_c_ = ClassifierHead(params_, "head_causal", cfg_.hidden_dim, k, cfg_.head_depth, cfg_.hidden_dim, rng);
    return;
  }
  gate_ = EdgeGate(params_, m, cfg_.edge_dim, rng);
  causal_ = StreamBank(params_, "causal", sc, rng);
  bias_ = StreamBank(params_, "bias", sc, rng);
  head_c_ = ClassifierHead(params_, "head_causal", 2 * cfg_.hidden_dim, k, cfg_.head_depth, cfg_.hidden_dim, rng);
  head_b_ = ClassifierHead(params_, "head_bias", 2 * cfg_.hidden_dim, k, cfg_.head_depth, cfg_.hidden_dim, rng);
}

DfdModel::Forward DfdModel::forward(ad::Tape& tape, const BipartiteGraph& g, const MultimodalDataset& ds) const {
  if (ds.num_classes != cfg_.num_classes) throw ValidationError("dataset class count does not match the model");
  Forward f;
  f.edge_features = encoders_.encode(tape, g, ds);
  if (cfg_.single_stream) {
    f.causal = causal_.run(tape, g, f.edge_features, std::nullopt);
    return f;
  }
  f.tau = ad::sigmoid(gate_.logits(tape, g));
  f.omega = ad::one_minus(*f.tau);
  f.causal = causal_.run(tape, g, f.edge_features, f.tau);
  f.bias = bias_.run(tape, g, f.edge_features, f.omega);
  return f;
}

ad::Var DfdModel::inference_logits(ad::Tape& tape, const Forward& f) const {
  if (cfg_.single_stream) return head_c_.logits(tape, f.h_causal());
  return causal_logits(tape, f.h_causal(), f.h_bias(), head_c_);
}

DfdModel::Evaluation DfdModel::evaluate(const MultimodalDataset& ds) const {
  ad::Tape tape;
  const BipartiteGraph g = build_graph(ds);
  const Forward f = forward(tape, g, ds);
  Evaluation ev;
  ev.reps = readout(f.causal, f.bias);
  ev.predictions = predict_from_probs(softmax_rows(inference_logits(tape, f).value()));
  return ev;
}

namespace {

int layer_index(const std::string& name) {
  static const std::regex re(R"(\.layer(\d+)\.)");
  std::smatch m;
  if (std::regex_search(name, m, re)) return std::stoi(m[1]);
  return -1;
}

std::string tensor_file(std::size_t i, const std::string& name) {
  return std::to_string(i) + "_" + name + ".f64";
}

}  // namespace

void save_checkpoint(const fs::path& dir, const ModelConfig& cfg, const ParameterSet& params, const json& extra) {
  static_assert(std::endian::native == std::endian::little, "checkpoint format is little-endian");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  json tensors = json::array();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = params[i];
    const std::string file = tensor_file(i, p.name);
    std::string bytes(p.value.size() * sizeof(double), '\0');
    std::memcpy(bytes.data(), p.value.data(), bytes.size());
    io::write_file_atomic(dir / file, bytes);
    tensors.push_back(
        {{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}, {"layer", layer_index(p.name)}, {"file", file}});
  }
  const json manifest{{"schema", "dfd-checkpoint/1"}, {"dtype", "float64-le"}, {"model", cfg.to_json()},
                      {"tensors", tensors}, {"extra", extra}};
  io::write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

CheckpointManifest read_checkpoint_manifest(const fs::path& dir) {
  if (!fs::exists(dir)) throw ValidationError("checkpoint not found: " + dir.string());
  const fs::path path = dir / "manifest.json";
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (j.value("schema", "") != "dfd-checkpoint/1") throw ValidationError(path.string() + ": unknown checkpoint schema");
  return CheckpointManifest{ModelConfig::from_json(j.at("model")), j.value("extra", json::object())};
}

void load_checkpoint_tensors(const fs::path& dir, ParameterSet& params) {
  const fs::path path = dir / "manifest.json";
  const json j = json::parse(io::read_file(path));
  const json& tensors = j.at("tensors");
  if (tensors.size() != params.size())
    throw ValidationError(path.string() + ": checkpoint has " + std::to_string(tensors.size()) +
                          " tensors, model expects " + std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = params[i];
    const json& t = tensors[i];
    const auto name = t.at("name").get<std::string>();
    const auto rows = t.at("rows").get<std::size_t>();
    const auto cols = t.at("cols").get<std::size_t>();
    if (name != p.name || rows != p.value.rows() || cols != p.value.cols())
      throw ValidationError(path.string() + ": tensor " + std::to_string(i) + " is " + name + " [" +
                            std::to_string(rows) + "x" + std::to_string(cols) + "], model expects " + p.name + " [" +
                            std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()) + "]");
    const fs::path tf = dir / t.at("file").get<std::string>();
    const std::string bytes = io::read_file(tf);
    if (bytes.size() != p.value.size() * sizeof(double))
      throw ValidationError(tf.string() + ": wrong byte length for " + name);
    std::memcpy(p.value.data(), bytes.data(), bytes.size());
  }
}

}  // namespace dfd
