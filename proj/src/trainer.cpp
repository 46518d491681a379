#include "dfd/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <memory>
#include <numeric>

#include "dfd/error.hpp"
#include "dfd/io.hpp"
#include "dfd/metrics.hpp"
#include "dfd/mi_estimator.hpp"
#include "dfd/optim.hpp"
#include "dfd/projection.hpp"
#include "dfd/rng.hpp"

namespace dfd {
namespace fs = std::filesystem;
using nlohmann::json;

std::size_t TrainConfig::stage1_epochs() const {
  if (epochs_stage1) return *epochs_stage1;
  return static_cast<std::size_t>(std::llround(0.15 * static_cast<double>(epochs_total)));
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("train config: " + m); };
  if (epochs_total < 1) fail("epochs_total must be at least 1");
  if (stage1_epochs() > epochs_total) fail("epochs_stage1 must not exceed epochs_total");
  if (batch_size < 2) fail("batch_size must be at least 2");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (optimizer != "adam") fail("unsupported optimizer '" + optimizer + "' (only adam)");
  if (!(g > 0.0 && g <= 1.0)) fail("g must lie in (0, 1]");
  if (negatives < 1) fail("negatives must be at least 1");
  if (inner_steps < 1) fail("inner_steps must be at least 1");
  if (!(stats_lr() > 0.0)) fail("stats_learning_rate must be positive");
  if (negative_sampler != "different_label" && negative_sampler != "shuffle")
    fail("negative_sampler must be 'different_label' or 'shuffle'");
  if (stats_hidden < 1 || layers < 1 || edge_dim < 1 || hidden_dim < 1 || encoder_depth < 1 || head_depth < 1)
    fail("all dimensions must be at least 1");
}

json TrainConfig::to_json() const {
  json j{{"epochs_total", epochs_total},
         {"epochs_stage1", stage1_epochs()},
         {"batch_size", batch_size},
         {"learning_rate", learning_rate},
         {"optimizer", optimizer},
         {"g", g},
         {"negatives", negatives},
         {"inner_steps", inner_steps},
         {"stats_learning_rate", stats_lr()},
         {"negative_sampler", negative_sampler},
         {"mi_floor", mi_floor},
         {"stats_hidden", stats_hidden},
         {"layers", layers},
         {"edge_dim", edge_dim},
         {"hidden_dim", hidden_dim},
         {"encoder_depth", encoder_depth},
         {"head_depth", head_depth},
         {"message_includes_neighbor", message_includes_neighbor},
         {"routing", routing == GradientRouting::stop_gradient ? "stop_gradient" : "off"},
         {"disable_gce", disable_gce},
         {"disable_mi", disable_mi},
         {"single_stream", single_stream},
         {"seed", seed}};
  j["shuffle_seed"] = shuffle_seed.value_or(seed);
  return j;
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  static const char* known[] = {"epochs_total", "epochs_stage1", "batch_size",   "learning_rate", "optimizer",
                                "g",            "negatives",     "inner_steps",  "stats_hidden",  "layers",
                                "edge_dim",     "hidden_dim",    "encoder_depth", "head_depth",   "message_includes_neighbor",
                                "routing",      "disable_gce",   "disable_mi",   "single_stream", "seed",
                                "shuffle_seed", "verbose",       "stats_learning_rate", "negative_sampler", "mi_floor"};
  try {
    for (const auto& [key, _] : j.items())
      if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known))
        throw ValidationError("train config: unknown key '" + key + "'");
    c.epochs_total = j.value("epochs_total", c.epochs_total);
    if (j.contains("epochs_stage1")) c.epochs_stage1 = j.at("epochs_stage1").get<std::size_t>();
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.optimizer = j.value("optimizer", c.optimizer);
    c.g = j.value("g", c.g);
    c.negatives = j.value("negatives", c.negatives);
    c.inner_steps = j.value("inner_steps", c.inner_steps);
    if (j.contains("stats_learning_rate")) c.stats_learning_rate = j.at("stats_learning_rate").get<double>();
    c.negative_sampler = j.value("negative_sampler", c.negative_sampler);
    c.mi_floor = j.value("mi_floor", c.mi_floor);
    c.stats_hidden = j.value("stats_hidden", c.stats_hidden);
    c.layers = j.value("layers", c.layers);
    c.edge_dim = j.value("edge_dim", c.edge_dim);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.encoder_depth = j.value("encoder_depth", c.encoder_depth);
    c.head_depth = j.value("head_depth", c.head_depth);
    c.message_includes_neighbor = j.value("message_includes_neighbor", c.message_includes_neighbor);
    const std::string routing = j.value("routing", std::string("stop_gradient"));
    if (routing == "stop_gradient") c.routing = GradientRouting::stop_gradient;
    else if (routing == "off") c.routing = GradientRouting::off;
    else throw ValidationError("train config: routing must be 'stop_gradient' or 'off'");
    c.disable_gce = j.value("disable_gce", c.disable_gce);
    c.disable_mi = j.value("disable_mi", c.disable_mi);
    c.single_stream = j.value("single_stream", c.single_stream);
    c.seed = j.value("seed", c.seed);
    if (j.contains("shuffle_seed")) c.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    c.verbose = j.value("verbose", c.verbose);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

ModelConfig TrainConfig::model_config(const MultimodalDataset& ds) const {
  ModelConfig m;
  m.modality_dims = ds.modality_dims();
  m.num_classes = ds.num_classes;
  m.edge_dim = edge_dim;
  m.hidden_dim = hidden_dim;
  m.layers = layers;
  m.encoder_depth = encoder_depth;
  m.head_depth = head_depth;
  m.message_includes_neighbor = message_includes_neighbor;
  m.single_stream = single_stream;
  return m;
}

double total_loss(double l_d, double l_mi, int stage, bool disable_mi) {
  if (stage != 1 && stage != 2) throw std::invalid_argument("total_loss: stage must be 1 or 2");
  return stage == 1 || disable_mi ? l_d : l_d + l_mi;
}

Datasets read_datasets(const fs::path& data_dir) {
  Datasets d{read_dataset(data_dir / "train"), read_dataset(data_dir / "val"), read_dataset(data_dir / "test")};
  const auto dims = d.train.modality_dims();
  for (const MultimodalDataset* ds : {&d.val, &d.test})
    if (ds->modality_dims() != dims || ds->num_classes != d.train.num_classes)
      throw ValidationError(data_dir.string() + ": splits disagree on modality dimensions or class count");
  return d;
}

std::string loss_log_header() { return "epoch,stage,L_ce,L_gce,L_MI,L_Total,mi_skips,val_auc_roc\n"; }

std::string format_loss_row(const EpochLog& e) {
  return std::to_string(e.epoch) + "," + std::to_string(e.stage) + "," + io::format_double(e.ce) + "," +
         io::format_double(e.gce) + "," + io::format_double(e.mi) + "," + io::format_double(e.total) + "," +
         std::to_string(e.mi_skips) + "," + io::format_double(e.val_auc_roc) + "\n";
}

namespace {

bool finite(double v) { return std::isfinite(v); }

double validation_auc(const DfdModel& model, const MultimodalDataset& val) {
  const auto ev = model.evaluate(val);
  return auc_roc_multiclass(ev.predictions.probs, val.labels);
}

}  // namespace

RunArtifacts train(const TrainConfig& cfg, const Datasets& data, const fs::path& out_dir) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  data.train.validate();
  data.val.validate();
  data.test.validate();
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  RunArtifacts art;
  art.checkpoint = out_dir / "checkpoint";
  art.loss_log = out_dir / "loss_log.csv";
  art.metrics = out_dir / "metrics.json";
  art.config = out_dir / "config.json";
  art.run_stats = out_dir / "run_stats.json";
  io::write_file_atomic(art.config, cfg.to_json().dump(2) + "\n");

  const MultimodalDataset& train_ds = data.train;
  const ModelConfig mcfg = cfg.model_config(train_ds);
  DfdModel model(mcfg, cfg.seed);
  Adam optimizer(model.parameters(), AdamOptions{cfg.learning_rate});

  std::unique_ptr<StatsNet> stats;
  std::unique_ptr<Adam> stats_optimizer;
  const bool use_mi = !cfg.disable_mi && !cfg.single_stream;
  if (use_mi) {
    Rng rng = make_rng(cfg.seed, "stats-init");
    stats = std::make_unique<StatsNet>(cfg.hidden_dim, cfg.hidden_dim, cfg.stats_hidden, rng);
    stats_optimizer = std::make_unique<Adam>(stats->parameters(), AdamOptions{cfg.stats_lr()});
    art.stats_at_init = stats->parameters().snapshot();
  }
  Rng negative_rng = make_rng(cfg.seed, "negatives");

  DisentangleOptions dopts;
  dopts.g = cfg.g;
  dopts.routing = cfg.routing;
  dopts.disable_gce = cfg.disable_gce;

  const std::size_t n = train_ds.num_patients();
  std::vector<std::size_t> order(n);
  std::vector<Matrix> best_params;
  double best_auc = -1.0;
  std::string log = loss_log_header();

  for (std::size_t epoch = 1; epoch <= cfg.epochs_total; ++epoch) {
    const int stage = epoch <= cfg.stage1_epochs() ? 1 : 2;
    if (stage == 2 && use_mi && art.stats_at_stage2.empty()) art.stats_at_stage2 = stats->parameters().snapshot();

    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng = make_rng(cfg.shuffle_seed.value_or(cfg.seed), "batches", epoch);
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    EpochLog row;
    row.epoch = epoch;
    row.stage = stage;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size) {
      const std::size_t end = std::min(n, start + cfg.batch_size);
      const std::span<const std::size_t> ids(order.data() + start, end - start);
      const BipartiteGraph g = build_subgraph(train_ds, ids);
      std::vector<int> labels(ids.size());
      for (std::size_t i = 0; i < ids.size(); ++i) labels[i] = train_ds.labels[ids[i]];

      ad::Tape tape;
      const DfdModel::Forward f = model.forward(tape, g, train_ds);
      ad::Var loss;
      double ce = 0.0, gce = 0.0, mi = 0.0;
      if (cfg.single_stream) {
        loss = ad::softmax_cross_entropy(model.inference_logits(tape, f), labels);
        ce = loss.value()(0, 0);
      } else {
        const DisentangleLoss dl =
            disentangle_loss(f.h_causal(), f.h_bias(), labels, model.causal_head(), model.bias_head(), dopts);
        loss = dl.total;
        ce = dl.ce.value()(0, 0);
        gce = dl.gce.value()(0, 0);
        if (stage == 2 && use_mi) {
          std::optional<NegativePairBatch> negs;
          if (ids.size() >= 2) {
            negs = cfg.negative_sampler == "shuffle" ? sample_marginal_negatives(ids.size(), cfg.negatives, negative_rng)
                                                     : sample_negatives(labels, cfg.negatives, negative_rng);
          }
          if (!negs) {
            ++row.mi_skips;
          } else {
            ad::Var l_mi = mi_adversarial_step(*stats, *stats_optimizer, f.h_causal(), f.h_bias(), *negs,
                                               cfg.inner_steps);
            // A negative bound only reflects a lagging statistics network.
            if (cfg.mi_floor) l_mi = ad::clamp(l_mi, 0.0, std::numeric_limits<double>::infinity());
            mi = l_mi.value()(0, 0);
            loss = ad::add(loss, l_mi);
          }
        }
      }
      const double total = loss.value()(0, 0);
      if (!finite(total) || !finite(ce) || !finite(gce) || !finite(mi))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(batches));
      tape.backward(loss);
      optimizer.step();

      row.ce += ce;
      row.gce += gce;
      row.mi += mi;
      row.total += total;
      ++batches;
    }
    const double inv = 1.0 / static_cast<double>(batches);
    row.ce *= inv;
    row.gce *= inv;
    row.mi *= inv;
    row.total *= inv;
    row.val_auc_roc = validation_auc(model, data.val);
    art.epochs.push_back(row);
    log += format_loss_row(row);
    io::write_file_atomic(art.loss_log, log);

    if (row.val_auc_roc > best_auc) {
      best_auc = row.val_auc_roc;
      art.best_epoch = epoch;
      best_params = model.parameters().snapshot();
      save_checkpoint(art.checkpoint, mcfg, model.parameters(),
                      json{{"epoch", epoch}, {"val_auc_roc", row.val_auc_roc}, {"train_config", cfg.to_json()}});
    }
    if (cfg.verbose) {
      std::fprintf(stderr, "epoch %3zu stage %d  L_ce %.4f  L_gce %.4f  L_MI %.4f  val_auc %.4f\n", epoch, stage,
                   row.ce, row.gce, row.mi, row.val_auc_roc);
    }
  }

  model.parameters().restore(best_params);
  art.best_val_auc_roc = best_auc;
  art.report.seed = cfg.seed;
  art.report.config = cfg.to_json();
  art.report.config["best_epoch"] = art.best_epoch;
  for (const auto& [name, ds] : {std::pair<const char*, const MultimodalDataset*>{"val", &data.val},
                                 std::pair<const char*, const MultimodalDataset*>{"test", &data.test}}) {
    art.report.splits[name] = compute_split_metrics(*ds, model.evaluate(*ds), cfg.seed);
  }
  io::write_file_atomic(art.metrics, art.report.dump());

  art.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  io::write_file_atomic(art.run_stats, json{{"wall_seconds", art.seconds}, {"best_epoch", art.best_epoch}}.dump(2) + "\n");
  return art;
}

RunArtifacts train(const TrainConfig& cfg, const fs::path& data_dir, const fs::path& out_dir) {
  return train(cfg, read_datasets(data_dir), out_dir);
}

void export_embeddings(const PatientRepresentations& reps, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create export directory " + dir.string() + ": " + ec.message());
  io::write_file_atomic(dir / "embeddings_c.csv", io::matrix_to_csv(reps.causal));
  io::write_file_atomic(dir / "proj_c.csv", io::matrix_to_csv(project_2d(reps.causal).coords));
  if (!reps.bias.empty()) {
    io::write_file_atomic(dir / "embeddings_b.csv", io::matrix_to_csv(reps.bias));
    io::write_file_atomic(dir / "proj_b.csv", io::matrix_to_csv(project_2d(reps.bias).coords));
  }
}

MetricsReport evaluate_checkpoint(const fs::path& checkpoint, const fs::path& data_dir, Split split,
                                  const std::optional<fs::path>& export_dir) {
  const CheckpointManifest manifest = read_checkpoint_manifest(checkpoint);
  const MultimodalDataset ds = read_dataset(data_dir / to_string(split));
  if (ds.modality_dims() != manifest.model.modality_dims || ds.num_classes != manifest.model.num_classes)
    throw ValidationError("checkpoint " + checkpoint.string() + " does not match the dimensions of " +
                          (data_dir / to_string(split)).string());
  DfdModel model(manifest.model, 0);
  load_checkpoint_tensors(checkpoint, model.parameters());
  const DfdModel::Evaluation ev = model.evaluate(ds);
  if (export_dir) export_embeddings(ev.reps, *export_dir);

  std::uint64_t probe_seed = 0;
  if (manifest.extra.contains("train_config")) probe_seed = manifest.extra.at("train_config").value("seed", std::uint64_t{0});
  MetricsReport report;
  report.seed = probe_seed;
  report.config = json{{"checkpoint", checkpoint.string()}, {"model", manifest.model.to_json()}};
  if (manifest.extra.contains("train_config")) report.config["train_config"] = manifest.extra.at("train_config");
  report.splits[to_string(split)] = compute_split_metrics(ds, ev, probe_seed);
  return report;
}

}  // namespace dfd
