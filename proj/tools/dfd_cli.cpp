// Command-line front end: gen, train, eval, ablate, export-embeddings.
// Exit codes: 0 success, 1 validation error, 2 runtime failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dfd/ablation.hpp"
#include "dfd/error.hpp"
#include "dfd/io.hpp"
#include "dfd/synthdata.hpp"
#include "dfd/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json read_json(const fs::path& path) {
  try {
    return json::parse(dfd::io::read_file(path));
  } catch (const json::parse_error& e) {
    throw dfd::ValidationError(path.string() + ": " + e.what());
  }
}

dfd::SyntheticSpec load_spec(const std::string& path) {
  return path.empty() ? dfd::SyntheticSpec{} : dfd::SyntheticSpec::from_json(read_json(path));
}

dfd::TrainConfig load_config(const std::string& path) {
  return path.empty() ? dfd::TrainConfig{} : dfd::TrainConfig::from_json(read_json(path));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual-stream feature decorrelation: data generation, training and evaluation"};
  app.require_subcommand(1);

  std::string spec_path, out_dir;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset (train/val/test directories)");
  gen->add_option("--spec", spec_path, "SyntheticSpec JSON (defaults when omitted)");
  gen->add_option("--out", out_dir, "Output directory")->required();

  std::string config_path, data_dir, train_out = "run";
  bool verbose = false;
  auto* tr = app.add_subcommand("train", "Train a model");
  tr->add_option("--config", config_path, "TrainConfig JSON (defaults when omitted)");
  tr->add_option("--data", data_dir, "Dataset root containing train/ val/ test/")->required();
  tr->add_option("--out", train_out, "Run directory")->capture_default_str();
  tr->add_flag("--verbose", verbose, "Print per-epoch progress");

  std::string ckpt, eval_data, split = "test", eval_out;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
  ev->add_option("--checkpoint", ckpt, "Checkpoint directory")->required();
  ev->add_option("--data", eval_data, "Dataset root")->required();
  ev->add_option("--split", split, "train, val or test")->capture_default_str();
  ev->add_option("--out", eval_out, "Write metrics.json here instead of stdout");

  std::string ab_spec, ab_config, ab_out = "ablation";
  std::size_t seeds = 5;
  std::uint64_t first_seed = 0;
  auto* ab = app.add_subcommand("ablate", "Full / w/o GCE / w/o MI / single-stream comparison over seeds");
  ab->add_option("--spec", ab_spec, "SyntheticSpec JSON");
  ab->add_option("--config", ab_config, "Base TrainConfig JSON");
  ab->add_option("--seeds", seeds, "Number of seeds")->capture_default_str();
  ab->add_option("--first-seed", first_seed, "First seed")->capture_default_str();
  ab->add_option("--out", ab_out, "Output directory")->capture_default_str();
  ab->add_flag("--verbose", verbose, "Print per-run progress");

  std::string ex_ckpt, ex_data, ex_split = "test", ex_out;
  auto* ex = app.add_subcommand("export-embeddings", "Write H_c/H_b and their 2-D projections");
  ex->add_option("--checkpoint", ex_ckpt, "Checkpoint directory")->required();
  ex->add_option("--data", ex_data, "Dataset root")->required();
  ex->add_option("--split", ex_split, "train, val or test")->capture_default_str();
  ex->add_option("--out", ex_out, "Export directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const dfd::SyntheticSpec spec = load_spec(spec_path);
      dfd::write_splits(dfd::generate(spec), out_dir);
      std::cout << "wrote " << out_dir << "/{train,val,test}\n";
    } else if (*tr) {
      dfd::TrainConfig cfg = load_config(config_path);
      cfg.verbose = cfg.verbose || verbose;
      const dfd::RunArtifacts art = dfd::train(cfg, data_dir, train_out);
      std::cout << "best epoch " << art.best_epoch << ", val AUC-ROC " << art.best_val_auc_roc << "\n"
                << "checkpoint: " << art.checkpoint.string() << "\nmetrics: " << art.metrics.string() << "\n";
    } else if (*ev) {
      const auto report = dfd::evaluate_checkpoint(ckpt, eval_data, dfd::split_from_string(split));
      if (eval_out.empty()) {
        std::cout << report.dump();
      } else {
        fs::create_directories(eval_out);
        dfd::io::write_file_atomic(fs::path(eval_out) / "metrics.json", report.dump());
      }
    } else if (*ab) {
      dfd::AblationOptions opts;
      opts.spec = load_spec(ab_spec);
      opts.base = load_config(ab_config);
      opts.base.verbose = opts.base.verbose || verbose;
      for (std::size_t s = 0; s < seeds; ++s) opts.seeds.push_back(first_seed + s);
      opts.out_dir = ab_out;
      const dfd::AblationResult result = dfd::run_ablation(opts);
      std::cout << result.text();
    } else if (*ex) {
      dfd::evaluate_checkpoint(ex_ckpt, ex_data, dfd::split_from_string(ex_split), fs::path(ex_out));
      std::cout << "wrote embeddings to " << ex_out << "\n";
    }
  } catch (const dfd::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
