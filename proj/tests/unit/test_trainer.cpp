#include <doctest.h>

#include <cmath>

#include "dfd/error.hpp"
#include "dfd/io.hpp"
#include "dfd/trainer.hpp"
#include "unit/helpers.hpp"

using namespace dfd;
namespace fs = std::filesystem;

namespace {

TrainConfig smoke_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.epochs_total = 5;
  c.epochs_stage1 = 2;
  c.batch_size = 64;
  c.layers = 2;
  c.edge_dim = 8;
  c.hidden_dim = 8;
  c.stats_hidden = 16;
  c.seed = seed;
  return c;
}

Datasets small_data(std::uint64_t seed = 3) {
  auto s = generate(testing::small_spec(seed));
  return Datasets{std::move(s.train), std::move(s.val), std::move(s.test)};
}

std::size_t count_lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("total loss by stage") {
  CHECK(total_loss(0.7, 5.0, 1) == 0.7);
  CHECK(total_loss(0.7, 0.3, 2) == 1.0);
  CHECK(total_loss(0.7, 0.3, 2, true) == 0.7);
  CHECK_THROWS_AS(total_loss(0.7, 0.3, 3), std::invalid_argument);
}

TEST_CASE("stage-1 length") {
  TrainConfig c;
  CHECK(c.stage1_epochs() == 15);
  c.epochs_total = 10;
  CHECK(c.stage1_epochs() == 2);
  c.epochs_total = 3;
  CHECK(c.stage1_epochs() == 0);
  c.epochs_stage1 = 3;
  CHECK(c.stage1_epochs() == 3);
}

TEST_CASE("config validation and JSON") {
  TrainConfig c = smoke_config(7);
  c.stats_learning_rate = 0.01;
  c.routing = GradientRouting::off;
  const TrainConfig back = TrainConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());

  auto bad = [](auto edit) {
    TrainConfig t;
    edit(t);
    CHECK_THROWS_AS(t.validate(), ValidationError);
  };
  bad([](TrainConfig& t) { t.g = 0.0; });
  bad([](TrainConfig& t) { t.g = 1.5; });
  bad([](TrainConfig& t) { t.epochs_total = 0; });
  bad([](TrainConfig& t) { t.epochs_stage1 = 200; });
  bad([](TrainConfig& t) { t.batch_size = 0; });
  bad([](TrainConfig& t) { t.negative_sampler = "random"; });
  bad([](TrainConfig& t) { t.optimizer = "sgd"; });
  bad([](TrainConfig& t) { t.learning_rate = -1.0; });

  nlohmann::json j = c.to_json();
  j["epochs"] = 3;
  CHECK_THROWS_AS(TrainConfig::from_json(j), ValidationError);
  j = c.to_json();
  j["routing"] = "sometimes";
  CHECK_THROWS_AS(TrainConfig::from_json(j), ValidationError);
}

TEST_CASE("smoke run follows the two-stage schedule") {
  const Datasets data = small_data();
  testing::TempDir dir("smoke");
  const RunArtifacts art = train(smoke_config(), data, dir.path());

  REQUIRE(art.epochs.size() == 5);
  for (const EpochLog& e : art.epochs) {
    CHECK(e.stage == (e.epoch <= 2 ? 1 : 2));
    if (e.stage == 1) {
      CHECK(e.mi == 0.0);
      CHECK(e.mi_skips == 0);
    } else {
      CHECK(e.mi >= 0.0);
    }
    CHECK(std::abs(e.total - (e.ce + e.gce + e.mi)) <= 1e-9);
    CHECK(e.val_auc_roc >= 0.0);
    CHECK(e.val_auc_roc <= 1.0);
  }
  REQUIRE_FALSE(art.stats_at_init.empty());
  CHECK(art.stats_at_stage2 == art.stats_at_init);

  for (const fs::path& p : {art.loss_log, art.metrics, art.config, art.run_stats}) CHECK(fs::exists(p));
  CHECK(fs::exists(art.checkpoint / "manifest.json"));
  const std::string log = io::read_file(art.loss_log);
  CHECK(log.rfind(loss_log_header(), 0) == 0);
  CHECK(count_lines(log) == 6);
  for (const EpochLog& e : art.epochs) CHECK(log.find(format_loss_row(e)) != std::string::npos);

  const auto metrics = nlohmann::json::parse(io::read_file(art.metrics));
  CHECK(metrics.at("schema") == kMetricsSchema);
  CHECK(metrics.at("splits").contains("test"));
  CHECK(metrics.at("splits").at("test").contains("probe_acc_Hb"));
  CHECK(art.best_epoch >= 1);
  CHECK(art.best_val_auc_roc == art.epochs[art.best_epoch - 1].val_auc_roc);
}

TEST_CASE("identical configs give byte-identical artifacts; seeds are isolated") {
  const Datasets data = small_data();
  testing::TempDir a("det_a"), b("det_b"), c("det_c");
  train(smoke_config(), data, a.path());
  train(smoke_config(), data, b.path());
  train(smoke_config(1), data, c.path());
  for (const char* f : {"loss_log.csv", "metrics.json", "config.json", "checkpoint/manifest.json"})
    CHECK_MESSAGE(io::read_file(a / f) == io::read_file(b / f), f);
  CHECK(io::read_file(a / "loss_log.csv") != io::read_file(c / "loss_log.csv"));

  // Changing only the batch order changes training but not the initial model.
  TrainConfig shuffled = smoke_config();
  shuffled.shuffle_seed = 99;
  shuffled.epochs_total = 1;
  shuffled.epochs_stage1 = 1;
  TrainConfig base = shuffled;
  base.shuffle_seed.reset();
  testing::TempDir d("det_d"), e("det_e");
  const auto ra = train(base, data, d.path());
  const auto rb = train(shuffled, data, e.path());
  CHECK(ra.stats_at_init == rb.stats_at_init);
  CHECK(ra.epochs[0].ce != rb.epochs[0].ce);
}

TEST_CASE("checkpoint evaluation reproduces the selected epoch") {
  testing::TempDir dir("eval");
  write_splits(generate(testing::small_spec()), dir / "data");
  const RunArtifacts art = train(smoke_config(), dir / "data", dir / "run");

  const MetricsReport val = evaluate_checkpoint(art.checkpoint, dir / "data", Split::val);
  CHECK(std::abs(val.splits.at("val").auc_roc - art.best_val_auc_roc) <= 1e-12);

  const MetricsReport test = evaluate_checkpoint(art.checkpoint, dir / "data", Split::test, dir / "export");
  CHECK(test.splits.at("test").auc_roc == art.report.splits.at("test").auc_roc);
  CHECK(test.splits.at("test").probe_acc_hb == art.report.splits.at("test").probe_acc_hb);
  const std::size_t n_test = testing::small_spec().num_test;
  for (const char* f : {"embeddings_c.csv", "embeddings_b.csv", "proj_c.csv", "proj_b.csv"})
    CHECK_MESSAGE(count_lines(io::read_file(dir / "export" / f)) == n_test, f);

  // Test evaluation never touches the other splits.
  fs::remove_all(dir / "data" / "train");
  fs::remove_all(dir / "data" / "val");
  const MetricsReport again = evaluate_checkpoint(art.checkpoint, dir / "data", Split::test);
  CHECK(again.dump() == test.dump());

  CHECK_THROWS_AS(evaluate_checkpoint(dir / "missing", dir / "data", Split::test), ValidationError);
}

TEST_CASE("variants without an MI term keep it at zero") {
  const Datasets data = small_data();
  SUBCASE("disable_mi") {
    TrainConfig c = smoke_config();
    c.disable_mi = true;
    testing::TempDir dir("nomi");
    const auto art = train(c, data, dir.path());
    CHECK(art.stats_at_init.empty());
    for (const EpochLog& e : art.epochs) {
      CHECK(e.mi == 0.0);
      CHECK(e.total == doctest::Approx(e.ce + e.gce).epsilon(1e-12));
    }
  }
  SUBCASE("single stream") {
    TrainConfig c = smoke_config();
    c.single_stream = true;
    testing::TempDir dir("single");
    const auto art = train(c, data, dir.path());
    for (const EpochLog& e : art.epochs) {
      CHECK(e.gce == 0.0);
      CHECK(e.mi == 0.0);
      CHECK(e.total == e.ce);
    }
    CHECK_FALSE(art.report.splits.at("test").probe_acc_hb.has_value());
    testing::TempDir ex("single_export");
    PatientRepresentations reps;
    reps.causal = testing::random_matrix(4, 3, 1);
    export_embeddings(reps, ex.path());
    CHECK(fs::exists(ex / "embeddings_c.csv"));
    CHECK_FALSE(fs::exists(ex / "embeddings_b.csv"));
  }
}

TEST_CASE("dataset directories must agree") {
  testing::TempDir dir("mismatch");
  write_splits(generate(testing::small_spec()), dir.path());
  auto other = testing::small_spec();
  other.modality_dims = {5, 4, 7};
  write_dataset(generate(other).test, dir / "test");
  CHECK_THROWS_AS(read_datasets(dir.path()), ValidationError);
}
