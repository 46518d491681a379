#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <random>
#include <string>
#include <sys/wait.h>

#include "dfd/error.hpp"
#include "dfd/io.hpp"
#include "dfd/metrics.hpp"
#include "dfd/probe.hpp"
#include "dfd/projection.hpp"
#include "dfd/report.hpp"
#include "unit/helpers.hpp"

using namespace dfd;
namespace fs = std::filesystem;

namespace {

double pairs_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  double credit = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1.0;
      credit += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  return credit / pairs;
}

// Rank of every item under (score desc, index asc), counted directly.
double ap_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  const std::size_t n = s.size();
  std::vector<std::size_t> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    rank[i] = 1;
    for (std::size_t j = 0; j < n; ++j)
      if (s[j] > s[i] || (s[j] == s[i] && j < i)) ++rank[i];
  }
  double sum = 0.0;
  int positives = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] != 1) continue;
    ++positives;
    int hits = 0;
    for (std::size_t j = 0; j < n; ++j) hits += y[j] == 1 && rank[j] <= rank[i];
    sum += static_cast<double>(hits) / static_cast<double>(rank[i]);
  }
  return sum / positives;
}

struct Instance {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Scores drawn from few levels when tie_heavy, so ties are common.
Instance random_instance(Rng& rng, std::size_t max_n, bool tie_heavy) {
  std::uniform_int_distribution<std::size_t> size(2, max_n);
  const std::size_t n = size(rng);
  std::uniform_int_distribution<int> level(0, 4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Instance in;
  for (std::size_t i = 0; i < n; ++i) {
    in.scores.push_back(tie_heavy ? level(rng) / 4.0 : u(rng));
    in.labels.push_back(u(rng) < 0.4 ? 1 : 0);
  }
  in.labels[0] = 1;
  in.labels[1] = 0;
  return in;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(DFD_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("AUC-ROC examples") {
  const std::vector<double> s{0.9, 0.8, 0.3};
  const std::vector<int> y{1, 0, 1};
  CHECK(auc_roc(s, y) == 0.5);
  const std::vector<double> perfect{0.9, 0.7, 0.2, 0.1};
  const std::vector<int> py{1, 1, 0, 0};
  CHECK(auc_roc(perfect, py) == 1.0);
  const std::vector<double> flat(5, 0.3);
  const std::vector<int> fy{1, 0, 0, 1, 0};
  CHECK(auc_roc(flat, fy) == 0.5);
  const std::vector<int> single{1, 1, 1};
  CHECK_THROWS_AS(auc_roc(s, single), ValidationError);
}

TEST_CASE("AUC-PRC examples") {
  const std::vector<double> s{0.9, 0.1};
  CHECK(auc_prc(s, std::vector<int>{1, 0}) == 1.0);
  CHECK(auc_prc(s, std::vector<int>{0, 1}) == 0.5);
  // Equal scores fall back to index order.
  const std::vector<double> tie{0.5, 0.5};
  CHECK(auc_prc(tie, std::vector<int>{0, 1}) == 0.5);
  CHECK(auc_prc(tie, std::vector<int>{1, 0}) == 1.0);
  CHECK_THROWS_AS(auc_prc(s, std::vector<int>{0, 0}), ValidationError);
}

TEST_CASE("metrics match brute-force oracles") {
  Rng rng(1);
  for (int i = 0; i < 200; ++i) {
    const Instance in = random_instance(rng, 200, i % 2 == 0);
    CHECK(std::abs(auc_roc(in.scores, in.labels) - pairs_oracle(in.scores, in.labels)) <= 1e-12);
    CHECK(std::abs(auc_prc(in.scores, in.labels) - ap_oracle(in.scores, in.labels)) <= 1e-12);
  }
  for (int i = 0; i < 50; ++i) {
    const Instance in = random_instance(rng, 12, i % 2 == 1);
    CHECK(std::abs(auc_prc(in.scores, in.labels) - ap_oracle(in.scores, in.labels)) <= 1e-12);
  }
}

TEST_CASE("accuracy") {
  const std::vector<int> y{0, 1, 1, 0};
  CHECK(accuracy(std::vector<int>{0, 1, 1, 0}, y) == 1.0);
  CHECK(accuracy(std::vector<int>{1, 0, 0, 1}, y) == 0.0);
  CHECK(accuracy(std::vector<int>{0, 1, 1, 1}, y) == 0.75);
}

TEST_CASE("multiclass AUC averages one-vs-rest") {
  const Matrix probs = Matrix::from_rows({{0.7, 0.2, 0.1}, {0.1, 0.6, 0.3}, {0.2, 0.2, 0.6}, {0.5, 0.4, 0.1}});
  const std::vector<int> y{0, 1, 2, 1};
  double expect = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> s;
    std::vector<int> bin;
    for (std::size_t i = 0; i < 4; ++i) {
      s.push_back(probs(i, k));
      bin.push_back(y[i] == static_cast<int>(k));
    }
    expect += pairs_oracle(s, bin) / 3.0;
  }
  CHECK(std::abs(auc_roc_multiclass(probs, y) - expect) <= 1e-12);
  const Matrix binary = Matrix::from_rows({{0.1, 0.9}, {0.8, 0.2}, {0.3, 0.7}});
  const std::vector<int> by{1, 0, 0};
  CHECK(auc_roc_multiclass(binary, by) == auc_roc(std::vector<double>{0.9, 0.2, 0.7}, by));
}

TEST_CASE("linear probe") {
  SUBCASE("one-hot rows of the attribute are decoded perfectly") {
    std::vector<int> attr(600);
    Matrix h(600, 3);
    for (std::size_t i = 0; i < 600; ++i) {
      attr[i] = static_cast<int>(i % 3);
      h(i, i % 3) = 1.0;
    }
    CHECK(linear_probe(h, attr, 3) == 1.0);
  }
  SUBCASE("noise is at chance and the probe is deterministic") {
    const Matrix h = testing::random_matrix(2000, 8, 5);
    std::vector<int> attr(2000);
    Rng rng(6);
    for (int& a : attr) a = static_cast<int>(rng() % 2);
    const double acc = linear_probe(h, attr, 2, {.seed = 3});
    CHECK(acc >= 0.45);
    CHECK(acc <= 0.55);
    CHECK(linear_probe(h, attr, 2, {.seed = 3}) == acc);
  }
  SUBCASE("bad inputs") {
    const Matrix h = testing::random_matrix(10, 2, 1);
    CHECK_THROWS_AS(linear_probe(h, std::vector<int>(9, 0), 2), ValidationError);
    CHECK_THROWS_AS(linear_probe(h, std::vector<int>(10, 4), 2), ValidationError);
  }
}

TEST_CASE("2-D projection") {
  SUBCASE("orthonormal components and sign rule") {
    const Matrix h = testing::random_matrix(100, 6, 7);
    const Projection p = project_2d(h);
    CHECK_FALSE(p.degenerate);
    for (std::size_t a = 0; a < 2; ++a)
      for (std::size_t b = 0; b < 2; ++b) {
        double dot = 0.0;
        for (std::size_t j = 0; j < 6; ++j) dot += p.components(j, a) * p.components(j, b);
        CHECK(std::abs(dot - (a == b ? 1.0 : 0.0)) <= 1e-10);
      }
    for (std::size_t c = 0; c < 2; ++c) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < 6; ++j)
        if (std::abs(p.components(j, c)) > std::abs(p.components(arg, c))) arg = j;
      CHECK(p.components(arg, c) > 0.0);
    }
    double var0 = 0.0, var1 = 0.0;
    for (std::size_t i = 0; i < 100; ++i) {
      var0 += p.coords(i, 0) * p.coords(i, 0);
      var1 += p.coords(i, 1) * p.coords(i, 1);
    }
    CHECK(var0 >= var1);
  }
  SUBCASE("2-D input with separated variances is the centred input up to sign") {
    Matrix h(4, 2);
    const double xs[] = {-2.0, -1.0, 1.0, 2.0};
    const double ys[] = {0.5, -0.5, -0.5, 0.5};
    for (std::size_t i = 0; i < 4; ++i) {
      h(i, 0) = xs[i] + 10.0;
      h(i, 1) = ys[i] - 3.0;
    }
    const Projection p = project_2d(h);
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(std::abs(std::abs(p.coords(i, 0)) - std::abs(xs[i])) <= 1e-12);
      CHECK(std::abs(std::abs(p.coords(i, 1)) - std::abs(ys[i])) <= 1e-12);
    }
  }
  SUBCASE("rank one gives a zero second coordinate") {
    Matrix h(50, 3);
    for (std::size_t i = 0; i < 50; ++i)
      for (std::size_t j = 0; j < 3; ++j) h(i, j) = (j + 1.0) * static_cast<double>(i);
    const Projection p = project_2d(h);
    CHECK(p.degenerate);
    for (std::size_t i = 0; i < 50; ++i) CHECK(p.coords(i, 1) == 0.0);
  }
  SUBCASE("constant input gives zeros and the flag") {
    const Projection p = project_2d(Matrix(10, 4, 2.5));
    CHECK(p.degenerate);
    CHECK(p.coords == Matrix(10, 2));
  }
  CHECK_THROWS_AS(project_2d(Matrix(1, 3)), ValidationError);
}

TEST_CASE("metrics report formatting") {
  CHECK(round_significant(0.123456789012345) == 0.123456789);
  CHECK(round_significant(123456.7890123) == 123456.789);
  CHECK(round_significant(0.0) == 0.0);

  MetricsReport r;
  r.seed = 4;
  r.config = nlohmann::json{{"zeta", 1}, {"alpha", 1.0 / 3.0}};
  SplitMetrics m;
  m.auc_roc = 2.0 / 3.0;
  m.class_counts = {3, 5};
  m.probe_acc_hc = 0.5;
  r.splits["test"] = m;
  const std::string text = r.dump();
  CHECK(text == r.dump());
  CHECK(text.find("\"alpha\"") < text.find("\"zeta\""));
  CHECK(text.find("0.6666666667") != std::string::npos);
  CHECK(text.find("0.66666666667") == std::string::npos);
  const auto j = nlohmann::json::parse(text);
  CHECK(j.at("schema") == "dfd/1");
  CHECK(j.at("splits").at("test").at("probe_acc_Hb").is_null());
}

TEST_CASE("CLI exit codes") {
  testing::TempDir dir("cli");
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("no-such-command") == 1);
  CHECK(run_cli("eval --checkpoint " + (dir / "missing").string() + " --data " + dir.path().string()) == 1);

  io::write_file_atomic(dir / "spec.json", testing::small_spec().to_json().dump());
  CHECK(run_cli("gen --spec " + (dir / "spec.json").string() + " --out " + (dir / "data").string()) == 0);
  CHECK(fs::exists(dir / "data" / "test"));
  io::write_file_atomic(dir / "cfg.json", R"({"epochs_total": 2, "layers": 1, "hidden_dim": 4, "edge_dim": 4})");
  CHECK(run_cli("train --config " + (dir / "cfg.json").string() + " --data " + (dir / "data").string() + " --out " +
                (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "metrics.json"));
  CHECK(run_cli("eval --checkpoint " + (dir / "run" / "checkpoint").string() + " --data " +
                (dir / "data").string() + " --split test --out " + (dir / "eval").string()) == 0);
  CHECK(fs::exists(dir / "eval" / "metrics.json"));
  CHECK(run_cli("export-embeddings --checkpoint " + (dir / "run" / "checkpoint").string() + " --data " +
                (dir / "data").string() + " --out " + (dir / "emb").string()) == 0);
  CHECK(fs::exists(dir / "emb" / "proj_b.csv"));

  io::write_file_atomic(dir / "bad.json", R"({"epochs_total": 2, "g": 3.0})");
  CHECK(run_cli("train --config " + (dir / "bad.json").string() + " --data " + (dir / "data").string()) == 1);
  io::write_file_atomic(dir / "broken.json", "{");
  CHECK(run_cli("gen --spec " + (dir / "broken.json").string() + " --out " + (dir / "x").string()) == 1);
}
