#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "dfd/error.hpp"
#include "dfd/mi_estimator.hpp"
#include "unit/helpers.hpp"

using namespace dfd;

namespace {

// Makes ψ ≡ c by zeroing the output weight.
void make_constant(StatsNet& net, double c) {
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    Parameter& p = net.parameters()[i];
    if (p.name == "stats.1.weight") p.value.fill(0.0);
    if (p.name == "stats.1.bias") p.value.fill(c);
  }
}

struct GaussianPairs {
  Matrix x, y;
};

GaussianPairs gaussian_pairs(std::size_t n, double rho, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  GaussianPairs g{Matrix(n, 1), Matrix(n, 1)};
  for (std::size_t i = 0; i < n; ++i) {
    const double a = z(rng), b = z(rng);
    g.x(i, 0) = a;
    g.y(i, 0) = rho * a + std::sqrt(1.0 - rho * rho) * b;
  }
  return g;
}

}  // namespace

TEST_CASE("StatsNet has two layers and its own parameters") {
  Rng rng(1);
  StatsNet net(4, 3, 16, rng);
  CHECK(net.causal_dim() == 4);
  CHECK(net.bias_dim() == 3);
  std::set<std::string> names;
  for (std::size_t i = 0; i < net.parameters().size(); ++i) names.insert(net.parameters()[i].name);
  CHECK(names == std::set<std::string>{"stats.0.weight_causal", "stats.0.weight_bias", "stats.0.bias",
                                        "stats.1.weight", "stats.1.bias"});
}

TEST_CASE("pair scores equal the MLP on the concatenated pair") {
  Rng rng(2);
  StatsNet net(3, 2, 8, rng);
  const Matrix hc = testing::random_matrix(4, 3, 3);
  const Matrix hb = testing::random_matrix(4, 2, 4);
  const std::vector<std::size_t> ci{0, 3, 2}, bi{1, 1, 0};
  ad::Tape t;
  const Matrix s = net.scores(t, t.constant(hc), t.constant(hb), ci, bi, true).value();
  auto param = [&](const char* n) -> const Matrix& { return net.parameters().find(n)->value; };
  for (std::size_t r = 0; r < 3; ++r) {
    double out = param("stats.1.bias")(0, 0);
    for (std::size_t h = 0; h < 8; ++h) {
      double pre = param("stats.0.bias")(0, h);
      for (std::size_t k = 0; k < 3; ++k) pre += hc(ci[r], k) * param("stats.0.weight_causal")(k, h);
      for (std::size_t k = 0; k < 2; ++k) pre += hb(bi[r], k) * param("stats.0.weight_bias")(k, h);
      out += pre / (1.0 + std::exp(-pre)) * param("stats.1.weight")(h, 0);
    }
    CHECK(std::abs(s(r, 0) - out) <= 1e-13);
  }
}

TEST_CASE("constant critic gives a zero bound") {
  Rng rng(3);
  StatsNet net(2, 2, 8, rng);
  for (double c : {0.0, 1.7, -4.2, 29.0}) {
    make_constant(net, c);
    const Matrix hc = testing::random_matrix(6, 2, 5);
    const Matrix hb = testing::random_matrix(6, 2, 6);
    Rng r(7);
    const auto negs = sample_marginal_negatives(6, 3, r);
    CHECK(dv_bound_value(net, hc, hb, negs) == 0.0);
  }
}

TEST_CASE("hand values: joint [1, 2], negatives [0, 0]") {
  ad::Tape t;
  const ad::Var joint = t.constant(Matrix::from_rows({{1.0}, {2.0}}));
  const ad::Var neg = t.constant(Matrix::from_rows({{0.0}, {0.0}}));
  CHECK(ad::donsker_varadhan(joint, neg).value()(0, 0) == 1.5);
}

TEST_CASE("non-finite scores are errors") {
  Rng rng(4);
  StatsNet net(2, 2, 4, rng);
  Matrix hc = testing::random_matrix(3, 2, 1);
  const Matrix hb = testing::random_matrix(3, 2, 2);
  hc(1, 0) = std::numeric_limits<double>::infinity();
  Rng r(1);
  const auto negs = sample_marginal_negatives(3, 2, r);
  CHECK_THROWS_AS(dv_bound_value(net, hc, hb, negs), NumericError);
}

TEST_CASE("different-label sampler") {
  SUBCASE("two rows, one partner each") {
    Rng rng(1);
    const std::vector<int> labels{0, 1};
    const auto negs = sample_negatives(labels, 1, rng);
    REQUIRE(negs);
    CHECK(negs->partners == std::vector<std::size_t>{1, 0});
  }
  SUBCASE("[0, 0, 1] with k = 10 samples with replacement") {
    Rng rng(2);
    const std::vector<int> labels{0, 0, 1};
    const auto negs = sample_negatives(labels, 10, rng);
    REQUIRE(negs);
    CHECK(negs->partners.size() == 30);
    std::set<std::size_t> seen;
    for (std::size_t t = 0; t < 10; ++t) {
      const std::size_t p = negs->partners[2 * 10 + t];
      CHECK(p <= 1);
      seen.insert(p);
    }
    CHECK(seen.size() == 2);
    for (std::size_t t = 0; t < 20; ++t) CHECK(negs->partners[t] == 2);
  }
  SUBCASE("without replacement when enough candidates exist") {
    Rng rng(3);
    std::vector<int> labels(40);
    for (std::size_t i = 0; i < 40; ++i) labels[i] = static_cast<int>(i % 3);
    const auto negs = sample_negatives(labels, 10, rng);
    REQUIRE(negs);
    const auto anchors = negs->anchors();
    for (std::size_t i = 0; i < 40; ++i) {
      std::set<std::size_t> distinct;
      for (std::size_t t = 0; t < 10; ++t) {
        const std::size_t p = negs->partners[i * 10 + t];
        CHECK(labels[p] != labels[i]);
        CHECK(anchors[i * 10 + t] == i);
        distinct.insert(p);
      }
      CHECK(distinct.size() == 10);
    }
  }
  SUBCASE("single class signals no negatives") {
    Rng rng(4);
    const std::vector<int> labels{1, 1, 1};
    CHECK_FALSE(sample_negatives(labels, 10, rng).has_value());
  }
  SUBCASE("deterministic given the generator state") {
    const std::vector<int> labels{0, 1, 1, 0, 2, 2, 0};
    Rng a(9), b(9);
    CHECK(sample_negatives(labels, 4, a)->partners == sample_negatives(labels, 4, b)->partners);
  }
}

TEST_CASE("marginal sampler never pairs a row with itself") {
  Rng rng(5);
  const auto negs = sample_marginal_negatives(5, 20, rng);
  const auto anchors = negs.anchors();
  for (std::size_t i = 0; i < negs.partners.size(); ++i) {
    CHECK(negs.partners[i] != anchors[i]);
    CHECK(negs.partners[i] < 5);
  }
}

TEST_CASE("bound gradients match finite differences") {
  Rng rng(6);
  StatsNet net(3, 2, 6, rng);
  ParameterSet inputs;
  auto& hc = inputs.add("hc", 5, 3);
  auto& hb = inputs.add("hb", 5, 2);
  hc.value = testing::random_matrix(5, 3, 1);
  hb.value = testing::random_matrix(5, 2, 2);
  const std::vector<int> labels{0, 1, 0, 1, 1};
  Rng r(3);
  const auto negs = *sample_negatives(labels, 2, r);

  const auto rep_net = testing::check_gradients(net.parameters(), [&](ad::Tape& t) {
    return dv_bound(t, net, t.constant(hc.value), t.constant(hb.value), negs, false);
  });
  CHECK(rep_net.max_rel_error <= 1e-4);
  const auto rep_in = testing::check_gradients(inputs, [&](ad::Tape& t) {
    return dv_bound(t, net, t.parameter(hc), t.parameter(hb), negs, true);
  });
  CHECK(rep_in.max_rel_error <= 1e-4);
}

TEST_CASE("adversarial steps raise the bound on correlated pairs") {
  const auto g = gaussian_pairs(256, 0.8, 11);
  Rng rng(12);
  StatsNet net(1, 1, 32, rng);
  Adam adam(net.parameters(), AdamOptions{1e-3});
  Rng r(13);
  const auto negs = sample_marginal_negatives(256, 10, r);
  std::vector<double> trace;
  for (int s = 0; s < 500; ++s) {
    ad::Tape t;
    const ad::Var hc = t.constant(g.x), hb = t.constant(g.y);
    trace.push_back(mi_adversarial_step(net, adam, hc, hb, negs, 1).value()(0, 0));
  }
  // Means over consecutive 50-step windows never decrease.
  double prev = -std::numeric_limits<double>::infinity();
  for (std::size_t w = 0; w + 50 <= trace.size(); w += 50) {
    double mean = 0.0;
    for (std::size_t i = w; i < w + 50; ++i) mean += trace[i] / 50.0;
    CHECK(mean >= prev);
    prev = mean;
  }
  CHECK(trace.back() > trace.front() + 0.1);
}

TEST_CASE("the frozen bound only sends gradients to the representations") {
  Rng rng(14);
  StatsNet net(2, 2, 8, rng);
  Adam adam(net.parameters());
  ParameterSet model;
  auto& hc = model.add("hc", 6, 2);
  auto& hb = model.add("hb", 6, 2);
  hc.value = testing::random_matrix(6, 2, 1);
  hb.value = testing::random_matrix(6, 2, 2);
  model.zero_grad();
  const auto before = net.parameters().snapshot();
  Rng r(15);
  const auto negs = sample_marginal_negatives(6, 3, r);
  ad::Tape t;
  const ad::Var l = mi_adversarial_step(net, adam, t.parameter(hc), t.parameter(hb), negs, 3);
  const auto after_ascent = net.parameters().snapshot();
  CHECK(after_ascent != before);
  CHECK(adam.steps() == 3);
  t.backward(l);
  for (std::size_t i = 0; i < net.parameters().size(); ++i) {
    CHECK(net.parameters()[i].grad == Matrix(net.parameters()[i].value.rows(), net.parameters()[i].value.cols()));
    CHECK(net.parameters()[i].value == after_ascent[i]);
  }
  CHECK(hc.grad != Matrix(6, 2));
  CHECK(hb.grad != Matrix(6, 2));
  CHECK(l.value()(0, 0) == dv_bound_value(net, hc.value, hb.value, negs));
}

TEST_CASE("estimate_mi on small Gaussian samples") {
  MiEstimateOptions opts;
  opts.steps = 600;
  opts.hidden = 32;
  const auto dep = gaussian_pairs(2000, 0.9, 21);
  const auto ind = gaussian_pairs(2000, 0.0, 22);
  const double truth = -0.5 * std::log(1.0 - 0.81);
  const auto a = estimate_mi(dep.x, dep.y, opts);
  const auto b = estimate_mi(ind.x, ind.y, opts);
  CHECK(a.trace.size() == 600);
  CHECK(a.bound > 0.4);
  CHECK(a.bound < truth + 0.2);
  CHECK(std::abs(b.bound) < 0.1);
  CHECK(estimate_mi(dep.x, dep.y, opts).bound == a.bound);
}
