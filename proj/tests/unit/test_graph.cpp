#include <doctest.h>

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "dfd/error.hpp"
#include "dfd/graph.hpp"
#include "unit/helpers.hpp"

using namespace dfd;

namespace {

double silu(double x) { return x / (1.0 + std::exp(-x)); }

ModalityEncoderBank make_bank(ParameterSet& ps, std::vector<std::size_t> dims, std::size_t edge_dim,
                              std::uint64_t seed = 1, std::size_t depth = 1) {
  Rng rng(seed);
  return ModalityEncoderBank(ps, dims, edge_dim, depth, rng);
}

}  // namespace

TEST_CASE("edge counts and degrees") {
  SUBCASE("full 2x2 mask") {
    const auto ds = testing::tiny_dataset(2, {3, 3}, {1, 1, 1, 1});
    const auto g = build_graph(ds);
    CHECK(g.num_edges() == 4);
  }
  SUBCASE("[[1,0],[1,1]]") {
    const auto ds = testing::tiny_dataset(2, {3, 3}, {1, 0, 1, 1});
    const auto g = build_graph(ds);
    CHECK(g.num_edges() == 3);
    CHECK(g.patient_degree(0) == 1);
    CHECK(g.patient_degree(1) == 2);
    CHECK(g.modality_degree(0) == 2);
    CHECK(g.modality_degree(1) == 1);
    CHECK(g.find_edge(0, 1) == std::nullopt);
    CHECK(g.find_edge(1, 1).has_value());
  }
}

TEST_CASE("edges exist exactly where the mask is set, modality-major") {
  const SyntheticSpec spec = testing::small_spec();
  const auto ds = generate(spec).train;
  const auto g = build_graph(ds);
  CHECK(g.num_edges() == ds.observed_count());
  std::size_t prev_mod = 0, prev_pat = 0;
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    const Edge ed = g.edges()[e];
    CHECK(ds.observed(ed.patient, ed.modality));
    CHECK(ed.modality < g.num_modalities());
    if (e > 0) CHECK((ed.modality > prev_mod || (ed.modality == prev_mod && ed.patient > prev_pat)));
    CHECK(e >= g.modality_edge_begin(ed.modality));
    CHECK(e < g.modality_edge_end(ed.modality));
    prev_mod = ed.modality;
    prev_pat = ed.patient;
  }
  // Incidence lists partition the edge set from both sides.
  std::vector<int> seen_p(g.num_edges(), 0), seen_m(g.num_edges(), 0);
  const auto ps = g.patient_segments();
  for (std::size_t p = 0; p < ps.count(); ++p)
    for (std::size_t k = ps.offsets[p]; k < ps.offsets[p + 1]; ++k) {
      CHECK(g.edges()[ps.indices[k]].patient == p);
      ++seen_p[ps.indices[k]];
    }
  const auto ms = g.modality_segments();
  for (std::size_t m = 0; m < ms.count(); ++m)
    for (std::size_t k = ms.offsets[m]; k < ms.offsets[m + 1]; ++k) {
      CHECK(g.edges()[ms.indices[k]].modality == m);
      ++seen_m[ms.indices[k]];
    }
  for (std::size_t e = 0; e < g.num_edges(); ++e) {
    CHECK(seen_p[e] == 1);
    CHECK(seen_m[e] == 1);
  }
}

TEST_CASE("node initialisation") {
  const auto ds = testing::tiny_dataset(4, {2, 2, 2}, std::vector<std::uint8_t>(12, 1));
  const auto g = build_graph(ds);
  CHECK(g.modality_init() == Matrix::identity(3));
  CHECK(g.patient_init() == Matrix(4, 3, 1.0));
}

TEST_CASE("subgraphs keep every modality node and map local to dataset rows") {
  const auto ds = testing::tiny_dataset(5, {2, 2}, {1, 0, 0, 1, 1, 1, 1, 0, 0, 1});
  const std::vector<std::size_t> pick{3, 1};
  const auto g = build_subgraph(ds, pick);
  CHECK(g.num_patients() == 2);
  CHECK(g.num_modalities() == 2);
  CHECK(g.patient_ids()[0] == 3);
  CHECK(g.num_edges() == 2);
  CHECK(g.modality_degree(0) == 1);
  CHECK(g.modality_degree(1) == 1);
  CHECK(g.find_edge(0, 0).has_value());  // dataset row 3 observes modality 0
  CHECK(g.find_edge(1, 1).has_value());  // dataset row 1 observes modality 1
  const std::vector<std::size_t> bad{9};
  CHECK_THROWS_AS(build_subgraph(ds, bad), std::out_of_range);
}

TEST_CASE("identity encoder gives the activation of the raw features") {
  auto ds = testing::tiny_dataset(3, {4, 4}, {1, 1, 0, 1, 1, 0});
  ParameterSet ps;
  const auto bank = make_bank(ps, {4, 4}, 4);
  for (std::size_t j = 0; j < 2; ++j) {
    bank.encoder(j).layers[0].weight->value = Matrix::identity(4);
    bank.encoder(j).layers[0].bias->value.fill(0.0);
  }
  const auto g = build_graph(ds);
  const auto enc = encode_edges(bank, g, ds);
  for (const Edge& e : g.edges()) {
    const auto row = enc.at(e.patient, e.modality);
    REQUIRE(row.size() == 4);
    for (std::size_t k = 0; k < 4; ++k) CHECK(testing::rel_error(row[k], silu(ds.features[e.modality](e.patient, k)), 1e-300) <= 1e-15);
  }
}

TEST_CASE("zero input maps to the bias image") {
  auto ds = testing::tiny_dataset(2, {3, 5}, {1, 1, 1, 1});
  for (auto& f : ds.features) f.fill(0.0);
  ParameterSet ps;
  const auto bank = make_bank(ps, {3, 5}, 6);
  for (std::size_t j = 0; j < 2; ++j) bank.encoder(j).layers[0].bias->value = testing::random_matrix(1, 6, 40 + j);
  const auto g = build_graph(ds);
  const auto enc = encode_edges(bank, g, ds);
  for (const Edge& e : g.edges()) {
    const Matrix& b = bank.encoder(e.modality).layers[0].bias->value;
    const auto row = enc.at(e.patient, e.modality);
    for (std::size_t k = 0; k < 6; ++k) CHECK(testing::rel_error(row[k], silu(b(0, k)), 1e-300) <= 1e-15);
  }
}

TEST_CASE("every edge feature has the shared width; masked pairs are errors") {
  const auto ds = testing::tiny_dataset(3, {2, 7, 1}, {1, 0, 1, 0, 1, 1, 1, 1, 0});
  ParameterSet ps;
  const auto bank = make_bank(ps, {2, 7, 1}, 5);
  const auto g = build_graph(ds);
  const auto enc = encode_edges(bank, g, ds);
  CHECK(enc.features().rows() == g.num_edges());
  CHECK(enc.features().cols() == 5);
  CHECK_THROWS_AS(enc.at(0, 1), std::out_of_range);
  CHECK_THROWS_AS(enc.at(1, 0), std::out_of_range);
  CHECK_NOTHROW(enc.at(2, 1));
}

TEST_CASE("encoder dimension mismatch is rejected") {
  const auto ds = testing::tiny_dataset(2, {3, 3}, {1, 1, 1, 1});
  ParameterSet ps;
  const auto bank = make_bank(ps, {3, 4}, 5);
  CHECK_THROWS_AS(encode_edges(bank, build_graph(ds), ds), ValidationError);
  ParameterSet ps2;
  const auto short_bank = make_bank(ps2, {3}, 5);
  CHECK_THROWS_AS(encode_edges(short_bank, build_graph(ds), ds), ValidationError);
}

TEST_CASE("encoder j only sees modality j") {
  auto ds = testing::tiny_dataset(3, {2, 2}, {1, 1, 1, 1, 1, 1});
  ParameterSet ps;
  const auto bank = make_bank(ps, {2, 2}, 3);
  const auto g = build_graph(ds);
  const Matrix before = encode_edges(bank, g, ds).features();
  ds.features[1](2, 0) += 1.0;
  const auto after = encode_edges(bank, g, ds);
  for (const Edge& e : g.edges()) {
    const bool touched = e.modality == 1 && e.patient == 2;
    const auto idx = *g.find_edge(e.patient, e.modality);
    bool same = true;
    for (std::size_t k = 0; k < 3; ++k) same = same && before(idx, k) == after.features()(idx, k);
    CHECK(same != touched);
  }
}

TEST_CASE("relabeling patients permutes the graph and nothing else") {
  const auto ds = generate(testing::small_spec(5)).val;
  const std::size_t n = ds.num_patients();
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(9);
  std::shuffle(perm.begin(), perm.end(), rng);

  const auto g = build_graph(ds);
  const auto gp = build_subgraph(ds, perm);
  CHECK(gp.num_edges() == g.num_edges());

  ParameterSet ps;
  const auto bank = make_bank(ps, ds.modality_dims(), 6);
  const auto enc = encode_edges(bank, g, ds);
  const auto encp = encode_edges(bank, gp, ds);
  for (std::size_t local = 0; local < n; ++local) {
    CHECK(gp.patient_degree(local) == g.patient_degree(perm[local]));
    for (std::size_t j = 0; j < ds.num_modalities(); ++j) {
      CHECK(gp.find_edge(local, j).has_value() == g.find_edge(perm[local], j).has_value());
      if (!gp.find_edge(local, j)) continue;
      const auto a = encp.at(local, j);
      const auto b = enc.at(perm[local], j);
      CHECK(std::equal(a.begin(), a.end(), b.begin()));
    }
  }

  // Permuting back: composing perm with its inverse restores the original graph.
  std::vector<std::size_t> inv(n);
  for (std::size_t i = 0; i < n; ++i) inv[perm[i]] = i;
  std::vector<std::size_t> composed(n);
  for (std::size_t i = 0; i < n; ++i) composed[i] = perm[inv[i]];
  const auto g2 = build_subgraph(ds, composed);
  CHECK(std::equal(g2.edges().begin(), g2.edges().end(), g.edges().begin(), g.edges().end()));
}

TEST_CASE("encoder gradients match finite differences") {
  const auto ds = testing::tiny_dataset(4, {3, 2}, {1, 1, 0, 1, 1, 0, 1, 1});
  const auto g = build_graph(ds);
  for (std::size_t depth : {1, 2}) {
    ParameterSet ps;
    const auto bank = make_bank(ps, {3, 2}, 4, 7, depth);
    const auto rep = testing::check_gradients(ps, [&](ad::Tape& t) {
      const ad::Var e = bank.encode(t, g, ds);
      return ad::mean_all(ad::scale_rows(e, t.constant(testing::random_matrix(g.num_edges(), 1, 9))));
    });
    CHECK(rep.max_rel_error <= 1e-4);
  }
}
