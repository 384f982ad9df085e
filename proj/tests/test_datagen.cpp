#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "stc/datagen.hpp"
#include "stc/io.hpp"
#include "stc/rng.hpp"
#include "stc/training.hpp"
#include "support/query_oracle.hpp"

using namespace stc;
using nlohmann::json;

TEST_CASE("lowrank generator") {
  SUBCASE("noiseless rank-1 output has vanishing 2x2 minors") {
    DenseTensor t = generate_lowrank(Shape({4, 4, 4}), 1, 0.0, 9);
    // every mode-0 slice is an outer product; check minors of slice 0
    for (int64_t i = 0; i < 3; ++i)
      for (int64_t j = 0; j < 3; ++j) {
        const std::vector<int64_t> a{0, i, j}, b{0, i, j + 1}, c{0, i + 1, j}, d{0, i + 1, j + 1};
        const double det = t.at(a) * t.at(d) - t.at(b) * t.at(c);
        CHECK(std::abs(det) < 1e-12);
      }
  }
  SUBCASE("values lie in [0, 1]") {
    for (double noise : {0.0, 0.1}) {
      DenseTensor t = generate_lowrank(Shape({5, 5, 5}), 3, noise, 11);
      const auto [lo, hi] = t.min_max();
      CHECK(lo >= 0.0);
      CHECK(hi <= 1.0 + 1e-15);
    }
  }
  SUBCASE("deterministic per spec and seed") {
    DenseTensor a = generate_lowrank(Shape({4, 5}), 2, 0.05, 13);
    DenseTensor b = generate_lowrank(Shape({4, 5}), 2, 0.05, 13);
    CHECK(a.values() == b.values());
  }
  SUBCASE("noiseless rank-R decomposes at rank R") {
    DenseTensor t = generate_lowrank(Shape({6, 6, 6}), 2, 0.0, 17);
    TrainConfig cfg;
    cfg.seed = 1;
    cfg.max_epochs = 4000;
    DecomposeResult res = decompose_dense(t, 2, cfg);
    CHECK(res.normalized_error < 1e-2);
  }
  SUBCASE("validation") {
    CHECK_THROWS_AS(generate_lowrank(Shape({3, 3}), 0, 0.0, 1), Error);
    CHECK_THROWS_AS(generate_lowrank(Shape({3, 3}), 1, -0.5, 1), Error);
  }
}

TEST_CASE("smooth generator") {
  SUBCASE("frequency 0 gives a constant tensor with zero smoothness penalty") {
    DenseTensor t = generate_smooth(Shape({4, 4, 4}), 0.0, 5);
    for (double v : t.values()) CHECK(v == t.values()[0]);
    // exact CP factorization of a constant c: rank 1, rows all equal
    CpModel m(t.shape(), 1, ModelInit{0, 0.0});
    const double c = std::cbrt(t.values()[0]);
    for (auto& p : m.params()) p = c;
    CHECK(smoothness_penalty(m, SmoothnessConfig{1.0, 1, 1.0, {}}) ==
          doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("adjacent differences obey the analytic bound") {
    SmoothInfo info;
    const Shape shape({8, 8, 8});
    DenseTensor t = generate_smooth(shape, 1.0, 23, &info);
    for (int mode = 0; mode < 3; ++mode) {
      const double bound = info.adjacent_diff_bound(shape, mode);
      for (int64_t flat = 0; flat < shape.element_count(); ++flat) {
        const auto idx = shape.unravel(flat);
        if (idx[static_cast<size_t>(mode)] + 1 >= shape.dim(mode)) continue;
        auto next = idx;
        next[static_cast<size_t>(mode)] += 1;
        CHECK(std::abs(t.at(next) - t.at(idx)) <= bound + 1e-12);
      }
    }
  }
  SUBCASE("deterministic per seed") {
    DenseTensor a = generate_smooth(Shape({6, 6}), 1.5, 3);
    DenseTensor b = generate_smooth(Shape({6, 6}), 1.5, 3);
    CHECK(a.values() == b.values());
  }
}

TEST_CASE("highrank generator") {
  DenseTensor a = generate_highrank(Shape({5, 5, 5}), 3);
  DenseTensor b = generate_highrank(Shape({5, 5, 5}), 3);
  CHECK(a.values() == b.values());
  const auto [lo, hi] = a.min_max();
  CHECK(lo >= 0.0);
  CHECK(hi < 1.0);
  // generically full rank: a rank-1 fit leaves most of the energy behind
  TrainConfig cfg;
  cfg.max_epochs = 1500;
  cfg.max_restarts = 1;
  CHECK(decompose_dense(a, 1, cfg).normalized_error > 0.05);
}

TEST_CASE("blobs and f1") {
  Blobs data = make_blobs(7);
  CHECK(data.train_rows() == 160);
  CHECK(data.test_rows() == 80);
  // class 1 is the training majority
  int ones = 0;
  for (int y : data.train_y) ones += y;
  CHECK(ones > 80);

  const std::vector<int> truth{1, 1, 0, 0};
  CHECK(f1_score(truth, std::vector<int>{1, 1, 0, 0}) == 1.0);
  CHECK(f1_score(truth, std::vector<int>{0, 0, 0, 0}) == 0.0);
  CHECK(f1_score(truth, std::vector<int>{1, 1, 1, 1}) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("knn learner analytic majority case") {
  Blobs data = make_blobs(7);
  bool clamped = false;
  // k equal to the training size with uniform weights votes the majority
  // class (1) everywhere; F1 follows from the holdout label counts alone.
  const double f1 = knn_f1(data, static_cast<int>(data.train_rows()), 2.0, false, &clamped);
  CHECK_FALSE(clamped);
  int64_t pos = 0;
  for (int y : data.test_y) pos += y;
  const int64_t neg = data.test_rows() - pos;
  const double expected = 2.0 * static_cast<double>(pos) /
                          static_cast<double>(2 * pos + neg);
  CHECK(f1 == doctest::Approx(expected));

  // k beyond the training size clamps and flags
  const double f1_clamped = knn_f1(data, static_cast<int>(data.train_rows()) + 50, 2.0,
                                   false, &clamped);
  CHECK(clamped);
  CHECK(f1_clamped == doctest::Approx(expected));
}

TEST_CASE("hpo grids") {
  SUBCASE("knn grid: cells in [0,1], deterministic, clamps flagged") {
    const std::vector<GridAxis> axes{
        {"k", {"1", "5", "200"}},          // 200 > train size -> clamp
        {"p", {"1", "2"}},
        {"weights", {"uniform", "distance"}},
    };
    GeneratedTensor a = generate_hpo_grid(axes, LearnerKind::Knn, 3);
    GeneratedTensor b = generate_hpo_grid(axes, LearnerKind::Knn, 3);
    CHECK(a.tensor.values() == b.tensor.values());
    const auto [lo, hi] = a.tensor.min_max();
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK_FALSE(a.metadata["clamped_cells"].empty());
  }
  SUBCASE("tree grid stays in range") {
    const std::vector<GridAxis> axes{
        {"max_depth", {"1", "3", "6"}},
        {"min_samples_leaf", {"1", "10"}},
        {"max_features", {"0.5", "1.0"}},
    };
    GeneratedTensor g = generate_hpo_grid(axes, LearnerKind::Tree, 5);
    const auto [lo, hi] = g.tensor.min_max();
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    // deeper trees should move F1 somewhere; the tensor is not constant
    CHECK(hi > lo);
  }
  SUBCASE("mlp grid produces plausible scores") {
    const std::vector<GridAxis> axes{
        {"num_layers", {"1", "2"}},
        {"hidden_size", {"4", "8"}},
        {"num_epochs", {"5", "15"}},
        {"lr", {"0.01", "0.1"}},
    };
    GeneratedTensor g = generate_hpo_grid(axes, LearnerKind::Mlp, 11);
    const auto [lo, hi] = g.tensor.min_max();
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi > 0.5);  // something must beat coin flipping on separated blobs
  }
  SUBCASE("axis validation") {
    CHECK_THROWS_AS(generate_hpo_grid({{"k", {"1"}}}, LearnerKind::Knn, 0), Error);
  }
}

TEST_CASE("query tensor cells match the brute-force evaluator") {
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    for (bool distinct : {false, true}) {
      QueryTemplate q = oracles::random_query_template(seed, distinct);
      GeneratedTensor g = generate_query_tensor(q);
      REQUIRE(g.raw.has_value());
      const DenseTensor& raw = *g.raw;
      for (int64_t flat = 0; flat < raw.shape().element_count(); ++flat) {
        const auto idx = raw.shape().unravel(flat);
        CHECK(raw.flat_at(flat) == oracles::query_cell(q, idx));
      }
    }
  }
}

TEST_CASE("query tensor structural properties") {
  SUBCASE("tautology under OR counts every row") {
    QueryTemplate q;
    q.table = Table::synthetic(100, 4);
    q.predicates = {
        {"person_id", CmpOp::Le, {"99999", "1000000"}},  // second value: all rows
        {"surname_pcode", CmpOp::Ge, {"A", "Z"}},
    };
    q.connectors = {Connector::Or};
    GeneratedTensor g = generate_query_tensor(q);
    const std::vector<int64_t> idx{1, 1};
    CHECK(g.raw->at(idx) == 100.0);
  }
  SUBCASE("impossible conjunction yields zero") {
    QueryTemplate q;
    q.table = Table::synthetic(100, 4);
    q.predicates = {
        {"person_id", CmpOp::Le, {"99999", "1000000"}},  // first value: no rows
        {"surname_pcode", CmpOp::Ge, {"A"}},
    };
    q.connectors = {Connector::And};
    const std::vector<int64_t> idx{0, 0};
    GeneratedTensor g = generate_query_tensor(q);
    CHECK(g.raw->at(idx) == 0.0);
  }
  SUBCASE("distinct counts never exceed plain counts") {
    QueryTemplate plain = oracles::random_query_template(9, false);
    QueryTemplate dist = plain;
    dist.distinct_attribute = "surname_pcode";
    GeneratedTensor a = generate_query_tensor(plain);
    GeneratedTensor b = generate_query_tensor(dist);
    for (int64_t f = 0; f < a.raw->shape().element_count(); ++f)
      CHECK(b.raw->flat_at(f) <= a.raw->flat_at(f));
  }
  SUBCASE("pure-AND one-sided ranges are monotone along their mode") {
    QueryTemplate q;
    q.table = Table::synthetic(150, 21);
    q.predicates = {
        {"person_id", CmpOp::Le, {"200000", "400000", "600000", "800000", "999999"}},
        {"surname_pcode", CmpOp::Ge, {"T", "M", "G", "A"}},  // widening
    };
    q.connectors = {Connector::And};
    GeneratedTensor g = generate_query_tensor(q);
    for (int64_t j = 0; j < 4; ++j)
      for (int64_t i = 0; i + 1 < 5; ++i) {
        const std::vector<int64_t> a{i, j}, b{i + 1, j};
        CHECK(g.raw->at(a) <= g.raw->at(b));
      }
  }
  SUBCASE("scaling metadata recovers raw counts") {
    QueryTemplate q = oracles::random_query_template(31, false);
    GeneratedTensor g = generate_query_tensor(q);
    const double lo = g.metadata["scaling"]["min"].get<double>();
    const double hi = g.metadata["scaling"]["max"].get<double>();
    for (int64_t f = 0; f < g.tensor.shape().element_count(); ++f) {
      const double recovered = g.tensor.flat_at(f) * (hi - lo) + lo;
      CHECK(recovered == doctest::Approx(g.raw->flat_at(f)).epsilon(1e-12));
    }
  }
  SUBCASE("type mismatch rejected") {
    QueryTemplate q;
    q.table = Table::synthetic(10, 1);
    q.predicates = {{"person_id", CmpOp::Le, {"notanumber"}}};
    CHECK_THROWS_AS(generate_query_tensor(q), Error);
  }
}

TEST_CASE("json generate dispatcher") {
  SUBCASE("low-rank via json, bit-identical to the typed call") {
    const json spec{{"kind", "low-rank"}, {"shape", {4, 4, 4}}, {"true_rank", 2}, {"seed", 5}};
    GeneratedTensor g = generate(spec);
    DenseTensor direct = generate_lowrank(Shape({4, 4, 4}), 2, 0.0, 5);
    CHECK(g.tensor.values() == direct.values());
    CHECK(g.metadata["kind"] == "low-rank");
  }
  SUBCASE("unknown kind rejected") {
    CHECK_THROWS_AS(generate(json{{"kind", "mystery"}}), Error);
  }
  SUBCASE("unknown keys rejected by name") {
    const json spec{{"kind", "low-rank"}, {"shape", {2, 2}}, {"true_rank", 1}, {"bogus", 1}};
    try {
      generate(spec);
      FAIL("expected parse error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("bogus") != std::string::npos);
    }
  }
  SUBCASE("query spec end to end") {
    const json spec{
        {"kind", "query-distinct"},
        {"rows", 50},
        {"seed", 3},
        {"predicates",
         json::array({{{"column", "surname_pcode"}, {"op", "ge"}, {"values", {"B", "H", "Q"}}},
                      {{"column", "person_id"}, {"op", "le"}, {"values", {300000, 700000}}}})},
        {"connectors", {"and"}},
        {"distinct", "name_pcode_nf"}};
    GeneratedTensor g = generate(spec);
    CHECK(g.tensor.shape().dims() == std::vector<int64_t>{3, 2});
    CHECK(g.raw.has_value());
  }
}
