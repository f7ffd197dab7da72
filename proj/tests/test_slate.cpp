#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "semb/compose.hpp"

using namespace semb;

namespace {

Schema toy_schema() {
  return Schema({{"movie", FeatureKind::categorical, 10},
                 {"position", FeatureKind::categorical, 5},
                 {"dwell", FeatureKind::numerical, 0}});
}

void check_close(const Vec& a, const Vec& b, double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    CHECK(std::abs(a[d] - b[d]) <= tol * std::max(1.0, std::abs(b[d])));
  }
}

}  // namespace

TEST_SUITE_BEGIN("slate");

TEST_CASE("schema rejects invalid family lists") {
  CHECK_THROWS_AS(Schema({{"m", FeatureKind::categorical, 0}}), SchemaError);
  CHECK_THROWS_AS(Schema({{"m", FeatureKind::categorical, 2},
                          {"m", FeatureKind::categorical, 3}}),
                  SchemaError);
  CHECK_THROWS_AS(Schema({{"x", FeatureKind::numerical, 4}}), SchemaError);
  const Schema s = toy_schema();
  CHECK(s.family_count() == 3);
  CHECK(s.flat_dim() == 16);
  CHECK(s.flat_offset(1) == 10);
  CHECK_THROWS_AS((void)s.family_index("unknown"), SchemaError);
}

TEST_CASE("embed_leaf looks up categorical vectors and scales numerical directions") {
  const Schema schema = toy_schema();
  EmbeddingTable table = EmbeddingTable::gaussian(schema, 4, 7);

  SUBCASE("categorical lookup is the stored vector") {
    const SlateNode leaf = SlateNode::categorical("movie", 3);
    const Vec got = embed_leaf(table, leaf);
    const auto stored = table.at("movie", 3);
    REQUIRE(got.size() == 4);
    for (std::size_t d = 0; d < 4; ++d) CHECK(got[d] == stored[d]);
  }
  SUBCASE("numerical value 0 gives the zero vector") {
    const Vec got = embed_leaf(table, SlateNode::numerical("dwell", 0.0));
    for (double x : got) CHECK(x == 0.0);
  }
  SUBCASE("numerical value scales the direction elementwise") {
    const Vec got = embed_leaf(table, SlateNode::numerical("dwell", 2.5));
    const auto dir = table.at("dwell", 0);
    for (std::size_t d = 0; d < 4; ++d) CHECK(got[d] == 2.5 * dir[d]);
  }
  SUBCASE("schema errors name the family") {
    CHECK_THROWS_WITH_AS((void)embed_leaf(table, SlateNode::categorical("genre", 0)),
                         doctest::Contains("genre"), SchemaError);
    CHECK_THROWS_WITH_AS((void)embed_leaf(table, SlateNode::categorical("movie", 10)),
                         doctest::Contains("movie"), SchemaError);
    CHECK_THROWS_AS((void)embed_leaf(table, SlateNode::numerical("movie", 1.0)), SchemaError);
    CHECK_THROWS_AS((void)embed_leaf(table, SlateNode::categorical("dwell", 0)), SchemaError);
  }
}

TEST_CASE("compose base cases") {
  std::mt19937_64 rng(11);
  const Vec x = test::random_vec(rng, 6);

  SUBCASE("single child passes through bitwise") {
    const Vec out = compose(std::vector<Vec>{x});
    for (std::size_t d = 0; d < x.size(); ++d) CHECK(out[d] == x[d]);
  }
  SUBCASE("duplicated child gives x + x.*x") {
    const Vec out = compose(std::vector<Vec>{x, x});
    for (std::size_t d = 0; d < x.size(); ++d) CHECK(out[d] == x[d] + x[d] * x[d]);
  }
  SUBCASE("contract violations") {
    CHECK_THROWS_AS((void)compose(std::vector<Vec>{}), std::invalid_argument);
    CHECK_THROWS_AS((void)compose(std::vector<Vec>{Vec{1.0}, Vec{1.0, 2.0}}),
                    std::invalid_argument);
  }
}

TEST_CASE("compose matches the explicit double-loop oracle") {
  std::mt19937_64 rng(23);
  for (std::size_t L : {1u, 2u, 3u, 5u, 25u}) {
    for (std::size_t k : {1u, 4u, 16u}) {
      const auto children = test::random_vecs(rng, L, k);
      check_close(compose(children), test::compose_double_loop(children));
    }
  }
}

TEST_CASE("five slots compose with the pair divisor 10") {
  std::mt19937_64 rng(31);
  const auto slots = test::random_vecs(rng, 5, 3, 0.5);
  const Vec out = compose(slots);
  for (std::size_t d = 0; d < 3; ++d) {
    double mean = 0.0, cross = 0.0;
    for (const Vec& s : slots) mean += s[d];
    mean /= 5.0;
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < i; ++j) cross += slots[i][d] * slots[j][d];
    }
    CHECK(out[d] == doctest::Approx(mean + cross / 10.0).epsilon(1e-13));
  }
}

TEST_CASE("compose is exactly permutation invariant") {
  std::mt19937_64 rng(37);
  for (std::size_t L : {2u, 3u, 5u, 25u}) {
    auto children = test::random_vecs(rng, L, 8);
    const Vec base = compose(children);
    for (int trial = 0; trial < 8; ++trial) {
      std::shuffle(children.begin(), children.end(), rng);
      const Vec shuffled = compose(children);
      for (std::size_t d = 0; d < base.size(); ++d) CHECK(shuffled[d] == base[d]);
    }
  }
}

TEST_CASE("compose zero absorption and scaling law") {
  std::mt19937_64 rng(41);
  SUBCASE("all-zero children give the zero vector") {
    const std::vector<Vec> zs(4, Vec(5, 0.0));
    for (double v : compose(zs)) CHECK(v == 0.0);
  }
  SUBCASE("compose([cx, cy]) = c(x+y)/2 + c^2 x.*y") {
    const Vec x = test::random_vec(rng, 5), y = test::random_vec(rng, 5);
    const double c = 3.25;
    Vec cx = x, cy = y;
    for (double& v : cx) v *= c;
    for (double& v : cy) v *= c;
    const Vec out = compose(std::vector<Vec>{cx, cy});
    for (std::size_t d = 0; d < 5; ++d) {
      const double want = c * (x[d] + y[d]) / 2.0 + c * c * x[d] * y[d];
      CHECK(out[d] == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("embed_tree applies the rule bottom-up") {
  const Schema schema = toy_schema();
  EmbeddingTable table = EmbeddingTable::gaussian(schema, 4, 3);

  SUBCASE("a bare leaf is its leaf embedding") {
    const SlateNode leaf = SlateNode::categorical("movie", 2);
    check_close(embed_tree(table, leaf), embed_leaf(table, leaf), 0.0);
  }
  SUBCASE("movie/position slot equals (a+b)/2 + a.*b") {
    std::vector<SlateNode> leaves;
    leaves.push_back(SlateNode::categorical("movie", 1));
    leaves.push_back(SlateNode::categorical("position", 4));
    const SlateNode slot = SlateNode::internal(std::move(leaves));
    const auto a = table.at("movie", 1);
    const auto b = table.at("position", 4);
    const Vec got = embed_tree(table, slot);
    for (std::size_t d = 0; d < 4; ++d) {
      CHECK(got[d] == doctest::Approx((a[d] + b[d]) / 2.0 + a[d] * b[d]).epsilon(1e-13));
    }
  }
  SUBCASE("three-level tree matches composing by hand") {
    auto slot = [&](std::uint32_t m, std::uint32_t p) {
      std::vector<SlateNode> leaves;
      leaves.push_back(SlateNode::categorical("movie", m));
      leaves.push_back(SlateNode::categorical("position", p));
      return SlateNode::internal(std::move(leaves));
    };
    std::vector<SlateNode> pair1, pair2;
    pair1.push_back(slot(0, 0));
    pair1.push_back(slot(1, 1));
    pair2.push_back(slot(2, 2));
    pair2.push_back(slot(3, 3));
    std::vector<SlateNode> top;
    top.push_back(SlateNode::internal(std::move(pair1)));
    top.push_back(SlateNode::internal(std::move(pair2)));
    const SlateNode root = SlateNode::internal(std::move(top));

    const Vec got = embed_tree(table, root);
    // hand-applied: each slot, then each pair, then the root
    auto slot_emb = [&](std::uint32_t m, std::uint32_t p) {
      return compose(std::vector<Vec>{embed_leaf(table, SlateNode::categorical("movie", m)),
                                      embed_leaf(table, SlateNode::categorical("position", p))});
    };
    const Vec left = compose(std::vector<Vec>{slot_emb(0, 0), slot_emb(1, 1)});
    const Vec right = compose(std::vector<Vec>{slot_emb(2, 2), slot_emb(3, 3)});
    check_close(got, compose(std::vector<Vec>{left, right}), 0.0);
  }
  SUBCASE("dimension is preserved at every level") {
    std::vector<SlateNode> leaves;
    for (std::uint32_t i = 0; i < 5; ++i) leaves.push_back(SlateNode::categorical("movie", i));
    const SlateNode node = SlateNode::internal(std::move(leaves));
    CHECK(embed_tree(table, node).size() == table.dim());
  }
}

TEST_CASE("embed_leave_one_out") {
  std::mt19937_64 rng(53);
  SUBCASE("two items leave the survivor") {
    const auto items = test::random_vecs(rng, 2, 4);
    const Vec got = embed_leave_one_out(items, 0);
    for (std::size_t d = 0; d < 4; ++d) CHECK(got[d] == items[1][d]);
  }
  SUBCASE("three items reduce to compose of the remainder") {
    const auto items = test::random_vecs(rng, 3, 4);
    const std::vector<Vec> rest{items[0], items[1]};
    check_close(embed_leave_one_out(items, 2), test::compose_double_loop(rest));
  }
  SUBCASE("25 items match the explicit pair loop") {
    const auto items = test::random_vecs(rng, 25, 6);
    std::vector<Vec> rest(items.begin() + 1, items.end());
    check_close(embed_leave_one_out(items, 0), test::compose_double_loop(rest));
  }
  SUBCASE("a single item has no remaining slate") {
    const auto items = test::random_vecs(rng, 1, 4);
    CHECK_THROWS_AS((void)embed_leave_one_out(items, 0), std::invalid_argument);
  }
}

TEST_CASE("internal nodes must be nonempty") {
  CHECK_THROWS_AS((void)SlateNode::internal({}), std::invalid_argument);
}

TEST_CASE("concurrent embed_tree on a frozen table matches serial") {
  const Schema schema = toy_schema();
  const EmbeddingTable table = EmbeddingTable::gaussian(schema, 8, 99);
  std::vector<SlateNode> leaves;
  for (std::uint32_t i = 0; i < 10; ++i) leaves.push_back(SlateNode::categorical("movie", i));
  const SlateNode node = SlateNode::internal(std::move(leaves));
  const Vec serial = embed_tree(table, node);

  std::vector<std::future<Vec>> futures;
  for (int t = 0; t < 8; ++t) {
    futures.push_back(std::async(std::launch::async, [&] { return embed_tree(table, node); }));
  }
  for (auto& f : futures) {
    const Vec got = f.get();
    for (std::size_t d = 0; d < serial.size(); ++d) CHECK(got[d] == serial[d]);
  }
}

TEST_CASE("embeddings stay finite through deep composition") {
  const Schema schema = toy_schema();
  EmbeddingTable table = EmbeddingTable::gaussian(schema, 8, 5);
  std::vector<SlateNode> level;
  for (std::uint32_t i = 0; i < 8; ++i) level.push_back(SlateNode::categorical("movie", i));
  SlateNode node = SlateNode::internal(std::move(level));
  for (int depth = 0; depth < 4; ++depth) {
    std::vector<SlateNode> wrap;
    wrap.push_back(std::move(node));
    wrap.push_back(SlateNode::categorical("position", 0));
    node = SlateNode::internal(std::move(wrap));
  }
  for (double v : embed_tree(table, node)) CHECK(std::isfinite(v));
}

TEST_SUITE_END();
