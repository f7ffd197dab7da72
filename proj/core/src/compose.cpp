#include "semb/compose.hpp"

#include <algorithm>
#include <stdexcept>

namespace semb {

namespace detail {

void canonical_sums(std::span<const Vec* const> children, Vec& sum, Vec* sq_sum) {
  const std::size_t L = children.size();
  const std::size_t k = children[0]->size();
  sum.assign(k, 0.0);
  if (sq_sum) sq_sum->assign(k, 0.0);
  std::vector<double> buf(L);
  for (std::size_t d = 0; d < k; ++d) {
    for (std::size_t l = 0; l < L; ++l) buf[l] = (*children[l])[d];
    std::sort(buf.begin(), buf.end());
    double s = 0.0, q = 0.0;
    for (double v : buf) {
      s += v;
      q += v * v;
    }
    sum[d] = s;
    if (sq_sum) (*sq_sum)[d] = q;
  }
}

}  // namespace detail

static std::vector<const Vec*> child_ptrs(std::span<const Vec> children) {
  std::vector<const Vec*> ptrs(children.size());
  for (std::size_t i = 0; i < children.size(); ++i) ptrs[i] = &children[i];
  return ptrs;
}

static Vec compose_ptrs(std::span<const Vec* const> children) {
  if (children.empty()) throw std::invalid_argument("compose: empty child list");
  const std::size_t L = children.size();
  const std::size_t k = children[0]->size();
  for (const Vec* c : children) {
    if (c->size() != k) throw std::invalid_argument("compose: child dimension mismatch");
  }
  if (L == 1) return *children[0];

  Vec sum, sq;
  detail::canonical_sums(children, sum, &sq);
  const double inv_l = 1.0 / double(L);
  const double pairs = double(L) * double(L - 1) / 2.0;
  Vec out(k);
  for (std::size_t d = 0; d < k; ++d) {
    // sum_{l>m} e_l*e_m == (S^2 - sum e^2) / 2, one pass over the children
    out[d] = sum[d] * inv_l + (sum[d] * sum[d] - sq[d]) * 0.5 / pairs;
  }
  return out;
}

Vec compose(std::span<const Vec> children) { return compose_ptrs(child_ptrs(children)); }

Vec compose(const std::vector<Vec>& children) {
  return compose(std::span<const Vec>(children.data(), children.size()));
}

Vec embed_leaf(const EmbeddingTable& table, const SlateNode& leaf) {
  if (!leaf.is_leaf()) throw std::invalid_argument("embed_leaf: node is not a leaf");
  const Schema& schema = table.schema();
  const std::size_t f = schema.family_index(leaf.family());
  const FeatureSpec& spec = schema.spec(f);
  if (leaf.is_categorical()) {
    if (spec.kind != FeatureKind::categorical) {
      throw SchemaError("family '" + spec.family + "' is numerical but leaf carries an id");
    }
    auto v = table.at(f, leaf.feature_id());
    return Vec(v.begin(), v.end());
  }
  if (spec.kind != FeatureKind::numerical) {
    throw SchemaError("family '" + spec.family + "' is categorical but leaf carries a value");
  }
  auto dir = table.at(f, 0);
  Vec out(table.dim());
  for (std::size_t d = 0; d < out.size(); ++d) out[d] = leaf.value() * dir[d];
  return out;
}

static Vec embed_node(const EmbeddingTable& table, const SlateNode& node, TreeCache* cache) {
  Vec v;
  if (node.is_leaf()) {
    v = embed_leaf(table, node);
  } else {
    auto kids = node.children();
    std::vector<Vec> child_embs;
    child_embs.reserve(kids.size());
    for (const SlateNode& c : kids) child_embs.push_back(embed_node(table, c, cache));
    v = compose(child_embs);
  }
  if (cache) cache->put(&node, v);
  return v;
}

Vec embed_tree(const EmbeddingTable& table, const SlateNode& node) {
  return embed_node(table, node, nullptr);
}

Vec embed_tree(const EmbeddingTable& table, const SlateNode& node, TreeCache& cache) {
  return embed_node(table, node, &cache);
}

Vec embed_leave_one_out(std::span<const Vec> items, std::size_t excluded) {
  if (items.size() < 2) {
    throw std::invalid_argument("embed_leave_one_out: need at least 2 items");
  }
  if (excluded >= items.size()) {
    throw std::invalid_argument("embed_leave_one_out: excluded index out of range");
  }
  std::vector<const Vec*> rest;
  rest.reserve(items.size() - 1);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i != excluded) rest.push_back(&items[i]);
  }
  return compose_ptrs(rest);
}

const Vec& TreeCache::at(const SlateNode& node) const {
  auto it = values_.find(&node);
  if (it == values_.end()) {
    throw std::invalid_argument("TreeCache: node has no cached forward value");
  }
  return it->second;
}

}  // namespace semb
