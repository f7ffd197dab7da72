#pragma once

#include <span>
#include <unordered_map>

#include "semb/embedding_table.hpp"
#include "semb/slate.hpp"

namespace semb {

// Composition rule: mean of the children plus the mean over all unordered
// pairs of elementwise products (plug-in estimate of the cross-covariance
// diagonal). A single child passes through unchanged. Children are summed
// per coordinate in value order, so any permutation of the child list
// yields a bit-identical result.
Vec compose(std::span<const Vec> children);
Vec compose(const std::vector<Vec>& children);

// Leaf embedding: categorical leaves look up their stored vector,
// numerical leaves scale the family's direction vector by the leaf value.
Vec embed_leaf(const EmbeddingTable& table, const SlateNode& leaf);

// Forward values cached per node during embed_tree, reused by the
// backward pass (the cross-term gradient needs sibling embeddings).
class TreeCache {
 public:
  void put(const SlateNode* node, Vec value) { values_[node] = std::move(value); }
  const Vec& at(const SlateNode& node) const;
  bool empty() const noexcept { return values_.empty(); }
  void clear() { values_.clear(); }

 private:
  std::unordered_map<const SlateNode*, Vec> values_;
};

// Bottom-up recursive application of the composition rule over a tree.
Vec embed_tree(const EmbeddingTable& table, const SlateNode& node);
Vec embed_tree(const EmbeddingTable& table, const SlateNode& node, TreeCache& cache);

// Composition over all item embeddings except the excluded one; the
// remaining-slate context em(s_i) of the click models.
Vec embed_leave_one_out(std::span<const Vec> items, std::size_t excluded);

namespace detail {
// Per-coordinate sums S and sums of squares Q over the children, each
// accumulated in ascending value order (the canonical order that makes
// compose and its gradient exactly permutation invariant).
void canonical_sums(std::span<const Vec* const> children, Vec& sum, Vec* sq_sum);
}  // namespace detail

}  // namespace semb
