#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "semb/compose.hpp"

namespace semb {

// Identifies one embedding-table vector: (family index, feature id).
// Numerical families use id 0 (the direction vector).
struct ParamKey {
  std::uint32_t family = 0;
  std::uint32_t id = 0;

  bool operator==(const ParamKey&) const = default;
  bool operator<(const ParamKey& o) const {
    return family != o.family ? family < o.family : id < o.id;
  }
};

struct ParamKeyHash {
  std::size_t operator()(ParamKey k) const noexcept {
    return std::hash<std::uint64_t>{}((std::uint64_t(k.family) << 32) | k.id);
  }
};

std::string describe_key(const Schema& schema, ParamKey key);

// Dense gradient block for the factorization-machine parameters.
// `touched` marks the flat feature indices active in the batch, for lazy
// l2 and sparse-aware ADAM updates.
struct FmGradBlock {
  double w0 = 0.0;
  Vec linear;                        // flat_dim
  Vec latent;                        // flat_dim * k, row-major
  std::vector<std::uint8_t> touched; // flat_dim
};

// Minibatch gradients: a sparse map over embedding-table vectors (only
// parameters touched by the batch appear), scalar slots for the click
// weights, and an optional FM block.
class GradientAccumulator {
 public:
  explicit GradientAccumulator(std::size_t k) : k_(k) {}

  std::size_t dim() const noexcept { return k_; }

  // Zero-initialized slot, created on first touch.
  Vec& slot(ParamKey key);
  void add(ParamKey key, std::span<const double> g, double scale = 1.0);

  const std::unordered_map<ParamKey, Vec, ParamKeyHash>& vectors() const noexcept {
    return vecs_;
  }
  bool has(ParamKey key) const { return vecs_.count(key) > 0; }

  double w1 = 0.0;
  double w2 = 0.0;
  bool use_scalars = false;  // set by the SEMB-2 backward pass

  FmGradBlock& fm(std::size_t flat_dim);
  const FmGradBlock* fm() const noexcept { return fm_ ? &*fm_ : nullptr; }

  void merge(const GradientAccumulator& other);

  // First non-finite entry, described for diagnostics; nullopt if all finite.
  std::optional<std::string> find_non_finite(const Schema& schema) const;

 private:
  std::size_t k_;
  std::unordered_map<ParamKey, Vec, ParamKeyHash> vecs_;
  std::optional<FmGradBlock> fm_;
};

// Gradient of compose with respect to each child:
//   g/L + g .* (sum of the other children) / (L(L-1)/2),
// the cross part absent for a single child.
std::vector<Vec> backward_compose(std::span<const Vec> children, const Vec& upstream);

// Chain rule down a composition tree, depositing leaf gradients into the
// accumulator. Requires the cache filled by embed_tree(table, node, cache).
void backward_tree(const EmbeddingTable& table, const SlateNode& node, const TreeCache& cache,
                   std::span<const double> upstream, GradientAccumulator& acc);

namespace detail {
std::vector<Vec> backward_compose_ptrs(std::span<const Vec* const> children,
                                       const Vec& upstream);
}

}  // namespace semb
