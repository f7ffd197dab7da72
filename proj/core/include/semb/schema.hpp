#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "semb/errors.hpp"

namespace semb {

enum class FeatureKind { categorical, numerical };

std::string_view to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(std::string_view s);

// One feature family of a dataset. Categorical families own `cardinality`
// ids in [0, cardinality); numerical families carry a single scalar value
// per leaf and no cardinality.
struct FeatureSpec {
  std::string family;
  FeatureKind kind = FeatureKind::categorical;
  std::size_t cardinality = 0;

  bool operator==(const FeatureSpec&) const = default;
};

// Immutable, ordered feature vocabulary of a dataset. Family order is
// significant: it fixes embedding-table layout and the flat feature
// indexing used by the factorization-machine featurizer.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<FeatureSpec> specs);

  std::size_t family_count() const noexcept { return specs_.size(); }
  const FeatureSpec& spec(std::size_t family_idx) const;
  const std::vector<FeatureSpec>& specs() const noexcept { return specs_; }

  // Index of the family, or throws SchemaError naming it.
  std::size_t family_index(std::string_view family) const;
  const FeatureSpec* find(std::string_view family) const noexcept;
  bool has(std::string_view family) const noexcept { return find(family) != nullptr; }

  // Flat one-hot/value indexing: each categorical family occupies a block
  // of `cardinality` slots, each numerical family one slot.
  std::size_t flat_dim() const noexcept { return flat_dim_; }
  std::size_t flat_offset(std::size_t family_idx) const;

  bool operator==(const Schema& other) const { return specs_ == other.specs_; }

 private:
  std::vector<FeatureSpec> specs_;
  std::vector<std::size_t> offsets_;
  std::size_t flat_dim_ = 0;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace semb
