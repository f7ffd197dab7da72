#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "semb/schema.hpp"

namespace semb {

using Vec = std::vector<double>;

// Learnable k-dimensional vectors per feature id. Categorical families
// store one vector per id; numerical families store a single direction
// vector that leaf values scale.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  static EmbeddingTable zeros(Schema schema, std::size_t k);
  // i.i.d. Gaussian init, mean 0, sd scale * 0.1 / sqrt(k).
  static EmbeddingTable gaussian(Schema schema, std::size_t k, std::uint64_t seed,
                                 double scale = 1.0);

  std::size_t dim() const noexcept { return k_; }
  const Schema& schema() const noexcept { return schema_; }

  std::span<const double> at(std::size_t family_idx, std::uint32_t id) const;
  std::span<double> at_mut(std::size_t family_idx, std::uint32_t id);
  std::span<const double> at(std::string_view family, std::uint32_t id) const {
    return at(schema_.family_index(family), id);
  }

  // Number of stored vectors in a family (cardinality, or 1 for numerical).
  std::size_t rows(std::size_t family_idx) const;
  std::size_t parameter_count() const noexcept;

  // Raw per-family storage (rows * k doubles), for serialization.
  std::span<const double> family_data(std::size_t family_idx) const;
  std::span<double> family_data_mut(std::size_t family_idx);

  bool operator==(const EmbeddingTable& other) const {
    return k_ == other.k_ && schema_ == other.schema_ && data_ == other.data_;
  }

 private:
  EmbeddingTable(Schema schema, std::size_t k);

  Schema schema_;
  std::size_t k_ = 0;
  std::vector<std::vector<double>> data_;  // per family, rows * k
};

}  // namespace semb
