#include "semb/embedding_table.hpp"

#include <cmath>
#include <random>
#include <stdexcept>
#include <utility>

namespace semb {

EmbeddingTable::EmbeddingTable(Schema schema, std::size_t k)
    : schema_(std::move(schema)), k_(k) {
  if (k_ == 0) throw std::invalid_argument("embedding dimension must be positive");
  data_.reserve(schema_.family_count());
  for (std::size_t f = 0; f < schema_.family_count(); ++f) {
    const FeatureSpec& spec = schema_.spec(f);
    const std::size_t n = spec.kind == FeatureKind::categorical ? spec.cardinality : 1;
    data_.emplace_back(n * k_, 0.0);
  }
}

EmbeddingTable EmbeddingTable::zeros(Schema schema, std::size_t k) {
  return EmbeddingTable(std::move(schema), k);
}

EmbeddingTable EmbeddingTable::gaussian(Schema schema, std::size_t k, std::uint64_t seed,
                                        double scale) {
  EmbeddingTable t(std::move(schema), k);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, scale * 0.1 / std::sqrt(double(k)));
  for (auto& family : t.data_) {
    for (double& x : family) x = dist(rng);
  }
  return t;
}

std::span<const double> EmbeddingTable::at(std::size_t family_idx, std::uint32_t id) const {
  const FeatureSpec& spec = schema_.spec(family_idx);
  if (id >= rows(family_idx)) {
    throw SchemaError("feature id " + std::to_string(id) + " out of range for family '" +
                      spec.family + "'");
  }
  return {data_[family_idx].data() + std::size_t(id) * k_, k_};
}

std::span<double> EmbeddingTable::at_mut(std::size_t family_idx, std::uint32_t id) {
  auto ro = static_cast<const EmbeddingTable*>(this)->at(family_idx, id);
  return {const_cast<double*>(ro.data()), ro.size()};
}

std::size_t EmbeddingTable::rows(std::size_t family_idx) const {
  const FeatureSpec& spec = schema_.spec(family_idx);
  return spec.kind == FeatureKind::categorical ? spec.cardinality : 1;
}

std::size_t EmbeddingTable::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& family : data_) n += family.size();
  return n;
}

std::span<const double> EmbeddingTable::family_data(std::size_t family_idx) const {
  schema_.spec(family_idx);  // bounds check
  return {data_[family_idx].data(), data_[family_idx].size()};
}

std::span<double> EmbeddingTable::family_data_mut(std::size_t family_idx) {
  schema_.spec(family_idx);
  return {data_[family_idx].data(), data_[family_idx].size()};
}

}  // namespace semb
