#include "semb/schema.hpp"

#include <utility>

namespace semb {

std::string_view to_string(FeatureKind kind) {
  return kind == FeatureKind::categorical ? "categorical" : "numerical";
}

FeatureKind feature_kind_from_string(std::string_view s) {
  if (s == "categorical") return FeatureKind::categorical;
  if (s == "numerical") return FeatureKind::numerical;
  throw SchemaError("unknown feature kind '" + std::string(s) + "'");
}

Schema::Schema(std::vector<FeatureSpec> specs) : specs_(std::move(specs)) {
  offsets_.reserve(specs_.size());
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    const FeatureSpec& f = specs_[i];
    if (f.family.empty()) throw SchemaError("feature family with empty name");
    if (f.kind == FeatureKind::categorical && f.cardinality < 1) {
      throw SchemaError("categorical family '" + f.family + "' needs cardinality >= 1");
    }
    if (f.kind == FeatureKind::numerical && f.cardinality != 0) {
      throw SchemaError("numerical family '" + f.family + "' must not declare a cardinality");
    }
    if (!index_.emplace(f.family, i).second) {
      throw SchemaError("duplicate feature family '" + f.family + "'");
    }
    offsets_.push_back(flat_dim_);
    flat_dim_ += f.kind == FeatureKind::categorical ? f.cardinality : 1;
  }
}

const FeatureSpec& Schema::spec(std::size_t family_idx) const {
  if (family_idx >= specs_.size()) throw SchemaError("family index out of range");
  return specs_[family_idx];
}

std::size_t Schema::family_index(std::string_view family) const {
  auto it = index_.find(std::string(family));
  if (it == index_.end()) {
    throw SchemaError("unknown feature family '" + std::string(family) + "'");
  }
  return it->second;
}

const FeatureSpec* Schema::find(std::string_view family) const noexcept {
  auto it = index_.find(std::string(family));
  return it == index_.end() ? nullptr : &specs_[it->second];
}

std::size_t Schema::flat_offset(std::size_t family_idx) const {
  if (family_idx >= offsets_.size()) throw SchemaError("family index out of range");
  return offsets_[family_idx];
}

}  // namespace semb
