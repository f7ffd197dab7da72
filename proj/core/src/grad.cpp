#include "semb/grad.hpp"

#include <cmath>
#include <stdexcept>

namespace semb {

std::string describe_key(const Schema& schema, ParamKey key) {
  return schema.spec(key.family).family + ":" + std::to_string(key.id);
}

Vec& GradientAccumulator::slot(ParamKey key) {
  auto [it, inserted] = vecs_.try_emplace(key);
  if (inserted) it->second.assign(k_, 0.0);
  return it->second;
}

void GradientAccumulator::add(ParamKey key, std::span<const double> g, double scale) {
  Vec& s = slot(key);
  if (g.size() != k_) throw std::invalid_argument("gradient dimension mismatch");
  for (std::size_t d = 0; d < k_; ++d) s[d] += scale * g[d];
}

FmGradBlock& GradientAccumulator::fm(std::size_t flat_dim) {
  if (!fm_) {
    fm_.emplace();
    fm_->linear.assign(flat_dim, 0.0);
    fm_->latent.assign(flat_dim * k_, 0.0);
    fm_->touched.assign(flat_dim, 0);
  }
  return *fm_;
}

void GradientAccumulator::merge(const GradientAccumulator& other) {
  if (other.k_ != k_) throw std::invalid_argument("accumulator dimension mismatch");
  for (const auto& [key, g] : other.vecs_) add(key, g);
  w1 += other.w1;
  w2 += other.w2;
  use_scalars = use_scalars || other.use_scalars;
  if (other.fm_) {
    FmGradBlock& mine = fm(other.fm_->linear.size());
    mine.w0 += other.fm_->w0;
    for (std::size_t i = 0; i < mine.linear.size(); ++i) mine.linear[i] += other.fm_->linear[i];
    for (std::size_t i = 0; i < mine.latent.size(); ++i) mine.latent[i] += other.fm_->latent[i];
    for (std::size_t i = 0; i < mine.touched.size(); ++i)
      mine.touched[i] = mine.touched[i] || other.fm_->touched[i];
  }
}

std::optional<std::string> GradientAccumulator::find_non_finite(const Schema& schema) const {
  for (const auto& [key, g] : vecs_) {
    for (double x : g) {
      if (!std::isfinite(x)) return describe_key(schema, key);
    }
  }
  if (!std::isfinite(w1)) return "w1";
  if (!std::isfinite(w2)) return "w2";
  if (fm_) {
    if (!std::isfinite(fm_->w0)) return "fm:w0";
    for (double x : fm_->linear)
      if (!std::isfinite(x)) return "fm:linear";
    for (double x : fm_->latent)
      if (!std::isfinite(x)) return "fm:latent";
  }
  return std::nullopt;
}

namespace detail {

std::vector<Vec> backward_compose_ptrs(std::span<const Vec* const> children,
                                       const Vec& upstream) {
  if (children.empty()) throw std::invalid_argument("backward_compose: empty child list");
  const std::size_t L = children.size();
  const std::size_t k = children[0]->size();
  if (upstream.size() != k) {
    throw std::invalid_argument("backward_compose: upstream dimension mismatch");
  }
  for (const Vec* c : children) {
    if (c->size() != k) throw std::invalid_argument("backward_compose: child dimension mismatch");
  }
  if (L == 1) return {upstream};

  Vec sum;
  canonical_sums(children, sum, nullptr);
  const double inv_l = 1.0 / double(L);
  const double inv_pairs = 2.0 / (double(L) * double(L - 1));
  std::vector<Vec> grads(L, Vec(k));
  for (std::size_t l = 0; l < L; ++l) {
    const Vec& e = *children[l];
    for (std::size_t d = 0; d < k; ++d) {
      // sibling sum computed as S - e_l, one pass over the children
      grads[l][d] = upstream[d] * inv_l + upstream[d] * (sum[d] - e[d]) * inv_pairs;
    }
  }
  return grads;
}

}  // namespace detail

std::vector<Vec> backward_compose(std::span<const Vec> children, const Vec& upstream) {
  std::vector<const Vec*> ptrs(children.size());
  for (std::size_t i = 0; i < children.size(); ++i) ptrs[i] = &children[i];
  return detail::backward_compose_ptrs(ptrs, upstream);
}

void backward_tree(const EmbeddingTable& table, const SlateNode& node, const TreeCache& cache,
                   std::span<const double> upstream, GradientAccumulator& acc) {
  const Schema& schema = table.schema();
  if (node.is_categorical()) {
    const auto f = std::uint32_t(schema.family_index(node.family()));
    acc.add({f, node.feature_id()}, upstream);
    return;
  }
  if (node.is_numerical()) {
    const auto f = std::uint32_t(schema.family_index(node.family()));
    acc.add({f, 0}, upstream, node.value());
    return;
  }
  auto kids = node.children();
  std::vector<const Vec*> child_values(kids.size());
  for (std::size_t i = 0; i < kids.size(); ++i) child_values[i] = &cache.at(kids[i]);
  Vec up(upstream.begin(), upstream.end());
  std::vector<Vec> child_grads = detail::backward_compose_ptrs(child_values, up);
  for (std::size_t i = 0; i < kids.size(); ++i) {
    backward_tree(table, kids[i], cache, child_grads[i], acc);
  }
}

}  // namespace semb
