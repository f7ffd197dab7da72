#include "semb/models.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>

namespace semb {

std::string_view to_string(ModelVariant v) {
  switch (v) {
    case ModelVariant::regression: return "regression";
    case ModelVariant::semb1: return "semb1";
    case ModelVariant::semb2: return "semb2";
    case ModelVariant::fm: return "fm";
  }
  return "?";
}

ModelVariant model_variant_from_string(std::string_view s) {
  if (s == "regression") return ModelVariant::regression;
  if (s == "semb1") return ModelVariant::semb1;
  if (s == "semb2") return ModelVariant::semb2;
  if (s == "fm") return ModelVariant::fm;
  throw std::invalid_argument("unknown model variant '" + std::string(s) +
                              "' (expected regression|semb1|semb2|fm)");
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

static void collect_tree_keys(const Schema& schema, const SlateNode& node,
                              std::set<ParamKey>& keys) {
  if (node.is_internal()) {
    for (const SlateNode& c : node.children()) collect_tree_keys(schema, c, keys);
    return;
  }
  const auto f = std::uint32_t(schema.family_index(node.family()));
  keys.insert({f, node.is_categorical() ? node.feature_id() : 0});
}

static double l2_penalty(const EmbeddingTable& table, const std::set<ParamKey>& touched,
                         double lambda) {
  if (lambda == 0.0) return 0.0;
  double sq = 0.0;
  for (ParamKey key : touched) {
    for (double x : table.at(key.family, key.id)) sq += x * x;
  }
  return lambda * sq;
}

// ---------------------------------------------------------------------------
// regression

RegressionModel make_regression_model(const Schema& schema, std::size_t k, double lambda,
                                      std::uint64_t seed, double init_scale) {
  if (!schema.has(kUserFamily)) {
    throw SchemaError("regression schema must declare a 'user' family");
  }
  if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  return RegressionModel{EmbeddingTable::gaussian(schema, k, seed, init_scale), lambda};
}

double rating_predict(const RegressionModel& model, std::uint32_t user, const SlateNode& slate) {
  Vec emb = embed_tree(model.table, slate);
  return dot(model.user_factor(user), emb);
}

double mse_loss(const RegressionModel& model, std::span<const SlateRatingRecord> batch) {
  if (batch.empty()) throw std::invalid_argument("mse_loss: empty batch");
  const Schema& schema = model.table.schema();
  const auto user_family = std::uint32_t(model.user_family());
  double loss = 0.0;
  std::set<ParamKey> touched;
  for (const SlateRatingRecord& rec : batch) {
    const double err = rating_predict(model, rec.user, rec.slate) - rec.rating;
    loss += err * err;
    collect_tree_keys(schema, rec.slate, touched);
    touched.insert({user_family, rec.user});
  }
  return loss + l2_penalty(model.table, touched, model.lambda);
}

// ---------------------------------------------------------------------------
// click models

ClickModel make_click_model(const Schema& schema, ClickVariant variant, std::size_t k,
                            double lambda, std::uint64_t seed, double init_scale) {
  if (lambda < 0) throw std::invalid_argument("lambda must be >= 0");
  // w1/w2 start at 0 so SEMB-2 begins on the SEMB-1 solution surface.
  return ClickModel{EmbeddingTable::gaussian(schema, k, seed, init_scale), variant, 0.0, 0.0,
                    lambda};
}

static double item_logit(const ClickModel& m, const Vec& session_emb, const Vec& item_emb,
                         const Vec* loo_emb) {
  double z = dot(session_emb, item_emb);
  if (m.variant == ClickVariant::semb2) {
    // Zero weights skip their term entirely, so a w1=w2=0 SEMB-2 model
    // reproduces SEMB-1 logits bit for bit.
    if (m.w1 != 0.0) z += m.w1 * dot(session_emb, *loo_emb);
    if (m.w2 != 0.0) z += m.w2 * dot(item_emb, *loo_emb);
  }
  return z;
}

static void fill_logits(const ClickModel& m, ClickForward& f) {
  const std::size_t n = f.item_embs.size();
  if (m.variant == ClickVariant::semb2) {
    if (n < 2) throw std::invalid_argument("SEMB-2 needs at least 2 items per slate");
    f.loo_embs.reserve(n);
    std::span<const Vec> embs(f.item_embs.data(), n);
    for (std::size_t i = 0; i < n; ++i) f.loo_embs.push_back(embed_leave_one_out(embs, i));
  }
  f.logits.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec* loo = f.loo_embs.empty() ? nullptr : &f.loo_embs[i];
    f.logits[i] = item_logit(m, f.session_emb, f.item_embs[i], loo);
  }
}

std::vector<double> click_logits(const ClickModel& model, const SlateNode& session,
                                 std::span<const SlateNode> items) {
  if (items.empty()) throw std::invalid_argument("click_logits: no items");
  ClickForward f;
  f.session_emb = embed_tree(model.table, session);
  f.item_embs.reserve(items.size());
  for (const SlateNode& item : items) f.item_embs.push_back(embed_tree(model.table, item));
  fill_logits(model, f);
  return std::move(f.logits);
}

ClickForward click_forward(const ClickModel& model, const SessionRecord& record) {
  ClickForward f;
  f.session_emb = embed_tree(model.table, record.session, f.cache);
  f.item_embs.reserve(record.items.size());
  for (const SlateNode& item : record.items) {
    f.item_embs.push_back(embed_tree(model.table, item, f.cache));
  }
  fill_logits(model, f);
  return f;
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

double softmax_nll(std::span<const double> logits, std::size_t clicked) {
  if (clicked >= logits.size()) throw std::invalid_argument("softmax_nll: clicked out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double z : logits) sum += std::exp(z - m);
  return std::log(sum) - (logits[clicked] - m);
}

double click_loss(const ClickModel& model, std::span<const SessionRecord> batch) {
  if (batch.empty()) throw std::invalid_argument("click_loss: empty batch");
  const Schema& schema = model.table.schema();
  double loss = 0.0;
  std::set<ParamKey> touched;
  for (const SessionRecord& rec : batch) {
    ClickForward f = click_forward(model, rec);
    loss += softmax_nll(f.logits, rec.clicked);
    collect_tree_keys(schema, rec.session, touched);
    for (const SlateNode& item : rec.items) collect_tree_keys(schema, item, touched);
  }
  return loss + l2_penalty(model.table, touched, model.lambda);
}

// ---------------------------------------------------------------------------
// factorization machine

FactorizationMachineModel make_fm_model(const Schema& schema, std::size_t k,
                                        double lambda_linear, double lambda_latent,
                                        std::uint64_t seed, double init_scale) {
  if (k == 0) throw std::invalid_argument("k must be positive");
  if (lambda_linear < 0 || lambda_latent < 0) {
    throw std::invalid_argument("lambda must be >= 0");
  }
  FactorizationMachineModel m;
  m.schema = schema;
  m.k = k;
  m.linear.assign(schema.flat_dim(), 0.0);
  m.latent.assign(schema.flat_dim() * k, 0.0);
  m.lambda_linear = lambda_linear;
  m.lambda_latent = lambda_latent;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, init_scale * 0.1 / std::sqrt(double(k)));
  for (double& x : m.latent) x = dist(rng);
  return m;
}

namespace detail {

double fm_score(const FactorizationMachineModel& m, const SparseVec& x, Vec* factor_sums) {
  double s = m.w0;
  Vec local;
  Vec& sf = factor_sums ? *factor_sums : local;
  sf.assign(m.k, 0.0);
  double sq = 0.0;
  for (const auto& [i, v] : x) {
    if (i >= m.flat_dim()) {
      throw SchemaError("feature index " + std::to_string(i) + " out of range (flat dim " +
                        std::to_string(m.flat_dim()) + ")");
    }
    if (v == 0.0) continue;
    s += m.linear[i] * v;
    auto row = m.latent_row(i);
    for (std::size_t f = 0; f < m.k; ++f) {
      sf[f] += row[f] * v;
      sq += row[f] * row[f] * v * v;
    }
  }
  double pair_term = 0.0;
  for (std::size_t f = 0; f < m.k; ++f) pair_term += sf[f] * sf[f];
  return s + 0.5 * (pair_term - sq);
}

}  // namespace detail

double fm_score(const FactorizationMachineModel& model, const SparseVec& x) {
  return detail::fm_score(model, x, nullptr);
}

std::vector<double> fm_logits(const FactorizationMachineModel& model,
                              std::span<const SparseVec> items) {
  std::vector<double> out;
  out.reserve(items.size());
  for (const SparseVec& x : items) out.push_back(fm_score(model, x));
  return out;
}

static void add_leaf_flat(const Schema& schema, const SlateNode& leaf,
                          std::map<std::uint32_t, double>& acc, double scale) {
  const std::size_t f = schema.family_index(leaf.family());
  const std::size_t off = schema.flat_offset(f);
  if (leaf.is_categorical()) {
    acc[std::uint32_t(off + leaf.feature_id())] += scale;
  } else {
    acc[std::uint32_t(off)] += scale * leaf.value();
  }
}

std::vector<SparseVec> fm_featurize(const Schema& schema, const SessionRecord& record) {
  std::map<std::uint32_t, double> context;
  const auto actions = record.session.children();
  for (const SlateNode& a : record.session.children()) {
    for (const SlateNode& leaf : a.children()) add_leaf_flat(schema, leaf, context, 1.0);
  }
  for (auto& [i, v] : context) v /= double(actions.size());

  std::vector<SparseVec> out;
  out.reserve(record.items.size());
  for (const SlateNode& item : record.items) {
    std::map<std::uint32_t, double> feat = context;
    for (const SlateNode& leaf : item.children()) add_leaf_flat(schema, leaf, feat, 1.0);
    SparseVec x;
    x.reserve(feat.size());
    for (const auto& [i, v] : feat) {
      if (v != 0.0) x.emplace_back(i, v);
    }
    out.push_back(std::move(x));
  }
  return out;
}

double fm_loss(const FactorizationMachineModel& model, std::span<const SessionRecord> batch) {
  if (batch.empty()) throw std::invalid_argument("fm_loss: empty batch");
  double loss = 0.0;
  std::set<std::uint32_t> touched;
  for (const SessionRecord& rec : batch) {
    const auto feats = fm_featurize(model.schema, rec);
    loss += softmax_nll(fm_logits(model, feats), rec.clicked);
    for (const SparseVec& x : feats) {
      for (const auto& [i, v] : x) {
        if (v != 0.0) touched.insert(i);
      }
    }
  }
  double sq_linear = 0.0, sq_latent = 0.0;
  for (std::uint32_t i : touched) {
    sq_linear += model.linear[i] * model.linear[i];
    for (double x : model.latent_row(i)) sq_latent += x * x;
  }
  return loss + model.lambda_linear * sq_linear + model.lambda_latent * sq_latent;
}

ModelVariant variant_of(const AnyModel& model) {
  if (std::holds_alternative<RegressionModel>(model)) return ModelVariant::regression;
  if (const auto* c = std::get_if<ClickModel>(&model)) {
    return c->variant == ClickVariant::semb1 ? ModelVariant::semb1 : ModelVariant::semb2;
  }
  return ModelVariant::fm;
}

}  // namespace semb
