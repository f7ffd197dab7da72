#include "semb/model_grad.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>

namespace semb {

// Sorted keys so penalty sums and coordinate enumeration are order-stable.
static std::vector<ParamKey> sorted_keys(const GradientAccumulator& acc) {
  std::vector<ParamKey> keys;
  keys.reserve(acc.vectors().size());
  for (const auto& [key, g] : acc.vectors()) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  return keys;
}

// g += 2*lambda*theta for every touched table vector; returns the penalty value.
static double apply_table_l2(const EmbeddingTable& table, GradientAccumulator& acc,
                             double lambda) {
  if (lambda == 0.0) return 0.0;
  double sq = 0.0;
  for (ParamKey key : sorted_keys(acc)) {
    auto theta = table.at(key.family, key.id);
    Vec& g = acc.slot(key);
    for (std::size_t d = 0; d < theta.size(); ++d) {
      g[d] += 2.0 * lambda * theta[d];
      sq += theta[d] * theta[d];
    }
  }
  return lambda * sq;
}

GradientAccumulator regression_gradients(const RegressionModel& model,
                                         std::span<const SlateRatingRecord> batch,
                                         double* loss_out) {
  if (batch.empty()) throw std::invalid_argument("regression_gradients: empty batch");
  const auto user_family = std::uint32_t(model.user_family());
  GradientAccumulator acc(model.k());
  double loss = 0.0;
  Vec g_emb(model.k());
  for (const SlateRatingRecord& rec : batch) {
    TreeCache cache;
    const Vec emb = embed_tree(model.table, rec.slate, cache);
    const auto q = model.user_factor(rec.user);
    const double err = dot(q, emb) - rec.rating;
    loss += err * err;
    const double d = 2.0 * err;
    acc.add({user_family, rec.user}, emb, d);
    for (std::size_t i = 0; i < g_emb.size(); ++i) g_emb[i] = d * q[i];
    backward_tree(model.table, rec.slate, cache, g_emb, acc);
  }
  loss += apply_table_l2(model.table, acc, model.lambda);
  if (loss_out) *loss_out = loss;
  return acc;
}

GradientAccumulator click_gradients(const ClickModel& model,
                                    std::span<const SessionRecord> batch, double* loss_out) {
  if (batch.empty()) throw std::invalid_argument("click_gradients: empty batch");
  const bool semb2 = model.variant == ClickVariant::semb2;
  GradientAccumulator acc(model.k());
  acc.use_scalars = semb2;
  const std::size_t k = model.k();
  double loss = 0.0;
  for (const SessionRecord& rec : batch) {
    ClickForward f = click_forward(model, rec);
    loss += softmax_nll(f.logits, rec.clicked);
    std::vector<double> dz = softmax(f.logits);
    dz[rec.clicked] -= 1.0;

    const std::size_t n = f.item_embs.size();
    Vec g_session(k, 0.0);
    std::vector<Vec> g_items(n, Vec(k, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      const Vec& e = f.item_embs[i];
      for (std::size_t d = 0; d < k; ++d) {
        g_session[d] += dz[i] * e[d];
        g_items[i][d] += dz[i] * f.session_emb[d];
      }
    }
    if (semb2) {
      std::vector<const Vec*> rest(n - 1);
      Vec g_loo(k);
      for (std::size_t i = 0; i < n; ++i) {
        const Vec& s = f.loo_embs[i];
        const Vec& e = f.item_embs[i];
        acc.w1 += dz[i] * dot(f.session_emb, s);
        acc.w2 += dz[i] * dot(e, s);
        for (std::size_t d = 0; d < k; ++d) {
          g_session[d] += dz[i] * model.w1 * s[d];
          g_items[i][d] += dz[i] * model.w2 * s[d];
          g_loo[d] = dz[i] * (model.w1 * f.session_emb[d] + model.w2 * e[d]);
        }
        std::size_t r = 0;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) rest[r++] = &f.item_embs[j];
        }
        const auto rest_grads = detail::backward_compose_ptrs(rest, g_loo);
        r = 0;
        for (std::size_t j = 0; j < n; ++j) {
          if (j == i) continue;
          Vec& gj = g_items[j];
          const Vec& gr = rest_grads[r++];
          for (std::size_t d = 0; d < k; ++d) gj[d] += gr[d];
        }
      }
    }
    backward_tree(model.table, rec.session, f.cache, g_session, acc);
    for (std::size_t i = 0; i < n; ++i) {
      backward_tree(model.table, rec.items[i], f.cache, g_items[i], acc);
    }
  }
  loss += apply_table_l2(model.table, acc, model.lambda);  // w1/w2 stay unpenalized
  if (loss_out) *loss_out = loss;
  return acc;
}

GradientAccumulator fm_gradients(const FactorizationMachineModel& model,
                                 std::span<const SessionRecord> batch, double* loss_out) {
  if (batch.empty()) throw std::invalid_argument("fm_gradients: empty batch");
  GradientAccumulator acc(model.k);
  FmGradBlock& fm = acc.fm(model.flat_dim());
  double loss = 0.0;
  Vec factor_sums(model.k);
  for (const SessionRecord& rec : batch) {
    const auto feats = fm_featurize(model.schema, rec);
    const std::size_t n = feats.size();
    std::vector<double> logits(n);
    std::vector<Vec> sums(n);
    for (std::size_t i = 0; i < n; ++i) {
      logits[i] = detail::fm_score(model, feats[i], &factor_sums);
      sums[i] = factor_sums;
    }
    loss += softmax_nll(logits, rec.clicked);
    std::vector<double> dz = softmax(logits);
    dz[rec.clicked] -= 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      fm.w0 += dz[i];
      for (const auto& [j, xj] : feats[i]) {
        if (xj == 0.0) continue;
        fm.touched[j] = 1;
        fm.linear[j] += dz[i] * xj;
        auto v = model.latent_row(j);
        double* gl = fm.latent.data() + std::size_t(j) * model.k;
        for (std::size_t f = 0; f < model.k; ++f) {
          gl[f] += dz[i] * (xj * sums[i][f] - v[f] * xj * xj);
        }
      }
    }
  }
  double sq_linear = 0.0, sq_latent = 0.0;
  for (std::size_t j = 0; j < fm.touched.size(); ++j) {
    if (!fm.touched[j]) continue;
    sq_linear += model.linear[j] * model.linear[j];
    fm.linear[j] += 2.0 * model.lambda_linear * model.linear[j];
    auto v = model.latent_row(j);
    double* gl = fm.latent.data() + j * model.k;
    for (std::size_t f = 0; f < model.k; ++f) {
      sq_latent += v[f] * v[f];
      gl[f] += 2.0 * model.lambda_latent * v[f];
    }
  }
  loss += model.lambda_linear * sq_linear + model.lambda_latent * sq_latent;
  if (loss_out) *loss_out = loss;
  return acc;
}

// ---------------------------------------------------------------------------
// finite-difference check

namespace {

struct CoordRef {
  double* p;
  double analytic;
  std::string label;
};

GradCheckReport fd_check(const std::function<double()>& loss_fn, std::vector<CoordRef> coords,
                         double tolerance, std::uint64_t seed, std::size_t sample_coords) {
  GradCheckReport rep;
  std::erase_if(coords, [](const CoordRef& c) { return std::abs(c.analytic) <= 1e-8; });
  std::mt19937_64 rng(seed);
  std::shuffle(coords.begin(), coords.end(), rng);
  if (coords.size() > sample_coords) coords.resize(sample_coords);

  const double h = 1e-4;
  for (const CoordRef& c : coords) {
    const double saved = *c.p;
    *c.p = saved + h;
    const double lp = loss_fn();
    *c.p = saved - h;
    const double lm = loss_fn();
    *c.p = saved;
    if (!std::isfinite(lp) || !std::isfinite(lm)) {
      rep.failure = "non-finite loss while probing " + c.label;
      rep.worst_coord = c.label;
      rep.pass = false;
      return rep;
    }
    const double fd = (lp - lm) / (2.0 * h);
    const double rel = std::abs(fd - c.analytic) / std::max(std::abs(fd), std::abs(c.analytic));
    if (rel > rep.max_rel_error) {
      rep.max_rel_error = rel;
      rep.worst_coord = c.label;
    }
    ++rep.coords_checked;
  }
  rep.pass = rep.max_rel_error < tolerance;
  return rep;
}

void collect_table_coords(EmbeddingTable& table, const GradientAccumulator& acc,
                          std::vector<CoordRef>& coords) {
  for (ParamKey key : sorted_keys(acc)) {
    const Vec& g = acc.vectors().at(key);
    auto theta = table.at_mut(key.family, key.id);
    const std::string base = describe_key(table.schema(), key);
    for (std::size_t d = 0; d < theta.size(); ++d) {
      coords.push_back({&theta[d], g[d], base + "[" + std::to_string(d) + "]"});
    }
  }
}

}  // namespace

GradCheckReport check_gradients(RegressionModel& model,
                                std::span<const SlateRatingRecord> batch, double tolerance,
                                std::uint64_t seed, std::size_t sample_coords) {
  const GradientAccumulator acc = regression_gradients(model, batch);
  std::vector<CoordRef> coords;
  collect_table_coords(model.table, acc, coords);
  return fd_check([&] { return mse_loss(model, batch); }, std::move(coords), tolerance, seed,
                  sample_coords);
}

GradCheckReport check_gradients(ClickModel& model, std::span<const SessionRecord> batch,
                                double tolerance, std::uint64_t seed,
                                std::size_t sample_coords) {
  const GradientAccumulator acc = click_gradients(model, batch);
  std::vector<CoordRef> coords;
  collect_table_coords(model.table, acc, coords);
  if (acc.use_scalars) {
    coords.push_back({&model.w1, acc.w1, "w1"});
    coords.push_back({&model.w2, acc.w2, "w2"});
  }
  return fd_check([&] { return click_loss(model, batch); }, std::move(coords), tolerance, seed,
                  sample_coords);
}

GradCheckReport check_gradients(FactorizationMachineModel& model,
                                std::span<const SessionRecord> batch, double tolerance,
                                std::uint64_t seed, std::size_t sample_coords) {
  const GradientAccumulator acc = fm_gradients(model, batch);
  const FmGradBlock* fm = acc.fm();
  std::vector<CoordRef> coords;
  coords.push_back({&model.w0, fm->w0, "fm:w0"});
  for (std::size_t j = 0; j < fm->touched.size(); ++j) {
    if (!fm->touched[j]) continue;
    coords.push_back({&model.linear[j], fm->linear[j], "fm:w[" + std::to_string(j) + "]"});
    for (std::size_t f = 0; f < model.k; ++f) {
      coords.push_back({&model.latent[j * model.k + f], fm->latent[j * model.k + f],
                        "fm:v[" + std::to_string(j) + "," + std::to_string(f) + "]"});
    }
  }
  return fd_check([&] { return fm_loss(model, batch); }, std::move(coords), tolerance, seed,
                  sample_coords);
}

}  // namespace semb
