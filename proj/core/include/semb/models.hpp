#pragma once

#include <string_view>
#include <utility>
#include <variant>

#include "semb/compose.hpp"
#include "semb/data.hpp"
#include "semb/grad.hpp"

namespace semb {

inline constexpr std::string_view kUserFamily = "user";

enum class ModelVariant { regression, semb1, semb2, fm };
std::string_view to_string(ModelVariant v);
ModelVariant model_variant_from_string(std::string_view s);

enum class ClickVariant { semb1, semb2 };

double dot(std::span<const double> a, std::span<const double> b);

// ---------------------------------------------------------------------------
// Gaussian slate-rating regression: r ~ N(q_u . em(slate), 1).

struct RegressionModel {
  EmbeddingTable table;  // movie/position families plus the "user" factors
  double lambda = 0.0;

  std::size_t k() const noexcept { return table.dim(); }
  std::size_t user_family() const { return table.schema().family_index(kUserFamily); }
  std::span<const double> user_factor(std::uint32_t user) const {
    return table.at(user_family(), user);
  }
};

// Schema must declare "user"; embeddings drawn N(0, (init_scale*0.1/sqrt(k))^2).
RegressionModel make_regression_model(const Schema& schema, std::size_t k, double lambda,
                                      std::uint64_t seed, double init_scale = 1.0);

double rating_predict(const RegressionModel& model, std::uint32_t user, const SlateNode& slate);

// Sum of squared errors over the batch plus lambda * ||touched params||^2.
// The reported MSE metric (eval module) excludes the penalty.
double mse_loss(const RegressionModel& model, std::span<const SlateRatingRecord> batch);

// ---------------------------------------------------------------------------
// Click models over sessions: SEMB-1 scores session.item, SEMB-2 adds
// weighted session.slate and item.slate terms with em(s_i) from
// leave-one-out composition.

struct ClickModel {
  EmbeddingTable table;  // item + action feature families
  ClickVariant variant = ClickVariant::semb1;
  double w1 = 0.0;  // semb2 only
  double w2 = 0.0;  // semb2 only
  double lambda = 0.0;

  std::size_t k() const noexcept { return table.dim(); }
};

ClickModel make_click_model(const Schema& schema, ClickVariant variant, std::size_t k,
                            double lambda, std::uint64_t seed, double init_scale = 1.0);

std::vector<double> click_logits(const ClickModel& model, const SlateNode& session,
                                 std::span<const SlateNode> items);

// Forward pass with everything the backward pass and the feature exporter
// need: tree-node values, item embeddings, leave-one-out contexts.
struct ClickForward {
  Vec session_emb;
  std::vector<Vec> item_embs;
  std::vector<Vec> loo_embs;  // filled for semb2 only
  std::vector<double> logits;
  TreeCache cache;
};
ClickForward click_forward(const ClickModel& model, const SessionRecord& record);

std::vector<double> softmax(std::span<const double> logits);
// -log softmax(logits)[clicked], max-subtracted for stability.
double softmax_nll(std::span<const double> logits, std::size_t clicked);

// Sum of per-session NLL plus lambda * ||touched params||^2.
double click_loss(const ClickModel& model, std::span<const SessionRecord> batch);

// ---------------------------------------------------------------------------
// Multinomial factorization machine baseline over flat sparse features.

using SparseVec = std::vector<std::pair<std::uint32_t, double>>;

struct FactorizationMachineModel {
  Schema schema;
  std::size_t k = 0;
  double w0 = 0.0;
  Vec linear;  // flat_dim
  Vec latent;  // flat_dim * k, row-major
  double lambda_linear = 0.0;
  double lambda_latent = 0.0;

  std::size_t flat_dim() const noexcept { return schema.flat_dim(); }
  std::span<const double> latent_row(std::size_t i) const {
    return {latent.data() + i * k, k};
  }
};

FactorizationMachineModel make_fm_model(const Schema& schema, std::size_t k,
                                        double lambda_linear, double lambda_latent,
                                        std::uint64_t seed, double init_scale = 1.0);

// w0 + sum_i w_i x_i + sum_{i<j} <v_i,v_j> x_i x_j via the O(N*k) identity
// 0.5 * sum_f [(sum_i v_if x_i)^2 - sum_i v_if^2 x_i^2].
double fm_score(const FactorizationMachineModel& model, const SparseVec& x);
std::vector<double> fm_logits(const FactorizationMachineModel& model,
                              std::span<const SparseVec> items);

// Flat featurization of the click task: each item's own leaves one-hot /
// valued, plus the mean over actions of the action-feature encoding.
std::vector<SparseVec> fm_featurize(const Schema& schema, const SessionRecord& record);

double fm_loss(const FactorizationMachineModel& model, std::span<const SessionRecord> batch);

namespace detail {
// FM score that also hands back the per-factor sums S_f = sum_i v_if x_i
// the backward pass reuses.
double fm_score(const FactorizationMachineModel& model, const SparseVec& x, Vec* factor_sums);
}  // namespace detail

// ---------------------------------------------------------------------------

using AnyModel = std::variant<RegressionModel, ClickModel, FactorizationMachineModel>;

ModelVariant variant_of(const AnyModel& model);

}  // namespace semb
