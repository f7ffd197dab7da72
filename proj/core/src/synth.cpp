#include "semb/synth.hpp"

#include <algorithm>
#include <optional>
#include <cmath>
#include <random>
#include <stdexcept>

namespace semb {

std::string_view to_string(SynthKind kind) {
  return kind == SynthKind::regression ? "regression" : "click";
}

SynthKind synth_kind_from_string(std::string_view s) {
  if (s == "regression") return SynthKind::regression;
  if (s == "click") return SynthKind::click;
  throw std::invalid_argument("unknown synthetic kind '" + std::string(s) +
                              "' (expected regression|click)");
}

std::size_t sample_categorical(std::span<const double> probs, double u) {
  double cum = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cum += probs[i];
    if (u < cum) return i;
  }
  return probs.size() - 1;  // guard against rounding at the top of the CDF
}

namespace {

constexpr std::uint64_t kRecordStreamSalt = 0x9e3779b97f4a7c15ULL;

template <class Record>
void split_records(std::vector<Record> all, const SyntheticConfig& cfg,
                   DatasetSplit<Record>& out) {
  const auto n = all.size();
  const auto n_train = std::size_t(std::llround(double(n) * cfg.train_frac));
  const auto n_val = std::size_t(std::llround(double(n) * cfg.validation_frac));
  if (n_train + n_val > n) throw std::invalid_argument("split fractions exceed 1");
  out.train.assign(std::make_move_iterator(all.begin()),
                   std::make_move_iterator(all.begin() + n_train));
  out.validation.assign(std::make_move_iterator(all.begin() + n_train),
                        std::make_move_iterator(all.begin() + n_train + n_val));
  out.test.assign(std::make_move_iterator(all.begin() + n_train + n_val),
                  std::make_move_iterator(all.end()));
}

// Distinct draws from [0, vocab) when possible, with replacement otherwise.
std::vector<std::uint32_t> draw_ids(std::mt19937_64& rng, std::size_t count,
                                    std::size_t vocab) {
  std::uniform_int_distribution<std::uint32_t> dist(0, std::uint32_t(vocab - 1));
  std::vector<std::uint32_t> ids(count);
  if (vocab >= count) {
    std::vector<bool> used(vocab, false);
    for (auto& id : ids) {
      do {
        id = dist(rng);
      } while (used[id]);
      used[id] = true;
    }
  } else {
    for (auto& id : ids) id = dist(rng);
  }
  return ids;
}

// Zipf-weighted popularity sampler via the inverse CDF; distinct draws.
class PopularitySampler {
 public:
  PopularitySampler(std::size_t vocab, double exponent) : cdf_(vocab) {
    double total = 0.0;
    for (std::size_t m = 0; m < vocab; ++m) {
      total += 1.0 / std::pow(double(m + 1), exponent);
      cdf_[m] = total;
    }
    for (double& c : cdf_) c /= total;
  }

  std::vector<std::uint32_t> draw_distinct(std::mt19937_64& rng, std::size_t count) const {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<std::uint32_t> ids;
    ids.reserve(count);
    while (ids.size() < count) {
      const auto it = std::lower_bound(cdf_.begin(), cdf_.end(), unit(rng));
      const auto id = std::uint32_t(it - cdf_.begin());
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
    return ids;
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

SyntheticRegression generate_synthetic_regression(const SyntheticConfig& cfg) {
  if (cfg.kind != SynthKind::regression) {
    throw std::invalid_argument("generate_synthetic_regression: config kind mismatch");
  }
  Schema schema({{"movie", FeatureKind::categorical, cfg.movies},
                 {"position", FeatureKind::categorical, kSlotsPerSlate},
                 {std::string(kUserFamily), FeatureKind::categorical, cfg.users}});
  RegressionModel planted =
      make_regression_model(schema, cfg.k, 0.0, cfg.seed, cfg.planted_scale);
  if (cfg.planted_user_scale > 0.0 && cfg.planted_user_scale != cfg.planted_scale) {
    const double ratio = cfg.planted_user_scale / cfg.planted_scale;
    const std::size_t user_family = planted.user_family();
    for (double& x : planted.table.family_data_mut(user_family)) x *= ratio;
  }

  std::mt19937_64 rng(cfg.seed ^ kRecordStreamSalt);
  std::uniform_int_distribution<std::uint32_t> user_dist(0, std::uint32_t(cfg.users - 1));
  std::normal_distribution<double> noise(0.0, 1.0);
  std::optional<PopularitySampler> popularity;
  if (cfg.movie_zipf > 0.0 && cfg.movies > kSlotsPerSlate) {
    popularity.emplace(cfg.movies, cfg.movie_zipf);
  }

  std::vector<SlateRatingRecord> all;
  all.reserve(cfg.records);
  for (std::size_t r = 0; r < cfg.records; ++r) {
    const std::uint32_t user = user_dist(rng);
    const auto movies = popularity ? popularity->draw_distinct(rng, kSlotsPerSlate)
                                   : draw_ids(rng, kSlotsPerSlate, cfg.movies);
    std::vector<SlateNode> slots;
    slots.reserve(kSlotsPerSlate);
    for (std::size_t s = 0; s < kSlotsPerSlate; ++s) {
      std::vector<SlateNode> leaves;
      leaves.push_back(SlateNode::categorical("movie", movies[s]));
      leaves.push_back(SlateNode::categorical("position", std::uint32_t(s)));
      slots.push_back(SlateNode::internal(std::move(leaves)));
    }
    SlateNode slate = SlateNode::internal(std::move(slots));
    double rating = rating_predict(planted, user, slate);
    if (cfg.noise > 0.0) rating += cfg.noise * noise(rng);
    all.push_back(SlateRatingRecord{user, std::move(slate), rating});
  }

  SyntheticRegression out{RatingDataset{SchemaFile{schema, std::nullopt}, {}, {}, {}},
                          std::move(planted)};
  split_records(std::move(all), cfg, out.data);
  return out;
}

SyntheticClick generate_synthetic_click(const SyntheticConfig& cfg) {
  if (cfg.kind != SynthKind::click) {
    throw std::invalid_argument("generate_synthetic_click: config kind mismatch");
  }
  if (cfg.items_per_slate < 2 || cfg.items_per_slate > kMaxSlateItems) {
    throw std::invalid_argument("items_per_slate must be in [2, 25]");
  }
  if (cfg.max_actions < 1 || cfg.max_actions > kMaxSessionSteps) {
    throw std::invalid_argument("max_actions must be in [1, 15]");
  }
  Schema schema({{"item_id", FeatureKind::categorical, cfg.item_vocab},
                 {"item_pos", FeatureKind::categorical, cfg.items_per_slate},
                 {"action_type", FeatureKind::categorical, cfg.action_types},
                 {"action_item", FeatureKind::categorical, cfg.action_item_vocab},
                 {"dwell", FeatureKind::numerical, 0}});
  ClickModel planted =
      make_click_model(schema, ClickVariant::semb1, cfg.k, 0.0, cfg.seed, cfg.planted_scale);

  std::mt19937_64 rng(cfg.seed ^ kRecordStreamSalt);
  std::uniform_int_distribution<std::uint32_t> type_dist(0, std::uint32_t(cfg.action_types - 1));
  std::uniform_int_distribution<std::uint32_t> aitem_dist(0,
                                                          std::uint32_t(cfg.action_item_vocab - 1));
  std::uniform_int_distribution<std::size_t> steps_dist(1, cfg.max_actions);
  std::uniform_real_distribution<double> dwell_dist(0.0, 2.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<SessionRecord> all;
  all.reserve(cfg.records);
  for (std::size_t r = 0; r < cfg.records; ++r) {
    const std::size_t steps = steps_dist(rng);
    std::vector<SlateNode> actions;
    actions.reserve(steps);
    for (std::size_t a = 0; a < steps; ++a) {
      std::vector<SlateNode> leaves;
      leaves.push_back(SlateNode::categorical("action_type", type_dist(rng)));
      leaves.push_back(SlateNode::categorical("action_item", aitem_dist(rng)));
      leaves.push_back(SlateNode::numerical("dwell", dwell_dist(rng)));
      actions.push_back(SlateNode::internal(std::move(leaves)));
    }
    SlateNode session = SlateNode::internal(std::move(actions));

    const auto item_ids = draw_ids(rng, cfg.items_per_slate, cfg.item_vocab);
    std::vector<SlateNode> items;
    items.reserve(cfg.items_per_slate);
    for (std::size_t i = 0; i < cfg.items_per_slate; ++i) {
      std::vector<SlateNode> leaves;
      leaves.push_back(SlateNode::categorical("item_id", item_ids[i]));
      leaves.push_back(SlateNode::categorical("item_pos", std::uint32_t(i)));
      items.push_back(SlateNode::internal(std::move(leaves)));
    }

    const auto logits = click_logits(planted, session, items);
    const auto probs = softmax(logits);
    const auto clicked = std::uint32_t(sample_categorical(probs, unit(rng)));
    all.push_back(SessionRecord{"s" + std::to_string(r), std::move(session), std::move(items),
                                clicked});
  }

  SyntheticClick out{SessionDataset{SchemaFile{schema, std::nullopt}, {}, {}, {}},
                     std::move(planted)};
  split_records(std::move(all), cfg, out.data);
  return out;
}

}  // namespace semb
