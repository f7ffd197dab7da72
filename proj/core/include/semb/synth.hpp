#pragma once

#include "semb/models.hpp"

namespace semb {

enum class SynthKind { regression, click };
std::string_view to_string(SynthKind kind);
SynthKind synth_kind_from_string(std::string_view s);

// Planted-model generator configuration. `planted_scale` multiplies the
// init standard deviation of the planted parameters; at 1.0 the logits and
// ratings are too flat to carry signal, so the default spreads them enough
// for recovery tests to have teeth.
struct SyntheticConfig {
  SynthKind kind = SynthKind::regression;
  std::size_t records = 1000;
  std::size_t k = 5;
  std::uint64_t seed = 1;
  double planted_scale = 8.0;

  // regression shape
  std::size_t users = 100;
  std::size_t movies = 500;
  double noise = 0.0;  // rating noise sd; 0 emits the planted prediction exactly
  // Ratings are linear in the user factors, so a separate (larger) user
  // scale widens the rating spread without pushing the feature embeddings
  // into the hard quartic regime. 0 reuses planted_scale.
  double planted_user_scale = 0.0;
  // Zipf exponent for movie popularity; 0 draws movies uniformly.
  double movie_zipf = 1.0;

  // click shape
  std::size_t items_per_slate = 10;
  std::size_t item_vocab = 50;
  std::size_t action_types = 5;
  std::size_t action_item_vocab = 50;
  std::size_t max_actions = 5;

  // train/validation/test fractions
  double train_frac = 0.8;
  double validation_frac = 0.1;
};

struct SyntheticRegression {
  RatingDataset data;
  RegressionModel planted;
};

struct SyntheticClick {
  SessionDataset data;
  ClickModel planted;
};

SyntheticRegression generate_synthetic_regression(const SyntheticConfig& config);
SyntheticClick generate_synthetic_click(const SyntheticConfig& config);

// Inverse-CDF draw from a probability vector given u in [0, 1); the
// sampler the click generator uses, exposed so tests can drive it.
std::size_t sample_categorical(std::span<const double> probs, double u);

}  // namespace semb
