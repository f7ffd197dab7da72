#pragma once

// Independent reference implementations the tests check the library
// against. These stay deliberately naive (explicit loops, no shared code
// with the implementation paths they verify).

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "semb/embedding_table.hpp"

namespace semb::test {

// Composition rule spelled out directly: mean plus an explicit double loop
// over the unordered pairs.
inline Vec compose_double_loop(std::span<const Vec> children) {
  const std::size_t L = children.size();
  const std::size_t k = children[0].size();
  Vec out(k, 0.0);
  for (const Vec& c : children) {
    for (std::size_t d = 0; d < k; ++d) out[d] += c[d] / double(L);
  }
  if (L > 1) {
    const double pairs = double(L) * double(L - 1) / 2.0;
    for (std::size_t i = 0; i < L; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        for (std::size_t d = 0; d < k; ++d) {
          out[d] += children[i][d] * children[j][d] / pairs;
        }
      }
    }
  }
  return out;
}

inline Vec random_vec(std::mt19937_64& rng, std::size_t k, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Vec v(k);
  for (double& x : v) x = dist(rng);
  return v;
}

inline std::vector<Vec> random_vecs(std::mt19937_64& rng, std::size_t count, std::size_t k,
                                    double scale = 1.0) {
  std::vector<Vec> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(random_vec(rng, k, scale));
  return out;
}

// FM score via the explicit pairwise double loop.
inline double fm_score_double_loop(double w0, std::span<const double> linear,
                                   std::span<const double> latent, std::size_t k,
                                   std::span<const std::pair<std::uint32_t, double>> x) {
  double s = w0;
  for (const auto& [i, v] : x) s += linear[i] * v;
  for (std::size_t a = 0; a < x.size(); ++a) {
    for (std::size_t b = a + 1; b < x.size(); ++b) {
      double inner = 0.0;
      for (std::size_t f = 0; f < k; ++f) {
        inner += latent[x[a].first * k + f] * latent[x[b].first * k + f];
      }
      s += inner * x[a].second * x[b].second;
    }
  }
  return s;
}

}  // namespace semb::test
