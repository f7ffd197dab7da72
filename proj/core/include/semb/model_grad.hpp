#pragma once

#include <cstdint>
#include <string>

#include "semb/models.hpp"

namespace semb {

// Batch gradients with the lazy l2 penalty folded in (applied to exactly
// the parameters the batch touches). `loss_out`, when given, receives the
// matching batch objective.
GradientAccumulator regression_gradients(const RegressionModel& model,
                                         std::span<const SlateRatingRecord> batch,
                                         double* loss_out = nullptr);
GradientAccumulator click_gradients(const ClickModel& model,
                                    std::span<const SessionRecord> batch,
                                    double* loss_out = nullptr);
GradientAccumulator fm_gradients(const FactorizationMachineModel& model,
                                 std::span<const SessionRecord> batch,
                                 double* loss_out = nullptr);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
  bool pass = false;
  std::string worst_coord;
  std::string failure;  // set when a probe produced a non-finite loss
};

// Central finite differences (step 1e-4) on a random sample of parameter
// coordinates with |analytic| > 1e-8. The model is restored afterwards.
GradCheckReport check_gradients(RegressionModel& model,
                                std::span<const SlateRatingRecord> batch, double tolerance,
                                std::uint64_t seed, std::size_t sample_coords = 120);
GradCheckReport check_gradients(ClickModel& model, std::span<const SessionRecord> batch,
                                double tolerance, std::uint64_t seed,
                                std::size_t sample_coords = 120);
GradCheckReport check_gradients(FactorizationMachineModel& model,
                                std::span<const SessionRecord> batch, double tolerance,
                                std::uint64_t seed, std::size_t sample_coords = 120);

}  // namespace semb
