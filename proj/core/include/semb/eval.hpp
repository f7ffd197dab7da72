#pragma once

#include <filesystem>
#include <string>

#include "semb/models.hpp"

namespace semb {

// Streaming mean/variance (Welford), with a numerically stable pairwise
// combine so per-record scoring can be merged from parallel shards.
class RunningStat {
 public:
  void add(double x) noexcept;
  void combine(const RunningStat& other) noexcept;
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double sample_variance() const noexcept;  // n-1 denominator, 0 when n < 2
  double standard_error() const noexcept;

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

struct MetricReport {
  std::string metric;
  double estimate = 0.0;
  double se = 0.0;
  std::size_t n = 0;
  std::string fingerprint;
};

std::string to_json_string(const MetricReport& report);
MetricReport metric_report_from_json_string(const std::string& s);

// Rank of the clicked item under descending logits; equal logits rank by
// ascending original index, so evaluation is reproducible.
std::size_t click_rank(std::span<const double> logits, std::size_t clicked);
double reciprocal_rank(std::span<const double> logits, std::size_t clicked);
// Binary relevance with a single clicked item: 1 / log2(rank + 1).
double ndcg_single_relevant(std::span<const double> logits, std::size_t clicked);

MetricReport eval_mse(const RegressionModel& model, std::span<const SlateRatingRecord> records,
                      std::string fingerprint = {});

MetricReport eval_mrr(const ClickModel& model, std::span<const SessionRecord> records,
                      std::string fingerprint = {});
MetricReport eval_ndcg(const ClickModel& model, std::span<const SessionRecord> records,
                       std::string fingerprint = {});
// Mean per-session NLL, penalty excluded.
MetricReport eval_nll(const ClickModel& model, std::span<const SessionRecord> records,
                      std::string fingerprint = {});

MetricReport eval_mrr(const FactorizationMachineModel& model,
                      std::span<const SessionRecord> records, std::string fingerprint = {});
MetricReport eval_ndcg(const FactorizationMachineModel& model,
                       std::span<const SessionRecord> records, std::string fingerprint = {});
MetricReport eval_nll(const FactorizationMachineModel& model,
                      std::span<const SessionRecord> records, std::string fingerprint = {});

// CSV header of the feature export: identifying columns, then the numeric
// block (log probability, three inner-product terms, the item embedding).
std::string export_header(std::size_t k);

// One row per (session, item): log predictive probability, session.item
// inner product, the two weighted slate terms, and the item embedding.
// Returns the number of data rows written.
std::size_t export_features(const ClickModel& model, std::span<const SessionRecord> records,
                            const std::filesystem::path& path);

}  // namespace semb
