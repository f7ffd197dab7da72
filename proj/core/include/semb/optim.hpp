#pragma once

#include <optional>

#include "semb/eval.hpp"
#include "semb/model_grad.hpp"

namespace semb {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Mutable views onto a model's learnable state; fields that do not apply
// to the model stay null.
struct ParamsRef {
  EmbeddingTable* table = nullptr;
  double* w1 = nullptr;
  double* w2 = nullptr;
  FactorizationMachineModel* fm = nullptr;
};
ParamsRef params_ref(RegressionModel& model);
ParamsRef params_ref(ClickModel& model);
ParamsRef params_ref(FactorizationMachineModel& model);

// ADAM moments mirroring the accumulator: lazily created per touched
// embedding vector, scalar slots for w1/w2, dense blocks for the FM.
// Bias correction uses the shared step counter.
class AdamState {
 public:
  AdamState(std::size_t k, AdamConfig config) : k_(k), config_(config) {}

  // Applies one update to every parameter appearing in `grads`. Throws
  // GradientError (state untouched) when a gradient is non-finite.
  void step(ParamsRef params, const GradientAccumulator& grads);

  std::uint64_t t() const noexcept { return t_; }
  const AdamConfig& config() const noexcept { return config_; }

 private:
  struct Moments {
    Vec m, v;
  };
  struct Scalar {
    double m = 0.0, v = 0.0;
  };

  void update(double g, double bc1, double bc2, Scalar& s, double& theta);

  std::size_t k_;
  AdamConfig config_;
  std::uint64_t t_ = 0;
  std::unordered_map<ParamKey, Moments, ParamKeyHash> vec_;
  Scalar w1_, w2_, fm_w0_;
  Vec fm_linear_m_, fm_linear_v_, fm_latent_m_, fm_latent_v_;
};

void adam_step(AdamState& state, ParamsRef params, const GradientAccumulator& grads);

// ---------------------------------------------------------------------------

enum class SelectionMetric { mse, mrr, nll };
std::string_view to_string(SelectionMetric m);
SelectionMetric selection_metric_from_string(std::string_view s);
bool selection_is_minimized(SelectionMetric m);

struct TrainConfig {
  ModelVariant variant = ModelVariant::regression;
  std::size_t k = 5;
  double lambda = 1e-4;
  double lr = 1e-3;
  std::size_t epochs = 50;
  std::size_t batch_size = 0;  // 0 picks the task default (256 ratings / 128 sessions)
  std::uint64_t seed = 1;
  std::size_t patience = 10;  // epochs without improvement before stopping; 0 disables
  std::optional<SelectionMetric> selection;  // default: mse (regression) or mrr (click)
  double init_scale = 1.0;
  double fm_lambda_linear = -1.0;  // < 0 reuses lambda
  AdamConfig adam;
};

SelectionMetric resolve_selection(const TrainConfig& config);
// FNV-1a hash of the canonical config serialization, as a hex string.
std::string config_fingerprint(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 0 is the evaluation of the initial parameters
  double train_objective = 0.0;
  std::vector<MetricReport> validation;
};

struct TrainResult {
  AnyModel best_model;
  std::size_t best_epoch = 0;
  double best_value = 0.0;
  SelectionMetric selection = SelectionMetric::mse;
  std::vector<EpochRecord> history;
  std::size_t epochs_run = 0;
  bool early_stopped = false;
  std::string fingerprint;
};

const MetricReport* find_metric(const std::vector<MetricReport>& reports,
                                std::string_view name);

// Seeded-shuffle minibatch epochs with a per-epoch validation pass; the
// best-validation snapshot (epoch 0 included) is returned together with
// the full metric history. `warm_start` must structurally match the
// configured variant; a semb1 checkpoint may warm-start a semb2 run.
TrainResult train(const TrainConfig& config, const RatingDataset& data,
                  const AnyModel* warm_start = nullptr);
TrainResult train(const TrainConfig& config, const SessionDataset& data,
                  const AnyModel* warm_start = nullptr);

// ---------------------------------------------------------------------------

struct SweepGrid {
  TrainConfig base;
  std::vector<std::size_t> k_values;
  std::vector<double> lambda_values;
  std::vector<double> lr_values;  // empty keeps base.lr
  std::size_t threads = 1;
};

struct SweepRow {
  TrainConfig config;
  bool ok = false;
  std::string error;
  MetricReport metric;  // selection metric of the run's best snapshot
};

struct SweepResult {
  std::vector<SweepRow> ranked;  // successes first, best to worst
  std::optional<AnyModel> best_model;
  SelectionMetric selection = SelectionMetric::mse;
};

SweepResult sweep(const SweepGrid& grid, const RatingDataset& data);
SweepResult sweep(const SweepGrid& grid, const SessionDataset& data);

// Ranked sweep table as CSV (config axes, then metric and its standard
// error); failed points are skipped. Returns the number of data rows.
std::size_t write_sweep_csv(const std::filesystem::path& path, const SweepResult& result);

}  // namespace semb
