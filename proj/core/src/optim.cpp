#include "semb/optim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "semb/data.hpp"

namespace semb {

ParamsRef params_ref(RegressionModel& model) { return {&model.table, nullptr, nullptr, nullptr}; }
ParamsRef params_ref(ClickModel& model) {
  return {&model.table, &model.w1, &model.w2, nullptr};
}
ParamsRef params_ref(FactorizationMachineModel& model) {
  return {nullptr, nullptr, nullptr, &model};
}

void AdamState::update(double g, double bc1, double bc2, Scalar& s, double& theta) {
  s.m = config_.beta1 * s.m + (1.0 - config_.beta1) * g;
  s.v = config_.beta2 * s.v + (1.0 - config_.beta2) * g * g;
  theta -= config_.lr * (s.m / bc1) / (std::sqrt(s.v / bc2) + config_.eps);
}

void AdamState::step(ParamsRef params, const GradientAccumulator& grads) {
  const Schema* schema = params.table ? &params.table->schema()
                        : params.fm  ? &params.fm->schema
                                     : nullptr;
  if (schema) {
    if (auto bad = grads.find_non_finite(*schema)) {
      throw GradientError("non-finite gradient for " + *bad);
    }
  }
  ++t_;
  const double bc1 = 1.0 - std::pow(config_.beta1, double(t_));
  const double bc2 = 1.0 - std::pow(config_.beta2, double(t_));

  if (!grads.vectors().empty()) {
    if (!params.table) throw std::invalid_argument("adam_step: gradients carry table entries but params have no table");
    for (const auto& [key, g] : grads.vectors()) {
      auto [it, inserted] = vec_.try_emplace(key);
      if (inserted) {
        it->second.m.assign(k_, 0.0);
        it->second.v.assign(k_, 0.0);
      }
      Moments& mom = it->second;
      auto theta = params.table->at_mut(key.family, key.id);
      for (std::size_t d = 0; d < k_; ++d) {
        mom.m[d] = config_.beta1 * mom.m[d] + (1.0 - config_.beta1) * g[d];
        mom.v[d] = config_.beta2 * mom.v[d] + (1.0 - config_.beta2) * g[d] * g[d];
        theta[d] -= config_.lr * (mom.m[d] / bc1) / (std::sqrt(mom.v[d] / bc2) + config_.eps);
      }
    }
  }
  if (grads.use_scalars && params.w1 && params.w2) {
    update(grads.w1, bc1, bc2, w1_, *params.w1);
    update(grads.w2, bc1, bc2, w2_, *params.w2);
  }
  if (const FmGradBlock* f = grads.fm(); f && params.fm) {
    FactorizationMachineModel& fm = *params.fm;
    update(f->w0, bc1, bc2, fm_w0_, fm.w0);
    if (fm_linear_m_.empty()) {
      fm_linear_m_.assign(f->linear.size(), 0.0);
      fm_linear_v_.assign(f->linear.size(), 0.0);
      fm_latent_m_.assign(f->latent.size(), 0.0);
      fm_latent_v_.assign(f->latent.size(), 0.0);
    }
    for (std::size_t j = 0; j < f->touched.size(); ++j) {
      if (!f->touched[j]) continue;
      {
        const double g = f->linear[j];
        fm_linear_m_[j] = config_.beta1 * fm_linear_m_[j] + (1.0 - config_.beta1) * g;
        fm_linear_v_[j] = config_.beta2 * fm_linear_v_[j] + (1.0 - config_.beta2) * g * g;
        fm.linear[j] -= config_.lr * (fm_linear_m_[j] / bc1) /
                        (std::sqrt(fm_linear_v_[j] / bc2) + config_.eps);
      }
      for (std::size_t d = j * k_; d < (j + 1) * k_; ++d) {
        const double g = f->latent[d];
        fm_latent_m_[d] = config_.beta1 * fm_latent_m_[d] + (1.0 - config_.beta1) * g;
        fm_latent_v_[d] = config_.beta2 * fm_latent_v_[d] + (1.0 - config_.beta2) * g * g;
        fm.latent[d] -= config_.lr * (fm_latent_m_[d] / bc1) /
                        (std::sqrt(fm_latent_v_[d] / bc2) + config_.eps);
      }
    }
  }
}

void adam_step(AdamState& state, ParamsRef params, const GradientAccumulator& grads) {
  state.step(params, grads);
}

// ---------------------------------------------------------------------------

std::string_view to_string(SelectionMetric m) {
  switch (m) {
    case SelectionMetric::mse: return "mse";
    case SelectionMetric::mrr: return "mrr";
    case SelectionMetric::nll: return "nll";
  }
  return "?";
}

SelectionMetric selection_metric_from_string(std::string_view s) {
  if (s == "mse") return SelectionMetric::mse;
  if (s == "mrr") return SelectionMetric::mrr;
  if (s == "nll") return SelectionMetric::nll;
  throw std::invalid_argument("unknown selection metric '" + std::string(s) +
                              "' (expected mse|mrr|nll)");
}

bool selection_is_minimized(SelectionMetric m) { return m != SelectionMetric::mrr; }

SelectionMetric resolve_selection(const TrainConfig& config) {
  const bool regression = config.variant == ModelVariant::regression;
  if (!config.selection) {
    return regression ? SelectionMetric::mse : SelectionMetric::mrr;
  }
  const SelectionMetric sel = *config.selection;
  if (regression != (sel == SelectionMetric::mse)) {
    throw std::invalid_argument("selection metric '" + std::string(to_string(sel)) +
                                "' does not apply to variant '" +
                                std::string(to_string(config.variant)) + "'");
  }
  return sel;
}

std::string config_fingerprint(const TrainConfig& config) {
  std::string canon;
  canon += "variant=" + std::string(to_string(config.variant));
  canon += ";k=" + std::to_string(config.k);
  canon += ";lambda=" + format_double(config.lambda);
  canon += ";lr=" + format_double(config.lr);
  canon += ";epochs=" + std::to_string(config.epochs);
  canon += ";batch=" + std::to_string(config.batch_size);
  canon += ";seed=" + std::to_string(config.seed);
  canon += ";patience=" + std::to_string(config.patience);
  canon += ";selection=" + std::string(to_string(resolve_selection(config)));
  canon += ";init_scale=" + format_double(config.init_scale);
  canon += ";fm_lambda_linear=" + format_double(config.fm_lambda_linear);
  canon += ";beta1=" + format_double(config.adam.beta1);
  canon += ";beta2=" + format_double(config.adam.beta2);
  canon += ";eps=" + format_double(config.adam.eps);

  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const MetricReport* find_metric(const std::vector<MetricReport>& reports,
                                std::string_view name) {
  for (const MetricReport& r : reports) {
    if (r.metric == name) return &r;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// task adapters

namespace {

constexpr std::uint64_t kShuffleSalt = 0xda3e39cb94b95bdbULL;

struct RegressionTask {
  using Record = SlateRatingRecord;
  using Dataset = RatingDataset;
  using Model = RegressionModel;
  static constexpr std::size_t kDefaultBatch = 256;

  static Model make(const TrainConfig& cfg, const Schema& schema) {
    return make_regression_model(schema, cfg.k, cfg.lambda, cfg.seed, cfg.init_scale);
  }
  static Model adapt(const AnyModel& warm, const TrainConfig& cfg) {
    const auto* m = std::get_if<RegressionModel>(&warm);
    if (!m) throw std::invalid_argument("warm start is not a regression model");
    if (m->k() != cfg.k) throw std::invalid_argument("warm start dimension mismatch");
    Model out = *m;
    out.lambda = cfg.lambda;
    return out;
  }
  static GradientAccumulator gradients(const Model& m, std::span<const Record> batch,
                                       double* loss) {
    return regression_gradients(m, batch, loss);
  }
  static double loss(const Model& m, std::span<const Record> batch) {
    return mse_loss(m, batch);
  }
  static std::vector<MetricReport> evaluate(const Model& m, std::span<const Record> records,
                                            const std::string& fp) {
    return {eval_mse(m, records, fp)};
  }
};

struct ClickTask {
  using Record = SessionRecord;
  using Dataset = SessionDataset;
  using Model = ClickModel;
  static constexpr std::size_t kDefaultBatch = 128;

  static ClickVariant variant(const TrainConfig& cfg) {
    return cfg.variant == ModelVariant::semb2 ? ClickVariant::semb2 : ClickVariant::semb1;
  }
  static Model make(const TrainConfig& cfg, const Schema& schema) {
    return make_click_model(schema, variant(cfg), cfg.k, cfg.lambda, cfg.seed, cfg.init_scale);
  }
  static Model adapt(const AnyModel& warm, const TrainConfig& cfg) {
    const auto* m = std::get_if<ClickModel>(&warm);
    if (!m) throw std::invalid_argument("warm start is not a click model");
    if (m->k() != cfg.k) throw std::invalid_argument("warm start dimension mismatch");
    Model out = *m;  // a semb1 checkpoint warm-starts semb2 with w1 = w2 = 0
    out.variant = variant(cfg);
    out.lambda = cfg.lambda;
    return out;
  }
  static GradientAccumulator gradients(const Model& m, std::span<const Record> batch,
                                       double* loss) {
    return click_gradients(m, batch, loss);
  }
  static double loss(const Model& m, std::span<const Record> batch) {
    return click_loss(m, batch);
  }
  static std::vector<MetricReport> evaluate(const Model& m, std::span<const Record> records,
                                            const std::string& fp) {
    return {eval_nll(m, records, fp), eval_mrr(m, records, fp)};
  }
};

struct FmTask {
  using Record = SessionRecord;
  using Dataset = SessionDataset;
  using Model = FactorizationMachineModel;
  static constexpr std::size_t kDefaultBatch = 128;

  static Model make(const TrainConfig& cfg, const Schema& schema) {
    const double l_lin = cfg.fm_lambda_linear < 0 ? cfg.lambda : cfg.fm_lambda_linear;
    return make_fm_model(schema, cfg.k, l_lin, cfg.lambda, cfg.seed, cfg.init_scale);
  }
  static Model adapt(const AnyModel& warm, const TrainConfig& cfg) {
    const auto* m = std::get_if<FactorizationMachineModel>(&warm);
    if (!m) throw std::invalid_argument("warm start is not an FM model");
    if (m->k != cfg.k) throw std::invalid_argument("warm start dimension mismatch");
    Model out = *m;
    out.lambda_latent = cfg.lambda;
    out.lambda_linear = cfg.fm_lambda_linear < 0 ? cfg.lambda : cfg.fm_lambda_linear;
    return out;
  }
  static GradientAccumulator gradients(const Model& m, std::span<const Record> batch,
                                       double* loss) {
    return fm_gradients(m, batch, loss);
  }
  static double loss(const Model& m, std::span<const Record> batch) {
    return fm_loss(m, batch);
  }
  static std::vector<MetricReport> evaluate(const Model& m, std::span<const Record> records,
                                            const std::string& fp) {
    return {eval_nll(m, records, fp), eval_mrr(m, records, fp)};
  }
};

template <class Task>
TrainResult train_impl(const TrainConfig& cfg, const typename Task::Dataset& data,
                       const AnyModel* warm_start) {
  using Record = typename Task::Record;
  if (data.train.empty() || data.validation.empty()) {
    throw std::invalid_argument("train: dataset needs nonempty train and validation splits");
  }
  const SelectionMetric sel = resolve_selection(cfg);
  const std::string sel_name(to_string(sel));
  const bool minimize = selection_is_minimized(sel);

  typename Task::Model model =
      warm_start ? Task::adapt(*warm_start, cfg) : Task::make(cfg, data.schema());
  AdamConfig adam_config = cfg.adam;
  adam_config.lr = cfg.lr;
  AdamState adam(cfg.k, adam_config);
  const ParamsRef ref = params_ref(model);
  const std::size_t batch = cfg.batch_size ? cfg.batch_size : Task::kDefaultBatch;

  TrainResult result{AnyModel{model}, 0, 0.0, sel, {}, 0, false, config_fingerprint(cfg)};

  auto record_epoch = [&](std::size_t epoch, double objective) {
    EpochRecord er{epoch, objective,
                   Task::evaluate(model, std::span<const Record>(data.validation),
                                  result.fingerprint)};
    for (const MetricReport& r : er.validation) {
      if (!std::isfinite(r.estimate)) {
        throw DivergenceError(epoch, "validation " + r.metric + " non-finite at epoch " +
                                         std::to_string(epoch));
      }
    }
    const MetricReport* r = find_metric(er.validation, sel_name);
    const double value = r->estimate;
    result.history.push_back(std::move(er));
    return value;
  };

  const std::span<const Record> full_train(data.train);
  result.best_value =
      record_epoch(0, Task::loss(model, full_train) / double(data.train.size()));
  result.best_epoch = 0;

  std::vector<Record> pool = data.train;
  std::mt19937_64 shuffle_rng(cfg.seed ^ kShuffleSalt);
  std::size_t stale = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(pool.begin(), pool.end(), shuffle_rng);
    double total = 0.0;
    for (std::size_t start = 0; start < pool.size(); start += batch) {
      const std::size_t n = std::min(batch, pool.size() - start);
      double batch_loss = 0.0;
      const GradientAccumulator grads =
          Task::gradients(model, std::span<const Record>(pool).subspan(start, n), &batch_loss);
      adam.step(ref, grads);
      total += batch_loss;
    }
    result.epochs_run = epoch;
    const double value = record_epoch(epoch, total / double(pool.size()));
    const bool improved = minimize ? value < result.best_value : value > result.best_value;
    if (improved) {
      result.best_value = value;
      result.best_epoch = epoch;
      result.best_model = AnyModel{model};
      stale = 0;
    } else if (cfg.patience != 0 && ++stale >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

void validate_config(const TrainConfig& cfg) {
  if (cfg.k == 0) throw std::invalid_argument("k must be >= 1");
  if (!(cfg.lambda >= 0.0)) throw std::invalid_argument("lambda must be >= 0");
  if (!(cfg.lr > 0.0) || !std::isfinite(cfg.lr)) {
    throw std::invalid_argument("learning rate must be positive");
  }
  resolve_selection(cfg);
}

template <class Dataset>
SweepResult sweep_impl(const SweepGrid& grid, const Dataset& data) {
  if (grid.k_values.empty() || grid.lambda_values.empty()) {
    throw std::invalid_argument("sweep: k_values and lambda_values must be nonempty");
  }
  const std::vector<double> lrs =
      grid.lr_values.empty() ? std::vector<double>{grid.base.lr} : grid.lr_values;

  std::vector<TrainConfig> configs;
  for (std::size_t k : grid.k_values) {
    for (double lambda : grid.lambda_values) {
      for (double lr : lrs) {
        TrainConfig cfg = grid.base;
        cfg.k = k;
        cfg.lambda = lambda;
        cfg.lr = lr;
        configs.push_back(cfg);
      }
    }
  }

  struct JobOut {
    bool ok = false;
    std::string error;
    MetricReport metric;
    std::optional<AnyModel> model;
  };
  std::vector<JobOut> outs(configs.size());
  const std::string sel_name(to_string(resolve_selection(grid.base)));

  auto run_one = [&](std::size_t i) {
    try {
      validate_config(configs[i]);
      TrainResult tr = train(configs[i], data);
      const MetricReport* r = find_metric(tr.history[tr.best_epoch].validation, sel_name);
      outs[i].metric = *r;
      outs[i].model = std::move(tr.best_model);
      outs[i].ok = true;
    } catch (const std::exception& e) {
      outs[i].error = e.what();
    }
  };

  const std::size_t workers =
      std::max<std::size_t>(1, std::min(grid.threads, configs.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) run_one(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < configs.size(); i = next.fetch_add(1)) {
          run_one(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  SweepResult result;
  result.selection = resolve_selection(grid.base);
  const bool minimize = selection_is_minimized(result.selection);

  std::vector<std::size_t> order(configs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (outs[a].ok != outs[b].ok) return outs[a].ok;
    if (!outs[a].ok) return false;  // failures keep grid order
    const double va = outs[a].metric.estimate, vb = outs[b].metric.estimate;
    return minimize ? va < vb : va > vb;
  });

  for (std::size_t i : order) {
    result.ranked.push_back(SweepRow{configs[i], outs[i].ok, outs[i].error, outs[i].metric});
  }
  if (!order.empty() && outs[order.front()].ok) {
    result.best_model = std::move(outs[order.front()].model);
  }
  return result;
}

}  // namespace

TrainResult train(const TrainConfig& config, const RatingDataset& data,
                  const AnyModel* warm_start) {
  if (config.variant != ModelVariant::regression) {
    throw std::invalid_argument("rating datasets train the regression variant only");
  }
  return train_impl<RegressionTask>(config, data, warm_start);
}

TrainResult train(const TrainConfig& config, const SessionDataset& data,
                  const AnyModel* warm_start) {
  switch (config.variant) {
    case ModelVariant::semb1:
    case ModelVariant::semb2:
      return train_impl<ClickTask>(config, data, warm_start);
    case ModelVariant::fm:
      return train_impl<FmTask>(config, data, warm_start);
    default:
      throw std::invalid_argument("session datasets train semb1, semb2, or fm");
  }
}

SweepResult sweep(const SweepGrid& grid, const RatingDataset& data) {
  return sweep_impl(grid, data);
}

SweepResult sweep(const SweepGrid& grid, const SessionDataset& data) {
  return sweep_impl(grid, data);
}

std::size_t write_sweep_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write sweep table " + path.string());
  const std::string sel(to_string(result.selection));
  out << "k,lambda,lr," << sel << ',' << sel << "_se\n";
  std::size_t rows = 0;
  for (const SweepRow& row : result.ranked) {
    if (!row.ok) continue;
    out << row.config.k << ',' << format_double(row.config.lambda) << ','
        << format_double(row.config.lr) << ',' << format_double(row.metric.estimate) << ','
        << format_double(row.metric.se) << '\n';
    ++rows;
  }
  if (!out) throw DataError("write failed for " + path.string());
  return rows;
}

}  // namespace semb
