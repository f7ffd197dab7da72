#include "cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>

#include "CLI11.hpp"
#include "semb/checkpoint.hpp"
#include "semb/data.hpp"
#include "semb/optim.hpp"
#include "semb/synth.hpp"

namespace semb::cli {
namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kOutputDirEnv = "SEMB_OUTPUT_DIR";

json load_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return j;
}

struct RunConfig {
  TrainConfig train;
  std::string data_dir;
  std::string out_dir;
  std::string init_checkpoint;
  std::size_t threads = 1;  // sweep only
};

void apply_config_json(const json& j, RunConfig& rc) {
  if (j.contains("variant")) {
    rc.train.variant = model_variant_from_string(j["variant"].get<std::string>());
  }
  if (j.contains("k")) rc.train.k = j["k"].get<std::size_t>();
  if (j.contains("lambda")) rc.train.lambda = j["lambda"].get<double>();
  if (j.contains("lr")) rc.train.lr = j["lr"].get<double>();
  if (j.contains("epochs")) rc.train.epochs = j["epochs"].get<std::size_t>();
  if (j.contains("batch")) rc.train.batch_size = j["batch"].get<std::size_t>();
  if (j.contains("seed")) rc.train.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("patience")) rc.train.patience = j["patience"].get<std::size_t>();
  if (j.contains("selection")) {
    rc.train.selection = selection_metric_from_string(j["selection"].get<std::string>());
  }
  if (j.contains("init_scale")) rc.train.init_scale = j["init_scale"].get<double>();
  if (j.contains("fm_lambda_linear")) {
    rc.train.fm_lambda_linear = j["fm_lambda_linear"].get<double>();
  }
  if (j.contains("lr_beta1")) rc.train.adam.beta1 = j["lr_beta1"].get<double>();
  if (j.contains("lr_beta2")) rc.train.adam.beta2 = j["lr_beta2"].get<double>();
  if (j.contains("data")) rc.data_dir = j["data"].get<std::string>();
  if (j.contains("out")) rc.out_dir = j["out"].get<std::string>();
  if (j.contains("init")) rc.init_checkpoint = j["init"].get<std::string>();
  if (j.contains("threads")) rc.threads = j["threads"].get<std::size_t>();
}

json train_config_to_json(const TrainConfig& c, const std::string& data_dir,
                          const std::string& out_dir) {
  json j{{"variant", std::string(to_string(c.variant))},
         {"k", c.k},
         {"lambda", c.lambda},
         {"lr", c.lr},
         {"epochs", c.epochs},
         {"batch", c.batch_size},
         {"seed", c.seed},
         {"patience", c.patience},
         {"selection", std::string(to_string(resolve_selection(c)))},
         {"init_scale", c.init_scale},
         {"fm_lambda_linear", c.fm_lambda_linear}};
  if (!data_dir.empty()) j["data"] = data_dir;
  if (!out_dir.empty()) j["out"] = out_dir;
  return j;
}

fs::path resolve_out_dir(const std::string& flag_out, const std::string& config_out) {
  if (!flag_out.empty()) return flag_out;
  if (!config_out.empty()) return config_out;
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return "semb_out";
}

void write_history_csv(const fs::path& path, const TrainResult& result) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write history " + path.string());
  out << "epoch,train_objective";
  for (const MetricReport& r : result.history.front().validation) {
    out << ',' << r.metric << ',' << r.metric << "_se";
  }
  out << '\n';
  for (const EpochRecord& e : result.history) {
    out << e.epoch << ',' << format_double(e.train_objective);
    for (const MetricReport& r : e.validation) {
      out << ',' << format_double(r.estimate) << ',' << format_double(r.se);
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

void write_metrics_json(const fs::path& path, const std::vector<MetricReport>& reports) {
  json arr = json::array();
  for (const MetricReport& r : reports) arr.push_back(json::parse(to_json_string(r)));
  std::ofstream out(path);
  if (!out) throw DataError("cannot write metrics " + path.string());
  out << arr.dump(2) << '\n';
}

// First schema difference between checkpoint and dataset, or empty string.
std::string schema_mismatch(const Schema& ckpt, const Schema& dataset) {
  for (const FeatureSpec& spec : ckpt.specs()) {
    const FeatureSpec* other = dataset.find(spec.family);
    if (!other) return "family '" + spec.family + "' missing from the dataset schema";
    if (!(spec == *other)) return "family '" + spec.family + "' differs between checkpoint and dataset";
  }
  for (const FeatureSpec& spec : dataset.specs()) {
    if (!ckpt.find(spec.family)) {
      return "family '" + spec.family + "' missing from the checkpoint schema";
    }
  }
  return {};
}

const Schema& model_schema(const AnyModel& model) {
  if (const auto* r = std::get_if<RegressionModel>(&model)) return r->table.schema();
  if (const auto* c = std::get_if<ClickModel>(&model)) return c->table.schema();
  return std::get<FactorizationMachineModel>(model).schema;
}

// ---------------------------------------------------------------------------
// train

int cmd_train(const RunConfig& rc) {
  if (rc.data_dir.empty()) throw DataError("train: no dataset directory (config 'data' or --data)");
  const fs::path out_dir = resolve_out_dir(rc.out_dir, "");
  fs::create_directories(out_dir);

  std::optional<AnyModel> warm;
  if (!rc.init_checkpoint.empty()) warm = load_checkpoint(rc.init_checkpoint).model;

  TrainResult result = [&] {
    if (rc.train.variant == ModelVariant::regression) {
      const RatingDataset data = load_slate_ratings(rc.data_dir);
      return train(rc.train, data, warm ? &*warm : nullptr);
    }
    const SessionDataset data = load_sessions(rc.data_dir);
    return train(rc.train, data, warm ? &*warm : nullptr);
  }();

  const auto& best_val = result.history[result.best_epoch].validation;
  const MetricReport* best_metric = find_metric(best_val, to_string(result.selection));
  // the checkpoint records the run's semantics, not its output placement
  const json config_json = train_config_to_json(rc.train, rc.data_dir, "");

  save_checkpoint(out_dir / "checkpoint.json",
                  Checkpoint{result.best_model, result.fingerprint, config_json.dump(),
                             best_metric ? std::optional<MetricReport>(*best_metric)
                                         : std::nullopt});
  write_history_csv(out_dir / "history.csv", result);
  write_metrics_json(out_dir / "validation_metrics.json", best_val);

  json report{{"config", train_config_to_json(rc.train, rc.data_dir, out_dir.string())},
              {"fingerprint", result.fingerprint},
              {"best_epoch", result.best_epoch},
              {"best_value", result.best_value},
              {"selection", std::string(to_string(result.selection))},
              {"epochs_run", result.epochs_run},
              {"early_stopped", result.early_stopped}};
  std::ofstream rep(out_dir / "run_report.json");
  if (!rep) throw DataError("cannot write run report");
  rep << report.dump(2) << '\n';

  std::cout << "trained " << to_string(rc.train.variant) << ": best "
            << to_string(result.selection) << " " << format_double(result.best_value)
            << " at epoch " << result.best_epoch << " (" << result.epochs_run
            << " epochs run)\n"
            << "outputs in " << out_dir.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// eval

template <class Record>
const std::vector<Record>& pick_split(const DatasetSplit<Record>& data,
                                      const std::string& split) {
  if (split == "train") return data.train;
  if (split == "validation") return data.validation;
  if (split == "test") return data.test;
  throw DataError("unknown split '" + split + "' (expected train|validation|test)");
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& split, const std::string& metrics_csv,
             const std::string& out_flag) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const ModelVariant variant = variant_of(ckpt.model);

  std::vector<std::string> names;
  {
    std::string cur;
    for (char c : metrics_csv) {
      if (c == ',') {
        if (!cur.empty()) names.push_back(cur);
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) names.push_back(cur);
  }
  if (names.empty()) {
    names = variant == ModelVariant::regression ? std::vector<std::string>{"mse"}
                                                : std::vector<std::string>{"mrr", "ndcg"};
  }
  const std::vector<std::string> valid =
      variant == ModelVariant::regression ? std::vector<std::string>{"mse"}
                                          : std::vector<std::string>{"mrr", "ndcg", "nll"};
  for (const std::string& n : names) {
    if (std::find(valid.begin(), valid.end(), n) == valid.end()) {
      std::string list;
      for (const std::string& v : valid) list += (list.empty() ? "" : ", ") + v;
      throw DataError("unknown metric '" + n + "' for a " +
                      std::string(to_string(variant)) + " checkpoint; valid: " + list);
    }
  }

  std::vector<MetricReport> reports;
  if (variant == ModelVariant::regression) {
    const RatingDataset data = load_slate_ratings(data_dir);
    if (auto m = schema_mismatch(model_schema(ckpt.model), data.schema()); !m.empty()) {
      throw DataError("schema mismatch: " + m);
    }
    const auto& records = pick_split(data, split);
    const auto& model = std::get<RegressionModel>(ckpt.model);
    reports.push_back(eval_mse(model, records, ckpt.fingerprint));
  } else {
    const SessionDataset data = load_sessions(data_dir);
    if (auto m = schema_mismatch(model_schema(ckpt.model), data.schema()); !m.empty()) {
      throw DataError("schema mismatch: " + m);
    }
    const auto& records = pick_split(data, split);
    for (const std::string& n : names) {
      auto run = [&](const auto& model) {
        if (n == "mrr") return eval_mrr(model, records, ckpt.fingerprint);
        if (n == "ndcg") return eval_ndcg(model, records, ckpt.fingerprint);
        return eval_nll(model, records, ckpt.fingerprint);
      };
      if (const auto* c = std::get_if<ClickModel>(&ckpt.model)) {
        reports.push_back(run(*c));
      } else {
        reports.push_back(run(std::get<FactorizationMachineModel>(ckpt.model)));
      }
    }
  }

  for (const MetricReport& r : reports) std::cout << to_json_string(r) << '\n';
  const fs::path out_dir = resolve_out_dir(out_flag, "");
  fs::create_directories(out_dir);
  write_metrics_json(out_dir / "metrics.json", reports);
  return 0;
}

// ---------------------------------------------------------------------------
// sweep

int cmd_sweep(const RunConfig& rc, const json& grid_json) {
  if (rc.data_dir.empty()) throw DataError("sweep: no dataset directory (config 'data' or --data)");
  SweepGrid grid;
  grid.base = rc.train;
  grid.threads = rc.threads;
  if (grid_json.contains("k_values")) {
    grid.k_values = grid_json["k_values"].get<std::vector<std::size_t>>();
  }
  if (grid_json.contains("lambda_values")) {
    grid.lambda_values = grid_json["lambda_values"].get<std::vector<double>>();
  }
  if (grid_json.contains("lr_values")) {
    grid.lr_values = grid_json["lr_values"].get<std::vector<double>>();
  }
  if (grid.k_values.empty()) grid.k_values = {grid.base.k};
  if (grid.lambda_values.empty()) grid.lambda_values = {grid.base.lambda};

  const fs::path out_dir = resolve_out_dir(rc.out_dir, "");
  fs::create_directories(out_dir);

  const SweepResult result = [&] {
    if (grid.base.variant == ModelVariant::regression) {
      const RatingDataset data = load_slate_ratings(rc.data_dir);
      return sweep(grid, data);
    }
    const SessionDataset data = load_sessions(rc.data_dir);
    return sweep(grid, data);
  }();

  const std::string sel(to_string(result.selection));
  std::ofstream csv(out_dir / "sweep.csv");
  if (!csv) throw DataError("cannot write sweep.csv");
  csv << "k,lambda,lr," << sel << ',' << sel << "_se\n";
  std::size_t ok_rows = 0;
  for (const SweepRow& row : result.ranked) {
    if (!row.ok) {
      std::cerr << "sweep point (k=" << row.config.k << ", lambda="
                << format_double(row.config.lambda) << ", lr=" << format_double(row.config.lr)
                << ") failed: " << row.error << '\n';
      continue;
    }
    csv << row.config.k << ',' << format_double(row.config.lambda) << ','
        << format_double(row.config.lr) << ',' << format_double(row.metric.estimate) << ','
        << format_double(row.metric.se) << '\n';
    ++ok_rows;
  }
  csv.close();

  if (result.best_model) {
    const SweepRow& best = result.ranked.front();
    save_checkpoint(out_dir / "best_checkpoint.json",
                    Checkpoint{*result.best_model, config_fingerprint(best.config),
                               train_config_to_json(best.config, rc.data_dir, "").dump(),
                               best.metric});
  }
  std::cout << "sweep finished: " << ok_rows << '/' << result.ranked.size()
            << " runs succeeded; table in " << (out_dir / "sweep.csv").string() << '\n';
  return ok_rows > 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// synth

int cmd_synth(const SyntheticConfig& cfg, const std::string& out_flag) {
  const fs::path out_dir = resolve_out_dir(out_flag, "");
  fs::create_directories(out_dir);
  if (cfg.kind == SynthKind::regression) {
    SyntheticRegression synth = generate_synthetic_regression(cfg);
    save_slate_ratings(out_dir, synth.data);
    save_checkpoint(out_dir / "planted_checkpoint.json",
                    Checkpoint{AnyModel{std::move(synth.planted)}, {}, {}, std::nullopt});
    std::cout << "wrote regression dataset: " << synth.data.train.size() << '/'
              << synth.data.validation.size() << '/' << synth.data.test.size()
              << " records to " << out_dir.string() << '\n';
  } else {
    SyntheticClick synth = generate_synthetic_click(cfg);
    save_sessions(out_dir, synth.data);
    save_checkpoint(out_dir / "planted_checkpoint.json",
                    Checkpoint{AnyModel{std::move(synth.planted)}, {}, {}, std::nullopt});
    std::cout << "wrote click dataset: " << synth.data.train.size() << '/'
              << synth.data.validation.size() << '/' << synth.data.test.size()
              << " records to " << out_dir.string() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------------------
// export

int cmd_export(const std::string& checkpoint_path, const std::string& data_dir,
               const std::string& split, const std::string& out_path) {
  const Checkpoint ckpt = load_checkpoint(checkpoint_path);
  const auto* model = std::get_if<ClickModel>(&ckpt.model);
  if (!model) throw DataError("export requires a semb1 or semb2 checkpoint");
  const SessionDataset data = load_sessions(data_dir);
  if (auto m = schema_mismatch(model_schema(ckpt.model), data.schema()); !m.empty()) {
    throw DataError("schema mismatch: " + m);
  }
  const auto& records = pick_split(data, split);
  const std::size_t rows = export_features(*model, records, out_path);
  std::cout << "exported " << rows << " rows to " << out_path << '\n';
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"semb: learn and evaluate hierarchical slate embeddings"};
  app.require_subcommand(1);

  // ---- train -------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a model from a JSON config");
  std::string t_config, t_data, t_out, t_variant, t_selection, t_init;
  std::size_t t_k = 0, t_epochs = 0, t_batch = 0, t_patience = 0;
  double t_lambda = 0, t_lr = 0, t_init_scale = 0;
  std::uint64_t t_seed = 0;
  train_cmd->add_option("--config", t_config, "JSON run config");
  train_cmd->add_option("--data", t_data, "dataset directory");
  train_cmd->add_option("--out", t_out, "output directory");
  train_cmd->add_option("--variant", t_variant, "regression|semb1|semb2|fm");
  train_cmd->add_option("--k", t_k, "latent dimension");
  train_cmd->add_option("--lambda", t_lambda, "l2 strength");
  train_cmd->add_option("--lr", t_lr, "ADAM learning rate");
  train_cmd->add_option("--epochs", t_epochs, "epoch budget");
  train_cmd->add_option("--batch", t_batch, "minibatch size");
  train_cmd->add_option("--seed", t_seed, "run seed");
  train_cmd->add_option("--patience", t_patience, "early-stop patience (0 disables)");
  train_cmd->add_option("--selection", t_selection, "validation metric: mse|mrr|nll");
  train_cmd->add_option("--init-scale", t_init_scale, "init sd multiplier");
  train_cmd->add_option("--init", t_init, "warm-start checkpoint");

  // ---- eval --------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset");
  std::string e_ckpt, e_data, e_split = "test", e_metrics, e_out;
  eval_cmd->add_option("--checkpoint", e_ckpt, "checkpoint file")->required();
  eval_cmd->add_option("--data", e_data, "dataset directory")->required();
  eval_cmd->add_option("--split", e_split, "train|validation|test (default test)");
  eval_cmd->add_option("--metrics", e_metrics, "comma-separated metric names");
  eval_cmd->add_option("--out", e_out, "directory for metrics.json");

  // ---- sweep -------------------------------------------------------------
  auto* sweep_cmd = app.add_subcommand("sweep", "grid-search over k / lambda / lr");
  std::string s_config, s_data, s_out;
  std::size_t s_threads = 0;
  sweep_cmd->add_option("--config", s_config, "JSON grid config")->required();
  sweep_cmd->add_option("--data", s_data, "dataset directory");
  sweep_cmd->add_option("--out", s_out, "output directory");
  sweep_cmd->add_option("--threads", s_threads, "parallel training runs");

  // ---- synth -------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted synthetic dataset");
  std::string y_kind = "regression", y_out;
  SyntheticConfig y_cfg;
  double y_val_frac = 0.1, y_train_frac = 0.8;
  synth_cmd->add_option("--kind", y_kind, "regression|click")->required();
  synth_cmd->add_option("--out", y_out, "dataset output directory");
  synth_cmd->add_option("--records", y_cfg.records, "total record count");
  synth_cmd->add_option("--seed", y_cfg.seed, "generator seed");
  synth_cmd->add_option("--k", y_cfg.k, "planted dimension");
  synth_cmd->add_option("--scale", y_cfg.planted_scale, "planted parameter scale");
  synth_cmd->add_option("--users", y_cfg.users, "user vocabulary (regression)");
  synth_cmd->add_option("--movies", y_cfg.movies, "movie vocabulary (regression)");
  synth_cmd->add_option("--noise", y_cfg.noise, "rating noise sd (regression)");
  synth_cmd->add_option("--items", y_cfg.items_per_slate, "items per slate (click)");
  synth_cmd->add_option("--item-vocab", y_cfg.item_vocab, "item vocabulary (click)");
  synth_cmd->add_option("--action-types", y_cfg.action_types, "action-type vocabulary");
  synth_cmd->add_option("--action-item-vocab", y_cfg.action_item_vocab,
                        "interacted-item vocabulary");
  synth_cmd->add_option("--max-actions", y_cfg.max_actions, "max session steps");
  synth_cmd->add_option("--train-frac", y_train_frac, "train fraction (default 0.8)");
  synth_cmd->add_option("--val-frac", y_val_frac, "validation fraction (default 0.1)");

  // ---- export ------------------------------------------------------------
  auto* export_cmd = app.add_subcommand("export", "export per-(session,item) model features");
  std::string x_ckpt, x_data, x_split = "test", x_out;
  export_cmd->add_option("--checkpoint", x_ckpt, "checkpoint file")->required();
  export_cmd->add_option("--data", x_data, "dataset directory")->required();
  export_cmd->add_option("--split", x_split, "train|validation|test (default test)");
  export_cmd->add_option("--out", x_out, "output CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (train_cmd->parsed()) {
      RunConfig rc;
      if (!t_config.empty()) apply_config_json(load_json_file(t_config), rc);
      if (train_cmd->count("--variant")) rc.train.variant = model_variant_from_string(t_variant);
      if (train_cmd->count("--data")) rc.data_dir = t_data;
      if (train_cmd->count("--out")) rc.out_dir = t_out;
      if (train_cmd->count("--k")) rc.train.k = t_k;
      if (train_cmd->count("--lambda")) rc.train.lambda = t_lambda;
      if (train_cmd->count("--lr")) rc.train.lr = t_lr;
      if (train_cmd->count("--epochs")) rc.train.epochs = t_epochs;
      if (train_cmd->count("--batch")) rc.train.batch_size = t_batch;
      if (train_cmd->count("--seed")) rc.train.seed = t_seed;
      if (train_cmd->count("--patience")) rc.train.patience = t_patience;
      if (train_cmd->count("--selection")) {
        rc.train.selection = selection_metric_from_string(t_selection);
      }
      if (train_cmd->count("--init-scale")) rc.train.init_scale = t_init_scale;
      if (train_cmd->count("--init")) rc.init_checkpoint = t_init;
      return cmd_train(rc);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(e_ckpt, e_data, e_split, e_metrics, e_out);
    }
    if (sweep_cmd->parsed()) {
      RunConfig rc;
      const json grid_json = load_json_file(s_config);
      apply_config_json(grid_json, rc);
      if (sweep_cmd->count("--data")) rc.data_dir = s_data;
      if (sweep_cmd->count("--out")) rc.out_dir = s_out;
      if (sweep_cmd->count("--threads")) rc.threads = s_threads;
      return cmd_sweep(rc, grid_json);
    }
    if (synth_cmd->parsed()) {
      y_cfg.kind = synth_kind_from_string(y_kind);
      y_cfg.train_frac = y_train_frac;
      y_cfg.validation_frac = y_val_frac;
      return cmd_synth(y_cfg, y_out);
    }
    if (export_cmd->parsed()) {
      return cmd_export(x_ckpt, x_data, x_split, x_out);
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: training diverged at epoch " << e.epoch() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("semb");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run(int(argv.size()), argv.data());
}

}  // namespace semb::cli
