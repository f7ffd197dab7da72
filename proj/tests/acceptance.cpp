// Acceptance suite: one line per criterion, nonzero exit if any fails.
//
// Criterion 4 trains on the real MovieLens slate dataset when
// SEMB_MOVIELENS_DIR points at a prepared dataset directory; otherwise the
// planted-recovery check of criterion 3 substitutes for it.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "cli.hpp"
#include "oracles.hpp"
#include "semb/checkpoint.hpp"
#include "semb/model_grad.hpp"
#include "semb/optim.hpp"
#include "semb/synth.hpp"

using namespace semb;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << ": " << what;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!pass) ++g_failures;
}

std::string fmt(double x) {
  std::ostringstream ss;
  ss.precision(6);
  ss << x;
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("semb_acceptance_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

// --------------------------------------------------------------------------
// 1. Gradient correctness across the four model heads.

void criterion_1() {
  double worst = 0.0;
  std::size_t min_coords = SIZE_MAX;
  bool pass = true;

  {
    SyntheticConfig cfg;
    cfg.kind = SynthKind::regression;
    cfg.records = 8;
    cfg.users = 10;
    cfg.movies = 25;
    cfg.k = 5;
    cfg.planted_scale = 10.0;
    cfg.noise = 0.3;
    cfg.train_frac = 1.0;
    cfg.validation_frac = 0.0;
    cfg.seed = 101;
    auto synth = generate_synthetic_regression(cfg);
    RegressionModel model = make_regression_model(synth.data.schema(), 5, 1e-3, 7, 8.0);
    const auto rep = check_gradients(model, synth.data.train, 1e-4, 11, 150);
    pass = pass && rep.pass && rep.coords_checked >= 100;
    worst = std::max(worst, rep.max_rel_error);
    min_coords = std::min(min_coords, rep.coords_checked);
  }

  SyntheticConfig cfg;
  cfg.kind = SynthKind::click;
  cfg.records = 8;
  cfg.k = 4;
  cfg.items_per_slate = 5;
  cfg.item_vocab = 20;
  cfg.action_types = 4;
  cfg.action_item_vocab = 10;
  cfg.max_actions = 4;
  cfg.planted_scale = 8.0;
  cfg.train_frac = 1.0;
  cfg.validation_frac = 0.0;
  cfg.seed = 102;
  auto synth = generate_synthetic_click(cfg);

  {
    ClickModel model = make_click_model(synth.data.schema(), ClickVariant::semb1, 4, 1e-3, 8, 8.0);
    const auto rep = check_gradients(model, synth.data.train, 1e-4, 12, 150);
    pass = pass && rep.pass && rep.coords_checked >= 100;
    worst = std::max(worst, rep.max_rel_error);
    min_coords = std::min(min_coords, rep.coords_checked);
  }
  {
    ClickModel model = make_click_model(synth.data.schema(), ClickVariant::semb2, 4, 1e-3, 9, 8.0);
    model.w1 = 0.3;
    model.w2 = -0.4;
    const auto rep = check_gradients(model, synth.data.train, 1e-4, 13, 150);
    pass = pass && rep.pass && rep.coords_checked >= 100;
    worst = std::max(worst, rep.max_rel_error);
    min_coords = std::min(min_coords, rep.coords_checked);
  }
  {
    FactorizationMachineModel model = make_fm_model(synth.data.schema(), 4, 1e-3, 1e-3, 10, 8.0);
    model.w0 = 0.2;
    const auto rep = check_gradients(model, synth.data.train, 1e-4, 14, 150);
    pass = pass && rep.pass && rep.coords_checked >= 100;
    worst = std::max(worst, rep.max_rel_error);
    min_coords = std::min(min_coords, rep.coords_checked);
  }

  report(1, pass, "analytic gradients match central finite differences for all four heads",
         "max rel error " + fmt(worst) + " < 1e-4 over >= " + std::to_string(min_coords) +
             " coordinates per head");
}

// --------------------------------------------------------------------------
// 2. Composition rule vs the explicit double loop; exact permutation invariance.

void criterion_2() {
  std::mt19937_64 rng(202);
  double worst = 0.0;
  bool invariant = true;
  for (std::size_t L : {1u, 2u, 3u, 5u, 25u}) {
    for (std::size_t k : {1u, 4u, 16u}) {
      auto children = test::random_vecs(rng, L, k);
      const Vec fast = compose(children);
      const Vec slow = test::compose_double_loop(children);
      for (std::size_t d = 0; d < k; ++d) worst = std::max(worst, std::abs(fast[d] - slow[d]));
      for (int trial = 0; trial < 20; ++trial) {
        std::shuffle(children.begin(), children.end(), rng);
        const Vec shuffled = compose(children);
        for (std::size_t d = 0; d < k; ++d) invariant = invariant && shuffled[d] == fast[d];
      }
    }
  }
  report(2, worst <= 1e-12 && invariant,
         "compose matches the explicit pair loop and is exactly permutation invariant",
         "max abs deviation " + fmt(worst) + " <= 1e-12, bitwise invariance over 300 shuffles");
}

// --------------------------------------------------------------------------
// 3. Planted-model recovery, regression and click.

bool g_criterion3_regression_pass = false;

void criterion_3() {
  const auto t0 = std::chrono::steady_clock::now();
  // regression half: 500 users, 2000 movies, 10k slates, planted k=5, noiseless
  {
    SyntheticConfig cfg;
    cfg.kind = SynthKind::regression;
    cfg.records = 10000;
    cfg.users = 500;
    cfg.movies = 2000;
    cfg.k = 5;
    cfg.noise = 0.0;
    cfg.planted_scale = 5.0;
    cfg.planted_user_scale = 50.0;
    cfg.movie_zipf = 2.0;
    cfg.seed = 301;
    auto synth = generate_synthetic_regression(cfg);

    TrainConfig train_cfg;
    train_cfg.variant = ModelVariant::regression;
    train_cfg.k = 5;
    train_cfg.lambda = 1e-3;
    train_cfg.lr = 0.02;
    train_cfg.epochs = 200;
    train_cfg.patience = 30;
    train_cfg.batch_size = 256;
    train_cfg.seed = 4;
    const TrainResult result = train(train_cfg, synth.data);
    g_criterion3_regression_pass = result.best_value < 0.01;
    report(3, g_criterion3_regression_pass,
           "noiseless planted regression reaches held-out MSE < 0.01 within 200 epochs",
           "validation MSE " + fmt(result.best_value) + " at epoch " +
               std::to_string(result.best_epoch));
  }
  // click half: 5k sessions, 10 items per slate, SEMB-1 vs the uniform baseline
  {
    SyntheticConfig cfg;
    cfg.kind = SynthKind::click;
    cfg.records = 5000;
    cfg.items_per_slate = 10;
    cfg.k = 8;
    cfg.item_vocab = 200;
    cfg.action_types = 8;
    cfg.action_item_vocab = 50;
    cfg.max_actions = 8;
    cfg.planted_scale = 30.0;
    cfg.seed = 302;
    auto synth = generate_synthetic_click(cfg);

    TrainConfig train_cfg;
    train_cfg.variant = ModelVariant::semb1;
    train_cfg.k = 8;
    train_cfg.lambda = 1e-6;
    train_cfg.lr = 0.02;
    train_cfg.epochs = 120;
    train_cfg.patience = 25;
    train_cfg.batch_size = 128;
    train_cfg.seed = 4;
    const TrainResult result = train(train_cfg, synth.data);

    double uniform = 0.0;  // (1/10) * sum_r 1/r
    for (int r = 1; r <= 10; ++r) uniform += 1.0 / double(r);
    uniform /= 10.0;
    const bool pass = result.best_value >= uniform + 0.15;
    report(3, pass, "SEMB-1 beats the uniform-random MRR baseline by >= 0.15",
           "validation MRR " + fmt(result.best_value) + " vs uniform " + fmt(uniform));
  }
  const auto secs =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);
  std::cout << "         criterion 3 runtime: " << secs.count() << "s (budget 600s)"
            << std::endl;
}

// --------------------------------------------------------------------------
// 4. Real MovieLens reproduction when the dataset is available.

void criterion_4() {
  const char* dir = std::getenv("SEMB_MOVIELENS_DIR");
  if (!dir || !*dir) {
    report(4, g_criterion3_regression_pass,
           "MovieLens dataset unavailable; planted-recovery substitutes per the criterion",
           "set SEMB_MOVIELENS_DIR to run the real reproduction");
    return;
  }
  try {
    const RatingDataset data = load_slate_ratings(dir);
    TrainConfig cfg;
    cfg.variant = ModelVariant::regression;
    cfg.k = 5;
    cfg.lambda = 1e-4;
    cfg.lr = 2e-3;
    cfg.epochs = 300;
    cfg.patience = 15;
    cfg.batch_size = 256;
    cfg.seed = 1;
    const TrainResult result = train(cfg, data);
    const auto& best = std::get<RegressionModel>(result.best_model);
    const MetricReport test_mse = eval_mse(best, data.test, result.fingerprint);
    report(4, test_mse.estimate <= 0.42, "MovieLens held-out MSE <= 0.42 at (k=5, l2=1e-4)",
           "test MSE " + fmt(test_mse.estimate) + " +/- " + fmt(test_mse.se));
  } catch (const std::exception& e) {
    report(4, false, "MovieLens reproduction", std::string("error: ") + e.what());
  }
}

// --------------------------------------------------------------------------
// 5. SEMB-2 warm-started from SEMB-1: bitwise MRR at init, NLL no worse after.

void criterion_5() {
  SyntheticConfig cfg;
  cfg.kind = SynthKind::click;
  cfg.records = 2000;
  cfg.items_per_slate = 8;
  cfg.k = 4;
  cfg.item_vocab = 60;
  cfg.action_types = 6;
  cfg.action_item_vocab = 30;
  cfg.max_actions = 6;
  cfg.planted_scale = 20.0;
  cfg.seed = 501;
  auto synth = generate_synthetic_click(cfg);

  TrainConfig base;
  base.variant = ModelVariant::semb1;
  base.k = 4;
  base.lambda = 1e-6;
  base.lr = 0.02;
  base.epochs = 30;
  base.patience = 10;
  base.batch_size = 128;
  base.seed = 6;
  const TrainResult semb1_run = train(base, synth.data);
  const ClickModel& semb1 = std::get<ClickModel>(semb1_run.best_model);
  const MetricReport semb1_mrr = eval_mrr(semb1, synth.data.validation);
  const MetricReport semb1_nll = eval_nll(semb1, synth.data.validation);

  // warm-started SEMB-2 with w1 = w2 = 0 must reproduce SEMB-1's MRR bitwise
  ClickModel semb2_init = semb1;
  semb2_init.variant = ClickVariant::semb2;
  const MetricReport init_mrr = eval_mrr(semb2_init, synth.data.validation);
  const bool bitwise = init_mrr.estimate == semb1_mrr.estimate && semb2_init.w1 == 0.0 &&
                       semb2_init.w2 == 0.0;
  report(5, bitwise, "SEMB-2 at (w1=w2=0) reproduces the SEMB-1 MRR bitwise",
         "MRR " + fmt(init_mrr.estimate));

  // after further training (NLL-selected), validation NLL must not regress
  TrainConfig semb2_cfg = base;
  semb2_cfg.variant = ModelVariant::semb2;
  semb2_cfg.selection = SelectionMetric::nll;
  semb2_cfg.epochs = 30;
  const AnyModel warm{semb1};
  const TrainResult semb2_run = train(semb2_cfg, synth.data, &warm);
  const bool ordered = semb2_run.best_value <= semb1_nll.estimate;
  report(5, ordered, "trained SEMB-2 validation NLL <= SEMB-1's",
         "SEMB-2 " + fmt(semb2_run.best_value) + " vs SEMB-1 " + fmt(semb1_nll.estimate));
}

// --------------------------------------------------------------------------
// 6. Metric oracles on random sessions.

void criterion_6() {
  std::mt19937_64 rng(606);
  std::uniform_real_distribution<double> logit(-3.0, 3.0);
  std::uniform_int_distribution<std::size_t> pick(0, 5);

  RunningStat impl_mrr, oracle_mrr, impl_ndcg, oracle_ndcg;
  bool exact = true;
  for (int s = 0; s < 1000; ++s) {
    std::vector<double> z(6);
    for (double& x : z) x = logit(rng);
    if (s % 7 == 0) z[1] = z[4];  // inject ties
    const std::size_t clicked = pick(rng);

    // brute force: full stable sort by (logit desc, index asc)
    std::vector<std::size_t> idx(6);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (z[a] != z[b]) return z[a] > z[b];
      return a < b;
    });
    std::size_t rank = 0;
    for (std::size_t r = 0; r < 6; ++r) {
      if (idx[r] == clicked) rank = r + 1;
    }
    const double rr = 1.0 / double(rank);
    const double nd = 1.0 / std::log2(double(rank) + 1.0);

    exact = exact && reciprocal_rank(z, clicked) == rr;
    exact = exact && ndcg_single_relevant(z, clicked) == nd;
    impl_mrr.add(reciprocal_rank(z, clicked));
    oracle_mrr.add(rr);
    impl_ndcg.add(ndcg_single_relevant(z, clicked));
    oracle_ndcg.add(nd);
  }
  exact = exact && impl_mrr.mean() == oracle_mrr.mean() &&
          impl_ndcg.mean() == oracle_ndcg.mean();
  report(6, exact, "MRR and NDCG match brute-force sorting exactly on 1000 sessions",
         "MRR " + fmt(impl_mrr.mean()) + ", NDCG " + fmt(impl_ndcg.mean()));

  double worst_sum = 0.0, worst_shift = 0.0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> z(25);
    for (double& x : z) x = logit(rng) * 3.0;
    const auto p = softmax(z);
    double sum = 0.0;
    for (double x : p) sum += x;
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
    std::vector<double> shifted = z;
    for (double& x : shifted) x += 777.25;
    worst_shift = std::max(worst_shift, std::abs(softmax_nll(z, std::size_t(trial) % 25) -
                                                 softmax_nll(shifted, std::size_t(trial) % 25)));
  }
  report(6, worst_sum <= 1e-12 && worst_shift <= 1e-10,
         "softmax normalizes within 1e-12 and NLL is shift invariant within 1e-10",
         "sum deviation " + fmt(worst_sum) + ", shift deviation " + fmt(worst_shift));
}

// --------------------------------------------------------------------------
// 7. End-to-end determinism of cmd_train.

void criterion_7() {
  // run the CLI in-process with its stdout captured
  auto quiet_run = [](const std::vector<std::string>& args) {
    std::ostringstream sink;
    std::streambuf* old = std::cout.rdbuf(sink.rdbuf());
    const int status = cli::run(args);
    std::cout.rdbuf(old);
    return status;
  };
  const fs::path data_dir = fresh_dir("det_data");
  int rc = quiet_run({"synth", "--kind", "regression", "--out", data_dir.string(), "--records",
                      "400", "--users", "15", "--movies", "60", "--seed", "71", "--k", "3",
                      "--scale", "5", "--noise", "0.1"});
  const fs::path run_a = fresh_dir("det_run_a"), run_b = fresh_dir("det_run_b");
  const std::vector<std::string> train_args{
      "train", "--data", data_dir.string(), "--variant", "regression", "--k", "3",
      "--lambda", "1e-4", "--lr", "0.02", "--epochs", "6", "--seed", "17"};
  auto with_out = [&](const fs::path& out) {
    std::vector<std::string> args = train_args;
    args.push_back("--out");
    args.push_back(out.string());
    return args;
  };
  rc |= quiet_run(with_out(run_a));
  rc |= quiet_run(with_out(run_b));
  const bool pass = rc == 0 &&
                    read_file(run_a / "checkpoint.json") == read_file(run_b / "checkpoint.json") &&
                    read_file(run_a / "history.csv") == read_file(run_b / "history.csv");
  report(7, pass, "identical config and seed give bitwise-identical checkpoints and histories",
         "");
}

// --------------------------------------------------------------------------
// 8. FM fast identity vs the explicit pairwise double loop.

void criterion_8() {
  Schema schema({{"a", FeatureKind::categorical, 40},
                 {"b", FeatureKind::categorical, 30},
                 {"x", FeatureKind::numerical, 0},
                 {"y", FeatureKind::numerical, 0}});
  FactorizationMachineModel model = make_fm_model(schema, 6, 0, 0, 88, 5.0);
  std::mt19937_64 rng(808);
  std::normal_distribution<double> weight(0.0, 0.5);
  model.w0 = weight(rng);
  for (double& w : model.linear) w = weight(rng);

  std::uniform_int_distribution<std::uint32_t> idx(0, std::uint32_t(schema.flat_dim() - 1));
  std::uniform_int_distribution<int> nnz(1, 10);
  std::uniform_real_distribution<double> val(-2.0, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    SparseVec x;
    std::set<std::uint32_t> used;
    const int n = nnz(rng);
    for (int j = 0; j < n; ++j) {
      const std::uint32_t i = idx(rng);
      if (used.insert(i).second) x.emplace_back(i, val(rng));
    }
    const double fast = fm_score(model, x);
    const double slow = test::fm_score_double_loop(model.w0, model.linear, model.latent, 6, x);
    worst = std::max(worst, std::abs(fast - slow) / std::max(1.0, std::abs(slow)));
  }
  report(8, worst <= 1e-10, "FM O(N*k) scoring matches the pairwise loop on 1000 sparse inputs",
         "max rel deviation " + fmt(worst));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  const auto secs =
      std::chrono::duration_cast<std::chrono::seconds>(std::chrono::steady_clock::now() - t0);
  std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(g_failures))
            << " (total " << secs.count() << "s)" << std::endl;
  return g_failures == 0 ? 0 : 1;
}
