#include "semb/eval.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>

#include "semb/data.hpp"

namespace semb {

void RunningStat::add(double x) noexcept {
  ++n_;
  const double delta = x - mean_;
  mean_ += delta / double(n_);
  m2_ += delta * (x - mean_);
}

void RunningStat::combine(const RunningStat& other) noexcept {
  if (other.n_ == 0) return;
  if (n_ == 0) {
    *this = other;
    return;
  }
  const double na = double(n_), nb = double(other.n_);
  const double delta = other.mean_ - mean_;
  mean_ += delta * nb / (na + nb);
  m2_ += other.m2_ + delta * delta * na * nb / (na + nb);
  n_ += other.n_;
}

double RunningStat::sample_variance() const noexcept {
  return n_ < 2 ? 0.0 : m2_ / double(n_ - 1);
}

double RunningStat::standard_error() const noexcept {
  return n_ == 0 ? 0.0 : std::sqrt(sample_variance() / double(n_));
}

std::string to_json_string(const MetricReport& r) {
  nlohmann::json j{{"metric", r.metric},
                   {"estimate", r.estimate},
                   {"se", r.se},
                   {"n", r.n},
                   {"fingerprint", r.fingerprint}};
  return j.dump();
}

MetricReport metric_report_from_json_string(const std::string& s) {
  const auto j = nlohmann::json::parse(s);
  return MetricReport{j.at("metric").get<std::string>(), j.at("estimate").get<double>(),
                      j.at("se").get<double>(), j.at("n").get<std::size_t>(),
                      j.value("fingerprint", std::string{})};
}

std::size_t click_rank(std::span<const double> logits, std::size_t clicked) {
  if (clicked >= logits.size()) throw std::invalid_argument("click_rank: index out of range");
  const double zc = logits[clicked];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    if (logits[j] > zc || (logits[j] == zc && j < clicked)) ++rank;
  }
  return rank;
}

double reciprocal_rank(std::span<const double> logits, std::size_t clicked) {
  return 1.0 / double(click_rank(logits, clicked));
}

double ndcg_single_relevant(std::span<const double> logits, std::size_t clicked) {
  return 1.0 / std::log2(double(click_rank(logits, clicked)) + 1.0);
}

static MetricReport finish(std::string name, const RunningStat& stat, std::string fingerprint) {
  return MetricReport{std::move(name), stat.mean(), stat.standard_error(), stat.count(),
                      std::move(fingerprint)};
}

MetricReport eval_mse(const RegressionModel& model, std::span<const SlateRatingRecord> records,
                      std::string fingerprint) {
  if (records.empty()) throw std::invalid_argument("eval_mse: no records");
  RunningStat stat;
  for (const SlateRatingRecord& rec : records) {
    const double err = rating_predict(model, rec.user, rec.slate) - rec.rating;
    stat.add(err * err);
  }
  return finish("mse", stat, std::move(fingerprint));
}

namespace {

using LogitsFn = std::function<std::vector<double>(const SessionRecord&)>;

MetricReport session_metric(const char* name, std::span<const SessionRecord> records,
                            const LogitsFn& logits_of, std::string fingerprint,
                            double (*score)(std::span<const double>, std::size_t)) {
  if (records.empty()) {
    throw std::invalid_argument(std::string("eval_") + name + ": no records");
  }
  RunningStat stat;
  for (const SessionRecord& rec : records) {
    const auto logits = logits_of(rec);
    stat.add(score(logits, rec.clicked));
  }
  return finish(name, stat, std::move(fingerprint));
}

double nll_score(std::span<const double> logits, std::size_t clicked) {
  return softmax_nll(logits, clicked);
}

LogitsFn logits_fn(const ClickModel& model) {
  return [&model](const SessionRecord& rec) {
    return click_logits(model, rec.session, rec.items);
  };
}

LogitsFn logits_fn(const FactorizationMachineModel& model) {
  return [&model](const SessionRecord& rec) {
    return fm_logits(model, fm_featurize(model.schema, rec));
  };
}

}  // namespace

MetricReport eval_mrr(const ClickModel& model, std::span<const SessionRecord> records,
                      std::string fingerprint) {
  return session_metric("mrr", records, logits_fn(model), std::move(fingerprint),
                        reciprocal_rank);
}
MetricReport eval_ndcg(const ClickModel& model, std::span<const SessionRecord> records,
                       std::string fingerprint) {
  return session_metric("ndcg", records, logits_fn(model), std::move(fingerprint),
                        ndcg_single_relevant);
}
MetricReport eval_nll(const ClickModel& model, std::span<const SessionRecord> records,
                      std::string fingerprint) {
  return session_metric("nll", records, logits_fn(model), std::move(fingerprint), nll_score);
}

MetricReport eval_mrr(const FactorizationMachineModel& model,
                      std::span<const SessionRecord> records, std::string fingerprint) {
  return session_metric("mrr", records, logits_fn(model), std::move(fingerprint),
                        reciprocal_rank);
}
MetricReport eval_ndcg(const FactorizationMachineModel& model,
                       std::span<const SessionRecord> records, std::string fingerprint) {
  return session_metric("ndcg", records, logits_fn(model), std::move(fingerprint),
                        ndcg_single_relevant);
}
MetricReport eval_nll(const FactorizationMachineModel& model,
                      std::span<const SessionRecord> records, std::string fingerprint) {
  return session_metric("nll", records, logits_fn(model), std::move(fingerprint), nll_score);
}

std::string export_header(std::size_t k) {
  std::string h = "session_id,item_index,log_prob,dot_session_item,slate_term_session,slate_term_item";
  for (std::size_t d = 0; d < k; ++d) h += ",emb_" + std::to_string(d);
  return h;
}

std::size_t export_features(const ClickModel& model, std::span<const SessionRecord> records,
                            const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write feature export " + path.string());
  out << export_header(model.k()) << '\n';
  std::size_t rows = 0;
  for (const SessionRecord& rec : records) {
    ClickForward f = click_forward(model, rec);
    // log softmax via the max-subtracted partition function
    const double m = *std::max_element(f.logits.begin(), f.logits.end());
    double sum = 0.0;
    for (double z : f.logits) sum += std::exp(z - m);
    const double lse = std::log(sum) + m;
    for (std::size_t i = 0; i < f.logits.size(); ++i) {
      const double inner = dot(f.session_emb, f.item_embs[i]);
      double slate_session = 0.0, slate_item = 0.0;
      if (!f.loo_embs.empty()) {
        slate_session = model.w1 * dot(f.session_emb, f.loo_embs[i]);
        slate_item = model.w2 * dot(f.item_embs[i], f.loo_embs[i]);
      }
      out << rec.session_id << ',' << i << ',' << format_double(f.logits[i] - lse) << ','
          << format_double(inner) << ',' << format_double(slate_session) << ','
          << format_double(slate_item);
      for (double v : f.item_embs[i]) out << ',' << format_double(v);
      out << '\n';
      ++rows;
    }
  }
  if (!out) throw DataError("write failed for " + path.string());
  return rows;
}

}  // namespace semb
