#include "semb/checkpoint.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "semb/data.hpp"

namespace semb {

using nlohmann::json;

namespace {

json schema_to_json(const Schema& schema) {
  json families = json::array();
  for (const FeatureSpec& f : schema.specs()) {
    json spec{{"family", f.family}, {"kind", std::string(to_string(f.kind))}};
    if (f.kind == FeatureKind::categorical) spec["cardinality"] = f.cardinality;
    families.push_back(spec);
  }
  return json{{"families", families}};
}

Schema schema_from_json(const json& j) {
  std::vector<FeatureSpec> specs;
  for (const auto& f : j.at("families")) {
    FeatureSpec spec;
    spec.family = f.at("family").get<std::string>();
    spec.kind = feature_kind_from_string(f.at("kind").get<std::string>());
    if (spec.kind == FeatureKind::categorical) {
      spec.cardinality = f.at("cardinality").get<std::size_t>();
    }
    specs.push_back(std::move(spec));
  }
  return Schema(std::move(specs));
}

json table_to_json(const EmbeddingTable& table) {
  json out = json::object();
  const Schema& schema = table.schema();
  for (std::size_t f = 0; f < schema.family_count(); ++f) {
    auto data = table.family_data(f);
    out[schema.spec(f).family] = std::vector<double>(data.begin(), data.end());
  }
  return out;
}

EmbeddingTable table_from_json(const json& j, const Schema& schema, std::size_t k) {
  EmbeddingTable table = EmbeddingTable::zeros(schema, k);
  for (std::size_t f = 0; f < schema.family_count(); ++f) {
    const auto values = j.at(schema.spec(f).family).get<std::vector<double>>();
    auto dst = table.family_data_mut(f);
    if (values.size() != dst.size()) {
      throw DataError("checkpoint table for family '" + schema.spec(f).family +
                      "' has the wrong size");
    }
    std::copy(values.begin(), values.end(), dst.begin());
  }
  return table;
}

json metric_to_json(const MetricReport& r) {
  return json{{"metric", r.metric},
              {"estimate", r.estimate},
              {"se", r.se},
              {"n", r.n},
              {"fingerprint", r.fingerprint}};
}

MetricReport metric_from_json(const json& j) {
  return MetricReport{j.at("metric").get<std::string>(), j.at("estimate").get<double>(),
                      j.at("se").get<double>(), j.at("n").get<std::size_t>(),
                      j.value("fingerprint", std::string{})};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json j{{"format", "semb-checkpoint"}, {"version", 1}};
  j["variant"] = std::string(to_string(variant_of(ckpt.model)));
  std::visit(
      [&](const auto& model) {
        using M = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<M, RegressionModel>) {
          j["k"] = model.k();
          j["lambda"] = model.lambda;
          j["schema"] = schema_to_json(model.table.schema());
          j["table"] = table_to_json(model.table);
        } else if constexpr (std::is_same_v<M, ClickModel>) {
          j["k"] = model.k();
          j["lambda"] = model.lambda;
          j["schema"] = schema_to_json(model.table.schema());
          j["table"] = table_to_json(model.table);
          j["w1"] = model.w1;
          j["w2"] = model.w2;
        } else {
          j["k"] = model.k;
          j["schema"] = schema_to_json(model.schema);
          j["fm"] = json{{"w0", model.w0},
                         {"linear", model.linear},
                         {"latent", model.latent},
                         {"lambda_linear", model.lambda_linear},
                         {"lambda_latent", model.lambda_latent}};
        }
      },
      ckpt.model);
  if (!ckpt.fingerprint.empty()) j["fingerprint"] = ckpt.fingerprint;
  if (!ckpt.config_json.empty()) j["config"] = json::parse(ckpt.config_json);
  if (ckpt.best_validation) j["best_validation"] = metric_to_json(*ckpt.best_validation);

  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string{}) != "semb-checkpoint") {
    throw DataError(path.string() + ": not a semb checkpoint");
  }
  const auto variant = model_variant_from_string(j.at("variant").get<std::string>());
  const auto k = j.at("k").get<std::size_t>();
  const Schema schema = schema_from_json(j.at("schema"));

  Checkpoint ckpt{AnyModel{RegressionModel{EmbeddingTable::zeros(schema, k), 0.0}},
                  j.value("fingerprint", std::string{}),
                  {},
                  std::nullopt};
  switch (variant) {
    case ModelVariant::regression:
      ckpt.model = RegressionModel{table_from_json(j.at("table"), schema, k),
                                   j.at("lambda").get<double>()};
      break;
    case ModelVariant::semb1:
    case ModelVariant::semb2: {
      ClickModel m{table_from_json(j.at("table"), schema, k),
                   variant == ModelVariant::semb1 ? ClickVariant::semb1 : ClickVariant::semb2,
                   j.at("w1").get<double>(), j.at("w2").get<double>(),
                   j.at("lambda").get<double>()};
      ckpt.model = std::move(m);
      break;
    }
    case ModelVariant::fm: {
      const json& fm = j.at("fm");
      FactorizationMachineModel m;
      m.schema = schema;
      m.k = k;
      m.w0 = fm.at("w0").get<double>();
      m.linear = fm.at("linear").get<std::vector<double>>();
      m.latent = fm.at("latent").get<std::vector<double>>();
      m.lambda_linear = fm.at("lambda_linear").get<double>();
      m.lambda_latent = fm.at("lambda_latent").get<double>();
      if (m.linear.size() != schema.flat_dim() || m.latent.size() != schema.flat_dim() * k) {
        throw DataError(path.string() + ": FM parameter blocks have the wrong size");
      }
      ckpt.model = std::move(m);
      break;
    }
  }
  if (j.contains("config")) ckpt.config_json = j["config"].dump();
  if (j.contains("best_validation")) {
    ckpt.best_validation = metric_from_json(j["best_validation"]);
  }
  return ckpt;
}

}  // namespace semb
