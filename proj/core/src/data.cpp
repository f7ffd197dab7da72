#include "semb/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

namespace semb {

using nlohmann::json;

std::string format_double(double x) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw DataError("failed to format double");
  return std::string(buf, ptr);
}

double parse_double(std::string_view s) {
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("invalid number '" + std::string(s) + "'");
  }
  return x;
}

static std::uint64_t parse_uint(std::string_view s, const std::string& what) {
  std::uint64_t x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("invalid " + what + " '" + std::string(s) + "'");
  }
  return x;
}

static std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

// ---------------------------------------------------------------------------
// schema sidecar

SchemaFile load_schema_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("families") || !j["families"].is_array()) {
    throw DataError(path.string() + ": expected an object with a 'families' array");
  }
  std::vector<FeatureSpec> specs;
  for (const auto& f : j["families"]) {
    FeatureSpec spec;
    spec.family = f.at("family").get<std::string>();
    spec.kind = feature_kind_from_string(f.at("kind").get<std::string>());
    if (spec.kind == FeatureKind::categorical) {
      spec.cardinality = f.at("cardinality").get<std::size_t>();
    }
    specs.push_back(std::move(spec));
  }
  SchemaFile meta{Schema(std::move(specs)), std::nullopt};
  if (j.contains("rating_range")) {
    const auto& r = j["rating_range"];
    if (!r.is_array() || r.size() != 2) {
      throw DataError(path.string() + ": rating_range must be [lo, hi]");
    }
    meta.rating_range = {{r[0].get<double>(), r[1].get<double>()}};
  }
  return meta;
}

void save_schema_file(const std::filesystem::path& path, const SchemaFile& meta) {
  json families = json::array();
  for (const FeatureSpec& f : meta.schema.specs()) {
    json spec{{"family", f.family}, {"kind", std::string(to_string(f.kind))}};
    if (f.kind == FeatureKind::categorical) spec["cardinality"] = f.cardinality;
    families.push_back(spec);
  }
  json j{{"families", families}};
  if (meta.rating_range) j["rating_range"] = {(*meta.rating_range)[0], (*meta.rating_range)[1]};
  std::ofstream out(path);
  if (!out) throw DataError("cannot write schema file " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// rating files

static void check_family(const Schema& schema, const std::string& family, FeatureKind kind,
                         const std::string& where) {
  const FeatureSpec* spec = schema.find(family);
  if (!spec) throw DataError(where + ": schema is missing family '" + family + "'");
  if (spec->kind != kind) {
    throw DataError(where + ": family '" + family + "' has the wrong kind");
  }
}

std::vector<SlateRatingRecord> load_rating_file(const std::filesystem::path& path,
                                                const SchemaFile& meta) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open rating file " + path.string());
  const Schema& schema = meta.schema;
  check_family(schema, "user", FeatureKind::categorical, path.string());
  check_family(schema, "movie", FeatureKind::categorical, path.string());
  check_family(schema, "position", FeatureKind::categorical, path.string());
  const std::size_t n_users = schema.find("user")->cardinality;
  const std::size_t n_movies = schema.find("movie")->cardinality;
  const std::size_t n_positions = schema.find("position")->cardinality;

  std::vector<SlateRatingRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    auto fields = split(line, ',');
    if (fields.size() != 2 + kSlotsPerSlate) {
      throw DataError(where + ": expected " + std::to_string(2 + kSlotsPerSlate) +
                      " comma-separated fields, got " + std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[0][0] != 'u') {
      throw DataError(where + ": user field must look like u<id>");
    }
    const std::uint64_t user = parse_uint(fields[0].substr(1), "user id");
    if (user >= n_users) {
      throw DataError(where + ": user id " + std::to_string(user) + " out of range for family 'user'");
    }

    std::vector<SlateNode> slots;
    std::array<bool, kSlotsPerSlate> seen_positions{};
    for (std::size_t s = 0; s < kSlotsPerSlate; ++s) {
      std::string_view tok = fields[1 + s];
      if (tok.empty() || tok[0] != 'm') {
        throw DataError(where + ": slot field must look like m<movie>:<position>");
      }
      const std::size_t colon = tok.find(':');
      if (colon == std::string_view::npos) {
        throw DataError(where + ": slot field must look like m<movie>:<position>");
      }
      const std::uint64_t movie = parse_uint(tok.substr(1, colon - 1), "movie id");
      const std::uint64_t pos = parse_uint(tok.substr(colon + 1), "position");
      if (movie >= n_movies) {
        throw DataError(where + ": movie id " + std::to_string(movie) +
                        " out of range for family 'movie'");
      }
      if (pos >= kSlotsPerSlate || pos >= n_positions) {
        throw DataError(where + ": position " + std::to_string(pos) + " out of range");
      }
      if (seen_positions[pos]) {
        throw DataError(where + ": duplicate position " + std::to_string(pos));
      }
      seen_positions[pos] = true;
      std::vector<SlateNode> leaves;
      leaves.push_back(SlateNode::categorical("movie", std::uint32_t(movie)));
      leaves.push_back(SlateNode::categorical("position", std::uint32_t(pos)));
      slots.push_back(SlateNode::internal(std::move(leaves)));
    }

    double rating = 0.0;
    try {
      rating = parse_double(fields.back());
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!std::isfinite(rating)) throw DataError(where + ": rating is not finite");
    if (meta.rating_range &&
        (rating < (*meta.rating_range)[0] || rating > (*meta.rating_range)[1])) {
      throw DataError(where + ": rating " + format_double(rating) + " outside declared range");
    }
    records.push_back(
        SlateRatingRecord{std::uint32_t(user), SlateNode::internal(std::move(slots)), rating});
  }
  return records;
}

void save_rating_file(const std::filesystem::path& path,
                      const std::vector<SlateRatingRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write rating file " + path.string());
  for (const SlateRatingRecord& r : records) {
    out << 'u' << r.user;
    for (const SlateNode& slot : r.slate.children()) {
      auto leaves = slot.children();
      out << ",m" << leaves[0].feature_id() << ':' << leaves[1].feature_id();
    }
    out << ',' << format_double(r.rating) << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// session files

static SlateNode leaf_from_json(const json& j, const Schema& schema, const std::string& where) {
  if (!j.is_object() || !j.contains("f")) {
    throw DataError(where + ": leaf must be an object with field 'f'");
  }
  const std::string family = j.at("f").get<std::string>();
  const FeatureSpec* spec = schema.find(family);
  if (!spec) throw DataError(where + ": unknown feature family '" + family + "'");
  if (j.contains("id")) {
    if (spec->kind != FeatureKind::categorical) {
      throw DataError(where + ": family '" + family + "' is numerical but leaf has an id");
    }
    const auto id = j.at("id").get<std::uint64_t>();
    if (id >= spec->cardinality) {
      throw DataError(where + ": id " + std::to_string(id) + " out of range for family '" +
                      family + "'");
    }
    return SlateNode::categorical(family, std::uint32_t(id));
  }
  if (j.contains("v")) {
    if (spec->kind != FeatureKind::numerical) {
      throw DataError(where + ": family '" + family + "' is categorical but leaf has a value");
    }
    const double v = j.at("v").get<double>();
    if (!std::isfinite(v)) throw DataError(where + ": leaf value is not finite");
    return SlateNode::numerical(family, v);
  }
  throw DataError(where + ": leaf needs either 'id' or 'v'");
}

static json leaf_to_json(const SlateNode& leaf) {
  if (leaf.is_categorical()) return json{{"f", leaf.family()}, {"id", leaf.feature_id()}};
  return json{{"f", leaf.family()}, {"v", leaf.value()}};
}

static SlateNode tree_from_leaf_array(const json& arr, const Schema& schema,
                                      const std::string& where, const char* what) {
  if (!arr.is_array() || arr.empty()) {
    throw DataError(where + ": " + what + " must be a nonempty array of leaves");
  }
  std::vector<SlateNode> leaves;
  leaves.reserve(arr.size());
  for (const auto& l : arr) leaves.push_back(leaf_from_json(l, schema, where));
  return SlateNode::internal(std::move(leaves));
}

std::vector<SessionRecord> load_session_file(const std::filesystem::path& path,
                                             const SchemaFile& meta) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open session file " + path.string());
  const Schema& schema = meta.schema;
  std::vector<SessionRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    if (!j.is_object()) throw DataError(where + ": expected one JSON object per line");
    for (const char* field : {"sid", "actions", "items", "clicked"}) {
      if (!j.contains(field)) throw DataError(where + ": missing field '" + field + "'");
    }

    const auto& actions = j["actions"];
    if (!actions.is_array() || actions.empty() || actions.size() > kMaxSessionSteps) {
      throw DataError(where + ": field 'actions' must hold 1.." +
                      std::to_string(kMaxSessionSteps) + " action trees");
    }
    std::vector<SlateNode> action_trees;
    action_trees.reserve(actions.size());
    for (const auto& a : actions) {
      action_trees.push_back(tree_from_leaf_array(a, schema, where, "action"));
    }

    const auto& items = j["items"];
    if (!items.is_array() || items.size() < 2 || items.size() > kMaxSlateItems) {
      throw DataError(where + ": field 'items' must hold 2.." + std::to_string(kMaxSlateItems) +
                      " item trees");
    }
    std::vector<SlateNode> item_trees;
    item_trees.reserve(items.size());
    for (const auto& i : items) {
      item_trees.push_back(tree_from_leaf_array(i, schema, where, "item"));
    }

    const auto clicked = j["clicked"].get<std::uint64_t>();
    if (clicked >= item_trees.size()) {
      throw DataError(where + ": field 'clicked' (" + std::to_string(clicked) +
                      ") out of range for " + std::to_string(item_trees.size()) + " items");
    }

    records.push_back(SessionRecord{j["sid"].get<std::string>(),
                                    SlateNode::internal(std::move(action_trees)),
                                    std::move(item_trees), std::uint32_t(clicked)});
  }
  return records;
}

void save_session_file(const std::filesystem::path& path,
                       const std::vector<SessionRecord>& records) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write session file " + path.string());
  for (const SessionRecord& r : records) {
    json actions = json::array();
    for (const SlateNode& a : r.session.children()) {
      json leaves = json::array();
      for (const SlateNode& l : a.children()) leaves.push_back(leaf_to_json(l));
      actions.push_back(leaves);
    }
    json items = json::array();
    for (const SlateNode& i : r.items) {
      json leaves = json::array();
      for (const SlateNode& l : i.children()) leaves.push_back(leaf_to_json(l));
      items.push_back(leaves);
    }
    json j{{"sid", r.session_id}, {"actions", actions}, {"items", items}, {"clicked", r.clicked}};
    out << j.dump() << '\n';
  }
  if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// dataset directories

RatingDataset load_slate_ratings(const std::filesystem::path& dir) {
  RatingDataset data{load_schema_file(dir / "schema.json"), {}, {}, {}};
  data.train = load_rating_file(dir / "train.csv", data.meta);
  data.validation = load_rating_file(dir / "validation.csv", data.meta);
  data.test = load_rating_file(dir / "test.csv", data.meta);
  return data;
}

SessionDataset load_sessions(const std::filesystem::path& dir) {
  SessionDataset data{load_schema_file(dir / "schema.json"), {}, {}, {}};
  data.train = load_session_file(dir / "train.jsonl", data.meta);
  data.validation = load_session_file(dir / "validation.jsonl", data.meta);
  data.test = load_session_file(dir / "test.jsonl", data.meta);
  return data;
}

void save_slate_ratings(const std::filesystem::path& dir, const RatingDataset& data) {
  std::filesystem::create_directories(dir);
  save_schema_file(dir / "schema.json", data.meta);
  save_rating_file(dir / "train.csv", data.train);
  save_rating_file(dir / "validation.csv", data.validation);
  save_rating_file(dir / "test.csv", data.test);
}

void save_sessions(const std::filesystem::path& dir, const SessionDataset& data) {
  std::filesystem::create_directories(dir);
  save_schema_file(dir / "schema.json", data.meta);
  save_session_file(dir / "train.jsonl", data.train);
  save_session_file(dir / "validation.jsonl", data.validation);
  save_session_file(dir / "test.jsonl", data.test);
}

}  // namespace semb
