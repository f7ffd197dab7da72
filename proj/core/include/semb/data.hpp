#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semb/schema.hpp"
#include "semb/slate.hpp"

namespace semb {

inline constexpr std::size_t kSlotsPerSlate = 5;    // MovieLens slate width
inline constexpr std::size_t kMaxSessionSteps = 15; // RecSys session length cap
inline constexpr std::size_t kMaxSlateItems = 25;   // RecSys slate width cap

// One rated slate: the slate tree's children are the 5 slot trees,
// each slot an internal node over (movie, position) leaves.
struct SlateRatingRecord {
  std::uint32_t user = 0;
  SlateNode slate;   // internal, exactly kSlotsPerSlate children
  double rating = 0.0;
};

// One session: the session tree's children are the ordered action trees;
// items are the candidate trees of the presented slate.
struct SessionRecord {
  std::string session_id;
  SlateNode session;             // internal over 1..kMaxSessionSteps actions
  std::vector<SlateNode> items;  // 2..kMaxSlateItems candidates
  std::uint32_t clicked = 0;
};

// Schema sidecar: feature families plus optional dataset-level bounds.
struct SchemaFile {
  Schema schema;
  std::optional<std::array<double, 2>> rating_range;  // e.g. [1,5] for MovieLens
};

template <class Record>
struct DatasetSplit {
  SchemaFile meta;
  std::vector<Record> train;
  std::vector<Record> validation;
  std::vector<Record> test;

  const Schema& schema() const noexcept { return meta.schema; }
};

using RatingDataset = DatasetSplit<SlateRatingRecord>;
using SessionDataset = DatasetSplit<SessionRecord>;

SchemaFile load_schema_file(const std::filesystem::path& path);
void save_schema_file(const std::filesystem::path& path, const SchemaFile& meta);

// Rating files: one record per line, "u<user>,m<movie>:<pos>,...x5,<rating>".
std::vector<SlateRatingRecord> load_rating_file(const std::filesystem::path& path,
                                                const SchemaFile& meta);
void save_rating_file(const std::filesystem::path& path,
                      const std::vector<SlateRatingRecord>& records);

// Session files: one JSON object per line with fields sid, actions, items,
// clicked; actions/items are arrays of leaf lists, each leaf
// {"f": family, "id": n} or {"f": family, "v": x}.
std::vector<SessionRecord> load_session_file(const std::filesystem::path& path,
                                             const SchemaFile& meta);
void save_session_file(const std::filesystem::path& path,
                       const std::vector<SessionRecord>& records);

// Directory layout: schema.json plus train/validation/test files
// (.csv for ratings, .jsonl for sessions).
RatingDataset load_slate_ratings(const std::filesystem::path& dir);
SessionDataset load_sessions(const std::filesystem::path& dir);
void save_slate_ratings(const std::filesystem::path& dir, const RatingDataset& data);
void save_sessions(const std::filesystem::path& dir, const SessionDataset& data);

// Shortest round-trip decimal form of a double (used by every writer so
// that save/load/save is byte-stable).
std::string format_double(double x);
double parse_double(std::string_view s);  // throws DataError on trailing garbage

}  // namespace semb
