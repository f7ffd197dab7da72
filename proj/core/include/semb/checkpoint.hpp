#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "semb/eval.hpp"
#include "semb/models.hpp"

namespace semb {

// Self-describing model file: schema, dimensions, all tables and scalars,
// the producing config (as JSON text) and its fingerprint, plus the best
// validation metric. Doubles are written in shortest round-trip form, so
// save -> load -> save is byte-identical.
struct Checkpoint {
  AnyModel model;
  std::string fingerprint;
  std::string config_json;  // resolved run configuration, optional
  std::optional<MetricReport> best_validation;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace semb
