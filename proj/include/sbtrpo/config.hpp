#pragma once

#include <string>
#include <vector>

#include "sbtrpo/trainer.hpp"

namespace sbtrpo {

/// Parses a flat key=value config file (# comments, blank lines allowed) and
/// applies key=value overrides on top. Unknown keys and type mismatches raise
/// ConfigError naming the key. Absent keys keep the documented defaults.
TrainConfig parse_config(const std::string& path, const std::vector<std::string>& overrides = {});

/// Parses config text directly (same grammar as the file form).
TrainConfig parse_config_text(const std::string& text,
                              const std::vector<std::string>& overrides = {});

/// Serializes every key; parse_config_text(write_config(cfg)) == cfg.
std::string write_config(const TrainConfig& cfg);

/// Applies a single "key=value" override in place.
void apply_override(TrainConfig& cfg, const std::string& assignment);

} // namespace sbtrpo
