#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "claimnet/data.hpp"

namespace claimnet {

/// Seeded claims generator used by the end-to-end experiments: gamma response
/// with a log-linear mean over one high-cardinality categorical (zone-style),
/// two low-cardinality categoricals, log coverage and a discount numeric,
/// plus an optional planted zone-group x basement interaction that no
/// main-effects model can capture.
struct SynthConfig {
  std::size_t rows = 50000;
  int zone_levels = 60;
  int basement_levels = 4;
  int occupancy_levels = 4;
  int interaction_groups = 5;  // zone effect group = zone index mod groups
  double zone_effect_sd = 0.35;
  double basement_effect_sd = 0.2;
  double occupancy_effect_sd = 0.2;
  double interaction_sd = 0.5;  // 0 disables the interaction
  double coverage_log_mean = 11.5;
  double coverage_log_sd = 0.7;
  double coverage_coef = 0.8;  // on log coverage in the log mean
  double crs_coef = -0.3;
  double base_level = 0.0;
  double gamma_shape = 2.0;
  int rare_zone_levels = 2;  // levels kept to a handful of rows
  std::uint64_t seed = 1;
};

/// Header + data rows, ready to write as CSV or feed through frame_from_cells.
std::vector<std::vector<std::string>> make_synthetic_cells(const SynthConfig& config);

/// Modeling schema for the generated columns: log coverage as exposure,
/// discount numeric, three categoricals, paid amount response.
std::vector<ColumnSchema> synthetic_schema();

Frame make_synthetic(const SynthConfig& config);

}  // namespace claimnet
