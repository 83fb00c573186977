#include "claimnet/synth.hpp"

#include <cmath>
#include <cstdio>

#include "claimnet/csv.hpp"

namespace claimnet {

namespace {

std::string zone_label(int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "Z%02d", i);
  return buf;
}

}  // namespace

std::vector<std::vector<std::string>> make_synthetic_cells(const SynthConfig& config) {
  RngStream effects_rng = RngStream(config.seed).derive(0xeffec7);
  RngStream rows_rng = RngStream(config.seed).derive(0xda7a);

  std::vector<double> zone_eff(config.zone_levels);
  for (double& e : zone_eff) e = effects_rng.normal(0.0, config.zone_effect_sd);
  std::vector<double> bas_eff(config.basement_levels);
  for (double& e : bas_eff) e = effects_rng.normal(0.0, config.basement_effect_sd);
  std::vector<double> occ_eff(config.occupancy_levels);
  for (double& e : occ_eff) e = effects_rng.normal(0.0, config.occupancy_effect_sd);
  std::vector<std::vector<double>> inter(config.interaction_groups,
                                         std::vector<double>(config.basement_levels, 0.0));
  if (config.interaction_sd > 0.0)
    for (auto& row : inter)
      for (double& e : row) e = effects_rng.normal(0.0, config.interaction_sd);

  // skewed zone frequencies; the last rare_zone_levels levels stay tiny
  std::vector<double> zone_weight(config.zone_levels);
  double total = 0.0;
  for (int z = 0; z < config.zone_levels; ++z) {
    bool rare = z >= config.zone_levels - config.rare_zone_levels;
    zone_weight[z] = rare ? 1e-4 : 1.0 / std::sqrt(1.0 + z);
    total += zone_weight[z];
  }
  std::vector<double> zone_cum(config.zone_levels);
  double acc = 0.0;
  for (int z = 0; z < config.zone_levels; ++z) {
    acc += zone_weight[z] / total;
    zone_cum[z] = acc;
  }
  auto draw_zone = [&]() {
    double u = rows_rng.uniform();
    for (int z = 0; z < config.zone_levels; ++z)
      if (u <= zone_cum[z]) return z;
    return config.zone_levels - 1;
  };

  std::vector<std::vector<std::string>> cells;
  cells.push_back({"amountPaidOnBuildingClaim", "totalBuildingInsuranceCoverage",
                   "communityRatingSystemDiscount", "floodZone",
                   "basementEnclosureCrawlspaceType", "occupancyType"});
  for (std::size_t i = 0; i < config.rows; ++i) {
    double log_cov = rows_rng.normal(config.coverage_log_mean, config.coverage_log_sd);
    double coverage = std::exp(log_cov);
    double crs = 0.05 * static_cast<double>(rows_rng.uniform_index(10));  // 0.00 .. 0.45
    int zone = draw_zone();
    int basement = static_cast<int>(rows_rng.uniform_index(config.basement_levels));
    int occupancy = static_cast<int>(rows_rng.uniform_index(config.occupancy_levels));

    double log_mu = config.base_level + config.coverage_coef * log_cov +
                    zone_eff[zone] + bas_eff[basement] + occ_eff[occupancy] +
                    config.crs_coef * crs +
                    inter[zone % config.interaction_groups][basement];
    double mu = std::min(std::exp(log_mu), 0.95 * coverage);
    double y = rows_rng.gamma(config.gamma_shape, mu / config.gamma_shape);
    y = std::max(y, 1.0);  // severities below a dollar are not meaningful

    cells.push_back({format_double(y), format_double(coverage), format_double(crs),
                     zone_label(zone), "B" + std::to_string(basement),
                     "O" + std::to_string(occupancy)});
  }
  return cells;
}

std::vector<ColumnSchema> synthetic_schema() {
  return {
      {"amountPaidOnBuildingClaim", ColumnKind::response, Transform::none},
      {"totalBuildingInsuranceCoverage", ColumnKind::exposure, Transform::log_e},
      {"communityRatingSystemDiscount", ColumnKind::numeric, Transform::none},
      {"floodZone", ColumnKind::categorical, Transform::none},
      {"basementEnclosureCrawlspaceType", ColumnKind::categorical, Transform::none},
      {"occupancyType", ColumnKind::categorical, Transform::none},
  };
}

Frame make_synthetic(const SynthConfig& config) {
  return frame_from_cells(make_synthetic_cells(config), synthetic_schema());
}

}  // namespace claimnet
