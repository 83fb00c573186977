#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "claimnet/rng.hpp"

namespace claimnet {

enum class ColumnKind { numeric, categorical, response, exposure };
enum class Transform { none, log_e, normalize, zone_prefix };

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::numeric;
  Transform transform = Transform::none;
};

struct LoadReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::size_t dropped_missing_response = 0;
  std::size_t dropped_bad_exposure = 0;
  std::map<std::string, std::size_t> numeric_imputations;
  std::map<std::string, std::size_t> missing_categoricals;
};

/// Raw typed table. Log / zone-prefix transforms from the schema are already
/// applied; the exposure column keeps an untransformed copy alongside its
/// numeric one. Normalization is a modeling-time step (see Normalizer) so the
/// statistics can be fit on the analysis partition only.
struct Frame {
  std::vector<std::string> numeric_names;
  std::vector<bool> numeric_normalize;  // schema declared Transform::normalize
  std::vector<std::vector<double>> numeric_cols;
  std::vector<std::string> categorical_names;
  std::vector<std::vector<std::string>> categorical_cols;
  std::string response_name;
  std::vector<double> response;
  std::string exposure_name;
  std::vector<double> exposure;  // raw; empty when no exposure column
  LoadReport report;

  std::size_t rows() const { return response.size(); }
  bool has_exposure() const { return !exposure_name.empty(); }
  int numeric_index(const std::string& name) const;
  int categorical_index(const std::string& name) const;
};

Frame load_csv(const std::string& path, const std::vector<ColumnSchema>& schema);
Frame frame_from_cells(const std::vector<std::vector<std::string>>& cells,
                       const std::vector<ColumnSchema>& schema);
Frame select_rows(const Frame& frame, const std::vector<int>& rows);
void write_frame_csv(const std::string& path, const Frame& frame);

/// Maximal leading alphabetic run: "A01" -> "A", "AHB" -> "AHB". Labels with
/// no alphabetic prefix pass through unchanged. Throws on empty labels.
std::string zone_prefix(const std::string& label);

/// Ordered level set for one categorical variable. Levels sorted
/// lexicographically; the unseen sentinel index is one past the last level.
class Vocabulary {
public:
  Vocabulary() = default;
  Vocabulary(std::string variable, std::vector<std::string> sorted_levels);

  static Vocabulary build(const std::string& variable,
                          const std::vector<std::string>& labels,
                          const std::vector<int>& rows);
  static Vocabulary build_all(const std::string& variable,
                              const std::vector<std::string>& labels);

  const std::string& variable() const { return variable_; }
  const std::vector<std::string>& levels() const { return levels_; }
  int cardinality() const { return static_cast<int>(levels_.size()); }
  int unseen_index() const { return cardinality(); }
  bool contains(const std::string& label) const { return index_.count(label) != 0; }
  /// Seen labels map to their level index; anything else to unseen_index().
  int index_of(const std::string& label) const;
  const std::string& level(int index) const { return levels_.at(index); }

private:
  std::string variable_;
  std::vector<std::string> levels_;
  std::unordered_map<std::string, int> index_;
};

std::vector<Vocabulary> build_vocabularies(const Frame& frame, const std::vector<int>& rows);
const Vocabulary& vocabulary_for(const std::vector<Vocabulary>& vocabs,
                                 const std::string& variable);

/// Encoded view of a Frame row subset against fixed vocabularies.
struct Dataset {
  Eigen::MatrixXd X_num;
  std::vector<std::string> numeric_names;
  std::vector<bool> numeric_normalize;
  Eigen::MatrixXi X_cat;  // vocabulary indices; unseen levels = cardinality
  std::vector<std::string> categorical_names;
  Eigen::VectorXd y;
  Eigen::VectorXd exposure;

  Eigen::Index rows() const { return y.size(); }
  int categorical_index(const std::string& name) const;
};

Dataset encode_dataset(const Frame& frame, const std::vector<Vocabulary>& vocabs,
                       const std::vector<int>& rows);
Dataset encode_dataset(const Frame& frame, const std::vector<Vocabulary>& vocabs);

/// One indicator column per level; throws if any row carries the unseen index.
Eigen::MatrixXd encode_one_hot(const Dataset& ds, const std::string& variable,
                               const Vocabulary& vocab);

/// cardinality-1 indicator columns; the baseline level encodes as all zeros.
/// Unseen rows throw unless allow_unseen, in which case they also encode as
/// all zeros (scored at the baseline).
Eigen::MatrixXd encode_dummy(const Dataset& ds, const std::string& variable,
                             const Vocabulary& vocab, int baseline_index = 0,
                             bool allow_unseen = false);

/// Per-column standardization fitted on an explicit row subset so assessment
/// and test rows reuse the analysis statistics.
class Normalizer {
public:
  Normalizer() = default;
  Normalizer(std::vector<double> mean, std::vector<double> sd)
      : mean_(std::move(mean)), sd_(std::move(sd)) {}
  static Normalizer fit(const Dataset& ds, const std::vector<int>& local_rows);
  static Normalizer fit_all_rows(const Dataset& ds);
  Eigen::MatrixXd apply(const Eigen::MatrixXd& x_num) const;
  const std::vector<double>& means() const { return mean_; }
  const std::vector<double>& sds() const { return sd_; }

private:
  std::vector<double> mean_, sd_;
};

struct SplitPlan {
  std::uint64_t seed = 0;
  int k = 0;
  std::vector<int> fold_of_row;
  std::vector<std::vector<int>> test_rows;
  std::vector<std::vector<int>> analysis_rows;
  std::vector<std::vector<int>> assessment_rows;

  std::vector<int> training_rows(int fold) const;
};

/// k disjoint, exhaustive folds with sizes differing by at most one; within
/// each fold's training set, an 80:20 analysis/assessment partition. Fully
/// determined by (n_rows, k, seed).
SplitPlan make_splits(std::size_t n_rows, int k, std::uint64_t seed);
void write_split_plan(const std::string& path, const SplitPlan& plan);
SplitPlan read_split_plan(const std::string& path);

struct SummaryReport {
  // variable, level, count
  std::vector<std::tuple<std::string, std::string, std::size_t>> categorical_frequencies;
  // variable, min, q25, median, q75, max, mean, sd
  std::vector<std::tuple<std::string, double, double, double, double, double, double, double>>
      numeric_stats;
  // variable, bin_lo, bin_hi, count; includes "log(<response>)" bins
  std::vector<std::tuple<std::string, double, double, std::size_t>> histograms;
};

SummaryReport summarize(const Frame& frame);
void write_summary(const std::string& out_prefix, const SummaryReport& report);

/// Type-7 (linear interpolation) quantile of a copy of v.
double quantile(std::vector<double> v, double p);

}  // namespace claimnet
