#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "claimnet/data.hpp"

namespace claimnet {

enum class Family { gamma, gaussian };
enum class Link { log_link, identity };

struct GlmSpec {
  Family family = Family::gamma;
  Link link = Link::log_link;
  bool intercept = true;
  double tolerance = 1e-8;   // on max |delta beta|
  int max_iterations = 50;
  // Column-pivoted rank check threshold is 1e-10 * largest pivot. With
  // allow_rank_deficient a deficient design solves anyway (predictions remain
  // well defined; coefficients are not unique and std errors are NaN).
  bool allow_rank_deficient = false;
};

struct GlmFit {
  GlmSpec spec;
  std::vector<std::string> term_names;
  Eigen::VectorXd beta;        // intercept first when present
  Eigen::VectorXd std_errors;
  int iterations = 0;
  bool converged = false;
  double deviance = 0.0;
  double dispersion = 1.0;  // Pearson estimate
  std::vector<double> deviance_trace;

  Eigen::VectorXd linear_predictor(const Eigen::MatrixXd& design) const;
  Eigen::VectorXd predict(const Eigen::MatrixXd& design) const;
};

/// IWLS on the working response until max |delta beta| < tolerance or the
/// iteration cap. The design excludes the intercept column; it is prepended
/// internally when spec.intercept.
GlmFit fit_iwls(const GlmSpec& spec, const Eigen::MatrixXd& design,
                const Eigen::VectorXd& y, std::vector<std::string> names = {});

struct CatTermGroup {
  std::string variable;
  std::string baseline;
  std::vector<std::string> labels;  // non-baseline levels, design order
  std::vector<int> columns;         // design column per label
};

struct DesignInfo {
  std::vector<std::string> column_names;
  std::vector<CatTermGroup> groups;
};

struct DummyDesign {
  Eigen::MatrixXd X;
  DesignInfo info;
};

/// Numeric columns followed by dummy blocks per categorical variable.
/// Baseline defaults to the first vocabulary level; override per variable by
/// label. With allow_unseen, unseen rows encode as the baseline.
DummyDesign build_dummy_design(const Dataset& ds, const std::vector<Vocabulary>& vocabs,
                               const std::map<std::string, std::string>& baseline_override = {},
                               bool allow_unseen = false);

struct RelativityRow {
  std::string variable;
  std::string label;
  double relativity;
};

/// exp(beta) per dummy column plus a 1.00 row for each baseline. Errors on
/// identity-link fits.
std::vector<RelativityRow> relativities(const GlmFit& fit, const DesignInfo& info);
void write_relativities_csv(const std::string& path, const std::vector<RelativityRow>& rows);

/// Key-value export of term names to coefficients.
void write_glm_fit(const std::string& path, const GlmFit& fit);

/// 1 + |J_num| + sum(n_j) - |J_cat| for dummy coding. Cardinalities must be >= 2.
long param_count_dummy(int n_num, const std::vector<int>& cardinalities);
/// 1 + |J_num| + |J_cat| when every categorical enters as one embedding value.
long param_count_embedding(int n_num, int n_cat);

/// Trained embedding matrix for one variable; row order follows the
/// vocabulary with the unseen slot last.
struct EmbeddingValues {
  std::string variable;
  Eigen::MatrixXd values;  // (cardinality + 1) x dim
};

struct EmbeddingDesign {
  Eigen::MatrixXd X;
  std::vector<std::string> names;
};

/// Numeric columns followed by embedding lookups; each embedding dimension
/// becomes one design column. Unseen rows read the table's unseen slot.
EmbeddingDesign build_embedding_design(const Dataset& ds,
                                       const std::vector<EmbeddingValues>& tables);

/// Gamma/log GLM on embeddings + numerics (the design above).
GlmFit fit_with_embeddings(const GlmSpec& spec, const Dataset& ds,
                           const std::vector<EmbeddingValues>& tables);

/// Gaussian/identity benchmark whose predictions are floored at 0.01.
struct LinearBenchmark {
  GlmFit fit;
  double floor = 0.01;
  Eigen::VectorXd predict(const Eigen::MatrixXd& design) const;
};

LinearBenchmark linear_benchmark(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                 std::vector<std::string> names = {});

}  // namespace claimnet
