#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "claimnet/attention_net.hpp"
#include "claimnet/csv.hpp"
#include "claimnet/data.hpp"
#include "claimnet/embedding_net.hpp"
#include "claimnet/glm.hpp"

namespace claimnet {

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  std::size_t count = 0;
};

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);
double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);
Metrics compute_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual);

enum class ModelKind {
  glm_dummy,
  mlp_1d,
  glm_embed,
  mlp_multid,
  simple_attention,
  tabtransformer,
  linear_benchmark,
};

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);
std::string model_display_name(ModelKind kind);

struct ExperimentSpec {
  ModelKind kind = ModelKind::glm_dummy;
  int folds = 5;
  std::uint64_t seed = 1;
  KvConfig config;  // model-specific knobs (hidden, epochs, embed_dim, ...)
};

struct FoldResult {
  Metrics metrics;
  double wall_seconds = 0.0;
};

struct EvalReport {
  ExperimentSpec spec;
  std::vector<FoldResult> folds;
  Metrics mean;
  // per-fold trained tables for embedding-based models (mlp/glm-embed kinds)
  std::vector<std::vector<EmbeddingValues>> fold_embeddings;
  std::vector<TrainHistory> fold_histories;
};

SeverityNetConfig mlp_config_from(const ExperimentSpec& spec, DimRule rule);
AttentionNetConfig attention_config_from(const ExperimentSpec& spec);

/// Everything one fold produces: held-out metrics plus the fitted artifacts
/// the CLI writes to disk.
struct SingleFoldResult {
  Metrics metrics;
  std::vector<Vocabulary> vocabs;
  // GLM kinds
  bool has_glm = false;
  GlmFit glm;
  DesignInfo design_info;  // populated for dummy designs (relativities)
  // network kinds
  bool has_net = false;
  std::unique_ptr<SeverityModel> net;
  std::vector<EmbeddingValues> tables;
  TrainHistory history;
  KvConfig config_echo;
};

SingleFoldResult fit_single_fold(const ExperimentSpec& spec, const Frame& frame,
                                 const SplitPlan& plan, int fold);

/// Per fold: rebuild vocabularies on the training rows only, encode, fit the
/// spec's model (80/20 analysis/assessment inside the training set), impute
/// unseen levels where applicable, score the held-out fold.
EvalReport cross_validate(const ExperimentSpec& spec, const Frame& frame);

/// Model-2 embeddings transferred into a gamma/log GLM, per fold. Equivalent
/// to cross_validate with kind glm_embed.
EvalReport transfer_pipeline(const Frame& frame, ExperimentSpec spec);

struct ContextualComparison {
  Metrics static_metrics;
  Metrics contextual_metrics;
  std::size_t sample_size = 0;
  // extracted rows for the first configured variable, for plot export
  Eigen::MatrixXd static_rows;
  Eigen::MatrixXd contextual_rows;
};

/// Trains a TabTransformer on one fold, samples 2N held-out observations
/// (N to fit, N to score), and fits gamma GLMs on the static embeddings and
/// on the contextual embeddings of the chosen variables.
ContextualComparison contextual_comparison(const Frame& frame, const ExperimentSpec& spec,
                                           const std::vector<std::string>& variables,
                                           std::size_t sample_size, int fold = 0);

/// Gamma/log GLM (rank-tolerant) fitted on one embedding design and scored on
/// another; the shared scoring path of the static/contextual comparison.
Metrics embedding_glm_metrics(const Eigen::MatrixXd& fit_design,
                              const Eigen::VectorXd& fit_y,
                              const Eigen::MatrixXd& eval_design,
                              const Eigen::VectorXd& eval_y);

struct LadderRow {
  ExperimentSpec spec;
  EvalReport report;
  bool failed = false;
  std::string error;
};

struct LadderResult {
  std::vector<LadderRow> rows;
};

/// Runs every spec; a failure is recorded on its row and the rest complete.
LadderResult run_ladder(const Frame& frame, const std::vector<ExperimentSpec>& specs);

void write_eval_report_csv(const std::string& path, const EvalReport& report);
void write_ladder_csv(const std::string& path, const LadderResult& ladder);
/// Aligned text table in the cross-validation-results style, RMSE and MAE
/// columns with thousands separators.
std::string ladder_table(const LadderResult& ladder);

}  // namespace claimnet
