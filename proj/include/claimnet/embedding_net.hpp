#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "claimnet/csv.hpp"
#include "claimnet/data.hpp"
#include "claimnet/glm.hpp"
#include "claimnet/optimizer.hpp"
#include "claimnet/tensor.hpp"

namespace claimnet {

enum class DimRule { fixed_one, half_cardinality, fixed };

int embedding_dim(DimRule rule, int cardinality, int fixed_dim);

/// Per-variable level embeddings; row order follows the vocabulary, the last
/// row is the unseen-level slot. Training rows never carry the unseen index
/// (vocabularies are built on training data), so the slot receives no
/// gradient until impute_unseen fills it.
struct EmbeddingTable {
  std::string variable;
  TensorPtr weights;  // (cardinality + 1) x dim
  int cardinality = 0;
  int dim = 0;
  DimRule rule = DimRule::fixed_one;
};

struct TrainConfig {
  double learning_rate = 0.01;
  int batch_size = 1000;
  int max_epochs = 15;
  int patience = 5;
  std::uint64_t seed = 0;
};

struct SeverityNetConfig {
  DimRule rule = DimRule::fixed_one;
  int fixed_dim = 1;
  int hidden_units = 8;
  Activation hidden_activation = Activation::relu;
  double dropout_rate = 0.0;
  TrainConfig train;
};

/// Encoded minibatch: normalized numerics, per-variable vocabulary indices,
/// response and raw exposure dollars.
struct Batch {
  Eigen::MatrixXd x_num;
  std::vector<std::vector<int>> cat_indices;
  Eigen::VectorXd y;
  Eigen::VectorXd exposure;
  Eigen::Index rows() const { return y.size(); }
};

Batch make_batch(const Dataset& ds, const Normalizer& normalizer,
                 const std::vector<int>& rows);

struct TrainHistory {
  std::vector<double> analysis_loss;    // mean minibatch MSE per epoch
  std::vector<double> assessment_loss;  // full-pass MSE per epoch
  int best_epoch = -1;
  double best_loss = 0.0;
  int epochs_run = 0;
};

/// Common severity-network surface: embeddings in, sigmoid proportion out,
/// multiplied by the raw coverage amount.
class SeverityModel {
public:
  virtual ~SeverityModel() = default;
  virtual TensorPtr forward(const Batch& batch, bool training, RngStream& rng) = 0;
  virtual ParameterSet& params() = 0;
  virtual const Normalizer& normalizer() const = 0;
  virtual std::vector<EmbeddingTable>& tables() = 0;

  const TrainHistory& history() const { return history_; }
  void set_history(TrainHistory history) { history_ = std::move(history); }

  Eigen::VectorXd predict(const Dataset& ds, const std::vector<int>& rows,
                          int batch_size = 4096);
  Eigen::VectorXd predict(const Dataset& ds, int batch_size = 4096);

private:
  TrainHistory history_;
};

/// Feedforward net over embeddings + normalized numerics: concat -> dense
/// (ReLU) -> dense(1) -> sigmoid -> multiply by exposure.
class MlpSeverityNet : public SeverityModel {
public:
  MlpSeverityNet(const std::vector<Vocabulary>& vocabs, int n_numeric,
                 SeverityNetConfig config, Normalizer normalizer);

  TensorPtr forward(const Batch& batch, bool training, RngStream& rng) override;
  ParameterSet& params() override { return params_; }
  const Normalizer& normalizer() const override { return normalizer_; }
  std::vector<EmbeddingTable>& tables() override { return tables_; }
  const SeverityNetConfig& config() const { return config_; }

private:
  SeverityNetConfig config_;
  Normalizer normalizer_;
  std::vector<EmbeddingTable> tables_;
  TensorPtr hidden_w_, hidden_b_, out_w_, out_b_;
  ParameterSet params_;
};

/// Minibatch Adam with early stopping on the assessment loss; retains the
/// parameter snapshot from the best assessment epoch. Row indices are local
/// to `ds`, and the two sets must be disjoint.
TrainHistory train_severity_model(SeverityModel& model, const Dataset& ds,
                                  const std::vector<int>& analysis_rows,
                                  const std::vector<int>& assessment_rows,
                                  const TrainConfig& config);

/// Lower median: for an even count the lower of the two middle values.
double lower_median(std::vector<double> values);

/// Fills each table's unseen row, per dimension, with the lower median of the
/// trained level values. Applied after training, before scoring.
void impute_unseen(std::vector<EmbeddingTable>& tables);

std::vector<EmbeddingValues> embedding_values(const std::vector<EmbeddingTable>& tables);

/// CSV rows (variable, level, e1..e_q); the unseen slot exports with level
/// "(unseen)". Ragged dims pad with empty cells. Values round-trip exactly.
void write_embeddings_csv(const std::string& path,
                          const std::vector<EmbeddingValues>& tables,
                          const std::vector<Vocabulary>& vocabs);

struct EmbeddingsFile {
  std::vector<EmbeddingValues> tables;
  std::vector<Vocabulary> vocabs;
};
EmbeddingsFile read_embeddings_csv(const std::string& path);

/// Plain-text checkpoint: config block, vocabularies, then every parameter
/// matrix by name at full precision.
void save_checkpoint(const std::string& path, const std::string& model_kind,
                     const KvConfig& config_echo, const std::vector<Vocabulary>& vocabs,
                     const ParameterSet& params, const Normalizer& normalizer);

struct Checkpoint {
  std::string model_kind;
  KvConfig config;
  std::vector<Vocabulary> vocabs;
  std::vector<std::pair<std::string, Matrix>> parameters;
  std::vector<double> normalizer_mean, normalizer_sd;
};
Checkpoint load_checkpoint(const std::string& path);

/// Rebuilds an MLP severity net (Models 2/4 style) from a checkpoint.
std::unique_ptr<MlpSeverityNet> mlp_from_checkpoint(const Checkpoint& ck);

}  // namespace claimnet
