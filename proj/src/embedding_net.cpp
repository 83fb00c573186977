#include "claimnet/embedding_net.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace claimnet {

int embedding_dim(DimRule rule, int cardinality, int fixed_dim) {
  switch (rule) {
    // half_cardinality: ceil(n/2) where n counts the embedding dictionary
    // entries, i.e. the levels plus the unseen slot (4 levels -> 3 dims,
    // 67 levels -> 34 dims)
    case DimRule::fixed_one: return 1;
    case DimRule::half_cardinality: return (cardinality + 2) / 2;
    case DimRule::fixed: return fixed_dim;
  }
  throw std::invalid_argument("embedding_dim: unknown rule");
}

Batch make_batch(const Dataset& ds, const Normalizer& normalizer,
                 const std::vector<int>& rows) {
  Batch batch;
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd raw(n, ds.X_num.cols());
  batch.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    raw.row(i) = ds.X_num.row(rows[i]);
    batch.y(i) = ds.y(rows[i]);
  }
  batch.x_num = normalizer.apply(raw);
  batch.cat_indices.resize(ds.X_cat.cols());
  for (Eigen::Index j = 0; j < ds.X_cat.cols(); ++j) {
    batch.cat_indices[j].reserve(rows.size());
    for (int r : rows) batch.cat_indices[j].push_back(ds.X_cat(r, j));
  }
  if (ds.exposure.size() > 0) {
    batch.exposure.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) batch.exposure(i) = ds.exposure(rows[i]);
  }
  return batch;
}

Eigen::VectorXd SeverityModel::predict(const Dataset& ds, const std::vector<int>& rows,
                                       int batch_size) {
  Eigen::VectorXd out(rows.size());
  RngStream unused(0);
  for (std::size_t at = 0; at < rows.size(); at += batch_size) {
    std::size_t len = std::min<std::size_t>(batch_size, rows.size() - at);
    std::vector<int> chunk(rows.begin() + at, rows.begin() + at + len);
    Batch batch = make_batch(ds, normalizer(), chunk);
    TensorPtr pred = forward(batch, /*training=*/false, unused);
    out.segment(static_cast<Eigen::Index>(at), static_cast<Eigen::Index>(len)) =
        pred->value.col(0);
  }
  return out;
}

Eigen::VectorXd SeverityModel::predict(const Dataset& ds, int batch_size) {
  std::vector<int> rows(ds.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return predict(ds, rows, batch_size);
}

MlpSeverityNet::MlpSeverityNet(const std::vector<Vocabulary>& vocabs, int n_numeric,
                               SeverityNetConfig config, Normalizer normalizer)
    : config_(config), normalizer_(std::move(normalizer)) {
  RngStream init_rng = RngStream(config.train.seed).derive(0x1417);
  int feature_dim = n_numeric;
  for (const auto& vocab : vocabs) {
    EmbeddingTable table;
    table.variable = vocab.variable();
    table.cardinality = vocab.cardinality();
    table.rule = config.rule;
    table.dim = embedding_dim(config.rule, vocab.cardinality(), config.fixed_dim);
    table.weights =
        Tensor::make(glorot_uniform(vocab.cardinality() + 1, table.dim, init_rng));
    params_.add("embed_" + table.variable, table.weights);
    feature_dim += table.dim;
    tables_.push_back(std::move(table));
  }
  hidden_w_ = Tensor::make(glorot_uniform(feature_dim, config.hidden_units, init_rng));
  hidden_b_ = Tensor::make(Matrix::Zero(1, config.hidden_units));
  out_w_ = Tensor::make(glorot_uniform(config.hidden_units, 1, init_rng));
  out_b_ = Tensor::make(Matrix::Zero(1, 1));
  params_.add("hidden_w", hidden_w_);
  params_.add("hidden_b", hidden_b_);
  params_.add("out_w", out_w_);
  params_.add("out_b", out_b_);
}

TensorPtr MlpSeverityNet::forward(const Batch& batch, bool training, RngStream& rng) {
  if (batch.exposure.size() != batch.rows())
    throw std::invalid_argument("severity net: batch lacks exposure");
  if (batch.cat_indices.size() != tables_.size())
    throw std::invalid_argument("severity net: categorical count mismatch");
  std::vector<TensorPtr> parts;
  parts.reserve(tables_.size() + 1);
  for (std::size_t j = 0; j < tables_.size(); ++j)
    parts.push_back(embed_lookup(tables_[j].weights, batch.cat_indices[j]));
  if (batch.x_num.cols() > 0) parts.push_back(Tensor::make(batch.x_num));
  TensorPtr x = concat_cols(parts);
  TensorPtr h = activate(add_row(matmul(x, hidden_w_), hidden_b_),
                         config_.hidden_activation);
  h = dropout(h, config_.dropout_rate, rng, training);
  TensorPtr proportion = sigmoid(add_row(matmul(h, out_w_), out_b_));
  return mul(proportion, Tensor::make(batch.exposure));
}

namespace {

double dataset_loss(SeverityModel& model, const Dataset& ds,
                    const std::vector<int>& rows, int batch_size) {
  RngStream unused(0);
  double total = 0.0;
  for (std::size_t at = 0; at < rows.size(); at += batch_size) {
    std::size_t len = std::min<std::size_t>(batch_size, rows.size() - at);
    std::vector<int> chunk(rows.begin() + at, rows.begin() + at + len);
    Batch batch = make_batch(ds, model.normalizer(), chunk);
    TensorPtr pred = model.forward(batch, false, unused);
    total += (pred->value.col(0) - batch.y).squaredNorm();
  }
  return total / static_cast<double>(rows.size());
}

}  // namespace

TrainHistory train_severity_model(SeverityModel& model, const Dataset& ds,
                                  const std::vector<int>& analysis_rows,
                                  const std::vector<int>& assessment_rows,
                                  const TrainConfig& config) {
  if (analysis_rows.empty())
    throw std::invalid_argument("train_severity_model: empty analysis set");
  if (config.patience > config.max_epochs)
    throw std::invalid_argument("train_severity_model: patience exceeds max epochs");

  RngStream shuffle_rng = RngStream(config.seed).derive(0xe90c);
  RngStream dropout_rng = RngStream(config.seed).derive(0xd307);

  TrainHistory history;
  history.best_loss = std::numeric_limits<double>::infinity();
  ParameterSet::Snapshot best = model.params().snapshot();
  std::vector<int> order = analysis_rows;
  int stale = 0;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t at = 0; at < order.size(); at += config.batch_size) {
      std::size_t len = std::min<std::size_t>(config.batch_size, order.size() - at);
      std::vector<int> chunk(order.begin() + at, order.begin() + at + len);
      Batch batch = make_batch(ds, model.normalizer(), chunk);
      TensorPtr pred = model.forward(batch, true, dropout_rng);
      TensorPtr loss = mse_loss(pred, Tensor::make(batch.y));
      backward(loss);
      model.params().adam_step(config.learning_rate);
      epoch_loss += loss->value(0, 0) * static_cast<double>(len);
    }
    history.analysis_loss.push_back(epoch_loss / static_cast<double>(order.size()));

    double assess = assessment_rows.empty()
                        ? history.analysis_loss.back()
                        : dataset_loss(model, ds, assessment_rows, config.batch_size);
    history.assessment_loss.push_back(assess);
    history.epochs_run = epoch + 1;

    // "does not improve" means not strictly lower than the running best
    if (assess < history.best_loss) {
      history.best_loss = assess;
      history.best_epoch = epoch;
      best = model.params().snapshot();
      stale = 0;
    } else {
      ++stale;
      if (stale >= config.patience) break;
    }
  }
  model.params().restore(best);
  model.set_history(history);
  return history;
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("lower_median: empty input");
  std::sort(values.begin(), values.end());
  return values[(values.size() - 1) / 2];
}

void impute_unseen(std::vector<EmbeddingTable>& tables) {
  for (auto& table : tables) {
    Matrix& w = table.weights->value;
    for (int d = 0; d < table.dim; ++d) {
      std::vector<double> column(table.cardinality);
      for (int level = 0; level < table.cardinality; ++level) column[level] = w(level, d);
      w(table.cardinality, d) = lower_median(std::move(column));
    }
  }
}

std::vector<EmbeddingValues> embedding_values(const std::vector<EmbeddingTable>& tables) {
  std::vector<EmbeddingValues> out;
  out.reserve(tables.size());
  for (const auto& t : tables) out.push_back({t.variable, t.weights->value});
  return out;
}

void write_embeddings_csv(const std::string& path,
                          const std::vector<EmbeddingValues>& tables,
                          const std::vector<Vocabulary>& vocabs) {
  Eigen::Index max_dim = 0;
  for (const auto& t : tables) max_dim = std::max(max_dim, t.values.cols());
  std::vector<std::string> header = {"variable", "level"};
  for (Eigen::Index d = 0; d < max_dim; ++d) header.push_back("e" + std::to_string(d + 1));
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : tables) {
    const Vocabulary& vocab = vocabulary_for(vocabs, t.variable);
    if (t.values.rows() != vocab.cardinality() + 1)
      throw std::invalid_argument("write_embeddings_csv: table/vocabulary mismatch for " +
                                  t.variable);
    for (Eigen::Index r = 0; r < t.values.rows(); ++r) {
      std::vector<std::string> row = {
          t.variable,
          r < vocab.cardinality() ? vocab.level(static_cast<int>(r)) : "(unseen)"};
      for (Eigen::Index d = 0; d < max_dim; ++d)
        row.push_back(d < t.values.cols() ? format_double(t.values(r, d)) : "");
      rows.push_back(std::move(row));
    }
  }
  write_csv(path, header, rows);
}

EmbeddingsFile read_embeddings_csv(const std::string& path) {
  auto cells = read_csv(path);
  if (cells.size() < 2 || cells[0].size() < 3 || cells[0][0] != "variable" ||
      cells[0][1] != "level")
    throw std::runtime_error("embeddings file has unexpected header: " + path);
  EmbeddingsFile file;
  // rows arrive grouped by variable, levels in vocabulary order, unseen last
  std::size_t i = 1;
  while (i < cells.size()) {
    const std::string variable = cells[i][0];
    std::vector<std::string> levels;
    std::vector<std::vector<double>> values;
    bool saw_unseen = false;
    for (; i < cells.size() && cells[i][0] == variable; ++i) {
      const auto& row = cells[i];
      std::vector<double> v;
      for (std::size_t c = 2; c < row.size(); ++c) {
        if (row[c].empty()) break;
        v.push_back(std::stod(row[c]));
      }
      if (row[1] == "(unseen)") {
        saw_unseen = true;
        values.push_back(std::move(v));
      } else {
        if (saw_unseen)
          throw std::runtime_error("embeddings file: level after (unseen) row for " +
                                   variable);
        levels.push_back(row[1]);
        values.push_back(std::move(v));
      }
    }
    if (!saw_unseen)
      throw std::runtime_error("embeddings file: missing (unseen) row for " + variable);
    const std::size_t dim = values.front().size();
    Eigen::MatrixXd m(values.size(), dim);
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (values[r].size() != dim)
        throw std::runtime_error("embeddings file: ragged dims within " + variable);
      for (std::size_t d = 0; d < dim; ++d) m(r, d) = values[r][d];
    }
    file.tables.push_back({variable, std::move(m)});
    file.vocabs.emplace_back(variable, std::move(levels));
  }
  return file;
}

void save_checkpoint(const std::string& path, const std::string& model_kind,
                     const KvConfig& config_echo, const std::vector<Vocabulary>& vocabs,
                     const ParameterSet& params, const Normalizer& normalizer) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "claimnet-checkpoint 1\n";
  out << "model " << model_kind << "\n";
  out << "[config]\n";
  for (const auto& [k, v] : config_echo) out << k << " = " << v << "\n";
  out << "[normalizer] " << normalizer.means().size() << "\n";
  for (std::size_t i = 0; i < normalizer.means().size(); ++i)
    out << format_double(normalizer.means()[i]) << " " << format_double(normalizer.sds()[i])
        << "\n";
  for (const auto& vocab : vocabs) {
    out << "[vocabulary] " << vocab.variable() << " " << vocab.cardinality() << "\n";
    for (const auto& level : vocab.levels()) out << csv_escape(level) << "\n";
  }
  for (const auto& [name, tensor] : params.items()) {
    out << "[parameter] " << name << " " << tensor->rows() << " " << tensor->cols() << "\n";
    for (Eigen::Index r = 0; r < tensor->rows(); ++r) {
      for (Eigen::Index c = 0; c < tensor->cols(); ++c) {
        if (c) out << " ";
        out << format_double(tensor->value(r, c));
      }
      out << "\n";
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  Checkpoint ck;
  std::string line;
  if (!std::getline(in, line) || line != "claimnet-checkpoint 1")
    throw std::runtime_error("not a claimnet checkpoint: " + path);
  if (!std::getline(in, line) || line.rfind("model ", 0) != 0)
    throw std::runtime_error("checkpoint missing model line: " + path);
  ck.model_kind = line.substr(6);
  while (std::getline(in, line)) {
    if (line == "[config]") {
      continue;
    } else if (line.rfind("[normalizer] ", 0) == 0) {
      std::size_t n = std::stoul(line.substr(13));
      ck.normalizer_mean.resize(n);
      ck.normalizer_sd.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        in >> ck.normalizer_mean[i] >> ck.normalizer_sd[i];
      }
      std::getline(in, line);  // consume end of line
    } else if (line.rfind("[vocabulary] ", 0) == 0) {
      std::istringstream hdr(line.substr(13));
      std::string variable;
      int card;
      hdr >> variable >> card;
      std::vector<std::string> levels;
      for (int i = 0; i < card; ++i) {
        std::getline(in, line);
        auto parsed = parse_csv(line + "\n");
        levels.push_back(parsed.empty() || parsed[0].empty() ? "" : parsed[0][0]);
      }
      ck.vocabs.emplace_back(variable, std::move(levels));
    } else if (line.rfind("[parameter] ", 0) == 0) {
      std::istringstream hdr(line.substr(12));
      std::string name;
      Eigen::Index rows, cols;
      hdr >> name >> rows >> cols;
      Matrix m(rows, cols);
      for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) in >> m(r, c);
      std::getline(in, line);
      ck.parameters.emplace_back(name, std::move(m));
    } else if (!line.empty() && line.find('=') != std::string::npos) {
      auto kv = parse_kv(line);
      for (auto& [k, v] : kv) ck.config[k] = v;
    }
  }
  return ck;
}

std::unique_ptr<MlpSeverityNet> mlp_from_checkpoint(const Checkpoint& ck) {
  SeverityNetConfig config;
  std::string rule = kv_string(ck.config, "dim_rule", "fixed_one");
  config.rule = rule == "half_cardinality" ? DimRule::half_cardinality
               : rule == "fixed"           ? DimRule::fixed
                                           : DimRule::fixed_one;
  config.fixed_dim = kv_int(ck.config, "fixed_dim", 1);
  config.hidden_units = kv_int(ck.config, "hidden", 8);
  config.dropout_rate = kv_double(ck.config, "dropout", 0.0);
  config.train.seed = static_cast<std::uint64_t>(kv_double(ck.config, "seed", 0));
  Normalizer normalizer(ck.normalizer_mean, ck.normalizer_sd);
  int n_numeric = static_cast<int>(ck.normalizer_mean.size());
  auto net = std::make_unique<MlpSeverityNet>(ck.vocabs, n_numeric, config, normalizer);
  for (const auto& [name, value] : ck.parameters) {
    TensorPtr t = net->params().get(name);
    if (t->rows() != value.rows() || t->cols() != value.cols())
      throw std::runtime_error("checkpoint parameter shape mismatch: " + name);
    t->value = value;
  }
  return net;
}

}  // namespace claimnet
