#include "claimnet/attention_net.hpp"

#include <stdexcept>

namespace claimnet {

AttentionHeadParams make_attention_head(Eigen::Index width, int heads, bool learned_values,
                                        RngStream& rng, ParameterSet& params,
                                        const std::string& prefix) {
  if (heads < 1 || width % heads != 0)
    throw std::invalid_argument("attention head: width must divide evenly across heads");
  const Eigen::Index dh = width / heads;
  AttentionHeadParams head;
  for (int h = 0; h < heads; ++h) {
    head.wq.push_back(Tensor::make(glorot_uniform(width, dh, rng)));
    head.wk.push_back(Tensor::make(glorot_uniform(width, dh, rng)));
    params.add(prefix + "wq_h" + std::to_string(h), head.wq.back());
    params.add(prefix + "wk_h" + std::to_string(h), head.wk.back());
    if (learned_values) {
      head.wv.push_back(Tensor::make(glorot_uniform(width, dh, rng)));
      params.add(prefix + "wv_h" + std::to_string(h), head.wv.back());
    }
  }
  return head;
}

TensorPtr self_attention(const AttentionHeadParams& head, const TensorPtr& tokens,
                         Eigen::Index batch, Eigen::Index vars) {
  const int heads = static_cast<int>(head.wq.size());
  const Eigen::Index dh = head.wq.front()->cols();
  std::vector<TensorPtr> outputs;
  outputs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    TensorPtr q = matmul(tokens, head.wq[h]);
    TensorPtr k = matmul(tokens, head.wk[h]);
    TensorPtr v = head.wv.empty() ? (heads == 1 ? tokens : col_slice(tokens, h * dh, dh))
                                  : matmul(tokens, head.wv[h]);
    TensorPtr scores = attention_scores(q, k, batch, vars);
    outputs.push_back(attention_apply(scores, v, batch, vars));
  }
  return heads == 1 ? outputs.front() : concat_cols(outputs);
}

TransformerBlockParams make_transformer_block(Eigen::Index width, int heads,
                                              bool learned_values, RngStream& rng,
                                              ParameterSet& params,
                                              const std::string& prefix) {
  TransformerBlockParams block;
  block.attention = make_attention_head(width, heads, learned_values, rng, params, prefix);
  block.ln1_gain = Tensor::make(Matrix::Ones(1, width));
  block.ln1_bias = Tensor::make(Matrix::Zero(1, width));
  block.ln2_gain = Tensor::make(Matrix::Ones(1, width));
  block.ln2_bias = Tensor::make(Matrix::Zero(1, width));
  params.add(prefix + "ln1_gain", block.ln1_gain);
  params.add(prefix + "ln1_bias", block.ln1_bias);
  params.add(prefix + "ln2_gain", block.ln2_gain);
  params.add(prefix + "ln2_bias", block.ln2_bias);
  block.ffn_w1 = Tensor::make(glorot_uniform(width, 4 * width, rng));
  block.ffn_b1 = Tensor::make(Matrix::Zero(1, 4 * width));
  block.ffn_w2 = Tensor::make(glorot_uniform(4 * width, width, rng));
  block.ffn_b2 = Tensor::make(Matrix::Zero(1, width));
  params.add(prefix + "ffn_w1", block.ffn_w1);
  params.add(prefix + "ffn_b1", block.ffn_b1);
  params.add(prefix + "ffn_w2", block.ffn_w2);
  params.add(prefix + "ffn_b2", block.ffn_b2);
  return block;
}

TensorPtr transformer_block_forward(const TransformerBlockParams& block,
                                    const TensorPtr& tokens, Eigen::Index batch,
                                    Eigen::Index vars, double dropout_rate,
                                    RngStream& rng, bool training) {
  TensorPtr attn = self_attention(block.attention, tokens, batch, vars);
  TensorPtr h = layer_norm(add(tokens, dropout(attn, dropout_rate, rng, training)),
                           block.ln1_gain, block.ln1_bias);
  TensorPtr f = add_row(matmul(relu(add_row(matmul(h, block.ffn_w1), block.ffn_b1)),
                               block.ffn_w2),
                        block.ffn_b2);
  return layer_norm(add(h, dropout(f, dropout_rate, rng, training)), block.ln2_gain,
                    block.ln2_bias);
}

namespace {

std::vector<EmbeddingTable> make_shared_width_tables(const std::vector<Vocabulary>& vocabs,
                                                     int dim, RngStream& rng,
                                                     ParameterSet& params) {
  std::vector<EmbeddingTable> tables;
  tables.reserve(vocabs.size());
  for (const auto& vocab : vocabs) {
    EmbeddingTable table;
    table.variable = vocab.variable();
    table.cardinality = vocab.cardinality();
    table.rule = DimRule::fixed;
    table.dim = dim;
    table.weights = Tensor::make(glorot_uniform(vocab.cardinality() + 1, dim, rng));
    params.add("embed_" + table.variable, table.weights);
    tables.push_back(std::move(table));
  }
  return tables;
}

TensorPtr stack_embeddings(const std::vector<EmbeddingTable>& tables, const Batch& batch) {
  std::vector<TensorPtr> lookups;
  lookups.reserve(tables.size());
  for (std::size_t j = 0; j < tables.size(); ++j)
    lookups.push_back(embed_lookup(tables[j].weights, batch.cat_indices[j]));
  return concat_rows(lookups);
}

}  // namespace

SimpleAttentionNet::SimpleAttentionNet(const std::vector<Vocabulary>& vocabs, int n_numeric,
                                       AttentionNetConfig config, Normalizer normalizer)
    : config_(config), normalizer_(std::move(normalizer)) {
  if (vocabs.empty()) throw std::invalid_argument("attention net: no categorical variables");
  RngStream rng = RngStream(config.train.seed).derive(0x1417);
  tables_ = make_shared_width_tables(vocabs, config.embed_dim, rng, params_);
  head_ = make_attention_head(config.embed_dim, config.heads, config.learned_values, rng,
                              params_, "attn_");
  const Eigen::Index q = static_cast<Eigen::Index>(vocabs.size());
  const Eigen::Index feature_dim = q * config.embed_dim + n_numeric;
  hidden_w_ = Tensor::make(glorot_uniform(feature_dim, config.hidden_units, rng));
  hidden_b_ = Tensor::make(Matrix::Zero(1, config.hidden_units));
  out_w_ = Tensor::make(glorot_uniform(config.hidden_units, 1, rng));
  out_b_ = Tensor::make(Matrix::Zero(1, 1));
  params_.add("hidden_w", hidden_w_);
  params_.add("hidden_b", hidden_b_);
  params_.add("out_w", out_w_);
  params_.add("out_b", out_b_);
}

TensorPtr SimpleAttentionNet::forward(const Batch& batch, bool training, RngStream& rng) {
  if (batch.exposure.size() != batch.rows())
    throw std::invalid_argument("attention net: batch lacks exposure");
  const Eigen::Index n = batch.rows();
  const Eigen::Index q = static_cast<Eigen::Index>(tables_.size());
  TensorPtr stacked = stack_embeddings(tables_, batch);
  TensorPtr mixed = self_attention(head_, stacked, n, q);
  mixed = dropout(mixed, config_.dropout_rate, rng, training);
  TensorPtr feats = tokens_to_features(mixed, n, q);
  std::vector<TensorPtr> parts = {feats};
  if (batch.x_num.cols() > 0) parts.push_back(Tensor::make(batch.x_num));
  TensorPtr x = concat_cols(parts);
  TensorPtr h = relu(add_row(matmul(x, hidden_w_), hidden_b_));
  h = dropout(h, config_.dropout_rate, rng, training);
  TensorPtr proportion = sigmoid(add_row(matmul(h, out_w_), out_b_));
  return mul(proportion, Tensor::make(batch.exposure));
}

TabTransformerNet::TabTransformerNet(const std::vector<Vocabulary>& vocabs, int n_numeric,
                                     AttentionNetConfig config, Normalizer normalizer)
    : config_(config), normalizer_(std::move(normalizer)) {
  if (vocabs.empty()) throw std::invalid_argument("attention net: no categorical variables");
  RngStream rng = RngStream(config.train.seed).derive(0x1417);
  tables_ = make_shared_width_tables(vocabs, config.embed_dim, rng, params_);
  const Eigen::Index q = static_cast<Eigen::Index>(vocabs.size());
  token_width_ = config.embed_dim + config.d_col;
  if (config.d_col > 0) {
    col_ident_ = Tensor::make(glorot_uniform(q, config.d_col, rng));
    params_.add("col_ident", col_ident_);
  }
  for (int l = 0; l < config.depth; ++l)
    blocks_.push_back(make_transformer_block(token_width_, config.heads,
                                             config.learned_values, rng, params_,
                                             "block" + std::to_string(l) + "_"));
  const Eigen::Index feature_dim = q * token_width_ + n_numeric;
  hidden_w_ = Tensor::make(glorot_uniform(feature_dim, config.hidden_units, rng));
  hidden_b_ = Tensor::make(Matrix::Zero(1, config.hidden_units));
  out_w_ = Tensor::make(glorot_uniform(config.hidden_units, 1, rng));
  out_b_ = Tensor::make(Matrix::Zero(1, 1));
  params_.add("hidden_w", hidden_w_);
  params_.add("hidden_b", hidden_b_);
  params_.add("out_w", out_w_);
  params_.add("out_b", out_b_);
}

TensorPtr TabTransformerNet::forward_impl(const Batch& batch, bool training,
                                          RngStream& rng, TensorPtr* tokens_out) {
  if (batch.exposure.size() != batch.rows())
    throw std::invalid_argument("attention net: batch lacks exposure");
  const Eigen::Index n = batch.rows();
  const Eigen::Index q = static_cast<Eigen::Index>(tables_.size());
  TensorPtr tokens = stack_embeddings(tables_, batch);
  if (config_.d_col > 0) {
    std::vector<int> ident_idx(static_cast<std::size_t>(q * n));
    for (Eigen::Index v = 0; v < q; ++v)
      for (Eigen::Index i = 0; i < n; ++i)
        ident_idx[static_cast<std::size_t>(v * n + i)] = static_cast<int>(v);
    tokens = concat_cols({tokens, embed_lookup(col_ident_, ident_idx)});
  }
  for (const auto& block : blocks_)
    tokens = transformer_block_forward(block, tokens, n, q, config_.dropout_rate, rng,
                                       training);
  if (tokens_out) *tokens_out = tokens;
  TensorPtr feats = tokens_to_features(tokens, n, q);
  std::vector<TensorPtr> parts = {feats};
  if (batch.x_num.cols() > 0) parts.push_back(Tensor::make(batch.x_num));
  TensorPtr x = concat_cols(parts);
  TensorPtr h = relu(add_row(matmul(x, hidden_w_), hidden_b_));
  h = dropout(h, config_.dropout_rate, rng, training);
  TensorPtr proportion = sigmoid(add_row(matmul(h, out_w_), out_b_));
  return mul(proportion, Tensor::make(batch.exposure));
}

TensorPtr TabTransformerNet::forward(const Batch& batch, bool training, RngStream& rng) {
  return forward_impl(batch, training, rng, nullptr);
}

TabTransformerNet::ContextualPair TabTransformerNet::extract_contextual(
    const Dataset& ds, const std::vector<int>& rows, const std::string& variable,
    int batch_size) {
  Eigen::Index var = -1;
  for (std::size_t j = 0; j < tables_.size(); ++j)
    if (tables_[j].variable == variable) var = static_cast<Eigen::Index>(j);
  if (var < 0)
    throw std::invalid_argument("extract_contextual: " + variable +
                                " is not a categorical variable of this net");
  ContextualPair pair;
  pair.static_rows.resize(rows.size(), config_.embed_dim);
  pair.contextual_rows.resize(rows.size(), token_width_);
  RngStream unused(0);
  for (std::size_t at = 0; at < rows.size(); at += batch_size) {
    std::size_t len = std::min<std::size_t>(batch_size, rows.size() - at);
    std::vector<int> chunk(rows.begin() + at, rows.begin() + at + len);
    Batch batch = make_batch(ds, normalizer_, chunk);
    TensorPtr tokens;
    forward_impl(batch, false, unused, &tokens);
    const Eigen::Index n = batch.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      int level = batch.cat_indices[var][i];
      pair.static_rows.row(static_cast<Eigen::Index>(at) + i) =
          tables_[var].weights->value.row(level);
      pair.contextual_rows.row(static_cast<Eigen::Index>(at) + i) =
          tokens->value.row(var * n + i);
    }
  }
  return pair;
}

void write_contextual_csv(const std::string& path, const Eigen::MatrixXd& static_rows,
                          const Eigen::MatrixXd& contextual_rows) {
  if (static_rows.rows() != contextual_rows.rows())
    throw std::invalid_argument("write_contextual_csv: row count mismatch");
  const Eigen::Index dim = std::max(static_rows.cols(), contextual_rows.cols());
  std::vector<std::string> header = {"observation_id", "kind"};
  for (Eigen::Index d = 0; d < dim; ++d) header.push_back("e" + std::to_string(d + 1));
  std::vector<std::vector<std::string>> rows;
  rows.reserve(2 * static_rows.rows());
  auto emit = [&](const Eigen::MatrixXd& m, const char* kind) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      std::vector<std::string> row = {std::to_string(i), kind};
      for (Eigen::Index d = 0; d < dim; ++d)
        row.push_back(d < m.cols() ? format_double(m(i, d)) : "");
      rows.push_back(std::move(row));
    }
  };
  emit(static_rows, "static");
  emit(contextual_rows, "contextual");
  write_csv(path, header, rows);
}

}  // namespace claimnet
