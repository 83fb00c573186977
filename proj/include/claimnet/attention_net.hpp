#pragma once

#include "claimnet/embedding_net.hpp"

namespace claimnet {

struct AttentionNetConfig {
  int embed_dim = 16;  // shared embedding width d; 8 also used in the literature
  int d_col = 4;       // column-identifier width (TabTransformer); 0 disables
  int depth = 1;       // transformer blocks
  int heads = 1;
  bool learned_values = false;  // value projection; identity when false
  int hidden_units = 8;
  double dropout_rate = 0.025;
  TrainConfig train = {0.001, 1000, 150, 150, 0};
};

/// Query/key (and optional value) projections for one attention layer. With
/// several heads each projection maps width -> width/heads and the per-head
/// outputs concatenate back to the full width.
struct AttentionHeadParams {
  std::vector<TensorPtr> wq, wk, wv;  // wv empty = identity values
};

AttentionHeadParams make_attention_head(Eigen::Index width, int heads, bool learned_values,
                                        RngStream& rng, ParameterSet& params,
                                        const std::string& prefix);

/// Scaled dot-product self-attention over a variable-major token stack.
TensorPtr self_attention(const AttentionHeadParams& head, const TensorPtr& tokens,
                         Eigen::Index batch, Eigen::Index vars);

struct TransformerBlockParams {
  AttentionHeadParams attention;
  TensorPtr ln1_gain, ln1_bias, ln2_gain, ln2_bias;
  TensorPtr ffn_w1, ffn_b1, ffn_w2, ffn_b2;  // width -> 4*width -> width
};

TransformerBlockParams make_transformer_block(Eigen::Index width, int heads,
                                              bool learned_values, RngStream& rng,
                                              ParameterSet& params,
                                              const std::string& prefix);

/// H = layer_norm(tokens + dropout(attention(tokens)));
/// out = layer_norm(H + dropout(ffn(H))). Shape preserving.
TensorPtr transformer_block_forward(const TransformerBlockParams& block,
                                    const TensorPtr& tokens, Eigen::Index batch,
                                    Eigen::Index vars, double dropout_rate,
                                    RngStream& rng, bool training);

/// Model-5 style network: shared-width embeddings -> self-attention -> flatten
/// -> concat numerics -> dense head -> sigmoid * coverage.
class SimpleAttentionNet : public SeverityModel {
public:
  SimpleAttentionNet(const std::vector<Vocabulary>& vocabs, int n_numeric,
                     AttentionNetConfig config, Normalizer normalizer);

  TensorPtr forward(const Batch& batch, bool training, RngStream& rng) override;
  ParameterSet& params() override { return params_; }
  const Normalizer& normalizer() const override { return normalizer_; }
  std::vector<EmbeddingTable>& tables() override { return tables_; }
  const AttentionNetConfig& config() const { return config_; }

private:
  AttentionNetConfig config_;
  Normalizer normalizer_;
  std::vector<EmbeddingTable> tables_;
  AttentionHeadParams head_;
  TensorPtr hidden_w_, hidden_b_, out_w_, out_b_;
  ParameterSet params_;
};

/// TabTransformer-style network: shared-width embeddings augmented with
/// per-variable identifier embeddings, passed through transformer blocks;
/// numerics bypass the blocks and join at the dense head.
class TabTransformerNet : public SeverityModel {
public:
  TabTransformerNet(const std::vector<Vocabulary>& vocabs, int n_numeric,
                    AttentionNetConfig config, Normalizer normalizer);

  TensorPtr forward(const Batch& batch, bool training, RngStream& rng) override;
  ParameterSet& params() override { return params_; }
  const Normalizer& normalizer() const override { return normalizer_; }
  std::vector<EmbeddingTable>& tables() override { return tables_; }
  const AttentionNetConfig& config() const { return config_; }
  Eigen::Index token_width() const { return token_width_; }
  const std::vector<TransformerBlockParams>& blocks() const { return blocks_; }
  const TensorPtr& column_identifiers() const { return col_ident_; }

  /// Per-observation static embedding rows (width d) and transformer-output
  /// rows (width d + d_col) for one variable, in inference mode.
  struct ContextualPair {
    Eigen::MatrixXd static_rows;
    Eigen::MatrixXd contextual_rows;
  };
  ContextualPair extract_contextual(const Dataset& ds, const std::vector<int>& rows,
                                    const std::string& variable, int batch_size = 4096);

private:
  TensorPtr forward_impl(const Batch& batch, bool training, RngStream& rng,
                         TensorPtr* tokens_out);

  AttentionNetConfig config_;
  Normalizer normalizer_;
  std::vector<EmbeddingTable> tables_;
  TensorPtr col_ident_;  // vars x d_col; unset when d_col == 0
  std::vector<TransformerBlockParams> blocks_;
  TensorPtr hidden_w_, hidden_b_, out_w_, out_b_;
  ParameterSet params_;
  Eigen::Index token_width_ = 0;
};

/// Paired export (observation_id, kind, e1..ek) with kind in {static,
/// contextual}; consumed by the reduction and GLM comparison workflows.
void write_contextual_csv(const std::string& path, const Eigen::MatrixXd& static_rows,
                          const Eigen::MatrixXd& contextual_rows);

}  // namespace claimnet
