#include "claimnet/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace claimnet {

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size()) throw std::invalid_argument("rmse: length mismatch");
  if (pred.size() == 0) throw std::invalid_argument("rmse: empty vectors");
  return std::sqrt((pred - actual).squaredNorm() / static_cast<double>(pred.size()));
}

double mae(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  if (pred.size() != actual.size()) throw std::invalid_argument("mae: length mismatch");
  if (pred.size() == 0) throw std::invalid_argument("mae: empty vectors");
  return (pred - actual).cwiseAbs().mean();
}

Metrics compute_metrics(const Eigen::VectorXd& pred, const Eigen::VectorXd& actual) {
  return {rmse(pred, actual), mae(pred, actual), static_cast<std::size_t>(pred.size())};
}

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "glm-dummy") return ModelKind::glm_dummy;
  if (name == "mlp-1d") return ModelKind::mlp_1d;
  if (name == "glm-embed") return ModelKind::glm_embed;
  if (name == "mlp-multid") return ModelKind::mlp_multid;
  if (name == "simple-attention") return ModelKind::simple_attention;
  if (name == "tabtransformer") return ModelKind::tabtransformer;
  if (name == "linear-benchmark") return ModelKind::linear_benchmark;
  throw std::invalid_argument("unknown model kind: " + name);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::glm_dummy: return "glm-dummy";
    case ModelKind::mlp_1d: return "mlp-1d";
    case ModelKind::glm_embed: return "glm-embed";
    case ModelKind::mlp_multid: return "mlp-multid";
    case ModelKind::simple_attention: return "simple-attention";
    case ModelKind::tabtransformer: return "tabtransformer";
    case ModelKind::linear_benchmark: return "linear-benchmark";
  }
  throw std::invalid_argument("unknown model kind");
}

std::string model_display_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::glm_dummy: return "GLM (gamma/log), dummy coding";
    case ModelKind::mlp_1d: return "MLP with 1-dimensional embeddings";
    case ModelKind::glm_embed: return "GLM (gamma/log), embeddings as covariates";
    case ModelKind::mlp_multid: return "MLP with multidimensional embeddings";
    case ModelKind::simple_attention: return "Simple attention network";
    case ModelKind::tabtransformer: return "TabTransformer";
    case ModelKind::linear_benchmark: return "Linear regression, predictions capped at 0.01";
  }
  return "?";
}

SeverityNetConfig mlp_config_from(const ExperimentSpec& spec, DimRule rule) {
  SeverityNetConfig config;
  config.rule = rule;
  config.fixed_dim = kv_int(spec.config, "fixed_dim", 1);
  config.hidden_units = kv_int(spec.config, "hidden", 8);
  config.dropout_rate = kv_double(spec.config, "dropout", 0.0);
  config.train.learning_rate = kv_double(spec.config, "lr", 0.01);
  config.train.batch_size = kv_int(spec.config, "batch", 1000);
  config.train.max_epochs = kv_int(spec.config, "epochs", 15);
  config.train.patience = kv_int(spec.config, "patience", 5);
  return config;
}

AttentionNetConfig attention_config_from(const ExperimentSpec& spec) {
  AttentionNetConfig config;
  config.embed_dim = kv_int(spec.config, "embed_dim", 16);
  config.d_col = kv_int(spec.config, "d_col", 4);
  config.depth = kv_int(spec.config, "depth", 1);
  config.heads = kv_int(spec.config, "heads", 1);
  config.learned_values = kv_int(spec.config, "learned_values", 0) != 0;
  config.hidden_units = kv_int(spec.config, "hidden", 8);
  config.dropout_rate = kv_double(spec.config, "dropout", 0.025);
  config.train.learning_rate = kv_double(spec.config, "lr", 0.001);
  config.train.batch_size = kv_int(spec.config, "batch", 1000);
  config.train.max_epochs = kv_int(spec.config, "epochs", 150);
  config.train.patience = kv_int(spec.config, "patience", kv_int(spec.config, "epochs", 150));
  return config;
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string item;
  while (std::getline(in, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

// local positions of `subset` (sorted global ids) within `training` (sorted)
std::vector<int> local_indices(const std::vector<int>& training,
                               const std::vector<int>& subset) {
  std::vector<int> local;
  local.reserve(subset.size());
  for (int g : subset) {
    auto it = std::lower_bound(training.begin(), training.end(), g);
    if (it == training.end() || *it != g)
      throw std::logic_error("local_indices: row not in training set");
    local.push_back(static_cast<int>(it - training.begin()));
  }
  return local;
}

std::map<std::string, std::string> baseline_overrides(const KvConfig& config) {
  std::map<std::string, std::string> out;
  for (const auto& [key, value] : config)
    if (key.rfind("baseline.", 0) == 0) out[key.substr(9)] = value;
  return out;
}

// normalize declared-normalize numeric columns in place using analysis stats
void apply_declared_normalization(Dataset& train_ds, Dataset& test_ds,
                                  const std::vector<int>& analysis_local) {
  bool any = false;
  for (bool flag : train_ds.numeric_normalize) any = any || flag;
  if (!any) return;
  Normalizer nz = Normalizer::fit(train_ds, analysis_local);
  Eigen::MatrixXd train_norm = nz.apply(train_ds.X_num);
  Eigen::MatrixXd test_norm = nz.apply(test_ds.X_num);
  for (std::size_t j = 0; j < train_ds.numeric_normalize.size(); ++j) {
    if (!train_ds.numeric_normalize[j]) continue;
    train_ds.X_num.col(j) = train_norm.col(j);
    test_ds.X_num.col(j) = test_norm.col(j);
  }
}

struct FoldData {
  std::vector<Vocabulary> vocabs;
  Dataset train_ds, test_ds;
  std::vector<int> analysis_local, assessment_local;
};

FoldData prepare_fold(const Frame& frame, const SplitPlan& plan, int fold) {
  FoldData fd;
  std::vector<int> training = plan.training_rows(fold);
  fd.vocabs = build_vocabularies(frame, training);
  fd.train_ds = encode_dataset(frame, fd.vocabs, training);
  fd.test_ds = encode_dataset(frame, fd.vocabs, plan.test_rows[fold]);
  fd.analysis_local = local_indices(training, plan.analysis_rows[fold]);
  fd.assessment_local = local_indices(training, plan.assessment_rows[fold]);
  return fd;
}

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  return splitmix64(seed ^ splitmix64(0xf01d0000ULL + static_cast<std::uint64_t>(fold)));
}

// row-index audit: test rows never overlap the training partitions, and the
// analysis/assessment partitions tile the training set exactly
void audit_fold(const SplitPlan& plan, int fold) {
  const auto& test = plan.test_rows[fold];
  const auto& analysis = plan.analysis_rows[fold];
  const auto& assessment = plan.assessment_rows[fold];
  std::vector<int> train;
  train.reserve(analysis.size() + assessment.size());
  std::merge(analysis.begin(), analysis.end(), assessment.begin(), assessment.end(),
             std::back_inserter(train));
  if (std::adjacent_find(train.begin(), train.end()) != train.end())
    throw std::logic_error("split audit: analysis and assessment overlap");
  std::vector<int> overlap;
  std::set_intersection(train.begin(), train.end(), test.begin(), test.end(),
                        std::back_inserter(overlap));
  if (!overlap.empty())
    throw std::logic_error("split audit: test rows leak into training");
  if (train.size() + test.size() != plan.fold_of_row.size())
    throw std::logic_error("split audit: partitions do not tile the rows");
}

}  // namespace

SingleFoldResult fit_single_fold(const ExperimentSpec& spec, const Frame& frame,
                                 const SplitPlan& plan, int fold) {
  if (fold < 0 || fold >= plan.k)
    throw std::invalid_argument("fit_single_fold: fold out of range");

  // glm kinds may recode configured variables to their zone prefix
  const Frame* model_frame = &frame;
  Frame recoded;
  std::string prefix_vars = kv_string(spec.config, "prefix_vars", "");
  if ((spec.kind == ModelKind::glm_dummy || spec.kind == ModelKind::linear_benchmark) &&
      !prefix_vars.empty()) {
    recoded = frame;
    for (const auto& var : split_list(prefix_vars)) {
      int j = recoded.categorical_index(var);
      if (j < 0) throw std::invalid_argument("prefix_vars: no categorical column " + var);
      for (auto& label : recoded.categorical_cols[j]) label = zone_prefix(label);
    }
    model_frame = &recoded;
  }

  FoldData fd = prepare_fold(*model_frame, plan, fold);
  SingleFoldResult result;
  result.vocabs = fd.vocabs;
  result.config_echo = spec.config;
  result.config_echo["model"] = to_string(spec.kind);
  result.config_echo["seed"] = std::to_string(spec.seed);
  result.config_echo["fold"] = std::to_string(fold);
  Eigen::VectorXd pred;

  switch (spec.kind) {
    case ModelKind::glm_dummy:
    case ModelKind::linear_benchmark: {
      apply_declared_normalization(fd.train_ds, fd.test_ds, fd.analysis_local);
      auto baselines = baseline_overrides(spec.config);
      DummyDesign train_design =
          build_dummy_design(fd.train_ds, fd.vocabs, baselines, false);
      DummyDesign test_design = build_dummy_design(fd.test_ds, fd.vocabs, baselines, true);
      result.design_info = train_design.info;
      result.has_glm = true;
      if (spec.kind == ModelKind::glm_dummy) {
        GlmSpec glm_spec;  // gamma/log
        result.glm = fit_iwls(glm_spec, train_design.X, fd.train_ds.y,
                              train_design.info.column_names);
        pred = result.glm.predict(test_design.X);
      } else {
        LinearBenchmark bench = linear_benchmark(train_design.X, fd.train_ds.y,
                                                 train_design.info.column_names);
        result.glm = bench.fit;
        pred = bench.predict(test_design.X);
      }
      break;
    }
    case ModelKind::mlp_1d:
    case ModelKind::mlp_multid:
    case ModelKind::glm_embed: {
      DimRule rule = spec.kind == ModelKind::mlp_multid ? DimRule::half_cardinality
                                                        : DimRule::fixed_one;
      SeverityNetConfig config = mlp_config_from(spec, rule);
      config.train.seed = fold_seed(spec.seed, fold);
      Normalizer nz = Normalizer::fit(fd.train_ds, fd.analysis_local);
      auto net = std::make_unique<MlpSeverityNet>(
          fd.vocabs, static_cast<int>(fd.train_ds.X_num.cols()), config, nz);
      result.history = train_severity_model(*net, fd.train_ds, fd.analysis_local,
                                            fd.assessment_local, config.train);
      impute_unseen(net->tables());
      result.tables = embedding_values(net->tables());
      result.has_net = true;
      result.config_echo["dim_rule"] =
          rule == DimRule::half_cardinality ? "half_cardinality" : "fixed_one";
      if (spec.kind == ModelKind::glm_embed) {
        GlmSpec glm_spec;  // gamma/log on embeddings + numerics
        result.glm = fit_with_embeddings(glm_spec, fd.train_ds, result.tables);
        result.has_glm = true;
        EmbeddingDesign test_design = build_embedding_design(fd.test_ds, result.tables);
        pred = result.glm.predict(test_design.X);
      } else {
        pred = net->predict(fd.test_ds);
      }
      result.net = std::move(net);
      break;
    }
    case ModelKind::simple_attention:
    case ModelKind::tabtransformer: {
      AttentionNetConfig config = attention_config_from(spec);
      config.train.seed = fold_seed(spec.seed, fold);
      Normalizer nz = Normalizer::fit(fd.train_ds, fd.analysis_local);
      std::unique_ptr<SeverityModel> net;
      if (spec.kind == ModelKind::simple_attention)
        net = std::make_unique<SimpleAttentionNet>(
            fd.vocabs, static_cast<int>(fd.train_ds.X_num.cols()), config, nz);
      else
        net = std::make_unique<TabTransformerNet>(
            fd.vocabs, static_cast<int>(fd.train_ds.X_num.cols()), config, nz);
      result.history = train_severity_model(*net, fd.train_ds, fd.analysis_local,
                                            fd.assessment_local, config.train);
      impute_unseen(net->tables());
      result.tables = embedding_values(net->tables());
      result.has_net = true;
      pred = net->predict(fd.test_ds);
      result.net = std::move(net);
      break;
    }
  }

  result.metrics = compute_metrics(pred, fd.test_ds.y);
  return result;
}

EvalReport cross_validate(const ExperimentSpec& spec, const Frame& frame) {
  EvalReport report;
  report.spec = spec;
  SplitPlan plan = make_splits(frame.rows(), spec.folds, spec.seed);

  for (int fold = 0; fold < spec.folds; ++fold) {
    auto t0 = std::chrono::steady_clock::now();
    SingleFoldResult fr = fit_single_fold(spec, frame, plan, fold);
    double wall =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    report.folds.push_back({fr.metrics, wall});
    if (fr.has_net) {
      report.fold_embeddings.push_back(std::move(fr.tables));
      report.fold_histories.push_back(std::move(fr.history));
    }
  }

  for (const auto& fr : report.folds) {
    report.mean.rmse += fr.metrics.rmse;
    report.mean.mae += fr.metrics.mae;
    report.mean.count += fr.metrics.count;
  }
  report.mean.rmse /= static_cast<double>(report.folds.size());
  report.mean.mae /= static_cast<double>(report.folds.size());
  return report;
}

EvalReport transfer_pipeline(const Frame& frame, ExperimentSpec spec) {
  spec.kind = ModelKind::glm_embed;
  return cross_validate(spec, frame);
}

Metrics embedding_glm_metrics(const Eigen::MatrixXd& fit_design,
                              const Eigen::VectorXd& fit_y,
                              const Eigen::MatrixXd& eval_design,
                              const Eigen::VectorXd& eval_y) {
  GlmSpec spec;  // gamma/log; static embeddings repeat per level, so allow
  spec.allow_rank_deficient = true;
  GlmFit fit = fit_iwls(spec, fit_design, fit_y);
  return compute_metrics(fit.predict(eval_design), eval_y);
}

ContextualComparison contextual_comparison(const Frame& frame, const ExperimentSpec& spec,
                                           const std::vector<std::string>& variables,
                                           std::size_t sample_size, int fold) {
  if (variables.empty())
    throw std::invalid_argument("contextual_comparison: no variables given");
  SplitPlan plan = make_splits(frame.rows(), spec.folds, spec.seed);
  if (fold < 0 || fold >= spec.folds)
    throw std::invalid_argument("contextual_comparison: fold out of range");
  FoldData fd = prepare_fold(frame, plan, fold);
  if (2 * sample_size > static_cast<std::size_t>(fd.test_ds.rows()))
    throw std::invalid_argument("contextual_comparison: sample exceeds fold size");

  AttentionNetConfig config = attention_config_from(spec);
  config.train.seed = fold_seed(spec.seed, fold);
  Normalizer nz = Normalizer::fit(fd.train_ds, fd.analysis_local);
  TabTransformerNet net(fd.vocabs, static_cast<int>(fd.train_ds.X_num.cols()), config, nz);
  train_severity_model(net, fd.train_ds, fd.analysis_local, fd.assessment_local,
                       config.train);
  impute_unseen(net.tables());

  std::vector<int> sample(fd.test_ds.rows());
  std::iota(sample.begin(), sample.end(), 0);
  RngStream sample_rng = RngStream(spec.seed).derive(0x5a3317);
  sample_rng.shuffle(sample);
  std::vector<int> fit_rows(sample.begin(), sample.begin() + sample_size);
  std::vector<int> eval_rows(sample.begin() + sample_size,
                             sample.begin() + 2 * sample_size);

  auto gather_y = [&](const std::vector<int>& rows) {
    Eigen::VectorXd y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i)
      y(static_cast<Eigen::Index>(i)) = fd.test_ds.y(rows[i]);
    return y;
  };
  auto design_for = [&](const std::vector<int>& rows, bool contextual) {
    Eigen::MatrixXd design;
    for (const auto& var : variables) {
      auto pair = net.extract_contextual(fd.test_ds, rows, var);
      const Eigen::MatrixXd& block = contextual ? pair.contextual_rows : pair.static_rows;
      if (design.size() == 0) {
        design = block;
      } else {
        Eigen::MatrixXd joined(design.rows(), design.cols() + block.cols());
        joined << design, block;
        design = std::move(joined);
      }
    }
    return design;
  };

  ContextualComparison out;
  out.sample_size = sample_size;
  Eigen::VectorXd fit_y = gather_y(fit_rows), eval_y = gather_y(eval_rows);
  out.static_metrics =
      embedding_glm_metrics(design_for(fit_rows, false), fit_y, design_for(eval_rows, false), eval_y);
  out.contextual_metrics =
      embedding_glm_metrics(design_for(fit_rows, true), fit_y, design_for(eval_rows, true), eval_y);
  auto first_pair = net.extract_contextual(fd.test_ds, eval_rows, variables.front());
  out.static_rows = std::move(first_pair.static_rows);
  out.contextual_rows = std::move(first_pair.contextual_rows);
  return out;
}

LadderResult run_ladder(const Frame& frame, const std::vector<ExperimentSpec>& specs) {
  if (specs.empty()) throw std::invalid_argument("run_ladder: no specs");
  LadderResult ladder;
  for (const auto& spec : specs) {
    LadderRow row;
    row.spec = spec;
    try {
      row.report = cross_validate(spec, frame);
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
    ladder.rows.push_back(std::move(row));
  }
  return ladder;
}

namespace {

std::vector<std::string> config_comments(const ExperimentSpec& spec) {
  std::vector<std::string> comments;
  comments.push_back("model=" + to_string(spec.kind));
  comments.push_back("folds=" + std::to_string(spec.folds));
  comments.push_back("seed=" + std::to_string(spec.seed));
  for (const auto& [k, v] : spec.config) comments.push_back("config." + k + "=" + v);
  return comments;
}

}  // namespace

void write_eval_report_csv(const std::string& path, const EvalReport& report) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t f = 0; f < report.folds.size(); ++f)
    rows.push_back({std::to_string(f), format_double(report.folds[f].metrics.rmse),
                    format_double(report.folds[f].metrics.mae),
                    std::to_string(report.folds[f].metrics.count)});
  rows.push_back({"mean", format_double(report.mean.rmse), format_double(report.mean.mae),
                  std::to_string(report.mean.count)});
  write_csv(path, {"fold", "rmse", "mae", "rows"}, rows, config_comments(report.spec));
}

void write_ladder_csv(const std::string& path, const LadderResult& ladder) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& row : ladder.rows) {
    const std::string model = to_string(row.spec.kind);
    if (row.failed) {
      rows.push_back({model, "", "", "", "error", row.error});
      continue;
    }
    for (std::size_t f = 0; f < row.report.folds.size(); ++f)
      rows.push_back({model, std::to_string(f),
                      format_double(row.report.folds[f].metrics.rmse),
                      format_double(row.report.folds[f].metrics.mae), "ok", ""});
    rows.push_back({model, "mean", format_double(row.report.mean.rmse),
                    format_double(row.report.mean.mae), "ok", ""});
  }
  std::vector<std::string> comments;
  if (!ladder.rows.empty()) {
    comments.push_back("seed=" + std::to_string(ladder.rows.front().spec.seed));
    comments.push_back("folds=" + std::to_string(ladder.rows.front().spec.folds));
  }
  write_csv(path, {"model", "fold", "rmse", "mae", "status", "message"}, rows, comments);
}

std::string ladder_table(const LadderResult& ladder) {
  std::size_t name_width = 5;
  for (const auto& row : ladder.rows)
    name_width = std::max(name_width, model_display_name(row.spec.kind).size());
  std::ostringstream out;
  out << std::string(name_width - 5, ' ') << "Model  " << "      RMSE" << "       MAE\n";
  for (const auto& row : ladder.rows) {
    std::string name = model_display_name(row.spec.kind);
    out << std::string(name_width - name.size(), ' ') << name << "  ";
    if (row.failed) {
      out << "     error  (" << row.error << ")\n";
      continue;
    }
    std::string r = format_thousands(row.report.mean.rmse);
    std::string m = format_thousands(row.report.mean.mae);
    out << std::string(r.size() < 10 ? 10 - r.size() : 0, ' ') << r;
    out << std::string(m.size() < 10 ? 10 - m.size() : 0, ' ') << m << "\n";
  }
  return out.str();
}

}  // namespace claimnet
