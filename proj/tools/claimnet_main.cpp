// claimnet command-line interface: data preparation, cross-validated model
// experiments, embedding export and visualization reductions.

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "claimnet/attention_net.hpp"
#include "claimnet/csv.hpp"
#include "claimnet/data.hpp"
#include "claimnet/embedding_net.hpp"
#include "claimnet/eval.hpp"
#include "claimnet/glm.hpp"
#include "claimnet/reduce.hpp"
#include "claimnet/synth.hpp"

using namespace claimnet;

namespace {

std::vector<ColumnSchema> default_schema() {
  return {
      {"amountPaidOnBuildingClaim", ColumnKind::response, Transform::none},
      {"totalBuildingInsuranceCoverage", ColumnKind::exposure, Transform::log_e},
      {"communityRatingSystemDiscount", ColumnKind::numeric, Transform::none},
      {"floodZone", ColumnKind::categorical, Transform::none},
      {"occupancyType", ColumnKind::categorical, Transform::none},
      {"basementEnclosureCrawlspaceType", ColumnKind::categorical, Transform::none},
      {"numberOfFloorsInTheInsuredBuilding", ColumnKind::categorical, Transform::none},
      {"primaryResidence", ColumnKind::categorical, Transform::none},
  };
}

ColumnKind kind_from(const std::string& s) {
  if (s == "response") return ColumnKind::response;
  if (s == "exposure") return ColumnKind::exposure;
  if (s == "numeric") return ColumnKind::numeric;
  if (s == "categorical") return ColumnKind::categorical;
  throw std::runtime_error("schema: unknown column kind '" + s + "'");
}

Transform transform_from(const std::string& s) {
  if (s == "log") return Transform::log_e;
  if (s == "normalize") return Transform::normalize;
  if (s == "zone_prefix") return Transform::zone_prefix;
  if (s == "none" || s.empty()) return Transform::none;
  throw std::runtime_error("schema: unknown transform '" + s + "'");
}

// schema file lines: column = kind[:transform]
std::vector<ColumnSchema> schema_from_file(const std::string& path) {
  std::vector<ColumnSchema> schema;
  for (const auto& [column, value] : read_kv_file(path)) {
    std::size_t colon = value.find(':');
    ColumnSchema cs;
    cs.name = column;
    cs.kind = kind_from(value.substr(0, colon));
    if (colon != std::string::npos) cs.transform = transform_from(value.substr(colon + 1));
    schema.push_back(cs);
  }
  if (schema.empty()) throw std::runtime_error("schema file is empty: " + path);
  return schema;
}

// The built-in schema tolerates files that carry only a subset of the
// OpenFEMA columns (the synthetic generator emits such a subset). An
// explicit --schema stays strict.
Frame load_frame(const std::string& input, const std::string& schema_path) {
  auto cells = read_csv(input);
  if (cells.empty()) throw std::runtime_error("empty file: no header row");
  std::vector<ColumnSchema> schema;
  if (!schema_path.empty()) {
    schema = schema_from_file(schema_path);
  } else {
    std::set<std::string> header(cells[0].begin(), cells[0].end());
    for (const auto& cs : default_schema())
      if (header.count(cs.name)) schema.push_back(cs);
  }
  Frame frame = frame_from_cells(cells, schema);
  const LoadReport& rep = frame.report;
  std::cerr << "loaded " << rep.rows_kept << " of " << rep.rows_read << " rows";
  if (rep.dropped_missing_response)
    std::cerr << "; dropped " << rep.dropped_missing_response << " missing-response";
  if (rep.dropped_bad_exposure)
    std::cerr << "; dropped " << rep.dropped_bad_exposure << " bad-exposure";
  std::cerr << "\n";
  for (const auto& [col, n] : rep.numeric_imputations)
    std::cerr << "  imputed " << n << " missing values in " << col << " with its median\n";
  return frame;
}

ExperimentSpec make_spec(const std::string& model, int folds, std::uint64_t seed,
                         const std::string& config_path) {
  ExperimentSpec spec;
  spec.kind = model_kind_from_string(model);
  spec.folds = folds;
  spec.seed = seed;
  if (!config_path.empty()) spec.config = read_kv_file(config_path);
  return spec;
}

int parse_year(const std::string& cell) {
  if (cell.size() < 4) return -1;
  int year = 0;
  for (int i = 0; i < 4; ++i) {
    if (cell[i] < '0' || cell[i] > '9') return -1;
    year = year * 10 + (cell[i] - '0');
  }
  return year;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
  std::vector<std::vector<std::string>> rows;
  for (std::size_t e = 0; e < history.analysis_loss.size(); ++e)
    rows.push_back({std::to_string(e), format_double(history.analysis_loss[e]),
                    format_double(history.assessment_loss[e]),
                    static_cast<int>(e) == history.best_epoch ? "1" : "0"});
  write_csv(path, {"epoch", "analysis_loss", "assessment_loss", "best"}, rows);
}

void report_timings(const EvalReport& report) {
  for (std::size_t f = 0; f < report.folds.size(); ++f)
    std::cerr << "fold " << f << ": rmse " << format_thousands(report.folds[f].metrics.rmse)
              << ", mae " << format_thousands(report.folds[f].metrics.mae) << " ("
              << report.folds[f].wall_seconds << "s)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"claim severity models over categorical embeddings"};
  app.require_subcommand(1);

  std::string input, output, out_prefix, schema_path, config_path, model = "glm-dummy";
  std::uint64_t seed = 1;
  int folds = 5, fold = 0;

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate the seeded benchmark dataset");
  SynthConfig synth_config;
  synth_cmd->add_option("--out", output, "output CSV path")->required();
  synth_cmd->add_option("--rows", synth_config.rows, "row count");
  synth_cmd->add_option("--zone-levels", synth_config.zone_levels, "zone cardinality");
  synth_cmd->add_option("--interaction", synth_config.interaction_sd,
                        "zone-group x basement interaction scale (0 disables)");
  synth_cmd->add_option("--gamma-shape", synth_config.gamma_shape, "response shape");
  synth_cmd->add_option("--seed", synth_config.seed, "generator seed");
  synth_cmd->callback([&] {
    auto cells = make_synthetic_cells(synth_config);
    std::vector<std::vector<std::string>> rows(cells.begin() + 1, cells.end());
    write_csv(output, cells[0], rows);
    std::cerr << "wrote " << rows.size() << " rows to " << output << "\n";
  });

  // prepare
  auto* prepare_cmd =
      app.add_subcommand("prepare", "filter, subsample and summarize a claims CSV");
  std::string year_column;
  int year_min = 2000, year_max = 2019;
  std::size_t subsample = 0;
  bool positive_response_only = false;
  prepare_cmd->add_option("--input", input, "raw claims CSV")->required();
  prepare_cmd->add_option("--out", output, "prepared CSV path")->required();
  prepare_cmd->add_option("--schema", schema_path, "schema file (column = kind[:transform])");
  prepare_cmd->add_option("--year-column", year_column,
                          "filter on the leading year of this column");
  prepare_cmd->add_option("--year-min", year_min, "inclusive lower year");
  prepare_cmd->add_option("--year-max", year_max, "inclusive upper year");
  prepare_cmd->add_option("--subsample", subsample, "uniform subsample size (0 = keep all)");
  prepare_cmd->add_flag("--positive-response-only", positive_response_only,
                        "drop rows with non-positive response");
  prepare_cmd->add_option("--seed", seed, "subsample seed");
  prepare_cmd->callback([&] {
    auto cells = read_csv(input);
    if (cells.empty()) throw std::runtime_error("empty file: no header row");
    std::vector<std::size_t> keep;
    int year_col = -1, resp_col = -1;
    for (std::size_t c = 0; c < cells[0].size(); ++c) {
      if (cells[0][c] == year_column) year_col = static_cast<int>(c);
      if (cells[0][c] == "amountPaidOnBuildingClaim") resp_col = static_cast<int>(c);
    }
    if (!year_column.empty() && year_col < 0)
      throw std::runtime_error("unknown column: " + year_column);
    for (std::size_t r = 1; r < cells.size(); ++r) {
      if (year_col >= 0) {
        int year = year_col < static_cast<int>(cells[r].size())
                       ? parse_year(cells[r][year_col])
                       : -1;
        if (year < year_min || year > year_max) continue;
      }
      if (positive_response_only && resp_col >= 0) {
        if (resp_col >= static_cast<int>(cells[r].size())) continue;
        const std::string& y = cells[r][resp_col];
        if (y.empty()) continue;
        try {
          if (std::stod(y) <= 0.0) continue;
        } catch (const std::exception&) {
          continue;
        }
      }
      keep.push_back(r);
    }
    if (subsample > 0 && keep.size() > subsample) {
      RngStream rng(seed);
      rng.shuffle(keep);
      keep.resize(subsample);
      std::sort(keep.begin(), keep.end());
    }
    std::vector<std::vector<std::string>> rows;
    rows.reserve(keep.size());
    for (std::size_t r : keep) rows.push_back(cells[r]);
    write_csv(output, cells[0], rows);
    std::cerr << "kept " << rows.size() << " of " << cells.size() - 1 << " rows\n";

    Frame frame = load_frame(output, schema_path);
    write_summary(output + ".summary", summarize(frame));
  });

  // split
  auto* split_cmd = app.add_subcommand("split", "emit a cross-validation split plan");
  split_cmd->add_option("--input", input, "claims CSV")->required();
  split_cmd->add_option("--out", output, "plan CSV path")->required();
  split_cmd->add_option("--schema", schema_path, "schema file");
  split_cmd->add_option("--k", folds, "fold count");
  split_cmd->add_option("--seed", seed, "split seed");
  split_cmd->callback([&] {
    Frame frame = load_frame(input, schema_path);
    write_split_plan(output, make_splits(frame.rows(), folds, seed));
    std::cerr << "wrote plan for " << frame.rows() << " rows, k=" << folds << "\n";
  });

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit one model on one fold, write artifacts");
  fit_cmd->add_option("--input", input, "claims CSV")->required();
  fit_cmd->add_option("--model", model, "model kind")->required();
  fit_cmd->add_option("--out-prefix", out_prefix, "artifact path prefix")->required();
  fit_cmd->add_option("--schema", schema_path, "schema file");
  fit_cmd->add_option("--config", config_path, "model config (key=value)");
  fit_cmd->add_option("--fold", fold, "fold index to fit");
  fit_cmd->add_option("--folds", folds, "fold count");
  fit_cmd->add_option("--seed", seed, "experiment seed");
  fit_cmd->callback([&] {
    Frame frame = load_frame(input, schema_path);
    ExperimentSpec spec = make_spec(model, folds, seed, config_path);
    SplitPlan plan = make_splits(frame.rows(), folds, seed);
    SingleFoldResult result = fit_single_fold(spec, frame, plan, fold);

    std::vector<std::string> comments = {"model=" + model,
                                         "fold=" + std::to_string(fold),
                                         "seed=" + std::to_string(seed)};
    write_csv(out_prefix + "_metrics.csv", {"fold", "rmse", "mae", "rows"},
              {{std::to_string(fold), format_double(result.metrics.rmse),
                format_double(result.metrics.mae), std::to_string(result.metrics.count)}},
              comments);
    if (result.has_glm) {
      write_glm_fit(out_prefix + "_coefficients.txt", result.glm);
      if (spec.kind == ModelKind::glm_dummy)
        write_relativities_csv(out_prefix + "_relativities.csv",
                               relativities(result.glm, result.design_info));
    }
    if (result.has_net) {
      write_embeddings_csv(out_prefix + "_embeddings.csv", result.tables, result.vocabs);
      write_history_csv(out_prefix + "_history.csv", result.history);
      save_checkpoint(out_prefix + "_checkpoint.txt", model, result.config_echo,
                      result.vocabs, result.net->params(), result.net->normalizer());
    }
    std::cerr << "fold " << fold << ": rmse " << format_thousands(result.metrics.rmse)
              << ", mae " << format_thousands(result.metrics.mae) << "\n";
  });

  // cv
  auto* cv_cmd = app.add_subcommand("cv", "full cross validation for one model");
  cv_cmd->add_option("--input", input, "claims CSV")->required();
  cv_cmd->add_option("--model", model, "model kind")->required();
  cv_cmd->add_option("--out", output, "report CSV path")->required();
  cv_cmd->add_option("--schema", schema_path, "schema file");
  cv_cmd->add_option("--config", config_path, "model config (key=value)");
  cv_cmd->add_option("--folds", folds, "fold count");
  cv_cmd->add_option("--seed", seed, "experiment seed");
  cv_cmd->callback([&] {
    Frame frame = load_frame(input, schema_path);
    EvalReport report = cross_validate(make_spec(model, folds, seed, config_path), frame);
    write_eval_report_csv(output, report);
    report_timings(report);
    std::cerr << "mean rmse " << format_thousands(report.mean.rmse) << ", mean mae "
              << format_thousands(report.mean.mae) << "\n";
  });

  // ladder
  auto* ladder_cmd = app.add_subcommand("ladder", "cross validate a list of models");
  std::string models = "glm-dummy,mlp-1d,glm-embed,mlp-multid,linear-benchmark";
  ladder_cmd->add_option("--input", input, "claims CSV")->required();
  ladder_cmd->add_option("--out-prefix", out_prefix, "output prefix")->required();
  ladder_cmd->add_option("--models", models, "comma-separated model kinds");
  ladder_cmd->add_option("--schema", schema_path, "schema file");
  ladder_cmd->add_option("--config", config_path, "shared model config");
  ladder_cmd->add_option("--folds", folds, "fold count");
  ladder_cmd->add_option("--seed", seed, "experiment seed");
  ladder_cmd->callback([&] {
    Frame frame = load_frame(input, schema_path);
    std::vector<ExperimentSpec> specs;
    std::istringstream in(models);
    std::string name;
    while (std::getline(in, name, ','))
      if (!name.empty()) specs.push_back(make_spec(name, folds, seed, config_path));
    LadderResult ladder = run_ladder(frame, specs);
    write_ladder_csv(out_prefix + ".csv", ladder);
    std::string table = ladder_table(ladder);
    std::ofstream table_out(out_prefix + ".txt");
    table_out << table;
    std::cout << table;
    for (const auto& row : ladder.rows)
      if (row.failed)
        throw std::runtime_error("model " + to_string(row.spec.kind) +
                                 " failed: " + row.error);
  });

  // export-embeddings
  auto* export_cmd =
      app.add_subcommand("export-embeddings", "train on one fold and export embeddings");
  export_cmd->add_option("--input", input, "claims CSV")->required();
  export_cmd->add_option("--out", output, "embeddings CSV path")->required();
  export_cmd->add_option("--model", model, "model kind (an embedding model)");
  export_cmd->add_option("--schema", schema_path, "schema file");
  export_cmd->add_option("--config", config_path, "model config");
  export_cmd->add_option("--fold", fold, "fold index");
  export_cmd->add_option("--folds", folds, "fold count");
  export_cmd->add_option("--seed", seed, "experiment seed");
  export_cmd->callback([&] {
    Frame frame = load_frame(input, schema_path);
    ExperimentSpec spec = make_spec(model, folds, seed, config_path);
    if (model == "glm-dummy" || model == "linear-benchmark")
      throw std::runtime_error("export-embeddings requires an embedding model kind");
    SplitPlan plan = make_splits(frame.rows(), folds, seed);
    SingleFoldResult result = fit_single_fold(spec, frame, plan, fold);
    write_embeddings_csv(output, result.tables, result.vocabs);
    std::cerr << "wrote embeddings for fold " << fold << " to " << output << "\n";
  });

  // reduce
  auto* reduce_cmd =
      app.add_subcommand("reduce", "project an embedding table with PCA or t-SNE");
  std::string embeddings_path, variable, method = "pca";
  TsneConfig tsne_config;
  bool sweep = false, group_by_prefix = false;
  reduce_cmd->add_option("--embeddings", embeddings_path, "embeddings CSV")->required();
  reduce_cmd->add_option("--variable", variable, "categorical variable")->required();
  reduce_cmd->add_option("--out-prefix", out_prefix, "output prefix")->required();
  reduce_cmd->add_option("--method", method, "pca or tsne");
  reduce_cmd->add_option("--perplexity", tsne_config.perplexity, "t-SNE perplexity");
  reduce_cmd->add_option("--steps", tsne_config.steps, "t-SNE gradient steps");
  reduce_cmd->add_option("--learning-rate", tsne_config.learning_rate, "t-SNE step size");
  reduce_cmd->add_flag("--sweep", sweep, "run the 2/3/5/10 perplexity grid");
  reduce_cmd->add_flag("--group-by-prefix", group_by_prefix,
                       "attach the level's alphabetic prefix as a group column");
  reduce_cmd->add_option("--seed", seed, "layout seed");
  reduce_cmd->callback([&] {
    EmbeddingsFile file = read_embeddings_csv(embeddings_path);
    const EmbeddingValues* table = nullptr;
    for (const auto& t : file.tables)
      if (t.variable == variable) table = &t;
    if (!table) throw std::runtime_error("no embeddings for variable " + variable);
    const Vocabulary& vocab = vocabulary_for(file.vocabs, variable);
    Eigen::MatrixXd points = table->values.topRows(vocab.cardinality());  // drop unseen
    std::vector<std::string> labels = vocab.levels();
    std::vector<std::string> groups;
    if (group_by_prefix)
      for (const auto& level : labels) groups.push_back(zone_prefix(level));

    if (points.cols() == 1) {  // number-line plot for 1-d embeddings
      write_numberline_csv(out_prefix + "_line.csv", labels, points.col(0));
      write_numberline_svg(out_prefix + "_line.svg", labels, points.col(0));
      if (group_by_prefix) {
        Eigen::MatrixXd xy(points.rows(), 2);
        xy.col(0) = points.col(0);
        xy.col(1).setZero();
        write_scatter_csv(out_prefix + "_grouped.csv", labels, xy, groups);
      }
      std::cerr << "wrote number-line plot data for " << labels.size() << " levels\n";
      return;
    }

    if (method == "pca") {
      PcaResult res = pca(points, 2);
      write_scatter_csv(out_prefix + "_pca.csv", labels, res.projected, groups);
      write_scatter_svg(out_prefix + "_pca.svg", labels, res.projected, groups);
      std::vector<std::vector<std::string>> var_rows;
      for (Eigen::Index i = 0; i < res.variances.size(); ++i)
        var_rows.push_back({std::to_string(i + 1), format_double(res.variances(i)),
                            format_double(res.variance_proportion(i)),
                            format_double(res.cumulative_proportion(i))});
      write_csv(out_prefix + "_pca_variance.csv",
                {"component", "variance", "proportion", "cumulative"}, var_rows);
      std::cerr << "pca: first two components explain "
                << res.cumulative_proportion(std::min<Eigen::Index>(
                       1, res.cumulative_proportion.size() - 1))
                << " of the variance\n";
    } else if (method == "tsne") {
      std::vector<double> grid = sweep ? std::vector<double>{2, 3, 5, 10}
                                       : std::vector<double>{tsne_config.perplexity};
      for (double perp : grid) {
        TsneConfig config = tsne_config;
        config.perplexity = perp;
        config.seed = seed;
        TsneResult res = tsne(points, config);
        std::string tag = "_tsne_p" + format_double(perp);
        write_scatter_csv(out_prefix + tag + ".csv", labels, res.Y, groups);
        write_scatter_svg(out_prefix + tag + ".svg", labels, res.Y, groups);
        std::vector<std::vector<std::string>> trace;
        for (const auto& [step, kl] : res.kl_trace)
          trace.push_back({std::to_string(step), format_double(kl)});
        write_csv(out_prefix + tag + "_trace.csv", {"step", "kl"}, trace);
        std::cerr << "tsne perplexity " << perp << ": kl " << res.kl_trace.front().second
                  << " -> " << res.kl_trace.back().second << "\n";
      }
    } else {
      throw std::runtime_error("unknown method: " + method);
    }
  });

  // contextual
  auto* ctx_cmd = app.add_subcommand(
      "contextual", "compare static and contextual embeddings through a gamma GLM");
  std::string variables = "floodZone";
  std::size_t sample_size = 1000;
  ctx_cmd->add_option("--input", input, "claims CSV")->required();
  ctx_cmd->add_option("--out-prefix", out_prefix, "output prefix")->required();
  ctx_cmd->add_option("--variables", variables, "comma-separated categorical variables");
  ctx_cmd->add_option("--sample", sample_size, "observations per branch");
  ctx_cmd->add_option("--schema", schema_path, "schema file");
  ctx_cmd->add_option("--config", config_path, "tabtransformer config");
  ctx_cmd->add_option("--fold", fold, "fold to train on");
  ctx_cmd->add_option("--folds", folds, "fold count");
  ctx_cmd->add_option("--seed", seed, "experiment seed");
  ctx_cmd->callback([&] {
    Frame frame = load_frame(input, schema_path);
    ExperimentSpec spec = make_spec("tabtransformer", folds, seed, config_path);
    std::vector<std::string> vars;
    std::istringstream in(variables);
    std::string name;
    while (std::getline(in, name, ','))
      if (!name.empty()) vars.push_back(name);
    ContextualComparison cc = contextual_comparison(frame, spec, vars, sample_size, fold);

    write_csv(out_prefix + "_metrics.csv", {"embedding_type", "rmse", "mae", "rows"},
              {{"static", format_double(cc.static_metrics.rmse),
                format_double(cc.static_metrics.mae),
                std::to_string(cc.static_metrics.count)},
               {"contextual", format_double(cc.contextual_metrics.rmse),
                format_double(cc.contextual_metrics.mae),
                std::to_string(cc.contextual_metrics.count)}},
              {"seed=" + std::to_string(seed), "fold=" + std::to_string(fold),
               "variables=" + variables});
    write_contextual_csv(out_prefix + "_pairs.csv", cc.static_rows, cc.contextual_rows);

    // first principal component of each branch, paired per observation
    PcaResult static_pca = pca(cc.static_rows, 1);
    PcaResult ctx_pca = pca(cc.contextual_rows, 1);
    std::vector<std::vector<std::string>> pc_rows;
    for (Eigen::Index i = 0; i < static_pca.projected.rows(); ++i)
      pc_rows.push_back({std::to_string(i), format_double(static_pca.projected(i, 0)),
                         format_double(ctx_pca.projected(i, 0))});
    write_csv(out_prefix + "_pca.csv", {"observation_id", "static_pc1", "contextual_pc1"},
              pc_rows);

    std::cerr << "static     rmse " << format_thousands(cc.static_metrics.rmse) << ", mae "
              << format_thousands(cc.static_metrics.mae) << "\n";
    std::cerr << "contextual rmse " << format_thousands(cc.contextual_metrics.rmse)
              << ", mae " << format_thousands(cc.contextual_metrics.mae) << "\n";
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
