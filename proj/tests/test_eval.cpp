#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "claimnet/eval.hpp"
#include "claimnet/synth.hpp"
#include "doctest.h"
#include "fd_check.hpp"

using namespace claimnet;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Frame small_synth(std::size_t rows, std::uint64_t seed, double interaction = 0.5) {
  SynthConfig config;
  config.rows = rows;
  config.zone_levels = 8;
  config.rare_zone_levels = 0;
  config.interaction_sd = interaction;
  config.seed = seed;
  return make_synthetic(config);
}

}  // namespace

TEST_CASE("rmse and mae definitions") {
  Eigen::VectorXd a(2), b(2);
  a << 1, 2;
  b << 1, 4;
  CHECK(rmse(a, a) == 0.0);
  CHECK(mae(a, a) == 0.0);
  CHECK(rmse(a, b) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(mae(a, b) == doctest::Approx(1.0).epsilon(1e-15));
  // constant error: RMSE == MAE == |c|
  Eigen::VectorXd c = a.array() + 3.0;
  CHECK(rmse(c, a) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(mae(c, a) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK_THROWS_AS(rmse(a, Eigen::VectorXd(3)), std::invalid_argument);
  CHECK_THROWS_AS(mae(Eigen::VectorXd(0), Eigen::VectorXd(0)), std::invalid_argument);

  // naive reference on random vectors
  RngStream rng(3);
  Eigen::VectorXd p = fdcheck::random_matrix(100, 1, rng).col(0);
  Eigen::VectorXd q = fdcheck::random_matrix(100, 1, rng).col(0);
  double sq = 0.0, ab = 0.0;
  for (int i = 0; i < 100; ++i) {
    sq += (p(i) - q(i)) * (p(i) - q(i));
    ab += std::abs(p(i) - q(i));
  }
  CHECK(std::abs(rmse(p, q) - std::sqrt(sq / 100.0)) < 1e-12);
  CHECK(std::abs(mae(p, q) - ab / 100.0) < 1e-12);
}

TEST_CASE("model kind names round trip") {
  for (const char* name : {"glm-dummy", "mlp-1d", "glm-embed", "mlp-multid",
                           "simple-attention", "tabtransformer", "linear-benchmark"})
    CHECK(to_string(model_kind_from_string(name)) == name);
  CHECK_THROWS_AS(model_kind_from_string("tabnet"), std::invalid_argument);
}

TEST_CASE("intercept-only cross validation on a constant response is exact") {
  std::vector<std::vector<std::string>> cells = {{"paid"}};
  for (int i = 0; i < 50; ++i) cells.push_back({"123.5"});
  Frame frame =
      frame_from_cells(cells, {{"paid", ColumnKind::response, Transform::none}});
  ExperimentSpec spec;
  spec.kind = ModelKind::glm_dummy;
  spec.folds = 5;
  spec.seed = 7;
  EvalReport report = cross_validate(spec, frame);
  REQUIRE(report.folds.size() == 5);
  for (const auto& fr : report.folds) {
    CHECK(fr.metrics.rmse == doctest::Approx(0.0).epsilon(1e-10));
    CHECK(fr.metrics.mae == doctest::Approx(0.0).epsilon(1e-10));
  }
}

TEST_CASE("cross validation aggregates the fold mean exactly") {
  Frame frame = small_synth(600, 11);
  ExperimentSpec spec;
  spec.kind = ModelKind::glm_dummy;
  spec.folds = 3;
  spec.seed = 5;
  EvalReport report = cross_validate(spec, frame);
  double rmse_sum = 0.0, mae_sum = 0.0;
  for (const auto& fr : report.folds) {
    rmse_sum += fr.metrics.rmse;
    mae_sum += fr.metrics.mae;
  }
  CHECK(std::abs(report.mean.rmse - rmse_sum / 3.0) < 1e-12);
  CHECK(std::abs(report.mean.mae - mae_sum / 3.0) < 1e-12);
}

TEST_CASE("identical seeds produce identical reports") {
  Frame frame = small_synth(800, 13);
  ExperimentSpec spec;
  spec.kind = ModelKind::mlp_1d;
  spec.folds = 2;
  spec.seed = 21;
  spec.config["epochs"] = "3";
  spec.config["patience"] = "3";
  spec.config["batch"] = "200";
  EvalReport a = cross_validate(spec, frame);
  EvalReport b = cross_validate(spec, frame);
  REQUIRE(a.folds.size() == b.folds.size());
  for (std::size_t f = 0; f < a.folds.size(); ++f) {
    CHECK(a.folds[f].metrics.rmse == b.folds[f].metrics.rmse);  // bitwise
    CHECK(a.folds[f].metrics.mae == b.folds[f].metrics.mae);
  }
  spec.seed = 22;
  EvalReport c = cross_validate(spec, frame);
  CHECK(a.mean.rmse != c.mean.rmse);
}

TEST_CASE("vocabularies are rebuilt per fold so test folds can hold unseen levels") {
  // one singleton level: the fold holding its row must not see it in training
  std::vector<std::vector<std::string>> cells = {{"paid", "coverage", "cat"}};
  RngStream rng(17);
  for (int i = 0; i < 100; ++i) {
    double coverage = std::exp(rng.normal(10.0, 0.3));
    cells.push_back({format_double(std::max(rng.gamma(2.0, coverage * 0.05), 1.0)),
                     format_double(coverage),
                     "L" + std::to_string(rng.uniform_index(4))});
  }
  cells[1][2] = "RARE";  // exactly one row carries this level
  Frame frame = frame_from_cells(
      cells, {{"paid", ColumnKind::response, Transform::none},
              {"coverage", ColumnKind::exposure, Transform::log_e},
              {"cat", ColumnKind::categorical, Transform::none}});

  ExperimentSpec spec;
  spec.kind = ModelKind::mlp_1d;
  spec.folds = 5;
  spec.seed = 31;
  spec.config["epochs"] = "2";
  spec.config["patience"] = "2";
  spec.config["batch"] = "50";
  EvalReport report = cross_validate(spec, frame);

  SplitPlan plan = make_splits(frame.rows(), 5, 31);
  int rare_fold = plan.fold_of_row[0];
  REQUIRE(report.fold_embeddings.size() == 5);
  for (int f = 0; f < 5; ++f) {
    // table rows = cardinality + 1; the rare fold trained without RARE
    Eigen::Index expected = f == rare_fold ? 5 : 6;
    CHECK(report.fold_embeddings[f][0].values.rows() == expected);
  }
  for (const auto& fr : report.folds) CHECK(std::isfinite(fr.metrics.rmse));
}

TEST_CASE("glm-embed beats the intercept-only baseline on planted effects") {
  Frame frame = small_synth(3000, 19, /*interaction=*/0.0);
  ExperimentSpec spec;
  spec.folds = 3;
  spec.seed = 3;
  spec.kind = ModelKind::glm_embed;
  spec.config["epochs"] = "8";
  spec.config["patience"] = "8";
  EvalReport embed_report = cross_validate(spec, frame);

  // intercept-only baseline: same response, no predictors, same folds
  std::vector<std::vector<std::string>> cells = {{"paid"}};
  for (double y : frame.response) cells.push_back({format_double(y)});
  Frame bare = frame_from_cells(cells, {{"paid", ColumnKind::response, Transform::none}});
  ExperimentSpec baseline;
  baseline.kind = ModelKind::glm_dummy;
  baseline.folds = 3;
  baseline.seed = 3;
  EvalReport base_report = cross_validate(baseline, bare);

  CHECK(embed_report.mean.rmse < base_report.mean.rmse);
}

TEST_CASE("transfer pipeline exports distinct embeddings per fold") {
  Frame frame = small_synth(900, 23);
  ExperimentSpec spec;
  spec.folds = 3;
  spec.seed = 9;
  spec.config["epochs"] = "3";
  spec.config["patience"] = "3";
  EvalReport report = transfer_pipeline(frame, spec);
  CHECK(report.spec.kind == ModelKind::glm_embed);
  REQUIRE(report.fold_embeddings.size() == 3);
  // folds train on different rows, so the learned tables differ
  bool any_differ = false;
  for (int f = 1; f < 3; ++f)
    if (report.fold_embeddings[f][0].values != report.fold_embeddings[0][0].values)
      any_differ = true;
  CHECK(any_differ);
}

TEST_CASE("identical designs give identical metrics in the contextual comparison") {
  RngStream rng(29);
  Eigen::MatrixXd fit_x = fdcheck::random_matrix(200, 3, rng);
  Eigen::MatrixXd eval_x = fdcheck::random_matrix(100, 3, rng);
  Eigen::VectorXd fit_y(200), eval_y(100);
  for (int i = 0; i < 200; ++i) fit_y(i) = std::exp(2.0 + fit_x(i, 0)) + 1.0;
  for (int i = 0; i < 100; ++i) eval_y(i) = std::exp(2.0 + eval_x(i, 0)) + 1.0;
  Metrics a = embedding_glm_metrics(fit_x, fit_y, eval_x, eval_y);
  Metrics b = embedding_glm_metrics(fit_x, fit_y, eval_x, eval_y);
  CHECK(a.rmse == b.rmse);
  CHECK(a.mae == b.mae);
}

TEST_CASE("contextual comparison runs end to end and validates the sample size") {
  Frame frame = small_synth(1200, 31);
  ExperimentSpec spec;
  spec.kind = ModelKind::tabtransformer;
  spec.folds = 3;
  spec.seed = 13;
  spec.config["embed_dim"] = "4";
  spec.config["d_col"] = "1";
  spec.config["epochs"] = "2";
  spec.config["patience"] = "2";
  ContextualComparison cc = contextual_comparison(
      frame, spec, {"floodZone", "basementEnclosureCrawlspaceType"}, 150, 0);
  CHECK(cc.static_metrics.count == 150);
  CHECK(cc.contextual_metrics.count == 150);
  CHECK(cc.static_metrics.rmse > 0.0);
  CHECK(cc.contextual_rows.cols() == 5);  // d + d_col
  CHECK_THROWS_AS(
      contextual_comparison(frame, spec, {"floodZone"}, 100000, 0),
      std::invalid_argument);
}

TEST_CASE("ladder preserves spec order and isolates failures") {
  Frame frame = small_synth(500, 37);
  ExperimentSpec ok;
  ok.kind = ModelKind::glm_dummy;
  ok.folds = 2;
  ok.seed = 4;
  ExperimentSpec bad;
  bad.kind = ModelKind::mlp_1d;
  bad.folds = 2;
  bad.seed = 4;
  bad.config["epochs"] = "2";
  bad.config["patience"] = "99";  // patience > max epochs
  ExperimentSpec linear;
  linear.kind = ModelKind::linear_benchmark;
  linear.folds = 2;
  linear.seed = 4;

  LadderResult ladder = run_ladder(frame, {ok, bad, linear});
  REQUIRE(ladder.rows.size() == 3);
  CHECK(ladder.rows[0].spec.kind == ModelKind::glm_dummy);
  CHECK(!ladder.rows[0].failed);
  CHECK(ladder.rows[1].failed);
  CHECK(!ladder.rows[2].failed);  // later specs still complete

  // single-spec ladder equals a direct cross validation
  LadderResult single = run_ladder(frame, {ok});
  EvalReport direct = cross_validate(ok, frame);
  CHECK(single.rows[0].report.mean.rmse == direct.mean.rmse);

  std::string table = ladder_table(ladder);
  CHECK(table.find("GLM (gamma/log), dummy coding") != std::string::npos);
  CHECK(table.find("error") != std::string::npos);
  CHECK(table.find(',') != std::string::npos);  // thousands separators
}

TEST_CASE("report csv output is byte-identical across runs and embeds the config") {
  Frame frame = small_synth(400, 41);
  ExperimentSpec spec;
  spec.kind = ModelKind::linear_benchmark;
  spec.folds = 2;
  spec.seed = 77;
  spec.config["prefix_vars"] = "";
  EvalReport report = cross_validate(spec, frame);

  auto dir = std::filesystem::temp_directory_path();
  auto p1 = (dir / "claimnet_report1.csv").string();
  auto p2 = (dir / "claimnet_report2.csv").string();
  write_eval_report_csv(p1, report);
  write_eval_report_csv(p2, cross_validate(spec, frame));
  std::string c1 = slurp(p1), c2 = slurp(p2);
  CHECK(c1 == c2);
  CHECK(c1.find("# seed=77") != std::string::npos);
  CHECK(c1.find("# model=linear-benchmark") != std::string::npos);
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);

  LadderResult ladder = run_ladder(frame, {spec});
  auto p3 = (dir / "claimnet_ladder.csv").string();
  write_ladder_csv(p3, ladder);
  CHECK(slurp(p3).find("linear-benchmark") != std::string::npos);
  std::filesystem::remove(p3);
}

TEST_CASE("glm-dummy with zone prefix collapses levels") {
  // zone labels share a one-letter prefix within two families
  std::vector<std::vector<std::string>> cells = {{"paid", "coverage", "zone"}};
  RngStream rng(43);
  for (int i = 0; i < 300; ++i) {
    double coverage = std::exp(rng.normal(10.0, 0.3));
    std::string zone = (rng.uniform() < 0.5 ? "A" : "V") +
                       std::to_string(rng.uniform_index(5));
    double mult = zone[0] == 'A' ? 1.4 : 0.8;
    cells.push_back({format_double(std::max(rng.gamma(2.0, coverage * 0.05 * mult), 1.0)),
                     format_double(coverage), zone});
  }
  Frame frame = frame_from_cells(
      cells, {{"paid", ColumnKind::response, Transform::none},
              {"coverage", ColumnKind::exposure, Transform::log_e},
              {"zone", ColumnKind::categorical, Transform::none}});
  ExperimentSpec spec;
  spec.kind = ModelKind::glm_dummy;
  spec.folds = 2;
  spec.seed = 3;
  spec.config["prefix_vars"] = "zone";
  EvalReport with_prefix = cross_validate(spec, frame);
  CHECK(std::isfinite(with_prefix.mean.rmse));
  // prefixing is a real recode: the unprefixed fit differs
  spec.config.erase("prefix_vars");
  EvalReport without = cross_validate(spec, frame);
  CHECK(with_prefix.mean.rmse != without.mean.rmse);
}

TEST_CASE("synthetic generator is seeded and writes loadable data") {
  SynthConfig config;
  config.rows = 200;
  config.seed = 5;
  auto cells_a = make_synthetic_cells(config);
  auto cells_b = make_synthetic_cells(config);
  CHECK(cells_a == cells_b);
  config.seed = 6;
  CHECK(make_synthetic_cells(config) != cells_a);

  Frame frame = make_synthetic(config);
  CHECK(frame.rows() == 200);
  CHECK(frame.has_exposure());
  CHECK(frame.numeric_names.size() == 2);
  CHECK(frame.categorical_names.size() == 3);
  for (double y : frame.response) CHECK(y > 0.0);
  for (double e : frame.exposure) CHECK(e > 0.0);
}
