#include <cmath>
#include <filesystem>
#include <numeric>

#include "claimnet/csv.hpp"
#include "claimnet/glm.hpp"
#include "claimnet/rng.hpp"
#include "doctest.h"
#include "fd_check.hpp"

using namespace claimnet;
using fdcheck::random_matrix;

TEST_CASE("gaussian identity solves the two-point line exactly") {
  Eigen::MatrixXd design(2, 1);
  design << 0, 1;
  Eigen::VectorXd y(2);
  y << 1, 3;
  GlmSpec spec;
  spec.family = Family::gaussian;
  spec.link = Link::identity;
  GlmFit fit = fit_iwls(spec, design, y);
  CHECK(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.beta(1) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gaussian identity equals the normal-equation solution") {
  RngStream rng(101);
  for (int rep = 0; rep < 20; ++rep) {
    int n = 50 + static_cast<int>(rng.uniform_index(100));
    int p = 2 + static_cast<int>(rng.uniform_index(6));
    Eigen::MatrixXd design = random_matrix(n, p, rng);
    Eigen::VectorXd y = random_matrix(n, 1, rng);
    GlmSpec spec;
    spec.family = Family::gaussian;
    spec.link = Link::identity;
    GlmFit fit = fit_iwls(spec, design, y);
    Eigen::MatrixXd X(n, p + 1);
    X.col(0).setOnes();
    X.rightCols(p) = design;
    Eigen::VectorXd beta_ne = (X.transpose() * X).ldlt().solve(X.transpose() * y);
    CHECK((fit.beta - beta_ne).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("intercept-only gamma log fit is log of the mean") {
  RngStream rng(7);
  Eigen::VectorXd y(40);
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.gamma(2.0, 50.0);
  Eigen::MatrixXd design(y.size(), 0);
  GlmFit fit = fit_iwls(GlmSpec{}, design, y);
  CHECK(fit.converged);
  CHECK(fit.beta(0) == doctest::Approx(std::log(y.mean())).epsilon(1e-10));
  // deviance is zero only when fitted means equal observations
  CHECK(fit.deviance > 0.0);
  GlmFit exact = fit_iwls(GlmSpec{}, Eigen::MatrixXd(1, 0),
                          Eigen::VectorXd::Constant(1, 5.0));
  CHECK(exact.deviance == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("gamma log recovers planted coefficients within 3 standard errors") {
  RngStream rng(2024);
  const int n = 10000;
  Eigen::VectorXd truth(3);
  truth << 3.0, 0.5, -0.2;
  Eigen::MatrixXd design = random_matrix(n, 2, rng);
  Eigen::VectorXd y(n);
  const double shape = 2.0;
  for (int i = 0; i < n; ++i) {
    double mu = std::exp(truth(0) + truth(1) * design(i, 0) + truth(2) * design(i, 1));
    y(i) = rng.gamma(shape, mu / shape);
  }
  GlmFit fit = fit_iwls(GlmSpec{}, design, y);
  CHECK(fit.converged);
  for (int j = 0; j < 3; ++j)
    CHECK(std::abs(fit.beta(j) - truth(j)) < 3.0 * fit.std_errors(j));
  // dispersion for gamma shape k is ~1/k
  CHECK(fit.dispersion == doctest::Approx(0.5).epsilon(0.15));
}

TEST_CASE("deviance is non-increasing across IWLS iterations") {
  RngStream rng(55);
  Eigen::MatrixXd design = random_matrix(500, 3, rng);
  Eigen::VectorXd y(500);
  for (int i = 0; i < 500; ++i)
    y(i) = rng.gamma(1.5, std::exp(1.0 + 0.3 * design(i, 0)) / 1.5);
  GlmFit fit = fit_iwls(GlmSpec{}, design, y);
  REQUIRE(fit.deviance_trace.size() >= 2);
  for (std::size_t i = 1; i < fit.deviance_trace.size(); ++i)
    CHECK(fit.deviance_trace[i] <= fit.deviance_trace[i - 1] + 1e-10);
}

TEST_CASE("rank deficiency is caught") {
  Eigen::MatrixXd design(6, 2);
  design << 1, 2, 2, 4, 3, 6, 4, 8, 5, 10, 6, 12;  // second column = 2x first
  Eigen::VectorXd y(6);
  y << 1, 2, 3, 4, 5, 6;
  GlmSpec spec;
  spec.family = Family::gaussian;
  spec.link = Link::identity;
  CHECK_THROWS_AS(fit_iwls(spec, design, y), std::runtime_error);
  spec.allow_rank_deficient = true;
  GlmFit fit = fit_iwls(spec, design, y);  // still yields predictions
  CHECK(fit.predict(design).size() == 6);
}

TEST_CASE("gamma rejects non-positive response") {
  Eigen::VectorXd y(3);
  y << 1.0, 0.0, 2.0;
  CHECK_THROWS_AS(fit_iwls(GlmSpec{}, Eigen::MatrixXd(3, 0), y), std::invalid_argument);
}

TEST_CASE("relativities exponentiate dummy coefficients with unit baseline") {
  // design metadata: one numeric, one 3-level categorical
  DesignInfo info;
  info.column_names = {"num", "cat=b", "cat=c"};
  CatTermGroup group;
  group.variable = "cat";
  group.baseline = "a";
  group.labels = {"b", "c"};
  group.columns = {1, 2};
  info.groups.push_back(group);

  GlmFit fit;
  fit.spec = GlmSpec{};  // gamma log
  fit.beta.resize(4);
  fit.beta << 0.7, 0.01, 0.0, std::log(1.34);
  fit.term_names = {"(Intercept)", "num", "cat=b", "cat=c"};

  auto rows = relativities(fit, info);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].label == "a");
  CHECK(rows[0].relativity == 1.0);
  CHECK(rows[1].relativity == doctest::Approx(1.0));
  CHECK(rows[2].relativity == doctest::Approx(1.34));
  for (const auto& r : rows) CHECK(r.relativity > 0.0);

  fit.spec.link = Link::identity;
  CHECK_THROWS_AS(relativities(fit, info), std::invalid_argument);
}

TEST_CASE("parameter count formulas") {
  CHECK(param_count_dummy(2, {3, 4, 5}) == 12);
  CHECK(param_count_dummy(0, {2}) == 2);
  CHECK(param_count_embedding(2, 5) == 8);
  CHECK(param_count_embedding(0, 0) == 1);
  CHECK_THROWS_AS(param_count_dummy(0, {1}), std::invalid_argument);

  RngStream rng(9);
  for (int rep = 0; rep < 50; ++rep) {
    int n_num = static_cast<int>(rng.uniform_index(4));
    int n_cat = 1 + static_cast<int>(rng.uniform_index(4));
    std::vector<int> cards;
    for (int j = 0; j < n_cat; ++j) cards.push_back(2 + static_cast<int>(rng.uniform_index(7)));
    long dummy_count = param_count_dummy(n_num, cards);
    long embed_count = param_count_embedding(n_num, n_cat);
    CHECK(embed_count <= dummy_count);
    long diff = 0;
    for (int c : cards) diff += c - 2;
    CHECK(dummy_count - embed_count == diff);
  }
}

TEST_CASE("severity-model variable set: dummy count matches the design, embeddings give 8 terms") {
  // 2 numerics plus 5 categoricals shaped like the claims schema
  RngStream rng(61);
  std::vector<std::vector<std::string>> cells = {
      {"paid", "coverage", "crs", "basement", "occupancy", "floors", "zone", "primary"}};
  for (int i = 0; i < 400; ++i)
    cells.push_back({"1", format_double(std::exp(rng.normal(11, 0.5))),
                     format_double(0.05 * rng.uniform_index(10)),
                     "B" + std::to_string(rng.uniform_index(4)),
                     "O" + std::to_string(rng.uniform_index(4)),
                     "F" + std::to_string(rng.uniform_index(5)),
                     std::string(1, "AVXCD"[rng.uniform_index(5)]),
                     rng.uniform() < 0.5 ? "Y" : "N"});
  std::vector<ColumnSchema> schema = {
      {"paid", ColumnKind::response, Transform::none},
      {"coverage", ColumnKind::numeric, Transform::log_e},
      {"crs", ColumnKind::numeric, Transform::none},
      {"basement", ColumnKind::categorical, Transform::none},
      {"occupancy", ColumnKind::categorical, Transform::none},
      {"floors", ColumnKind::categorical, Transform::none},
      {"zone", ColumnKind::categorical, Transform::none},
      {"primary", ColumnKind::categorical, Transform::none}};
  Frame f = frame_from_cells(cells, schema);
  std::vector<int> all(f.rows());
  std::iota(all.begin(), all.end(), 0);
  auto vocabs = build_vocabularies(f, all);
  Dataset ds = encode_dataset(f, vocabs);

  std::vector<int> cards;
  for (const auto& v : vocabs) cards.push_back(v.cardinality());
  DummyDesign design = build_dummy_design(ds, vocabs);
  CHECK(param_count_dummy(2, cards) == design.X.cols() + 1);

  // one-dimensional embeddings for every categorical: 8 fitted terms
  std::vector<EmbeddingValues> tables;
  for (const auto& v : vocabs) {
    EmbeddingValues t;
    t.variable = v.variable();
    t.values.resize(v.cardinality() + 1, 1);
    for (int l = 0; l <= v.cardinality(); ++l) t.values(l, 0) = rng.normal();
    tables.push_back(t);
  }
  GlmFit fit = fit_with_embeddings(GlmSpec{}, ds, tables);
  CHECK(fit.term_names.size() == 8);
  CHECK(param_count_embedding(2, 5) == 8);
}

TEST_CASE("relativity csv uses the two-decimal table format") {
  DesignInfo info;
  info.column_names = {"cat=b"};
  info.groups.push_back({"cat", "a", {"b"}, {0}});
  GlmFit fit;
  fit.spec = GlmSpec{};
  fit.beta.resize(2);
  fit.beta << 0.0, std::log(1.34);
  auto path = std::filesystem::temp_directory_path() / "claimnet_rel_test.csv";
  write_relativities_csv(path.string(), relativities(fit, info));
  auto cells = read_csv(path.string());
  std::filesystem::remove(path);
  REQUIRE(cells.size() == 3);
  CHECK(cells[1] == std::vector<std::string>{"cat", "a", "1.00"});
  CHECK(cells[2] == std::vector<std::string>{"cat", "b", "1.34"});
}

TEST_CASE("dummy param count matches a constructed design width") {
  std::vector<std::vector<std::string>> cells = {{"paid", "num", "a", "b"}};
  RngStream rng(31);
  for (int i = 0; i < 60; ++i)
    cells.push_back({"1", format_double(rng.normal()),
                     "A" + std::to_string(rng.uniform_index(3)),
                     "B" + std::to_string(rng.uniform_index(5))});
  std::vector<ColumnSchema> schema = {{"paid", ColumnKind::response, Transform::none},
                                      {"num", ColumnKind::numeric, Transform::none},
                                      {"a", ColumnKind::categorical, Transform::none},
                                      {"b", ColumnKind::categorical, Transform::none}};
  Frame f = frame_from_cells(cells, schema);
  std::vector<int> all(f.rows());
  std::iota(all.begin(), all.end(), 0);
  auto vocabs = build_vocabularies(f, all);
  Dataset ds = encode_dataset(f, vocabs);
  DummyDesign design = build_dummy_design(ds, vocabs);
  std::vector<int> cards;
  for (const auto& v : vocabs) cards.push_back(v.cardinality());
  CHECK(param_count_dummy(1, cards) == design.X.cols() + 1);  // +1 intercept
}

TEST_CASE("embedding design and fit_with_embeddings") {
  std::vector<std::vector<std::string>> cells = {{"paid", "num", "cat"}};
  RngStream rng(77);
  std::vector<double> level_score = {-0.4, 0.0, 0.3, 0.6};
  for (int i = 0; i < 4000; ++i) {
    int level = static_cast<int>(rng.uniform_index(4));
    double x = rng.normal();
    double mu = std::exp(2.0 + 0.5 * x + 1.5 * level_score[level]);
    cells.push_back({format_double(rng.gamma(2.0, mu / 2.0)), format_double(x),
                     "L" + std::to_string(level)});
  }
  std::vector<ColumnSchema> schema = {{"paid", ColumnKind::response, Transform::none},
                                      {"num", ColumnKind::numeric, Transform::none},
                                      {"cat", ColumnKind::categorical, Transform::none}};
  Frame f = frame_from_cells(cells, schema);
  std::vector<int> all(f.rows());
  std::iota(all.begin(), all.end(), 0);
  auto vocabs = build_vocabularies(f, all);
  Dataset ds = encode_dataset(f, vocabs);

  // planted per-level score as the embedding: slope recovered within 3 se
  EmbeddingValues table;
  table.variable = "cat";
  table.values.resize(5, 1);
  for (int l = 0; l < 4; ++l) table.values(l, 0) = level_score[l];
  table.values(4, 0) = 0.0;
  GlmFit fit = fit_with_embeddings(GlmSpec{}, ds, {table});
  REQUIRE(fit.term_names.size() == 3);
  CHECK(fit.term_names[2] == "cat");
  CHECK(std::abs(fit.beta(2) - 1.5) < 3.0 * fit.std_errors(2));

  // all-zero embeddings leave the embedding column unidentifiable
  EmbeddingValues zero;
  zero.variable = "cat";
  zero.values = Eigen::MatrixXd::Zero(5, 1);
  CHECK_THROWS_AS(fit_with_embeddings(GlmSpec{}, ds, {zero}), std::runtime_error);

  // missing table for a configured variable
  CHECK_THROWS_AS(build_embedding_design(ds, {}), std::invalid_argument);
}

TEST_CASE("linear benchmark floors predictions at 0.01") {
  RngStream rng(3);
  Eigen::MatrixXd design = random_matrix(200, 2, rng);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) y(i) = design(i, 0) * 4.0 + rng.normal();
  LinearBenchmark bench = linear_benchmark(design, y);
  Eigen::VectorXd pred = bench.predict(design);
  CHECK(pred.minCoeff() >= 0.01);
  // unconstrained fit really does go negative on this data
  CHECK(bench.fit.predict(design).minCoeff() < 0.0);
  // large predictions pass through unchanged
  Eigen::Index argmax;
  pred.maxCoeff(&argmax);
  CHECK(pred(argmax) == doctest::Approx(bench.fit.predict(design)(argmax)));
}
