#include "claimnet/glm.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "claimnet/csv.hpp"

namespace claimnet {

namespace {

double link_of_mean(Link link, double mu) {
  return link == Link::log_link ? std::log(mu) : mu;
}

double mean_of_link(Link link, double eta) {
  if (link == Link::log_link) return std::exp(std::min(eta, 700.0));
  return eta;
}

// d eta / d mu
double link_derivative(Link link, double mu) {
  return link == Link::log_link ? 1.0 / mu : 1.0;
}

double variance_function(Family family, double mu) {
  return family == Family::gamma ? mu * mu : 1.0;
}

double deviance_of(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& mu) {
  double dev = 0.0;
  if (family == Family::gamma) {
    for (Eigen::Index i = 0; i < y.size(); ++i)
      dev += 2.0 * (-std::log(y(i) / mu(i)) + (y(i) - mu(i)) / mu(i));
  } else {
    dev = (y - mu).squaredNorm();
  }
  return dev;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& design, bool intercept) {
  if (!intercept) return design;
  Eigen::MatrixXd X(design.rows(), design.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(design.cols()) = design;
  return X;
}

}  // namespace

Eigen::VectorXd GlmFit::linear_predictor(const Eigen::MatrixXd& design) const {
  Eigen::MatrixXd X = with_intercept(design, spec.intercept);
  if (X.cols() != beta.size())
    throw std::invalid_argument("GlmFit: design has wrong number of columns");
  return X * beta;
}

Eigen::VectorXd GlmFit::predict(const Eigen::MatrixXd& design) const {
  Eigen::VectorXd eta = linear_predictor(design);
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) mu(i) = mean_of_link(spec.link, eta(i));
  return mu;
}

GlmFit fit_iwls(const GlmSpec& spec, const Eigen::MatrixXd& design,
                const Eigen::VectorXd& y, std::vector<std::string> names) {
  if (design.rows() != y.size())
    throw std::invalid_argument("fit_iwls: design rows != response length");
  if (y.size() == 0) throw std::invalid_argument("fit_iwls: empty response");
  if (spec.family == Family::gamma && y.minCoeff() <= 0.0)
    throw std::invalid_argument("fit_iwls: gamma family requires strictly positive response");

  Eigen::MatrixXd X = with_intercept(design, spec.intercept);
  const Eigen::Index n = X.rows(), p = X.cols();
  if (n < p && !spec.allow_rank_deficient)
    throw std::runtime_error("fit_iwls: more columns than rows");

  GlmFit fit;
  fit.spec = spec;
  if (names.empty()) {
    for (Eigen::Index j = 0; j < design.cols(); ++j) names.push_back("x" + std::to_string(j));
  }
  if (static_cast<Eigen::Index>(names.size()) != design.cols())
    throw std::invalid_argument("fit_iwls: names/design mismatch");
  if (spec.intercept) names.insert(names.begin(), "(Intercept)");
  fit.term_names = std::move(names);

  // mustart = y works for both families here (gamma requires y > 0).
  Eigen::VectorXd mu = y;
  if (spec.family == Family::gaussian && spec.link == Link::log_link)
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = std::max(mu(i), 0.1);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd w(n), z(n);
  bool rank_checked = false;

  for (int iter = 1; iter <= spec.max_iterations; ++iter) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double dlink = link_derivative(spec.link, mu(i));
      double eta = link_of_mean(spec.link, mu(i));
      z(i) = eta + (y(i) - mu(i)) * dlink;
      w(i) = 1.0 / (variance_function(spec.family, mu(i)) * dlink * dlink);
    }
    Eigen::VectorXd sw = w.cwiseSqrt();
    Eigen::MatrixXd Xw = sw.asDiagonal() * X;
    Eigen::VectorXd zw = sw.cwiseProduct(z);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
    qr.setThreshold(1e-10);
    if (!rank_checked) {
      if (qr.rank() < p && !spec.allow_rank_deficient)
        throw std::runtime_error("fit_iwls: rank-deficient design (rank " +
                                 std::to_string(qr.rank()) + " of " + std::to_string(p) + ")");
      rank_checked = true;
    }
    Eigen::VectorXd beta_new = qr.solve(zw);
    if (!beta_new.allFinite())
      throw std::runtime_error("fit_iwls: non-finite coefficients at iteration " +
                               std::to_string(iter));
    Eigen::VectorXd eta = X * beta_new;
    for (Eigen::Index i = 0; i < n; ++i) mu(i) = mean_of_link(spec.link, eta(i));
    if (spec.family == Family::gamma)
      for (Eigen::Index i = 0; i < n; ++i)
        mu(i) = std::max(mu(i), std::numeric_limits<double>::min() * 1e16);
    fit.deviance_trace.push_back(deviance_of(spec.family, y, mu));
    fit.iterations = iter;
    double delta = iter == 1 ? std::numeric_limits<double>::infinity()
                             : (beta_new - beta).cwiseAbs().maxCoeff();
    beta = beta_new;
    // gaussian/identity: the working response never changes, so the first
    // solve is already the least-squares solution
    if (spec.family == Family::gaussian && spec.link == Link::identity) {
      fit.converged = true;
      break;
    }
    if (delta < spec.tolerance) {
      fit.converged = true;
      break;
    }
  }

  fit.beta = beta;
  fit.deviance = fit.deviance_trace.empty() ? 0.0 : fit.deviance_trace.back();

  // Pearson dispersion and standard errors from the final weights
  double pearson = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = y(i) - mu(i);
    pearson += r * r / variance_function(spec.family, mu(i));
  }
  fit.dispersion = n > p ? pearson / static_cast<double>(n - p) : std::numeric_limits<double>::quiet_NaN();
  Eigen::MatrixXd xtwx = X.transpose() * w.asDiagonal() * X;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(xtwx);
  if (lu.isInvertible() && std::isfinite(fit.dispersion)) {
    Eigen::MatrixXd cov = lu.inverse() * fit.dispersion;
    fit.std_errors = cov.diagonal().cwiseMax(0.0).cwiseSqrt();
  } else {
    fit.std_errors = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::quiet_NaN());
  }
  return fit;
}

DummyDesign build_dummy_design(const Dataset& ds, const std::vector<Vocabulary>& vocabs,
                               const std::map<std::string, std::string>& baseline_override,
                               bool allow_unseen) {
  DummyDesign out;
  Eigen::Index cols = ds.X_num.cols();
  std::vector<std::pair<const Vocabulary*, int>> cat_plan;  // vocab, baseline idx
  for (const auto& name : ds.categorical_names) {
    const Vocabulary& vocab = vocabulary_for(vocabs, name);
    int baseline = 0;
    auto it = baseline_override.find(name);
    if (it != baseline_override.end()) {
      if (!vocab.contains(it->second))
        throw std::invalid_argument("baseline override '" + it->second +
                                    "' is not a level of " + name);
      baseline = vocab.index_of(it->second);
    }
    cat_plan.emplace_back(&vocab, baseline);
    cols += vocab.cardinality() - 1;
  }
  out.X.resize(ds.rows(), cols);
  out.X.leftCols(ds.X_num.cols()) = ds.X_num;
  for (const auto& name : ds.numeric_names) out.info.column_names.push_back(name);

  Eigen::Index at = ds.X_num.cols();
  for (std::size_t j = 0; j < ds.categorical_names.size(); ++j) {
    const auto& [vocab, baseline] = cat_plan[j];
    out.X.middleCols(at, vocab->cardinality() - 1) =
        encode_dummy(ds, ds.categorical_names[j], *vocab, baseline, allow_unseen);
    CatTermGroup group;
    group.variable = ds.categorical_names[j];
    group.baseline = vocab->level(baseline);
    for (int level = 0; level < vocab->cardinality(); ++level) {
      if (level == baseline) continue;
      group.labels.push_back(vocab->level(level));
      group.columns.push_back(static_cast<int>(at));
      out.info.column_names.push_back(group.variable + "=" + vocab->level(level));
      ++at;
    }
    out.info.groups.push_back(std::move(group));
  }
  return out;
}

std::vector<RelativityRow> relativities(const GlmFit& fit, const DesignInfo& info) {
  if (fit.spec.link != Link::log_link)
    throw std::invalid_argument("relativities: requires a log-link fit");
  const int offset = fit.spec.intercept ? 1 : 0;
  std::vector<RelativityRow> rows;
  for (const auto& group : info.groups) {
    rows.push_back({group.variable, group.baseline, 1.0});
    for (std::size_t i = 0; i < group.labels.size(); ++i)
      rows.push_back({group.variable, group.labels[i],
                      std::exp(fit.beta(group.columns[i] + offset))});
  }
  return rows;
}

void write_relativities_csv(const std::string& path, const std::vector<RelativityRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  cells.reserve(rows.size());
  char buf[32];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.2f", r.relativity);
    cells.push_back({r.variable, r.label, buf});
  }
  write_csv(path, {"variable", "label", "relativity"}, cells);
}

void write_glm_fit(const std::string& path, const GlmFit& fit) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  for (Eigen::Index i = 0; i < fit.beta.size(); ++i)
    out << fit.term_names.at(i) << " = " << format_double(fit.beta(i)) << "\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

long param_count_dummy(int n_num, const std::vector<int>& cardinalities) {
  long count = 1 + n_num;
  for (int card : cardinalities) {
    if (card < 2) throw std::invalid_argument("param_count_dummy: cardinality < 2");
    count += card - 1;
  }
  return count;
}

long param_count_embedding(int n_num, int n_cat) { return 1L + n_num + n_cat; }

EmbeddingDesign build_embedding_design(const Dataset& ds,
                                       const std::vector<EmbeddingValues>& tables) {
  EmbeddingDesign out;
  Eigen::Index cols = ds.X_num.cols();
  std::vector<const EmbeddingValues*> table_of;
  for (const auto& name : ds.categorical_names) {
    const EmbeddingValues* found = nullptr;
    for (const auto& t : tables)
      if (t.variable == name) found = &t;
    if (!found) throw std::invalid_argument("missing embedding for variable " + name);
    table_of.push_back(found);
    cols += found->values.cols();
  }
  out.X.resize(ds.rows(), cols);
  out.X.leftCols(ds.X_num.cols()) = ds.X_num;
  out.names = ds.numeric_names;
  Eigen::Index at = ds.X_num.cols();
  for (std::size_t j = 0; j < ds.categorical_names.size(); ++j) {
    const Eigen::MatrixXd& values = table_of[j]->values;
    for (Eigen::Index i = 0; i < ds.rows(); ++i) {
      int idx = ds.X_cat(i, static_cast<int>(j));
      if (idx < 0 || idx >= values.rows())
        throw std::out_of_range("embedding lookup out of range for " +
                                ds.categorical_names[j]);
      out.X.block(i, at, 1, values.cols()) = values.row(idx);
    }
    if (values.cols() == 1) {
      out.names.push_back(ds.categorical_names[j]);
    } else {
      for (Eigen::Index d = 0; d < values.cols(); ++d)
        out.names.push_back(ds.categorical_names[j] + "_e" + std::to_string(d + 1));
    }
    at += values.cols();
  }
  return out;
}

GlmFit fit_with_embeddings(const GlmSpec& spec, const Dataset& ds,
                           const std::vector<EmbeddingValues>& tables) {
  EmbeddingDesign design = build_embedding_design(ds, tables);
  return fit_iwls(spec, design.X, ds.y, design.names);
}

Eigen::VectorXd LinearBenchmark::predict(const Eigen::MatrixXd& design) const {
  return fit.predict(design).cwiseMax(floor);
}

LinearBenchmark linear_benchmark(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                 std::vector<std::string> names) {
  GlmSpec spec;
  spec.family = Family::gaussian;
  spec.link = Link::identity;
  LinearBenchmark bench;
  bench.fit = fit_iwls(spec, design, y, std::move(names));
  return bench;
}

}  // namespace claimnet
