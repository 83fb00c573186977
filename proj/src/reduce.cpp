#include "claimnet/reduce.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "claimnet/csv.hpp"

namespace claimnet {

PcaResult pca(const Eigen::MatrixXd& points, int n_components) {
  const Eigen::Index n = points.rows(), dim = points.cols();
  if (n < 2) throw std::invalid_argument("pca: need at least 2 points");
  if (n_components < 1 ||
      n_components > std::min<Eigen::Index>(n - 1, dim))
    throw std::invalid_argument("pca: n_components out of range");

  PcaResult res;
  res.mean = points.colwise().mean();
  Eigen::MatrixXd centered = points.rowwise() - res.mean;
  if (centered.cwiseAbs().maxCoeff() < 1e-300)
    throw std::invalid_argument("pca: degenerate input (all points identical)");

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  res.variances = sv.array().square() / static_cast<double>(n);
  double total = res.variances.sum();
  res.variance_proportion = res.variances / total;
  res.cumulative_proportion.resize(res.variances.size());
  double cum = 0.0;
  for (Eigen::Index i = 0; i < res.variances.size(); ++i) {
    cum += res.variance_proportion(i);
    res.cumulative_proportion(i) = cum;
  }
  res.components = svd.matrixV().leftCols(n_components).transpose();
  res.projected = centered * svd.matrixV().leftCols(n_components);
  return res;
}

namespace {

// conditional p_{j|i} over a squared-distance row at kernel width sigma,
// stabilized by shifting with the smallest distance
Eigen::VectorXd conditional_p(const Eigen::VectorXd& sq_distances, double sigma) {
  double dmin = sq_distances.minCoeff();
  Eigen::ArrayXd e = (-(sq_distances.array() - dmin) / (2.0 * sigma * sigma)).exp();
  double total = e.sum();
  return (e / total).matrix();
}

double perplexity_of(const Eigen::VectorXd& p) {
  double h = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i)
    if (p(i) > 0.0) h -= p(i) * std::log2(p(i));
  return std::exp2(h);
}

}  // namespace

PerplexitySearchResult perplexity_search(const Eigen::VectorXd& sq_distances,
                                         double target_perplexity) {
  if (sq_distances.size() < 1)
    throw std::invalid_argument("perplexity_search: no neighbor distances");
  if (target_perplexity <= 0.0)
    throw std::invalid_argument("perplexity_search: target must be positive");
  const double tol = 1e-3 * target_perplexity;
  auto eval = [&](double sigma) {
    return perplexity_of(conditional_p(sq_distances, sigma));
  };

  // perplexity is nondecreasing in sigma; bracket by doubling/halving from 1
  double lo = 1.0, hi = 1.0;
  double perp = eval(1.0);
  if (perp < target_perplexity) {
    for (int i = 0; i < 600 && eval(hi) < target_perplexity; ++i) hi *= 2.0;
    lo = hi / 2.0;
  } else {
    for (int i = 0; i < 600 && eval(lo) > target_perplexity; ++i) lo /= 2.0;
    hi = lo * 2.0;
  }

  PerplexitySearchResult res;
  res.sigma = 0.5 * (lo + hi);
  for (int iter = 0; iter < 50; ++iter) {
    res.sigma = 0.5 * (lo + hi);
    double p = eval(res.sigma);
    if (std::abs(p - target_perplexity) < tol) break;
    if (p < target_perplexity) lo = res.sigma;
    else hi = res.sigma;
  }
  res.achieved = eval(res.sigma);
  res.converged = std::abs(res.achieved - target_perplexity) < tol;
  return res;
}

Eigen::MatrixXd tsne_p_matrix(const Eigen::MatrixXd& points, double perplexity,
                              Eigen::VectorXd* sigmas_out,
                              std::vector<bool>* converged_out) {
  const Eigen::Index n = points.rows();
  Eigen::MatrixXd sq_dist(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      sq_dist(i, j) = (points.row(i) - points.row(j)).squaredNorm();

  Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
  if (sigmas_out) sigmas_out->resize(n);
  if (converged_out) converged_out->assign(n, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd others(n - 1);
    Eigen::Index at = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) others(at++) = sq_dist(i, j);
    PerplexitySearchResult sr = perplexity_search(others, perplexity);
    if (sigmas_out) (*sigmas_out)(i) = sr.sigma;
    if (converged_out) (*converged_out)[i] = sr.converged;
    Eigen::VectorXd p = conditional_p(others, sr.sigma);
    at = 0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) cond(i, j) = p(at++);
  }
  return (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
}

Eigen::MatrixXd tsne_q_matrix(const Eigen::MatrixXd& y) {
  const Eigen::Index n = y.rows();
  Eigen::MatrixXd w(n, n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    w(i, i) = 0.0;
    for (Eigen::Index j = i + 1; j < n; ++j) {
      double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
      w(i, j) = v;
      w(j, i) = v;
      total += 2.0 * v;
    }
  }
  return w / std::max(total, 1e-300);
}

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j)
      if (p(i, j) > 0.0)
        kl += p(i, j) * std::log(p(i, j) / std::max(q(i, j), 1e-300));
  return kl;
}

TsneResult tsne(const Eigen::MatrixXd& points, const TsneConfig& config) {
  const Eigen::Index n = points.rows();
  if (n < 4) throw std::invalid_argument("tsne: need at least 4 points");
  if (config.perplexity <= 1.0 || config.perplexity >= static_cast<double>(n))
    throw std::invalid_argument("tsne: perplexity must lie in (1, point count)");
  if (config.steps < 1) throw std::invalid_argument("tsne: steps must be >= 1");

  TsneResult res;
  Eigen::MatrixXd p = tsne_p_matrix(points, config.perplexity, &res.sigmas,
                                    &res.perplexity_converged);

  RngStream rng(config.seed);
  Eigen::MatrixXd y(n, config.out_dim);
  for (Eigen::Index j = 0; j < config.out_dim; ++j)
    for (Eigen::Index i = 0; i < n; ++i) y(i, j) = rng.normal(0.0, 1e-4);

  Eigen::MatrixXd velocity = Eigen::MatrixXd::Zero(n, config.out_dim);
  Eigen::MatrixXd grad(n, config.out_dim);

  auto record = [&](int step) {
    res.kl_trace.emplace_back(step, kl_divergence(p, tsne_q_matrix(y)));
  };
  record(0);

  for (int step = 1; step <= config.steps; ++step) {
    double exaggeration =
        step <= config.exaggeration_steps ? config.early_exaggeration : 1.0;
    // unnormalized Cauchy weights and their normalizer
    Eigen::MatrixXd w(n, n);
    double z = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      w(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        w(i, j) = v;
        w(j, i) = v;
        z += 2.0 * v;
      }
    }
    z = std::max(z, 1e-300);
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        double coeff = 4.0 * (exaggeration * p(i, j) - w(i, j) / z) * w(i, j);
        grad.row(i) += coeff * (y.row(i) - y.row(j));
      }
    if (!grad.allFinite())
      throw std::runtime_error("tsne: non-finite gradient at step " + std::to_string(step));
    if (config.momentum > 0.0) {
      velocity = config.momentum * velocity - config.learning_rate * grad;
      y += velocity;
    } else {
      y -= config.learning_rate * grad;
    }
    if (!y.allFinite())
      throw std::runtime_error("tsne: non-finite layout at step " + std::to_string(step));
    if (step % config.record_every == 0 || step == config.steps) record(step);
  }
  res.Y = y;
  return res;
}

namespace {

// 10-color qualitative palette
const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string color_for(const std::vector<std::string>& groups, std::size_t i,
                      std::vector<std::string>& seen) {
  if (groups.empty()) return kPalette[0];
  auto it = std::find(seen.begin(), seen.end(), groups[i]);
  std::size_t idx;
  if (it == seen.end()) {
    seen.push_back(groups[i]);
    idx = seen.size() - 1;
  } else {
    idx = static_cast<std::size_t>(it - seen.begin());
  }
  return kPalette[idx % 10];
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace

void write_scatter_csv(const std::string& path, const std::vector<std::string>& labels,
                       const Eigen::MatrixXd& xy, const std::vector<std::string>& groups) {
  if (static_cast<Eigen::Index>(labels.size()) != xy.rows())
    throw std::invalid_argument("write_scatter_csv: label count mismatch");
  if (!groups.empty() && groups.size() != labels.size())
    throw std::invalid_argument("write_scatter_csv: group count mismatch");
  std::vector<std::string> header = {"label", "x", "y"};
  if (!groups.empty()) header.push_back("group");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::vector<std::string> row = {labels[i], format_double(xy(i, 0)),
                                    format_double(xy(i, 1))};
    if (!groups.empty()) row.push_back(groups[i]);
    rows.push_back(std::move(row));
  }
  write_csv(path, header, rows);
}

void write_scatter_svg(const std::string& path, const std::vector<std::string>& labels,
                       const Eigen::MatrixXd& xy, const std::vector<std::string>& groups) {
  if (static_cast<Eigen::Index>(labels.size()) != xy.rows())
    throw std::invalid_argument("write_scatter_svg: label count mismatch");
  const double width = 640, height = 480, margin = 48;
  double xmin = xy.col(0).minCoeff(), xmax = xy.col(0).maxCoeff();
  double ymin = xy.col(1).minCoeff(), ymax = xy.col(1).maxCoeff();
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto sx = [&](double x) { return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin); };
  auto sy = [&](double y) { return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin); };

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height - margin << "\" x2=\""
      << width - margin << "\" y2=\"" << height - margin
      << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin
      << "\" y2=\"" << height - margin << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  std::vector<std::string> seen;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::string color = color_for(groups, i, seen);
    out << "<circle cx=\"" << sx(xy(i, 0)) << "\" cy=\"" << sy(xy(i, 1))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    out << "<text x=\"" << sx(xy(i, 0)) + 5 << "\" y=\"" << sy(xy(i, 1)) - 3
        << "\" font-size=\"9\" font-family=\"sans-serif\">" << xml_escape(labels[i])
        << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_numberline_csv(const std::string& path, const std::vector<std::string>& labels,
                          const Eigen::VectorXd& values) {
  if (static_cast<Eigen::Index>(labels.size()) != values.size())
    throw std::invalid_argument("write_numberline_csv: label count mismatch");
  std::vector<std::vector<std::string>> rows;
  for (std::size_t i = 0; i < labels.size(); ++i)
    rows.push_back({labels[i], format_double(values(static_cast<Eigen::Index>(i)))});
  write_csv(path, {"label", "value"}, rows);
}

void write_numberline_svg(const std::string& path, const std::vector<std::string>& labels,
                          const Eigen::VectorXd& values) {
  if (static_cast<Eigen::Index>(labels.size()) != values.size())
    throw std::invalid_argument("write_numberline_svg: label count mismatch");
  const double width = 640, height = 160, margin = 48;
  double vmin = values.minCoeff(), vmax = values.maxCoeff();
  if (vmax <= vmin) vmax = vmin + 1.0;
  auto sx = [&](double v) { return margin + (v - vmin) / (vmax - vmin) * (width - 2 * margin); };
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write file: " + path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << margin << "\" y1=\"" << height / 2 << "\" x2=\"" << width - margin
      << "\" y2=\"" << height / 2 << "\" stroke=\"#333\" stroke-width=\"1\"/>\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double x = sx(values(static_cast<Eigen::Index>(i)));
    // alternate label rows so nearby levels stay readable
    double ty = i % 2 == 0 ? height / 2 - 12 : height / 2 + 20;
    out << "<circle cx=\"" << x << "\" cy=\"" << height / 2 << "\" r=\"3\" fill=\""
        << kPalette[0] << "\"/>\n";
    out << "<text x=\"" << x << "\" y=\"" << ty
        << "\" font-size=\"9\" font-family=\"sans-serif\" text-anchor=\"middle\">"
        << xml_escape(labels[i]) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace claimnet
