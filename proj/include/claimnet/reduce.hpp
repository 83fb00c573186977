#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "claimnet/rng.hpp"

namespace claimnet {

struct PcaResult {
  Eigen::MatrixXd components;  // n_components x dim, rows orthonormal
  Eigen::VectorXd variances;   // full spectrum, non-increasing (1/n convention)
  Eigen::VectorXd variance_proportion;
  Eigen::VectorXd cumulative_proportion;
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd projected;  // n x n_components
};

/// Column-center, SVD, project. Points are rows. Errors if all points are
/// identical or n_components exceeds min(n-1, dim).
PcaResult pca(const Eigen::MatrixXd& points, int n_components);

struct PerplexitySearchResult {
  double sigma = 0.0;
  double achieved = 0.0;
  bool converged = false;
};

/// Binary search for the kernel width whose conditional distribution over the
/// given squared distances hits the target perplexity (bracket doubling, 50
/// bisection iterations, tolerance 0.1% of target). Degenerate inputs where
/// the target is unattainable fall back to the bracket midpoint with
/// converged=false.
PerplexitySearchResult perplexity_search(const Eigen::VectorXd& sq_distances,
                                         double target_perplexity);

struct TsneConfig {
  double perplexity = 5.0;
  double learning_rate = 100.0;
  int steps = 10000;
  int out_dim = 2;
  std::uint64_t seed = 0;
  // both default off: plain gradient descent on the KL objective
  double early_exaggeration = 1.0;
  int exaggeration_steps = 0;
  double momentum = 0.0;
  int record_every = 50;
};

struct TsneResult {
  Eigen::MatrixXd Y;
  std::vector<std::pair<int, double>> kl_trace;  // (step, KL); step 0 is pre-update
  Eigen::VectorXd sigmas;
  std::vector<bool> perplexity_converged;
};

TsneResult tsne(const Eigen::MatrixXd& points, const TsneConfig& config);

/// Symmetrized high-dimensional affinities p_ij (zero diagonal, sums to 1).
Eigen::MatrixXd tsne_p_matrix(const Eigen::MatrixXd& points, double perplexity,
                              Eigen::VectorXd* sigmas_out = nullptr,
                              std::vector<bool>* converged_out = nullptr);

/// Cauchy-kernel affinities q_ij of a low-dimensional layout.
Eigen::MatrixXd tsne_q_matrix(const Eigen::MatrixXd& y);

double kl_divergence(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q);

void write_scatter_csv(const std::string& path, const std::vector<std::string>& labels,
                       const Eigen::MatrixXd& xy,
                       const std::vector<std::string>& groups = {});
void write_scatter_svg(const std::string& path, const std::vector<std::string>& labels,
                       const Eigen::MatrixXd& xy,
                       const std::vector<std::string>& groups = {});
void write_numberline_csv(const std::string& path, const std::vector<std::string>& labels,
                          const Eigen::VectorXd& values);
void write_numberline_svg(const std::string& path, const std::vector<std::string>& labels,
                          const Eigen::VectorXd& values);

}  // namespace claimnet
