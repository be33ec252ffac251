#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "lsdat/constraints.hpp"
#include "lsdat/image.hpp"

namespace lsdat {

using Matrix2D = Eigen::MatrixXd;

struct RpcaConfig {
  /// Sparsity regularizer. Unset means 1/sqrt(max(rows, cols)), chosen
  /// per matrix.
  std::optional<double> lambda;
  /// Relative reconstruction residual at which the solver stops:
  /// ||X - L - S||_F / max(1, ||X||_F).
  double tolerance = 1e-7;
  int max_iterations = 500;
  /// Threshold below which sparse entries count as zero.
  double support_eps = kDefaultSupportEps;
  /// Upper bound on the admissible nonzero fraction of S; 1.0 disables
  /// the check. Reported results always carry the measured fraction.
  double sparsity_cap = 1.0;

  double lambda_for(Eigen::Index rows, Eigen::Index cols) const;
  void validate() const;

  bool operator==(const RpcaConfig&) const = default;
};

/// Low-rank plus sparse split of a matrix, L + S ~= X.
struct LSDPair {
  Matrix2D low_rank;
  Matrix2D sparse;
};

struct RpcaResult {
  LSDPair pair;
  bool converged = false;
  int iterations = 0;
  /// ||X - L - S||_F / max(1, ||X||_F) at termination.
  double residual = 0.0;
  /// Fraction of S entries with |s| > support_eps.
  double sparse_fraction = 0.0;
};

/// U * shrink(Sigma, tau) * V^T where shrink subtracts tau from each
/// singular value and floors at zero.
Matrix2D singular_value_threshold(const Matrix2D& m, double tau);

/// Entrywise sign(v) * max(|v| - tau, 0).
Matrix2D soft_threshold(const Matrix2D& m, double tau);

/// Solves min ||L||_* + lambda ||S||_1 s.t. X = L + S by inexact
/// augmented Lagrangian alternation of singular_value_threshold and
/// soft_threshold. Non-convergence within max_iterations is flagged on
/// the result, not thrown.
RpcaResult decompose(const Matrix2D& x, const RpcaConfig& cfg = {});

/// Per-channel decomposition of an image.
struct ImageLsd {
  int height = 0;
  int width = 0;
  std::vector<RpcaResult> channels;

  ImageTensor low_rank_image() const;
  ImageTensor sparse_image() const;
  bool all_converged() const;
};

ImageLsd decompose_image(const ImageTensor& img, const RpcaConfig& cfg = {});

}  // namespace lsdat
