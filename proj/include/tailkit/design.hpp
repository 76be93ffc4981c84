#pragma once

#include <Eigen/Dense>
#include <vector>

#include "tailkit/formula.hpp"
#include "tailkit/series.hpp"

namespace tailkit {

// Natural cubic regression spline parameterized by its values at the knots.
// Second derivatives at the knots are linear in those values, which gives a
// banded curvature penalty.
class CubicRegressionSpline {
 public:
  CubicRegressionSpline() = default;

  // Knots at equally spaced sample quantiles j/(B-1), j = 0..B-1.
  // Throws SchemaError when the sample has fewer than B distinct values.
  static CubicRegressionSpline from_quantiles(const std::vector<double>& sample, int basis_dim);
  static CubicRegressionSpline from_knots(std::vector<double> knots);

  int basis_dim() const { return static_cast<int>(knots_.size()); }
  const std::vector<double>& knots() const { return knots_; }

  // Basis row b(x); x outside the knot range is clamped to the boundary and
  // *clamped set when provided.
  Eigen::RowVectorXd eval(double x, bool* clamped = nullptr) const;

  // Curvature penalty D' B^{-1} D; integrates the squared second derivative.
  const Eigen::MatrixXd& penalty() const { return penalty_; }

 private:
  std::vector<double> knots_;
  Eigen::MatrixXd curvature_;  // basis_dim x basis_dim: values -> second derivatives
  Eigen::MatrixXd penalty_;
};

// One additive term mapped to a span of columns in the assembled design.
struct PenaltyBlock {
  int offset = 0;
  Eigen::MatrixXd S;  // width x width
};

// Assembled (and, when an intercept is present, sum-to-zero constrained)
// design for one model formula.  Spline blocks are column-centered and
// reduced by one dimension so the intercept stays identifiable.
class Predictor {
 public:
  Predictor() = default;

  static Predictor build(const Formula& formula, const Series& data,
                         const std::vector<int>& rows);

  const Formula& formula() const { return formula_; }
  int n_coef() const { return static_cast<int>(X_.cols()); }
  int n_rows() const { return static_cast<int>(X_.rows()); }
  const Eigen::MatrixXd& design() const { return X_; }

  // One penalty block per spline term, in formula order.
  const std::vector<PenaltyBlock>& penalties() const { return penalties_; }
  int n_spline_blocks() const { return static_cast<int>(penalties_.size()); }

  // Constrained design row for an arbitrary data row (prediction).
  Eigen::RowVectorXd row_for(const Series& data, int row, bool* clamped = nullptr) const;
  double eval(const Eigen::VectorXd& coef, const Series& data, int row,
              bool* clamped = nullptr) const;
  Eigen::VectorXd eval_all(const Eigen::VectorXd& coef, const Series& data,
                           const std::vector<int>& rows) const;

  bool any_clamped_in_build() const { return clamped_any_; }

 private:
  struct Block {
    FormulaTerm term;
    int offset = 0;
    int width = 0;
    CubicRegressionSpline spline;
    Eigen::RowVectorXd colmean;  // raw-basis column means (centering)
    Eigen::MatrixXd Q;           // basis_dim x (basis_dim-1) null-space map
  };

  Formula formula_;
  std::vector<Block> blocks_;
  Eigen::MatrixXd X_;
  std::vector<PenaltyBlock> penalties_;
  bool clamped_any_ = false;
};

}  // namespace tailkit
