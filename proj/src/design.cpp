#include "tailkit/design.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace tailkit {

CubicRegressionSpline CubicRegressionSpline::from_quantiles(const std::vector<double>& sample,
                                                            int basis_dim) {
  if (basis_dim < 3) throw SchemaError("spline: basis size must be at least 3");
  std::vector<double> x;
  x.reserve(sample.size());
  for (double v : sample)
    if (!std::isnan(v)) x.push_back(v);
  if (x.empty()) throw SchemaError("spline: no data for knot placement");
  std::sort(x.begin(), x.end());
  std::vector<double> knots(basis_dim);
  knots.front() = x.front();
  knots.back() = x.back();
  for (int j = 1; j < basis_dim - 1; ++j)
    knots[j] = interp_quantile_sorted(x, static_cast<double>(j) / (basis_dim - 1));
  for (int j = 1; j < basis_dim; ++j)
    if (!(knots[j] > knots[j - 1])) {
      const std::size_t distinct = std::set<double>(x.begin(), x.end()).size();
      throw SchemaError("spline: knots are not strictly increasing; basis size " +
                        std::to_string(basis_dim) + " needs more spread than the " +
                        std::to_string(distinct) + " distinct covariate values provide");
    }
  return from_knots(std::move(knots));
}

CubicRegressionSpline CubicRegressionSpline::from_knots(std::vector<double> knots) {
  const int B = static_cast<int>(knots.size());
  if (B < 3) throw SchemaError("spline: basis size must be at least 3");
  for (int j = 1; j < B; ++j)
    if (!(knots[j] > knots[j - 1]))
      throw SchemaError("spline: knots must be strictly increasing");

  CubicRegressionSpline s;
  s.knots_ = std::move(knots);
  std::vector<double> h(B - 1);
  for (int j = 0; j < B - 1; ++j) h[j] = s.knots_[j + 1] - s.knots_[j];

  // D maps knot values to second divided differences, Bm weights them.
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(B - 2, B);
  Eigen::MatrixXd Bm = Eigen::MatrixXd::Zero(B - 2, B - 2);
  for (int i = 0; i < B - 2; ++i) {
    D(i, i) = 1.0 / h[i];
    D(i, i + 1) = -1.0 / h[i] - 1.0 / h[i + 1];
    D(i, i + 2) = 1.0 / h[i + 1];
    Bm(i, i) = (h[i] + h[i + 1]) / 3.0;
    if (i + 1 < B - 2) {
      Bm(i, i + 1) = h[i + 1] / 6.0;
      Bm(i + 1, i) = h[i + 1] / 6.0;
    }
  }
  const Eigen::MatrixXd F = Bm.ldlt().solve(D);  // interior second derivatives
  s.curvature_ = Eigen::MatrixXd::Zero(B, B);
  s.curvature_.block(1, 0, B - 2, B) = F;
  Eigen::MatrixXd S = D.transpose() * F;
  s.penalty_ = 0.5 * (S + S.transpose());
  return s;
}

Eigen::RowVectorXd CubicRegressionSpline::eval(double x, bool* clamped) const {
  const int B = basis_dim();
  if (B == 0) throw std::logic_error("spline: uninitialized");
  if (x < knots_.front()) {
    x = knots_.front();
    if (clamped) *clamped = true;
  } else if (x > knots_.back()) {
    x = knots_.back();
    if (clamped) *clamped = true;
  }
  int j = static_cast<int>(std::upper_bound(knots_.begin(), knots_.end(), x) - knots_.begin()) - 1;
  j = std::max(0, std::min(j, B - 2));
  const double hj = knots_[j + 1] - knots_[j];
  const double dm = x - knots_[j];
  const double dp = knots_[j + 1] - x;
  const double am = dp / hj;
  const double ap = dm / hj;
  const double cm = (dp * dp * dp / hj - hj * dp) / 6.0;
  const double cp = (dm * dm * dm / hj - hj * dm) / 6.0;
  Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(B);
  row(j) += am;
  row(j + 1) += ap;
  row += cm * curvature_.row(j) + cp * curvature_.row(j + 1);
  return row;
}

// Orthonormal basis of the orthogonal complement of the ones vector,
// via the Householder reflection sending 1/sqrt(B) to e1.
static Eigen::MatrixXd ones_complement(int B) {
  Eigen::VectorXd v = Eigen::VectorXd::Constant(B, 1.0 / std::sqrt(static_cast<double>(B)));
  Eigen::VectorXd u = v;
  u(0) -= 1.0;
  u.normalize();
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(B, B) - 2.0 * u * u.transpose();
  return H.rightCols(B - 1);
}

Predictor Predictor::build(const Formula& formula, const Series& data,
                           const std::vector<int>& rows) {
  Predictor p;
  p.formula_ = formula;
  const int n = static_cast<int>(rows.size());
  if (n == 0) throw std::invalid_argument("design: no rows");
  const bool center = formula.has_intercept();

  // Validate variables and completeness before any numeric work.
  for (const auto& v : formula.variables()) {
    const int c = data.col_index(v);
    for (int r : rows)
      if (data.is_missing(r, c))
        throw std::invalid_argument("design: missing value in covariate " + v +
                                    " after case deletion");
  }

  int offset = 0;
  std::vector<Eigen::MatrixXd> pieces;
  for (const auto& term : formula.terms) {
    Block b;
    b.term = term;
    b.offset = offset;
    switch (term.kind) {
      case FormulaTerm::Kind::intercept: {
        b.width = 1;
        pieces.push_back(Eigen::MatrixXd::Ones(n, 1));
        break;
      }
      case FormulaTerm::Kind::linear: {
        b.width = 1;
        Eigen::MatrixXd col(n, 1);
        const auto& v = data.col(term.var);
        for (int i = 0; i < n; ++i) col(i, 0) = v[rows[i]];
        pieces.push_back(std::move(col));
        break;
      }
      case FormulaTerm::Kind::indicator: {
        b.width = 1;
        Eigen::MatrixXd col(n, 1);
        const auto& v = data.col(term.var);
        for (int i = 0; i < n; ++i) col(i, 0) = v[rows[i]] == term.level ? 1.0 : 0.0;
        pieces.push_back(std::move(col));
        break;
      }
      case FormulaTerm::Kind::spline: {
        const auto& v = data.col(term.var);
        std::vector<double> vals;
        vals.reserve(n);
        for (int r : rows) vals.push_back(v[r]);
        b.spline = CubicRegressionSpline::from_quantiles(vals, term.basis_dim);
        const int B = term.basis_dim;
        Eigen::MatrixXd raw(n, B);
        for (int i = 0; i < n; ++i) {
          bool cl = false;
          raw.row(i) = b.spline.eval(vals[i], &cl);
          p.clamped_any_ = p.clamped_any_ || cl;
        }
        if (center) {
          b.colmean = raw.colwise().mean();
          raw.rowwise() -= b.colmean;
          b.Q = ones_complement(B);
          b.width = B - 1;
          pieces.push_back(raw * b.Q);
        } else {
          b.colmean = Eigen::RowVectorXd::Zero(B);
          b.Q = Eigen::MatrixXd::Identity(B, B);
          b.width = B;
          pieces.push_back(std::move(raw));
        }
        PenaltyBlock pb;
        pb.offset = b.offset;
        pb.S = b.Q.transpose() * b.spline.penalty() * b.Q;
        p.penalties_.push_back(std::move(pb));
        break;
      }
    }
    offset += b.width;
    p.blocks_.push_back(std::move(b));
  }

  p.X_.resize(n, offset);
  for (std::size_t k = 0; k < pieces.size(); ++k)
    p.X_.block(0, p.blocks_[k].offset, n, p.blocks_[k].width) = pieces[k];
  return p;
}

Eigen::RowVectorXd Predictor::row_for(const Series& data, int row, bool* clamped) const {
  Eigen::RowVectorXd out = Eigen::RowVectorXd::Zero(n_coef());
  for (const auto& b : blocks_) {
    switch (b.term.kind) {
      case FormulaTerm::Kind::intercept: out(b.offset) = 1.0; break;
      case FormulaTerm::Kind::linear: {
        const double v = data.at(row, b.term.var);
        if (std::isnan(v)) throw std::invalid_argument("design: missing covariate " + b.term.var);
        out(b.offset) = v;
        break;
      }
      case FormulaTerm::Kind::indicator: {
        const double v = data.at(row, b.term.var);
        if (std::isnan(v)) throw std::invalid_argument("design: missing covariate " + b.term.var);
        out(b.offset) = v == b.term.level ? 1.0 : 0.0;
        break;
      }
      case FormulaTerm::Kind::spline: {
        const double v = data.at(row, b.term.var);
        if (std::isnan(v)) throw std::invalid_argument("design: missing covariate " + b.term.var);
        const Eigen::RowVectorXd raw = b.spline.eval(v, clamped);
        out.segment(b.offset, b.width) = (raw - b.colmean) * b.Q;
        break;
      }
    }
  }
  return out;
}

double Predictor::eval(const Eigen::VectorXd& coef, const Series& data, int row,
                       bool* clamped) const {
  return row_for(data, row, clamped).dot(coef);
}

Eigen::VectorXd Predictor::eval_all(const Eigen::VectorXd& coef, const Series& data,
                                    const std::vector<int>& rows) const {
  Eigen::VectorXd out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = eval(coef, data, rows[i]);
  return out;
}

}  // namespace tailkit
