#pragma once

// Cubic (or general degree) B-spline bases with difference penalties,
// tensor products, varying-coefficient designs and identifiability
// constraints. Everything here is a pure function of its inputs.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "timeroc/error.hpp"

namespace timeroc {

enum class KnotRule { quantile, equidistant };

struct BasisSpec {
  int dimension = 10;
  int degree = 3;
  int penalty_order = 2;
  double lo = 0.0;
  double hi = 1.0;
  KnotRule knot_rule = KnotRule::quantile;
};

struct TensorSpec {
  BasisSpec margin1;
  BasisSpec margin2;
  int max_dimension = 400;
};

inline void validate(const BasisSpec& spec) {
  if (spec.degree < 0 || spec.degree > 15)
    throw Error(ErrorCode::invalid_spec, "spline degree must lie in [0, 15]");
  if (spec.dimension <= spec.degree + 1)
    throw Error(ErrorCode::invalid_spec, "basis dimension must exceed degree + 1");
  if (spec.penalty_order < 1 || spec.penalty_order >= spec.dimension)
    throw Error(ErrorCode::invalid_spec, "penalty order must lie in [1, dimension)");
  if (!(spec.lo < spec.hi)) throw Error(ErrorCode::invalid_spec, "empty basis domain");
}

/// Type-7 quantile of an ascending-sorted sample.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// r-th order difference matrix of size (n - r) x n.
inline Eigen::MatrixXd difference_matrix(int n, int order) {
  Eigen::MatrixXd d = Eigen::MatrixXd::Identity(n, n);
  for (int k = 0; k < order; ++k) {
    const Eigen::Index rows = d.rows() - 1;
    d = (d.bottomRows(rows) - d.topRows(rows)).eval();
  }
  return d;
}

/// B-spline basis of a single variable.
///
/// Equidistant knots follow the P-spline construction: J - degree equal
/// segments on [lo, hi] with `degree` extra knots outside each end. Quantile
/// knots place the J - degree - 1 interior knots at quantiles of the distinct
/// training values and repeat the boundary knots (clamped vector). In both
/// cases the basis is a partition of unity on [lo, hi].
class BSplineBasis {
 public:
  BSplineBasis() = default;

  BSplineBasis(const BasisSpec& spec, std::span<const double> x) : spec_(spec) {
    validate(spec_);
    const int d = spec_.degree;
    const int J = spec_.dimension;
    knots_.reserve(static_cast<std::size_t>(J + d + 1));
    if (spec_.knot_rule == KnotRule::equidistant) {
      const double h = (spec_.hi - spec_.lo) / (J - d);
      for (int k = 0; k <= J + d; ++k) knots_.push_back(spec_.lo + (k - d) * h);
      knots_[static_cast<std::size_t>(J)] = spec_.hi;
    } else {
      std::vector<double> u;
      u.reserve(x.size());
      for (double v : x)
        if (std::isfinite(v)) u.push_back(std::clamp(v, spec_.lo, spec_.hi));
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      if (static_cast<int>(u.size()) < J)
        throw Error(ErrorCode::degenerate_knots,
                    "fewer distinct values (" + std::to_string(u.size()) +
                        ") than basis functions (" + std::to_string(J) + ")");
      const int interior = J - d - 1;
      for (int k = 0; k <= d; ++k) knots_.push_back(spec_.lo);
      for (int k = 1; k <= interior; ++k) {
        const double q = sorted_quantile(u, static_cast<double>(k) / (interior + 1));
        if (!(q > knots_.back()) || !(q < spec_.hi))
          throw Error(ErrorCode::degenerate_knots, "coincident quantile knots");
        knots_.push_back(q);
      }
      for (int k = 0; k <= d; ++k) knots_.push_back(spec_.hi);
    }
  }

  const BasisSpec& spec() const noexcept { return spec_; }
  int dimension() const noexcept { return spec_.dimension; }
  int degree() const noexcept { return spec_.degree; }
  const std::vector<double>& knots() const noexcept { return knots_; }

  /// Evaluates the degree + 1 basis functions that are nonzero at x.
  /// Writes them to `values` and returns the index of the first one.
  /// Points outside [lo, hi] are clamped to the boundary and flagged.
  int eval_nonzero(double x, std::span<double> values, bool* clamped = nullptr) const {
    const int d = spec_.degree;
    const int J = spec_.dimension;
    bool out = false;
    if (x < spec_.lo) {
      x = spec_.lo;
      out = true;
    } else if (x > spec_.hi) {
      x = spec_.hi;
      out = true;
    }
    if (clamped) *clamped = out;
    // span index mu with knots[mu] <= x < knots[mu+1], restricted to [d, J-1]
    auto it = std::upper_bound(knots_.begin() + d, knots_.begin() + J, x);
    int mu = static_cast<int>(it - knots_.begin()) - 1;
    mu = std::clamp(mu, d, J - 1);

    double left[16];
    double right[16];
    values[0] = 1.0;
    for (int j = 1; j <= d; ++j) {
      left[j] = x - knots_[static_cast<std::size_t>(mu + 1 - j)];
      right[j] = knots_[static_cast<std::size_t>(mu + j)] - x;
      double saved = 0.0;
      for (int r = 0; r < j; ++r) {
        const double temp = values[static_cast<std::size_t>(r)] / (right[r + 1] + left[j - r]);
        values[static_cast<std::size_t>(r)] = saved + right[r + 1] * temp;
        saved = left[j - r] * temp;
      }
      values[static_cast<std::size_t>(j)] = saved;
    }
    return mu - d;
  }

  Eigen::RowVectorXd row(double x, bool* clamped = nullptr) const {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(dimension());
    double v[16];
    const int first = eval_nonzero(x, std::span<double>(v, 16), clamped);
    for (int k = 0; k <= spec_.degree; ++k) r(first + k) = v[k];
    return r;
  }

  Eigen::MatrixXd design(std::span<const double> x, ClampCounter* clamps = nullptr) const {
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(x.size()), dimension());
    double v[16];
    for (std::size_t i = 0; i < x.size(); ++i) {
      bool c = false;
      const int first = eval_nonzero(x[i], std::span<double>(v, 16), &c);
      if (c && clamps) clamps->add();
      for (int k = 0; k <= spec_.degree; ++k) out(static_cast<Eigen::Index>(i), first + k) = v[k];
    }
    return out;
  }

  /// Greville abscissae: the coefficient vector of the identity function.
  Eigen::VectorXd greville() const {
    const int d = spec_.degree;
    Eigen::VectorXd g(dimension());
    for (int j = 0; j < dimension(); ++j) {
      double s = 0.0;
      if (d == 0) {
        s = 0.5 * (knots_[static_cast<std::size_t>(j)] + knots_[static_cast<std::size_t>(j + 1)]);
      } else {
        for (int k = 1; k <= d; ++k) s += knots_[static_cast<std::size_t>(j + k)];
        s /= d;
      }
      g(j) = s;
    }
    return g;
  }

  /// Difference operator D of the penalty DᵀD. Equidistant knots use plain
  /// r-th order differences. Quantile knots use divided differences over the
  /// Greville abscissae, rescaled to the mean spacing, so that coefficient
  /// vectors of polynomials of degree < r remain unpenalised.
  Eigen::MatrixXd penalty_root() const {
    const int J = dimension();
    const int r = spec_.penalty_order;
    if (spec_.knot_rule == KnotRule::equidistant) return difference_matrix(J, r);
    const Eigen::VectorXd g = greville();
    const double hbar = (g(J - 1) - g(0)) / (J - 1);
    Eigen::MatrixXd d = Eigen::MatrixXd::Identity(J, J);
    for (int k = 1; k <= r; ++k) {
      const Eigen::Index rows = d.rows() - 1;
      Eigen::MatrixXd next = d.bottomRows(rows) - d.topRows(rows);
      for (Eigen::Index j = 0; j < rows; ++j) next.row(j) *= k * hbar / (g(j + k) - g(j));
      d = std::move(next);
    }
    return d;
  }

  Eigen::MatrixXd penalty() const {
    const Eigen::MatrixXd d = penalty_root();
    return d.transpose() * d;
  }

 private:
  BasisSpec spec_;
  std::vector<double> knots_;
};

/// An evaluated design block together with its penalties and the constraint
/// transform that maps constrained coefficients back to basis coefficients.
struct BasisBlock {
  Eigen::MatrixXd design;
  std::vector<Eigen::MatrixXd> penalties;
  std::optional<Eigen::MatrixXd> null_penalty;
  std::string term_label;
  Eigen::MatrixXd constraint;  // J x J'
  std::size_t clamped = 0;

  Eigen::Index rank_of_penalty(std::size_t k, double tol = 1e-9) const;
};

namespace detail {

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) { return 0.5 * (m + m.transpose()); }

}  // namespace detail

/// Orthogonal projector onto the joint null space of the penalties, or
/// nothing when the penalties are jointly full rank.
inline std::optional<Eigen::MatrixXd> null_space_penalty(const std::vector<Eigen::MatrixXd>& penalties,
                                                         double tol = 1e-9) {
  if (penalties.empty()) return std::nullopt;
  Eigen::MatrixXd total = Eigen::MatrixXd::Zero(penalties.front().rows(), penalties.front().cols());
  for (const auto& p : penalties) {
    const double scale = p.cwiseAbs().maxCoeff();
    if (scale > 0.0) total += p / scale;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(detail::symmetrize(total));
  const double cut = tol * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  std::vector<Eigen::Index> zero;
  for (Eigen::Index k = 0; k < eig.eigenvalues().size(); ++k)
    if (eig.eigenvalues()(k) < cut) zero.push_back(k);
  if (zero.empty()) return std::nullopt;
  Eigen::MatrixXd u(total.rows(), static_cast<Eigen::Index>(zero.size()));
  for (std::size_t k = 0; k < zero.size(); ++k)
    u.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(zero[k]);
  return Eigen::MatrixXd(u * u.transpose());
}

inline Eigen::Index BasisBlock::rank_of_penalty(std::size_t k, double tol) const {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(penalties.at(k), Eigen::EigenvaluesOnly);
  const double cut = tol * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  return (eig.eigenvalues().array() > cut).count();
}

inline BasisBlock build_basis(std::span<const double> x, const BasisSpec& spec,
                              std::string label = "s") {
  if (x.empty()) throw Error(ErrorCode::invalid_input, "empty covariate vector");
  const BSplineBasis basis(spec, x);
  BasisBlock block;
  ClampCounter clamps;
  block.design = basis.design(x, &clamps);
  block.clamped = clamps.count;
  block.penalties.push_back(basis.penalty());
  block.null_penalty = null_space_penalty(block.penalties);
  block.term_label = std::move(label);
  block.constraint = Eigen::MatrixXd::Identity(basis.dimension(), basis.dimension());
  return block;
}

/// Row-wise Kronecker product: row i of the result is kron(a.row(i), b.row(i)).
inline Eigen::MatrixXd row_kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i, j * b.cols(), 1, b.cols()) = a(i, j) * b.row(i);
  return out;
}

inline Eigen::MatrixXd kronecker(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline BasisBlock build_tensor(std::span<const double> x1, std::span<const double> x2,
                               const TensorSpec& spec, std::string label = "te") {
  if (x1.size() != x2.size())
    throw Error(ErrorCode::invalid_input, "tensor margins have different lengths");
  validate(spec.margin1);
  validate(spec.margin2);
  const int j1 = spec.margin1.dimension;
  const int j2 = spec.margin2.dimension;
  if (j1 * j2 > spec.max_dimension)
    throw Error(ErrorCode::invalid_spec, "tensor dimension " + std::to_string(j1 * j2) +
                                             " exceeds maximum " + std::to_string(spec.max_dimension));
  const BasisBlock m1 = build_basis(x1, spec.margin1);
  const BasisBlock m2 = build_basis(x2, spec.margin2);
  BasisBlock block;
  block.design = row_kronecker(m1.design, m2.design);
  block.clamped = m1.clamped + m2.clamped;
  block.penalties.push_back(kronecker(m1.penalties[0], Eigen::MatrixXd::Identity(j2, j2)));
  block.penalties.push_back(kronecker(Eigen::MatrixXd::Identity(j1, j1), m2.penalties[0]));
  block.null_penalty = null_space_penalty(block.penalties);
  block.term_label = std::move(label);
  block.constraint = Eigen::MatrixXd::Identity(j1 * j2, j1 * j2);
  return block;
}

inline BasisBlock build_varying_coefficient(std::span<const double> u1, std::span<const double> u2,
                                            const BasisSpec& spec, std::string label = "vc") {
  if (u1.size() != u2.size())
    throw Error(ErrorCode::invalid_input, "varying-coefficient inputs have different lengths");
  BasisBlock block = build_basis(u2, spec, std::move(label));
  for (std::size_t i = 0; i < u1.size(); ++i) block.design.row(static_cast<Eigen::Index>(i)) *= u1[i];
  return block;
}

/// Orthonormal basis (J x J-1) of the complement of `c`.
inline Eigen::MatrixXd sum_to_zero_transform(const Eigen::VectorXd& c) {
  const Eigen::MatrixXd cm = c;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(cm);
  const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(c.size(), c.size());
  return q.rightCols(c.size() - 1);
}

inline BasisBlock apply_sum_to_zero(const BasisBlock& block) {
  const Eigen::VectorXd sums = block.design.colwise().sum().transpose();
  const Eigen::MatrixXd z = sum_to_zero_transform(sums);
  BasisBlock out;
  out.design = block.design * z;
  for (const auto& p : block.penalties) out.penalties.push_back(detail::symmetrize(z.transpose() * p * z));
  out.null_penalty = null_space_penalty(out.penalties);
  out.term_label = block.term_label;
  out.constraint = block.constraint * z;
  out.clamped = block.clamped;
  return out;
}

}  // namespace timeroc
