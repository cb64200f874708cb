// Entropic unbalanced optimal transport.
//
// Minimizes over T >= 0
//
//   <C, T> - eps * H(T) + rho_s * KL(T 1, w) + rho_t * KL(T^T 1, m)
//
// with H(T) = -sum T_ij (log T_ij - 1) and KL(a, b) = sum a log(a/b) - a + b,
// by generalized Sinkhorn scaling: K = exp(-C/eps), u = v = 1,
//
//   u <- (w / K v)^(rho_s / (rho_s + eps)),   v <- (m / K^T u)^(rho_t / (rho_t + eps)),
//
// and T = diag(u) K diag(v). Below `log_domain_below` the same iteration runs
// on log u, log v with log-sum-exp reductions.
//
// All reductions go through ordered_sum(), which sorts before accumulating.
// That makes every row and column sum independent of the order of its terms,
// so permuting sources (rows of C together with w) permutes T bit-exactly.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "condinsight/core.hpp"

namespace condinsight {

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

struct UotConfig {
  double epsilon = 0.05;
  double rho_source = 1.0;
  double rho_target = 1.0;
  int max_iter = 1000;
  double tol = 1e-9;
  double log_domain_below = 0.01;  // epsilon threshold for the log-domain path

  void validate() const {
    if (!(epsilon > 0)) throw Error(ErrorCode::ConfigError, "uot epsilon must be > 0");
    if (!(rho_source > 0) || !(rho_target > 0))
      throw Error(ErrorCode::ConfigError, "uot rho values must be > 0");
    if (max_iter < 1) throw Error(ErrorCode::ConfigError, "uot max_iter must be >= 1");
    if (!(tol > 0)) throw Error(ErrorCode::ConfigError, "uot tol must be > 0");
  }
};

template <typename Scalar>
struct TransportPlan {
  Mat<Scalar> matrix;
  Vec<Scalar> source_marginal;  // T 1
  Vec<Scalar> target_marginal;  // T^T 1
  Scalar objective = 0;
  int iterations = 0;
  bool converged = false;
};

/// Order-independent sum: terms are sorted ascending before accumulation.
template <typename Scalar>
Scalar ordered_sum(std::vector<Scalar>& terms) {
  std::sort(terms.begin(), terms.end());
  Scalar acc = 0;
  for (const Scalar& t : terms) acc += t;
  return acc;
}

template <typename Scalar>
Scalar ordered_log_sum_exp(std::vector<Scalar>& terms) {
  const Scalar hi = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(static_cast<double>(hi))) return hi;
  for (auto& t : terms) t = std::exp(t - hi);
  return hi + std::log(ordered_sum(terms));
}

/// Row sums (axis 0) or column sums (axis 1) through ordered_sum.
template <typename Derived>
Vec<typename Derived::Scalar> ordered_sums(const Eigen::MatrixBase<Derived>& a, int axis) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index outer = axis == 0 ? a.rows() : a.cols();
  const Eigen::Index inner = axis == 0 ? a.cols() : a.rows();
  Vec<Scalar> out(outer);
  std::vector<Scalar> buf(static_cast<std::size_t>(inner));
  for (Eigen::Index o = 0; o < outer; ++o) {
    for (Eigen::Index i = 0; i < inner; ++i)
      buf[static_cast<std::size_t>(i)] = axis == 0 ? a(o, i) : a(i, o);
    out(o) = ordered_sum(buf);
  }
  return out;
}

/// C(i, j) = ||sources.row(i) - targets.row(j)||^2, evaluated on the difference.
template <typename DerivedA, typename DerivedB>
Mat<typename DerivedA::Scalar> cost_matrix(const Eigen::MatrixBase<DerivedA>& sources,
                                           const Eigen::MatrixBase<DerivedB>& targets) {
  using Scalar = typename DerivedA::Scalar;
  if (sources.cols() != targets.cols())
    throw Error(ErrorCode::DimensionMismatch,
                "source dimension " + std::to_string(sources.cols()) + " vs target dimension " +
                    std::to_string(targets.cols()));
  Mat<Scalar> c(sources.rows(), targets.rows());
  for (Eigen::Index i = 0; i < sources.rows(); ++i)
    for (Eigen::Index j = 0; j < targets.rows(); ++j)
      c(i, j) = (sources.row(i) - targets.row(j)).squaredNorm();
  return c;
}

/// sum a log(a/b) - a + b with 0 log 0 = 0.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar kl_divergence(const Eigen::MatrixBase<DerivedA>& a,
                                        const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  std::vector<Scalar> terms(static_cast<std::size_t>(a.size()));
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Scalar ai = a(i), bi = b(i);
    terms[static_cast<std::size_t>(i)] = (ai > 0 ? ai * std::log(ai / bi) : Scalar(0)) - ai + bi;
  }
  return ordered_sum(terms);
}

/// -sum T (log T - 1) with 0 log 0 = 0.
template <typename Derived>
typename Derived::Scalar entropy(const Eigen::MatrixBase<Derived>& t) {
  using Scalar = typename Derived::Scalar;
  std::vector<Scalar> terms;
  terms.reserve(static_cast<std::size_t>(t.size()));
  for (Eigen::Index j = 0; j < t.cols(); ++j)
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      const Scalar x = t(i, j);
      terms.push_back(x > 0 ? -x * (std::log(x) - Scalar(1)) : Scalar(0));
    }
  return ordered_sum(terms);
}

template <typename DC, typename DT, typename DW, typename DM>
typename DC::Scalar uot_objective(const Eigen::MatrixBase<DC>& cost,
                                  const Eigen::MatrixBase<DT>& plan,
                                  const Eigen::MatrixBase<DW>& w, const Eigen::MatrixBase<DM>& m,
                                  const UotConfig& cfg) {
  using Scalar = typename DC::Scalar;
  std::vector<Scalar> inner;
  inner.reserve(static_cast<std::size_t>(cost.size()));
  for (Eigen::Index j = 0; j < cost.cols(); ++j)
    for (Eigen::Index i = 0; i < cost.rows(); ++i) inner.push_back(cost(i, j) * plan(i, j));
  const Scalar transport = ordered_sum(inner);
  return transport - Scalar(cfg.epsilon) * entropy(plan) +
         Scalar(cfg.rho_source) * kl_divergence(ordered_sums(plan, 0), w) +
         Scalar(cfg.rho_target) * kl_divergence(ordered_sums(plan, 1), m);
}

namespace detail {

template <typename Scalar>
void check_inputs(const Mat<Scalar>& c, const Vec<Scalar>& w, const Vec<Scalar>& m) {
  if (c.rows() != w.size() || c.cols() != m.size())
    throw Error(ErrorCode::DimensionMismatch,
                "cost is " + std::to_string(c.rows()) + "x" + std::to_string(c.cols()) +
                    " but masses have sizes " + std::to_string(w.size()) + " and " +
                    std::to_string(m.size()));
  if (c.size() == 0) throw Error(ErrorCode::EmptyInput, "empty cost matrix");
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (!std::isfinite(static_cast<double>(c.data()[i])))
      throw Error(ErrorCode::InvalidValue, "cost matrix has a non-finite entry");
  for (Eigen::Index i = 0; i < w.size(); ++i)
    if (!(w(i) > 0) || !std::isfinite(static_cast<double>(w(i))))
      throw Error(ErrorCode::NonPositiveMass, "source mass " + std::to_string(i) + " is not positive");
  for (Eigen::Index j = 0; j < m.size(); ++j)
    if (!(m(j) > 0) || !std::isfinite(static_cast<double>(m(j))))
      throw Error(ErrorCode::NonPositiveMass, "target mass " + std::to_string(j) + " is not positive");
}

template <typename Scalar>
Scalar max_abs_change(const Vec<Scalar>& a, const Vec<Scalar>& b) {
  Scalar worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const Scalar d = std::abs(a(i) - b(i));
    if (!(d <= worst)) worst = d;  // propagates NaN
  }
  return worst;
}

template <typename Scalar>
TransportPlan<Scalar> scale_log(const Mat<Scalar>& c, const Vec<Scalar>& w, const Vec<Scalar>& m,
                                const UotConfig& cfg);

template <typename Scalar>
TransportPlan<Scalar> scale_direct(const Mat<Scalar>& c, const Vec<Scalar>& w,
                                   const Vec<Scalar>& m, const UotConfig& cfg) {
  const Scalar eps(cfg.epsilon);
  const Scalar pow_u = Scalar(cfg.rho_source) / (Scalar(cfg.rho_source) + eps);
  const Scalar pow_v = Scalar(cfg.rho_target) / (Scalar(cfg.rho_target) + eps);
  // Scalar std::exp: Eigen's packet exp clamps large negative arguments instead
  // of underflowing, which would hide a degenerate kernel.
  const Mat<Scalar> kernel = c.unaryExpr([eps](Scalar x) { return Scalar(std::exp(-x / eps)); });

  const Vec<Scalar> row_mass = ordered_sums(kernel, 0);
  const Vec<Scalar> col_mass = ordered_sums(kernel, 1);
  for (Eigen::Index i = 0; i < row_mass.size(); ++i)
    if (!(row_mass(i) > 0))
      throw Error(ErrorCode::NumericalOverflow, "kernel row " + std::to_string(i) + " underflows to zero");
  for (Eigen::Index j = 0; j < col_mass.size(); ++j)
    if (!(col_mass(j) > 0))
      throw Error(ErrorCode::NumericalOverflow, "kernel column " + std::to_string(j) + " underflows to zero");

  Vec<Scalar> u = Vec<Scalar>::Ones(c.rows());
  Vec<Scalar> v = Vec<Scalar>::Ones(c.cols());
  TransportPlan<Scalar> plan;
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Vec<Scalar> u_prev = u, v_prev = v;
    const Mat<Scalar> scaled_cols = kernel * v.asDiagonal();
    const Vec<Scalar> kv = ordered_sums(scaled_cols, 0);
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = std::pow(w(i) / kv(i), pow_u);
    const Mat<Scalar> scaled_rows = u.asDiagonal() * kernel;
    const Vec<Scalar> ktu = ordered_sums(scaled_rows, 1);
    for (Eigen::Index j = 0; j < v.size(); ++j) v(j) = std::pow(m(j) / ktu(j), pow_v);
    plan.iterations = it;
    const Scalar change = std::max(max_abs_change(u, u_prev), max_abs_change(v, v_prev));
    // With unequal total masses the fixed point itself can lie outside the
    // floating-point range; the same recursion is then run on log u, log v.
    const bool representable = (u.array() > 0).all() && (v.array() > 0).all() &&
                               std::isfinite(static_cast<double>(u.maxCoeff())) &&
                               std::isfinite(static_cast<double>(v.maxCoeff()));
    if (!representable || !std::isfinite(static_cast<double>(change))) return scale_log(c, w, m, cfg);
    if (change < Scalar(cfg.tol)) {
      plan.converged = true;
      break;
    }
  }
  plan.matrix = u.asDiagonal() * kernel * v.asDiagonal();
  return plan;
}

template <typename Scalar>
TransportPlan<Scalar> scale_log(const Mat<Scalar>& c, const Vec<Scalar>& w, const Vec<Scalar>& m,
                                const UotConfig& cfg) {
  const Scalar eps(cfg.epsilon);
  const Scalar pow_u = Scalar(cfg.rho_source) / (Scalar(cfg.rho_source) + eps);
  const Scalar pow_v = Scalar(cfg.rho_target) / (Scalar(cfg.rho_target) + eps);
  const Mat<Scalar> log_kernel = -c / eps;
  const Vec<Scalar> log_w = w.array().log().matrix();
  const Vec<Scalar> log_m = m.array().log().matrix();
  const auto n = c.rows(), k = c.cols();

  Vec<Scalar> lu = Vec<Scalar>::Zero(n);
  Vec<Scalar> lv = Vec<Scalar>::Zero(k);
  std::vector<Scalar> row_buf(static_cast<std::size_t>(k)), col_buf(static_cast<std::size_t>(n));
  TransportPlan<Scalar> plan;
  // Convergence is measured on log u, log v: the scaling vectors themselves
  // leave double range at small epsilon.
  for (int it = 1; it <= cfg.max_iter; ++it) {
    const Vec<Scalar> lu_prev = lu, lv_prev = lv;
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < k; ++j) row_buf[static_cast<std::size_t>(j)] = log_kernel(i, j) + lv(j);
      lu(i) = pow_u * (log_w(i) - ordered_log_sum_exp(row_buf));
    }
    for (Eigen::Index j = 0; j < k; ++j) {
      for (Eigen::Index i = 0; i < n; ++i) col_buf[static_cast<std::size_t>(i)] = log_kernel(i, j) + lu(i);
      lv(j) = pow_v * (log_m(j) - ordered_log_sum_exp(col_buf));
    }
    plan.iterations = it;
    const Scalar change = std::max(max_abs_change(lu, lu_prev), max_abs_change(lv, lv_prev));
    if (!std::isfinite(static_cast<double>(change)))
      throw Error(ErrorCode::NumericalOverflow, "log scaling potentials diverged");
    if (change < Scalar(cfg.tol)) {
      plan.converged = true;
      break;
    }
  }
  plan.matrix.resize(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) plan.matrix(i, j) = std::exp(lu(i) + log_kernel(i, j) + lv(j));
  return plan;
}

}  // namespace detail

template <typename Scalar>
TransportPlan<Scalar> solve_uot(const Mat<Scalar>& cost, const Vec<Scalar>& w, const Vec<Scalar>& m,
                                const UotConfig& cfg) {
  cfg.validate();
  detail::check_inputs(cost, w, m);
  TransportPlan<Scalar> plan = cfg.epsilon < cfg.log_domain_below
                                   ? detail::scale_log(cost, w, m, cfg)
                                   : detail::scale_direct(cost, w, m, cfg);
  plan.source_marginal = ordered_sums(plan.matrix, 0);
  plan.target_marginal = ordered_sums(plan.matrix, 1);
  plan.objective = uot_objective(cost, plan.matrix, w, m, cfg);
  return plan;
}

}  // namespace condinsight
