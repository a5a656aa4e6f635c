#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowmarket/rng.hpp"
#include "flowmarket/types.hpp"

namespace flowmarket {

// Convex minimization with a diagonal quadratic term:
//   minimize 0.5 * z' diag(curvature) z + linear' z + constant
//   subject to  eq_coeffs * z = eq_rhs
//               ineq_coeffs * z <= ineq_rhs
//               var_lower <= z <= var_upper   (entries may be +-inf)
// Empty bound vectors mean unbounded in that direction.
struct ConvexProgram {
  Vector curvature;
  Vector linear;
  double constant = 0.0;
  Matrix eq_coeffs;
  Vector eq_rhs;
  Matrix ineq_coeffs;
  Vector ineq_rhs;
  Vector var_lower;
  Vector var_upper;

  int var_count() const { return static_cast<int>(linear.size()); }
  int eq_count() const { return static_cast<int>(eq_rhs.size()); }
  int ineq_count() const { return static_cast<int>(ineq_rhs.size()); }

  static ConvexProgram zeros(int nv) {
    ConvexProgram p;
    p.curvature = Vector::Zero(nv);
    p.linear = Vector::Zero(nv);
    p.eq_coeffs = Matrix::Zero(0, nv);
    p.eq_rhs = Vector::Zero(0);
    p.ineq_coeffs = Matrix::Zero(0, nv);
    p.ineq_rhs = Vector::Zero(0);
    return p;
  }

  void validate() const {
    const int nv = var_count();
    if (nv <= 0) throw std::invalid_argument("ConvexProgram: need at least one variable");
    if (curvature.size() != nv)
      throw std::invalid_argument("ConvexProgram: curvature length mismatch");
    if ((curvature.array() < 0.0).any())
      throw std::invalid_argument("ConvexProgram: curvature must be entrywise nonnegative");
    if (eq_coeffs.rows() != eq_rhs.size() || (eq_coeffs.rows() > 0 && eq_coeffs.cols() != nv))
      throw std::invalid_argument("ConvexProgram: equality block shape mismatch");
    if (ineq_coeffs.rows() != ineq_rhs.size() ||
        (ineq_coeffs.rows() > 0 && ineq_coeffs.cols() != nv))
      throw std::invalid_argument("ConvexProgram: inequality block shape mismatch");
    if (var_lower.size() != 0 && var_lower.size() != nv)
      throw std::invalid_argument("ConvexProgram: lower bound length mismatch");
    if (var_upper.size() != 0 && var_upper.size() != nv)
      throw std::invalid_argument("ConvexProgram: upper bound length mismatch");
  }

  double objective(const Vector& z) const {
    return 0.5 * z.dot(curvature.cwiseProduct(z)) + linear.dot(z) + constant;
  }

  double lower_bound(int i) const {
    return var_lower.size() ? var_lower(i) : -std::numeric_limits<double>::infinity();
  }
  double upper_bound(int i) const {
    return var_upper.size() ? var_upper(i) : std::numeric_limits<double>::infinity();
  }
};

enum class SolveStatus { optimal, infeasible, unbounded, max_iter };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::max_iter: return "max_iter";
  }
  return "unknown";
}

// Max-norm KKT residual summary. dual_min is the smallest multiplier over all
// inequality and bound duals (0 when there are none).
struct KktResiduals {
  double stationarity = 0.0;
  double eq_violation = 0.0;
  double ineq_violation = 0.0;
  double comp_slack = 0.0;
  double dual_min = 0.0;

  double max_violation() const {
    return std::max({stationarity, eq_violation, ineq_violation, comp_slack, -dual_min});
  }
  bool within(double tol) const { return max_violation() <= tol; }
};

struct SolveReport {
  SolveStatus status = SolveStatus::max_iter;
  Vector primal;
  Vector dual_eq;
  Vector dual_ineq;
  Vector dual_lower;
  Vector dual_upper;
  double objective_value = 0.0;
  KktResiduals kkt;
  int iterations = 0;
};

// Residuals at a candidate primal/dual point. Bound multipliers are not part
// of the signature; they are reconstructed implicitly as the nonnegative
// values that minimize the stationarity residual (max(0, +-gradient) at
// coordinates carrying a bound), with the remainder charged to stationarity
// and their products charged to complementary slackness.
inline KktResiduals kkt_residuals(const ConvexProgram& p, const Vector& primal,
                                  const Vector& dual_eq, const Vector& dual_ineq) {
  p.validate();
  const int nv = p.var_count();
  if (primal.size() != nv) throw std::invalid_argument("kkt_residuals: primal length mismatch");
  if (dual_eq.size() != p.eq_count())
    throw std::invalid_argument("kkt_residuals: dual_eq length mismatch");
  if (dual_ineq.size() != p.ineq_count())
    throw std::invalid_argument("kkt_residuals: dual_ineq length mismatch");

  KktResiduals r;
  Vector grad = p.curvature.cwiseProduct(primal) + p.linear;
  if (p.eq_count() > 0) grad += p.eq_coeffs.transpose() * dual_eq;
  if (p.ineq_count() > 0) grad += p.ineq_coeffs.transpose() * dual_ineq;

  double dual_min = dual_ineq.size() ? dual_ineq.minCoeff() : 0.0;
  for (int i = 0; i < nv; ++i) {
    const double lo = p.lower_bound(i);
    const double hi = p.upper_bound(i);
    double g = grad(i);
    if (std::isfinite(lo) && g > 0.0) {
      r.comp_slack = std::max(r.comp_slack, std::abs(g * (primal(i) - lo)));
      g = 0.0;
    } else if (std::isfinite(hi) && g < 0.0) {
      r.comp_slack = std::max(r.comp_slack, std::abs(g * (hi - primal(i))));
      g = 0.0;
    }
    r.stationarity = std::max(r.stationarity, std::abs(g));
    if (std::isfinite(lo)) r.ineq_violation = std::max(r.ineq_violation, lo - primal(i));
    if (std::isfinite(hi)) r.ineq_violation = std::max(r.ineq_violation, primal(i) - hi);
  }
  if (p.eq_count() > 0)
    r.eq_violation = (p.eq_coeffs * primal - p.eq_rhs).cwiseAbs().maxCoeff();
  if (p.ineq_count() > 0) {
    const Vector slack = p.ineq_rhs - p.ineq_coeffs * primal;
    r.ineq_violation = std::max(r.ineq_violation, (-slack).maxCoeff());
    r.comp_slack =
        std::max(r.comp_slack, dual_ineq.cwiseProduct(slack).cwiseAbs().maxCoeff());
  }
  r.dual_min = dual_min;
  return r;
}

// Lagrangian dual objective estimate at the report's multipliers. Exact for
// coordinates with positive curvature; linear coordinates contribute their
// (near-zero at convergence) reduced cost times the primal value.
inline double dual_value(const ConvexProgram& p, const SolveReport& rep) {
  const int nv = p.var_count();
  Vector w = p.linear;
  double g = p.constant;
  if (p.eq_count() > 0) {
    w += p.eq_coeffs.transpose() * rep.dual_eq;
    g -= rep.dual_eq.dot(p.eq_rhs);
  }
  if (p.ineq_count() > 0) {
    w += p.ineq_coeffs.transpose() * rep.dual_ineq;
    g -= rep.dual_ineq.dot(p.ineq_rhs);
  }
  for (int i = 0; i < nv; ++i) {
    double wi = w(i);
    if (rep.dual_lower.size()) {
      wi -= rep.dual_lower(i);
      if (std::isfinite(p.lower_bound(i))) g += rep.dual_lower(i) * p.lower_bound(i);
    }
    if (rep.dual_upper.size()) {
      wi += rep.dual_upper(i);
      if (std::isfinite(p.upper_bound(i))) g -= rep.dual_upper(i) * p.upper_bound(i);
    }
    if (p.curvature(i) > 0.0)
      g -= wi * wi / (2.0 * p.curvature(i));
    else
      g += wi * rep.primal(i);
  }
  return g;
}

struct SolveOptions {
  double tol = 1e-8;
  int max_iter = 200;
  // Nonzero values perturb the starting point deterministically; used to
  // check that reported optima do not depend on the initial iterate.
  std::uint64_t start_jitter = 0;
};

namespace detail {

// Largest alpha in [0,1] with v + alpha*dv >= (1-damp)*v kept positive.
inline double step_length(const Vector& v, const Vector& dv, double damp) {
  double alpha = 1.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (dv(i) < 0.0) alpha = std::min(alpha, -damp * v(i) / dv(i));
  }
  return alpha;
}

}  // namespace detail

// Primal-dual interior-point solve (predictor-corrector). Bounds are folded
// into the inequality block internally; their multipliers are reported in
// dual_lower/dual_upper. status == optimal guarantees report.kkt.within(tol).
inline SolveReport solve(const ConvexProgram& p, const SolveOptions& opts) {
  p.validate();
  const int nv = p.var_count();
  const int ne = p.eq_count();
  const double inf = std::numeric_limits<double>::infinity();

  std::vector<int> lower_rows, upper_rows;
  for (int i = 0; i < nv; ++i) {
    if (std::isfinite(p.lower_bound(i))) lower_rows.push_back(i);
    if (std::isfinite(p.upper_bound(i))) upper_rows.push_back(i);
  }
  const int nq = p.ineq_count();
  const int ng = nq + static_cast<int>(lower_rows.size() + upper_rows.size());

  Matrix G(ng, nv);
  Vector h(ng);
  G.setZero();
  if (nq > 0) {
    G.topRows(nq) = p.ineq_coeffs;
    h.head(nq) = p.ineq_rhs;
  }
  int row = nq;
  for (int i : lower_rows) {
    G(row, i) = -1.0;
    h(row) = -p.lower_bound(i);
    ++row;
  }
  for (int i : upper_rows) {
    G(row, i) = 1.0;
    h(row) = p.upper_bound(i);
    ++row;
  }

  Vector z(nv);
  for (int i = 0; i < nv; ++i) {
    const double lo = p.lower_bound(i);
    const double hi = p.upper_bound(i);
    if (std::isfinite(lo) && std::isfinite(hi))
      z(i) = 0.5 * (lo + hi);
    else if (std::isfinite(lo))
      z(i) = lo + 1.0;
    else if (std::isfinite(hi))
      z(i) = hi - 1.0;
    else
      z(i) = 0.0;
  }
  if (opts.start_jitter != 0) {
    Rng jitter(derive_seed(opts.start_jitter, /*tag=*/0x6a697474ULL));
    for (int i = 0; i < nv; ++i) {
      double d = jitter.uniform(-0.1, 0.1);
      const double lo = p.lower_bound(i);
      const double hi = p.upper_bound(i);
      double cand = z(i) + d;
      if (std::isfinite(lo)) cand = std::max(cand, lo);
      if (std::isfinite(hi)) cand = std::min(cand, hi);
      z(i) = cand;
    }
  }

  Vector nu = Vector::Zero(ne);
  Vector s(ng), mu(ng);
  if (ng > 0) {
    const Vector gap = h - G * z;
    for (int k = 0; k < ng; ++k) s(k) = std::max(gap(k), 1.0);
    mu.setOnes();
  }

  auto make_report = [&](SolveStatus status, int iters) {
    SolveReport rep;
    rep.status = status;
    rep.primal = z;
    rep.dual_eq = nu;
    rep.dual_ineq = mu.head(nq);
    rep.dual_lower = Vector::Zero(nv);
    rep.dual_upper = Vector::Zero(nv);
    int r = nq;
    for (int i : lower_rows) rep.dual_lower(i) = mu(r++);
    for (int i : upper_rows) rep.dual_upper(i) = mu(r++);
    rep.objective_value = p.objective(z);
    rep.kkt = kkt_residuals(p, z, nu, rep.dual_ineq);
    rep.iterations = iters;
    return rep;
  };

  const double mu_target = 0.5 * opts.tol;
  double best_merit = std::numeric_limits<double>::max();
  int stall = 0;
  Vector best_z = z, best_nu = nu, best_s = s, best_mu = mu;

  for (int iter = 0; iter < opts.max_iter; ++iter) {
    Vector r_d = p.curvature.cwiseProduct(z) + p.linear;
    if (ne > 0) r_d += p.eq_coeffs.transpose() * nu;
    if (ng > 0) r_d += G.transpose() * mu;
    Vector r_p = ne > 0 ? Vector(p.eq_coeffs * z - p.eq_rhs) : Vector::Zero(0);
    Vector r_i = ng > 0 ? Vector(G * z + s - h) : Vector::Zero(0);

    const double primal_resid =
        std::max(ne > 0 ? r_p.cwiseAbs().maxCoeff() : 0.0,
                 ng > 0 ? r_i.cwiseAbs().maxCoeff() : 0.0);
    const double dual_resid = nv > 0 ? r_d.cwiseAbs().maxCoeff() : 0.0;
    const double mu_bar = ng > 0 ? mu.dot(s) / ng : 0.0;

    if (primal_resid <= opts.tol && dual_resid <= opts.tol && mu_bar <= mu_target) {
      SolveReport rep = make_report(SolveStatus::optimal, iter);
      if (rep.kkt.within(opts.tol)) return rep;
    }

    if (z.cwiseAbs().maxCoeff() > 1e12 || (ng > 0 && mu.cwiseAbs().maxCoeff() > 1e14)) {
      const bool primal_diverging = z.cwiseAbs().maxCoeff() > 1e12;
      return make_report(primal_diverging ? SolveStatus::unbounded : SolveStatus::infeasible,
                         iter);
    }

    const double merit = std::max({primal_resid, dual_resid, mu_bar});
    if (merit < best_merit - 1e-14 * (1.0 + best_merit)) {
      best_merit = merit;
      best_z = z;
      best_nu = nu;
      best_s = s;
      best_mu = mu;
      stall = 0;
    } else if (++stall > 30) {
      // Report the best iterate seen: late iterations can drift once the
      // complementarity products hit the floating-point floor.
      z = best_z;
      nu = best_nu;
      s = best_s;
      mu = best_mu;
      SolveReport rep = make_report(SolveStatus::max_iter, iter);
      if (rep.kkt.within(opts.tol)) {
        rep.status = SolveStatus::optimal;
      } else if (rep.kkt.eq_violation > std::max(1e3 * opts.tol, 1e-7) ||
                 rep.kkt.ineq_violation > std::max(1e3 * opts.tol, 1e-7)) {
        rep.status = SolveStatus::infeasible;
      } else if (rep.kkt.stationarity > std::max(1e3 * opts.tol, 1e-7)) {
        rep.status = SolveStatus::unbounded;
      }
      return rep;
    }

    Matrix kkt_mat = Matrix::Zero(nv + ne, nv + ne);
    Vector w = ng > 0 ? Vector(mu.cwiseQuotient(s)) : Vector::Zero(0);
    double delta = 1e-10;
    Eigen::PartialPivLU<Matrix> lu;
    for (int attempt = 0;; ++attempt) {
      kkt_mat.topLeftCorner(nv, nv) = p.curvature.asDiagonal();
      if (ng > 0)
        kkt_mat.topLeftCorner(nv, nv) += G.transpose() * w.asDiagonal() * G;
      kkt_mat.topLeftCorner(nv, nv).diagonal().array() += delta;
      if (ne > 0) {
        kkt_mat.topRightCorner(nv, ne) = p.eq_coeffs.transpose();
        kkt_mat.bottomLeftCorner(ne, nv) = p.eq_coeffs;
        kkt_mat.bottomRightCorner(ne, ne).diagonal().setConstant(-delta);
      }
      lu.compute(kkt_mat);
      const Vector probe = lu.solve(Vector::Ones(nv + ne));
      if (probe.allFinite() || attempt >= 3) break;
      delta *= 100.0;
    }

    auto solve_direction = [&](const Vector& r_c) {
      Vector rhs(nv + ne);
      Vector top = -r_d;
      if (ng > 0) top += G.transpose() * (r_c.cwiseQuotient(s) - w.cwiseProduct(r_i));
      rhs.head(nv) = top;
      if (ne > 0) rhs.tail(ne) = -r_p;
      // Two refinement passes: the active-set scaling in w makes the matrix
      // ill-conditioned near convergence and a single LU solve loses digits.
      Vector sol = lu.solve(rhs);
      sol += lu.solve(rhs - kkt_mat * sol);
      sol += lu.solve(rhs - kkt_mat * sol);
      struct Dir {
        Vector dz, dnu, ds, dmu;
      } d;
      d.dz = sol.head(nv);
      d.dnu = ne > 0 ? Vector(sol.tail(ne)) : Vector::Zero(0);
      if (ng > 0) {
        d.ds = -r_i - G * d.dz;
        d.dmu = -(r_c + mu.cwiseProduct(d.ds)).cwiseQuotient(s);
      } else {
        d.ds = Vector::Zero(0);
        d.dmu = Vector::Zero(0);
      }
      return d;
    };

    if (ng == 0) {
      const auto d = solve_direction(Vector::Zero(0));
      z += d.dz;
      nu += d.dnu;
      continue;
    }

    const Vector r_c_aff = mu.cwiseProduct(s);
    const auto aff = solve_direction(r_c_aff);
    const double alpha_p_aff = detail::step_length(s, aff.ds, 1.0);
    const double alpha_d_aff = detail::step_length(mu, aff.dmu, 1.0);
    const double mu_aff = (mu + alpha_d_aff * aff.dmu).dot(s + alpha_p_aff * aff.ds) / ng;
    double sigma = mu_bar > 0.0 ? std::pow(mu_aff / mu_bar, 3.0) : 0.0;
    sigma = std::clamp(sigma, 1e-8, 1.0);
    // Keep the complementarity level from collapsing to the floating-point
    // floor: below it the scaling matrix w breaks down and the dual iterate
    // loses accuracy. The floor sits two decades under the exit target.
    const double mu_floor = 0.01 * mu_target;
    if (mu_bar > 0.0) sigma = std::clamp(sigma, std::min(1.0, mu_floor / mu_bar), 1.0);

    const Vector r_c_cor =
        mu.cwiseProduct(s) + aff.dmu.cwiseProduct(aff.ds) -
        Vector::Constant(ng, sigma * mu_bar);
    const auto cor = solve_direction(r_c_cor);

    double damp = 0.99;
    if (mu_bar < 1e-4) damp = 0.999;
    if (mu_bar < 1e-7) damp = 0.99995;
    const double alpha_p = detail::step_length(s, cor.ds, damp);
    const double alpha_d = detail::step_length(mu, cor.dmu, damp);

    z += alpha_p * cor.dz;
    s += alpha_p * cor.ds;
    nu += alpha_d * cor.dnu;
    mu += alpha_d * cor.dmu;
    for (int k = 0; k < ng; ++k) {
      s(k) = std::max(s(k), 1e-300);
      mu(k) = std::max(mu(k), 1e-300);
    }
  }

  z = best_z;
  nu = best_nu;
  s = best_s;
  mu = best_mu;
  SolveReport rep = make_report(SolveStatus::max_iter, opts.max_iter);
  if (rep.kkt.within(opts.tol)) {
    rep.status = SolveStatus::optimal;
  } else if (rep.kkt.eq_violation > std::max(1e3 * opts.tol, 1e-7) ||
             rep.kkt.ineq_violation > std::max(1e3 * opts.tol, 1e-7)) {
    rep.status = SolveStatus::infeasible;
  }
  return rep;
}

inline SolveReport solve(const ConvexProgram& p, double tol = 1e-8, int max_iter = 200) {
  SolveOptions opts;
  opts.tol = tol;
  opts.max_iter = max_iter;
  return solve(p, opts);
}

struct BruteForceResult {
  Vector argmin;
  double value = 0.0;
  long long feasible_points = 0;
};

// Exhaustive grid minimization over the variable box, filtering equality
// constraints at feas_tol and inequalities at rhs + feas_tol. Intended as an
// independent oracle for small programs only.
inline BruteForceResult brute_force_qp(const ConvexProgram& p, double grid_step,
                                       double feas_tol = 1e-9) {
  p.validate();
  if (!(grid_step > 0.0)) throw std::invalid_argument("brute_force_qp: grid_step must be > 0");
  const int nv = p.var_count();
  if (nv > 6) throw std::invalid_argument("brute_force_qp: more than 6 variables");

  std::vector<std::vector<double>> axes(static_cast<std::size_t>(nv));
  double total = 1.0;
  for (int i = 0; i < nv; ++i) {
    const double lo = p.lower_bound(i);
    const double hi = p.upper_bound(i);
    if (!std::isfinite(lo) || !std::isfinite(hi))
      throw std::invalid_argument("brute_force_qp: every variable needs finite bounds");
    auto& axis = axes[static_cast<std::size_t>(i)];
    const long long steps = static_cast<long long>(std::floor((hi - lo) / grid_step + 1e-9));
    for (long long k = 0; k <= steps; ++k) axis.push_back(lo + static_cast<double>(k) * grid_step);
    if (axis.back() < hi - 1e-12) axis.push_back(hi);
    total *= static_cast<double>(axis.size());
  }
  if (total > 2e8) throw std::invalid_argument("brute_force_qp: grid too large");

  BruteForceResult best;
  best.value = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> idx(static_cast<std::size_t>(nv), 0);
  Vector z(nv);
  while (true) {
    for (int i = 0; i < nv; ++i) z(i) = axes[static_cast<std::size_t>(i)][idx[static_cast<std::size_t>(i)]];
    bool feasible = true;
    for (int r = 0; r < p.eq_count() && feasible; ++r)
      feasible = std::abs(p.eq_coeffs.row(r).dot(z) - p.eq_rhs(r)) <= feas_tol;
    for (int r = 0; r < p.ineq_count() && feasible; ++r)
      feasible = p.ineq_coeffs.row(r).dot(z) <= p.ineq_rhs(r) + feas_tol;
    if (feasible) {
      ++best.feasible_points;
      const double v = p.objective(z);
      if (v < best.value) {
        best.value = v;
        best.argmin = z;
      }
    }
    int i = 0;
    for (; i < nv; ++i) {
      auto& k = idx[static_cast<std::size_t>(i)];
      if (++k < axes[static_cast<std::size_t>(i)].size()) break;
      k = 0;
    }
    if (i == nv) break;
  }
  if (best.feasible_points == 0) throw std::runtime_error("brute_force_qp: empty feasible grid");
  return best;
}

struct MaxSlackResult {
  SolveStatus status = SolveStatus::max_iter;
  double slack = 0.0;
  Vector flow;
};

// Largest uniform margin t with A_eq*y = b_eq and t <= y_k <= upper_k - t.
// slack > 0 certifies a strictly interior flow; a balanced but oversized
// right-hand side comes back optimal with negative slack, while a right-hand
// side outside the column span reports infeasible.
inline MaxSlackResult max_slack_lp(const Matrix& A_eq, const Vector& b_eq, const Vector& upper,
                                   double tol = 1e-8, int max_iter = 200) {
  if (A_eq.rows() != b_eq.size())
    throw std::invalid_argument("max_slack_lp: equality block shape mismatch");
  if (A_eq.cols() != upper.size())
    throw std::invalid_argument("max_slack_lp: one upper bound per column required");
  if ((upper.array() <= 0.0).any())
    throw std::invalid_argument("max_slack_lp: upper bounds must be strictly positive");

  const int m = static_cast<int>(A_eq.cols());
  ConvexProgram p = ConvexProgram::zeros(m + 1);
  p.linear(m) = -1.0;
  p.eq_coeffs = Matrix::Zero(A_eq.rows(), m + 1);
  p.eq_coeffs.leftCols(m) = A_eq;
  p.eq_rhs = b_eq;
  p.ineq_coeffs = Matrix::Zero(2 * m, m + 1);
  p.ineq_rhs = Vector::Zero(2 * m);
  for (int k = 0; k < m; ++k) {
    p.ineq_coeffs(k, k) = -1.0;
    p.ineq_coeffs(k, m) = 1.0;
    p.ineq_rhs(k) = 0.0;
    p.ineq_coeffs(m + k, k) = 1.0;
    p.ineq_coeffs(m + k, m) = 1.0;
    p.ineq_rhs(m + k) = upper(k);
  }

  const SolveReport rep = solve(p, tol, max_iter);
  MaxSlackResult out;
  out.status = rep.status;
  if (rep.primal.size() == m + 1) {
    out.slack = rep.primal(m);
    out.flow = rep.primal.head(m);
  }
  return out;
}

}  // namespace flowmarket
